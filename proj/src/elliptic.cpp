#include "gpforge/elliptic.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace gpforge {

double agm(double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0)) throw std::domain_error("agm: arguments must be non-negative");
  for (int it = 0; it < 64; ++it) {
    const double an = 0.5 * (a + b);
    const double bn = std::sqrt(a * b);
    a = an;
    b = bn;
    if (std::abs(a - b) <= 4.0 * std::numeric_limits<double>::epsilon() * a) break;
  }
  return 0.5 * (a + b);
}

double elliptic_K(double k) {
  if (!(k >= 0.0 && k < 1.0)) throw std::domain_error("elliptic_K: modulus must lie in [0, 1)");
  const double kc = std::sqrt((1.0 - k) * (1.0 + k));
  return std::numbers::pi / (2.0 * agm(1.0, kc));
}

double elliptic_K_complementary(double k) {
  if (!(k > 0.0 && k <= 1.0))
    throw std::domain_error("elliptic_K_complementary: modulus must lie in (0, 1]");
  return std::numbers::pi / (2.0 * agm(1.0, k));
}

JacobiValues jacobi_elliptic_complementary(double u, double kc) {
  if (!(kc > 0.0 && kc <= 1.0))
    throw std::domain_error("jacobi_elliptic: complementary modulus must lie in (0, 1]");
  constexpr int kMaxLevels = 40;
  std::array<double, kMaxLevels + 1> a{};
  std::array<double, kMaxLevels + 1> c{};
  a[0] = 1.0;
  double b = kc;
  c[0] = std::sqrt((1.0 - kc) * (1.0 + kc));
  int levels = 0;
  while (levels < kMaxLevels &&
         std::abs(c[levels]) > std::numeric_limits<double>::epsilon() * a[levels]) {
    const double an = 0.5 * (a[levels] + b);
    c[levels + 1] = 0.5 * (a[levels] - b);
    b = std::sqrt(a[levels] * b);
    a[levels + 1] = an;
    ++levels;
  }

  double phi = std::ldexp(a[levels] * u, levels);
  for (int n = levels; n >= 1; --n) phi = 0.5 * (phi + std::asin(c[n] / a[n] * std::sin(phi)));
  const double sn = std::sin(phi);
  const double cn = std::cos(phi);
  // dn^2 = 1 - k^2 sn^2 = cn^2 + kc^2 sn^2; the second form has no cancellation.
  return {sn, cn, std::sqrt(cn * cn + kc * kc * sn * sn)};
}

JacobiValues jacobi_elliptic(double u, double k) {
  if (!(k >= 0.0 && k < 1.0)) throw std::domain_error("jacobi_elliptic: modulus must lie in [0, 1)");
  return jacobi_elliptic_complementary(u, std::sqrt((1.0 - k) * (1.0 + k)));
}

CnDn jacobi_cn_dn(double t, double k) {
  const JacobiValues v = jacobi_elliptic(t, k);
  return {v.cn, v.dn};
}

}  // namespace gpforge

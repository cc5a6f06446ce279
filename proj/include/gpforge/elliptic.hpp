#pragma once

namespace gpforge {

/// Arithmetic-geometric mean of two non-negative reals.
double agm(double a, double b);

/// Complete elliptic integral of the first kind K(k), modulus 0 <= k < 1.
/// Throws std::domain_error outside that range.
double elliptic_K(double k);

/// K'(k) = K(sqrt(1 - k^2)) evaluated as pi / (2 agm(1, k)), which stays
/// accurate when k is tiny (the complementary modulus close to 1).
double elliptic_K_complementary(double k);

struct JacobiValues {
  double sn;
  double cn;
  double dn;
};

/// Jacobi sn, cn, dn at real argument u for modulus k, via the descending
/// Landen (AGM) scheme.
JacobiValues jacobi_elliptic(double u, double k);

/// Same, but parameterised by the complementary modulus kc = sqrt(1 - k^2).
/// Use when k is close to 1 and kc is known more accurately than k.
JacobiValues jacobi_elliptic_complementary(double u, double kc);

struct CnDn {
  double cn;
  double dn;
};

CnDn jacobi_cn_dn(double t, double k);

}  // namespace gpforge

#include "gpforge/rng.hpp"

#include <cmath>
#include <numbers>

namespace gpforge {

double NormalGenerator::uniform() noexcept {
  return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
}

double NormalGenerator::operator()() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

void NormalGenerator::fill(std::span<double> out) noexcept {
  for (double& v : out) v = (*this)();
}

Eigen::VectorXd NormalGenerator::vector(Eigen::Index n) {
  Eigen::VectorXd v(n);
  fill(std::span<double>(v.data(), static_cast<std::size_t>(n)));
  return v;
}

}  // namespace gpforge

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "gpforge/fidelity.hpp"
#include "gpforge/kernel.hpp"

namespace gpforge {

enum class Method { Exact, Rff, Ciq, CiqPreconditioned };

/// "exact", "rff", "ciq", "pciq".
std::string to_string(Method m);
/// Inverse of to_string; throws std::invalid_argument on unknown names.
Method parse_method(std::string_view name);

/// A noisy draw y from (an approximation of) the GP prior at fixed inputs.
struct GpSample {
  Eigen::VectorXd y;
  std::optional<Eigen::VectorXd> f;  // latent values before the final noise, when separable
  Method method = Method::Exact;
  KernelParams params;
  FidelitySpec fidelity;
  std::uint64_t seed = 0;
};

}  // namespace gpforge

#pragma once

#include <cstdint>
#include <optional>

#include "gpforge/kernel.hpp"

namespace gpforge {

/// Target total-variation budget plus the method-specific fidelity knobs.
struct FidelitySpec {
  double epsilon = 0.1;   // TV budget
  double delta = 0.05;    // RFF failure probability
  double delta_q = 0.0;   // quadrature error budget; 0 means "half the cap"
  double eta = 0.5;       // fraction of noise folded into the kernel for CIQ
  double c_tilde = 0.0;   // pseudo-constant absorbed by the iteration bounds
  std::optional<std::int64_t> num_features;  // D
  std::optional<int> quadrature_points;      // Q
  std::optional<int> iterations;             // J

  /// Basic range checks shared by all methods.
  void validate() const;

  /// Range checks plus the CIQ coupling delta_q < eps * sigma_xi * sqrt(1 - eta).
  /// Throws ConstraintError on violation.
  void validate_for_ciq(const KernelParams& params) const;
};

/// Upper limit on delta_q for a given TV budget.
double delta_q_cap(double epsilon, double eta, double sigma_xi2);

/// Builds a CIQ fidelity spec; delta_q defaults to half its cap. Rejects
/// specs that violate the coupling constraint.
FidelitySpec make_ciq_fidelity(double epsilon, double eta, const KernelParams& params,
                               std::optional<double> delta_q = std::nullopt,
                               double c_tilde = 0.0);

}  // namespace gpforge

#include "gpforge/fidelity.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gpforge/errors.hpp"

namespace gpforge {

void FidelitySpec::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1]");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1)");
  if (!(delta_q >= 0.0)) throw std::invalid_argument("delta_q must be >= 0");
  if (!std::isfinite(c_tilde)) throw std::invalid_argument("c_tilde must be finite");
  if (num_features && (*num_features < 2 || *num_features % 2 != 0))
    throw std::invalid_argument("number of features D must be even and >= 2");
  if (quadrature_points && *quadrature_points < 1)
    throw std::invalid_argument("quadrature points Q must be >= 1");
  if (iterations && *iterations < 1) throw std::invalid_argument("iterations J must be >= 1");
}

double delta_q_cap(double epsilon, double eta, double sigma_xi2) {
  return epsilon * std::sqrt(sigma_xi2) * std::sqrt(1.0 - eta);
}

void FidelitySpec::validate_for_ciq(const KernelParams& params) const {
  validate();
  const double cap = delta_q_cap(epsilon, eta, params.noise_variance);
  if (!(delta_q > 0.0 && delta_q < cap)) {
    std::ostringstream msg;
    msg << "delta_q = " << delta_q << " must lie in (0, eps*sigma_xi*sqrt(1-eta)) = (0, " << cap
        << ")";
    throw ConstraintError(msg.str());
  }
}

FidelitySpec make_ciq_fidelity(double epsilon, double eta, const KernelParams& params,
                               std::optional<double> delta_q, double c_tilde) {
  FidelitySpec spec;
  spec.epsilon = epsilon;
  spec.eta = eta;
  spec.c_tilde = c_tilde;
  spec.delta_q = delta_q.value_or(0.5 * delta_q_cap(epsilon, eta, params.noise_variance));
  spec.validate_for_ciq(params);
  return spec;
}

}  // namespace gpforge

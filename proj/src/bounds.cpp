#include "gpforge/bounds.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "gpforge/errors.hpp"
#include "gpforge/exact.hpp"

namespace gpforge {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::invalid_argument(std::string(name) + " must be positive and finite");
}

double quadrature_gap(double eta, double sigma_xi2, double epsilon, double delta_q) {
  const double cap = epsilon * std::sqrt(sigma_xi2) * std::sqrt(1.0 - eta);
  if (!(delta_q > 0.0) || !(delta_q < cap)) {
    std::ostringstream msg;
    msg << "delta_q = " << delta_q << " must lie in (0, " << cap << ")";
    throw ConstraintError(msg.str());
  }
  return cap - delta_q;
}

}  // namespace

std::int64_t rff_min_features(double n, double epsilon, double delta, double sigma_xi2,
                              RffBoundForm form) {
  require_positive(n, "n");
  require_positive(epsilon, "epsilon");
  require_positive(sigma_xi2, "sigma_xi^2");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  const double log_term = std::log(n / std::sqrt(delta));
  const double s4 = sigma_xi2 * sigma_xi2;
  const double bound = form == RffBoundForm::AsPrinted
                           ? 8.0 * log_term * n * n / (8.0 * epsilon * epsilon * s4)
                           : log_term * n * n / (epsilon * epsilon * s4);
  auto d = static_cast<std::int64_t>(std::ceil(bound));
  if (d < 2) d = 2;
  if (d % 2 != 0) ++d;
  return d;
}

double rff_elementwise_budget(double n, double epsilon, double sigma_xi2) {
  require_positive(n, "n");
  return std::sqrt(8.0) * sigma_xi2 * epsilon / n;
}

int ciq_min_quadrature(double n, double eta, double sigma_xi2, double delta_q) {
  require_positive(n, "n");
  require_positive(eta, "eta");
  require_positive(sigma_xi2, "sigma_xi^2");
  if (!(delta_q > 0.0 && delta_q < 1.0))
    throw std::invalid_argument("delta_q must lie in (0, 1) so that -log(delta_q) > 0");
  const double q = (std::log(n / (eta * sigma_xi2)) + 3.0) * (-std::log(delta_q)) /
                   (2.0 * std::numbers::pi * std::numbers::pi);
  return std::max(1, static_cast<int>(std::ceil(q)));
}

double ciq_iterations_value(double n, double eta, double sigma_xi2, double epsilon,
                            double delta_q, int num_quadrature) {
  require_positive(n, "n");
  require_positive(eta, "eta");
  require_positive(sigma_xi2, "sigma_xi^2");
  if (num_quadrature < 1) throw std::invalid_argument("Q must be >= 1");
  const double gap = quadrature_gap(eta, sigma_xi2, epsilon, delta_q);
  const double lambda_n = eta * sigma_xi2;
  const double kappa = n / lambda_n + 1.0;
  const double root = std::sqrt(kappa);
  // log((r - 1)/(r + 1)) written to stay accurate as kappa -> 1.
  const double log_ratio = std::log1p(-2.0 / (root + 1.0));
  const double arg = std::numbers::pi * gap /
                     (2.0 * num_quadrature * std::sqrt(lambda_n) * kappa * std::sqrt(n) *
                      std::log(5.0 * root));
  return 1.0 + std::log(arg) / log_ratio;
}

int ciq_min_iterations(double n, double eta, double sigma_xi2, double epsilon, double delta_q,
                       int num_quadrature) {
  const double j = ciq_iterations_value(n, eta, sigma_xi2, epsilon, delta_q, num_quadrature);
  if (!std::isfinite(j)) return 1;
  return std::max(1, static_cast<int>(std::ceil(j)));
}

double ciq_iterations_asymptotic(double n, double eta, double sigma_xi2, double epsilon,
                                 double delta_q) {
  const double gap = quadrature_gap(eta, sigma_xi2, epsilon, delta_q);
  const double sigma_xi = std::sqrt(sigma_xi2);
  return std::sqrt(n) / (std::sqrt(eta) * sigma_xi) * std::log(n / (sigma_xi * gap));
}

int precond_min_iterations(double lambda_kp1, double n, double eta, double sigma_xi2,
                           double epsilon, double delta_q, double c_tilde) {
  if (!(lambda_kp1 >= 0.0)) throw std::invalid_argument("lambda_{k+1} must be >= 0");
  require_positive(n, "n");
  require_positive(eta, "eta");
  require_positive(sigma_xi2, "sigma_xi^2");
  const double gap = quadrature_gap(eta, sigma_xi2, epsilon, delta_q);
  const double prefactor =
      std::sqrt(lambda_kp1) * std::pow(n, 3.0 / 8.0) / (std::sqrt(eta) * std::sqrt(sigma_xi2));
  const double j = 1.0 + prefactor * (1.25 * std::log(n) - std::log(gap) + c_tilde);
  return std::max(1, static_cast<int>(std::ceil(j)));
}

void DecayModel::validate() const {
  require_positive(c1, "c1");
  require_positive(c2, "c2");
  require_positive(sigma_f, "sigma_f");
  if (dim < 1) throw std::invalid_argument("decay model dimension must be >= 1");
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::ModerateN: return "i";
    case Regime::LargerN: return "ii";
    case Regime::Asymptotic: return "iii";
  }
  return "?";
}

DecayRegimeResult decay_regime(double n, const DecayModel& model, const IterationBudget& budget) {
  model.validate();
  require_positive(n, "n");
  const double log_n = std::log(n);
  DecayRegimeResult out;
  out.gamma = 0.875 * log_n - 0.5 * model.c1 * std::pow(n, 1.0 / model.dim);
  if (out.gamma >= 1.0) {
    out.regime = Regime::ModerateN;
  } else if (out.gamma >= 0.0) {
    out.regime = Regime::LargerN;
  } else {
    out.regime = Regime::Asymptotic;
  }

  const double delta_q =
      budget.delta_q > 0.0
          ? budget.delta_q
          : 0.5 * budget.epsilon * std::sqrt(budget.sigma_xi2) * std::sqrt(1.0 - budget.eta);
  const double gap = quadrature_gap(budget.eta, budget.sigma_xi2, budget.epsilon, delta_q);
  const double lead =
      std::sqrt(model.c2 * model.sigma_f) / (std::sqrt(budget.eta) * std::sqrt(budget.sigma_xi2));
  const double tail = -std::log(gap) + budget.c_tilde;
  switch (out.regime) {
    case Regime::ModerateN:
      out.iterations = 1.0 + lead * std::pow(n, 7.0 / 8.0) * (1.25 * log_n + tail);
      break;
    case Regime::LargerN:
      out.iterations = 1.0 + lead * (31.0 / 32.0 * log_n * log_n + 1.25 * log_n + tail);
      break;
    case Regime::Asymptotic:
      // sqrt(lambda_k) n^{3/8} log n <= sqrt(c2 sigma_f) once gamma < 0.
      out.iterations = 1.0 + lead * (1.25 + tail / log_n);
      break;
  }
  return out;
}

double belkin_lambda_bound(double k, double n, const DecayModel& model) {
  model.validate();
  if (!(k >= 1.0)) throw std::invalid_argument("belkin_lambda_bound: k must be >= 1");
  return n * model.sigma_f * model.c2 * std::exp(-model.c1 * std::pow(k, 1.0 / model.dim));
}

double condition_number_bound(double n, double eta, double sigma_xi2, double sigma_f2) {
  require_positive(n, "n");
  require_positive(eta, "eta");
  require_positive(sigma_xi2, "sigma_xi^2");
  if (!(sigma_f2 >= 0.0)) throw std::invalid_argument("sigma_f^2 must be >= 0");
  return n * sigma_f2 / (eta * sigma_xi2) + 1.0;
}

CiqErrorBound ciq_error_bound(int num_quadrature, int iterations, double kappa, double lambda_n,
                              double norm_u) {
  if (num_quadrature < 1 || iterations < 1) throw std::invalid_argument("Q and J must be >= 1");
  if (!(kappa >= 1.0)) throw std::invalid_argument("kappa must be >= 1");
  if (!(lambda_n > 0.0)) throw std::invalid_argument("lambda_n must be > 0");
  const double pi = std::numbers::pi;
  const double root = std::sqrt(kappa);
  CiqErrorBound out{};
  out.eps_q = std::exp(-2.0 * num_quadrature * pi * pi / (std::log(kappa) + 3.0));
  const double ratio = (root - 1.0) / (root + 1.0);
  out.b_term = 2.0 * num_quadrature * std::log(5.0 * root) * kappa * std::sqrt(lambda_n) / pi *
               std::pow(ratio, iterations - 1);
  out.total = out.eps_q + out.b_term * norm_u;
  return out;
}

double kl_gaussian_marginal(const Eigen::Ref<const Eigen::MatrixXd>& K_hat,
                            const Eigen::Ref<const Eigen::MatrixXd>& K) {
  if (K_hat.rows() != K.rows() || K_hat.cols() != K.cols() || K.rows() != K.cols())
    throw std::invalid_argument("kl_gaussian_marginal: matrices must be square and equal size");
  const Eigen::MatrixXd L = cholesky_factor(K);
  const Eigen::MatrixXd L_hat = cholesky_factor(K_hat);
  // tr(K^{-1} K_hat) = |L^{-1} L_hat|_F^2
  const Eigen::MatrixXd M = L.triangularView<Eigen::Lower>().solve(L_hat);
  const double trace = M.squaredNorm();
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  const double logdet_hat = 2.0 * L_hat.diagonal().array().log().sum();
  const double n = static_cast<double>(K.rows());
  return std::max(0.0, 0.5 * (trace - n + logdet - logdet_hat));
}

double kl_frobenius_bound(double e_frobenius, double sigma_xi2) {
  if (!(e_frobenius >= 0.0)) throw std::invalid_argument("Frobenius norm must be >= 0");
  require_positive(sigma_xi2, "sigma_xi^2");
  return e_frobenius * e_frobenius / (4.0 * sigma_xi2 * sigma_xi2);
}

double tv_from_kl(double kl) {
  if (!(kl >= 0.0)) throw std::invalid_argument("KL divergence must be >= 0");
  return std::min(1.0, std::sqrt(0.5 * kl));
}

ErrorRates error_rate_bounds(double tv) {
  if (!(tv >= 0.0 && tv <= 1.0)) throw std::invalid_argument("TV distance must lie in [0, 1]");
  return {0.5 - 0.5 * tv, 0.5 + 0.5 * tv};
}

double indistinguishability_epsilon(double tv) {
  if (!(tv >= 0.0 && tv <= 1.0)) throw std::invalid_argument("TV distance must lie in [0, 1]");
  return 0.5 * tv;
}

double chi_mean(double n) {
  if (!(n >= 1.0)) throw std::invalid_argument("chi_mean: n must be >= 1");
  return std::sqrt(2.0) * std::exp(std::lgamma(0.5 * (n + 1.0)) - std::lgamma(0.5 * n));
}

}  // namespace gpforge

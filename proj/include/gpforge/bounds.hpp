#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace gpforge {

// ---------------------------------------------------------------------------
// Sufficient fidelity parameters
// ---------------------------------------------------------------------------

enum class RffBoundForm {
  AsPrinted,   // 8 log(n / sqrt(delta)) n^2 / (8 eps^2 sigma_xi^4)
  Simplified,  // log(n / sqrt(delta)) n^2 / (eps^2 sigma_xi^4)
};

/// Smallest even D meeting the RFF sufficiency bound.
std::int64_t rff_min_features(double n, double epsilon, double delta, double sigma_xi2,
                              RffBoundForm form = RffBoundForm::AsPrinted);

/// Element-wise budget |Z Z^T - K|_ij < eps'/n behind the RFF bound, where
/// eps' = sqrt(8) sigma_xi^2 eps is the Frobenius budget that yields TV < eps.
double rff_elementwise_budget(double n, double epsilon, double sigma_xi2);

/// Smallest integer Q >= (log(n / (eta sigma_xi^2)) + 3)(-log delta_q) / (2 pi^2).
int ciq_min_quadrature(double n, double eta, double sigma_xi2, double delta_q);

/// Real-valued right-hand side of the msMINRES iteration bound, with
/// kappa = n / (eta sigma_xi^2) + 1 and lambda_n = eta sigma_xi^2.
double ciq_iterations_value(double n, double eta, double sigma_xi2, double epsilon,
                            double delta_q, int num_quadrature);

/// ceil(ciq_iterations_value), at least 1. Throws ConstraintError when
/// delta_q >= eps sigma_xi sqrt(1 - eta).
int ciq_min_iterations(double n, double eta, double sigma_xi2, double epsilon, double delta_q,
                       int num_quadrature);

/// Leading-order form sqrt(n)/(sqrt(eta) sigma_xi) log(n / (sigma_xi (eps sigma_xi sqrt(1-eta) - delta_q))).
double ciq_iterations_asymptotic(double n, double eta, double sigma_xi2, double epsilon,
                                 double delta_q);

/// Iteration bound with a rank-floor(sqrt n) Nystrom preconditioner:
/// 1 + sqrt(lambda_{k+1}) n^{3/8} / (sqrt(eta) sigma_xi) * (5/4 log n - log(gap) + c_tilde),
/// gap = eps sigma_xi sqrt(1 - eta) - delta_q, rounded up.
int precond_min_iterations(double lambda_kp1, double n, double eta, double sigma_xi2,
                           double epsilon, double delta_q, double c_tilde = 0.0);

// ---------------------------------------------------------------------------
// Eigenvalue decay regimes
// ---------------------------------------------------------------------------

struct DecayModel {
  double c1 = 1.0;
  double c2 = 1.0;
  double sigma_f = 1.0;
  int dim = 1;

  void validate() const;
};

enum class Regime { ModerateN = 1, LargerN = 2, Asymptotic = 3 };

/// "i", "ii", "iii".
std::string to_string(Regime r);

struct IterationBudget {
  double eta = 0.5;
  double sigma_xi2 = 0.1;
  double epsilon = 0.1;
  double delta_q = 0.0;  // 0 means half the cap
  double c_tilde = 0.0;
};

struct DecayRegimeResult {
  double gamma = 0.0;
  Regime regime = Regime::ModerateN;
  double iterations = 0.0;  // concrete J estimate for the regime
};

/// gamma = 7/8 log n - c1/2 n^{1/d}. gamma > 1 -> i, (0, 1) -> ii, < 0 -> iii;
/// the boundary values 1 and 0 go to the larger-J neighbour.
DecayRegimeResult decay_regime(double n, const DecayModel& model, const IterationBudget& budget);

/// n sigma_f c2 exp(-c1 k^{1/d}).
double belkin_lambda_bound(double k, double n, const DecayModel& model);

// ---------------------------------------------------------------------------
// Condition numbers and CIQ error
// ---------------------------------------------------------------------------

/// n sigma_f^2 / (eta sigma_xi^2) + 1.
double condition_number_bound(double n, double eta, double sigma_xi2, double sigma_f2);

struct CiqErrorBound {
  double eps_q;
  double b_term;
  double total;
};

/// eps_Q = exp(-2 Q pi^2 / (log kappa + 3)),
/// B = 2 Q log(5 sqrt kappa) kappa sqrt(lambda_n) / pi * ((sqrt kappa - 1)/(sqrt kappa + 1))^{J-1},
/// total = eps_Q + B |u|.
CiqErrorBound ciq_error_bound(int num_quadrature, int iterations, double kappa, double lambda_n,
                              double norm_u);

// ---------------------------------------------------------------------------
// Divergences and indistinguishability
// ---------------------------------------------------------------------------

/// KL(N(0, K_hat) || N(0, K)) = 1/2 (tr(K^{-1} K_hat) - n + log|K| - log|K_hat|).
double kl_gaussian_marginal(const Eigen::Ref<const Eigen::MatrixXd>& K_hat,
                            const Eigen::Ref<const Eigen::MatrixXd>& K);

/// |E|_F^2 / (4 sigma_xi^4).
double kl_frobenius_bound(double e_frobenius, double sigma_xi2);

/// Pinsker: min(1, sqrt(kl / 2)).
double tv_from_kl(double kl);

struct ErrorRates {
  double min_rate;
  double max_rate;
};

/// (1/2 - tv/2, 1/2 + tv/2).
ErrorRates error_rate_bounds(double tv);

/// tv / 2.
double indistinguishability_epsilon(double tv);

/// E|u|_2 for u ~ N(0, I_n): sqrt(2) Gamma((n+1)/2) / Gamma(n/2).
double chi_mean(double n);

}  // namespace gpforge

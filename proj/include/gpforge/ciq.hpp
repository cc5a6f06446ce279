#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gpforge/gp_sample.hpp"
#include "gpforge/kernel.hpp"
#include "gpforge/precond.hpp"

namespace gpforge {

/// Real-shift form of the elliptic contour quadrature for a^{1/2}:
///   a^{1/2} ~= sum_q weights[q] * a / (shifts[q] + a),   a in [lambda_min, lambda_max].
struct QuadratureScheme {
  int num_points = 0;
  std::vector<double> shifts;
  std::vector<double> weights;
  double lambda_min = 0.0;
  double lambda_max = 0.0;

  /// sum_q w_q / (s_q + a), approximating a^{-1/2}.
  double inverse_sqrt(double a) const;
  /// a * inverse_sqrt(a), approximating a^{1/2}.
  double sqrt(double a) const;
};

/// Midpoint rule in the elliptic variable u in (0, K'), with
/// k^2 = lambda_min / lambda_max and the substitution t = sqrt(lambda_min) sc(u | 1 - k^2)
/// applied to a^{-1/2} = (2/pi) int_0^inf dt / (t^2 + a).
QuadratureScheme build_quadrature(double lambda_min, double lambda_max, int num_points);

struct SolveReport {
  int iterations_run = 0;
  std::vector<double> residual_norms;     // final relative residual per shift
  std::vector<bool> converged;            // per shift, residual <= tol
  std::vector<int> shift_iterations;      // iterations spent on each shift
  std::vector<std::vector<double>> residual_history;  // [iteration][shift]
  bool breakdown = false;                 // Krylov space became invariant

  bool all_converged() const;
  double max_residual() const;
};

struct ShiftedSolveResult {
  std::vector<Eigen::VectorXd> solutions;
  SolveReport report;
};

using MatVec = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Approximate (shift_q I + K)^{-1} u for every shift.
///
/// Without a preconditioner this runs multi-shift MINRES: one Lanczos basis
/// shared by all shifts, one product with K per iteration. With a Nystrom
/// preconditioner the shifted systems no longer share a Krylov space, so each
/// shift gets its own preconditioned CG solve using (K~ + (noise + shift) I)^{-1}.
ShiftedSolveResult shifted_solve_operator(const MatVec& K, const std::vector<double>& shifts,
                                          const Eigen::Ref<const Eigen::VectorXd>& u, int max_iterations,
                                          double tol, const NystromPreconditioner* precond = nullptr);

ShiftedSolveResult shifted_solve(const Eigen::Ref<const Eigen::MatrixXd>& K,
                                 const std::vector<double>& shifts,
                                 const Eigen::Ref<const Eigen::VectorXd>& u, int max_iterations,
                                 double tol, const NystromPreconditioner* precond = nullptr);

struct CiqOptions {
  int quadrature_points = 8;
  int max_iterations = 32;
  double tol = 1e-10;
  const NystromPreconditioner* precond = nullptr;
  /// Overrides the analytic envelope [jitter, trace - (n-1) jitter].
  std::optional<std::pair<double, double>> spectrum;
};

struct CiqResult {
  Eigen::VectorXd value;
  SolveReport report;
  QuadratureScheme scheme;
};

/// Spectral envelope used when no override is given: lambda_min = jitter,
/// lambda_max = trace(K) - (n - 1) jitter (= n sigma_f^2 + jitter for RBF).
std::pair<double, double> spectral_envelope(const GramMatrix& K);

/// f ~= K^{1/2} u.
CiqResult ciq_sqrt_mv(const GramMatrix& K, const Eigen::Ref<const Eigen::VectorXd>& u,
                      const CiqOptions& options);

struct CiqSampleOptions {
  double eta = 0.5;
  int quadrature_points = 8;
  int max_iterations = 32;
  double tol = 1e-10;
  bool precondition = false;
  Eigen::Index precond_rank = 0;  // 0 means floor(sqrt n)
};

struct CiqSampleResult {
  GpSample sample;
  SolveReport report;
};

/// Partially noisy kernel K + eta sigma_xi^2 I, CIQ square-root product on
/// latent normals, then the remaining (1 - eta) sigma_xi^2 noise added i.i.d.
CiqSampleResult ciq_sample(const InputData& inputs, const KernelParams& params,
                           const CiqSampleOptions& options, std::uint64_t seed);

}  // namespace gpforge

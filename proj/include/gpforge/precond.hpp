#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gpforge/kernel.hpp"

namespace gpforge {

/// Rank-k Nystrom approximation K~ = F F^T of the noise-free part of a Gram
/// matrix, built by greedy pivoted partial Cholesky, together with the
/// noise level used when inverting K~ + noise I.
class NystromPreconditioner {
 public:
  /// Solves with (F F^T + diag I) for one fixed diagonal through Woodbury.
  class ShiftedInverse {
   public:
    ShiftedInverse(const NystromPreconditioner& parent, double diag);
    Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& v) const;
    double diag() const { return diag_; }

   private:
    const NystromPreconditioner* parent_;
    double diag_;
    Eigen::LLT<Eigen::MatrixXd> core_;
  };

  NystromPreconditioner(Eigen::MatrixXd factor, std::vector<Eigen::Index> pivots, double noise,
                        Eigen::VectorXd residual_diagonal);

  Eigen::Index rank() const { return factor_.cols(); }
  Eigen::Index size() const { return factor_.rows(); }
  const Eigen::MatrixXd& factor() const { return factor_; }
  const std::vector<Eigen::Index>& pivots() const { return pivots_; }
  double noise() const { return noise_; }
  /// diag(K - noise I - F F^T) after the last pivot.
  const Eigen::VectorXd& residual_diagonal() const { return residual_diagonal_; }

  Eigen::MatrixXd approximation() const { return factor_ * factor_.transpose(); }

  /// (F F^T + noise I)^{-1} v.
  Eigen::VectorXd apply_inverse(const Eigen::Ref<const Eigen::VectorXd>& v) const;

  /// Inverse for K~ + (noise + shift) I, used by the shifted solves.
  ShiftedInverse shifted_inverse(double shift) const { return ShiftedInverse(*this, noise_ + shift); }

 private:
  Eigen::MatrixXd factor_;
  Eigen::MatrixXd gram_of_factor_;  // F^T F
  std::vector<Eigen::Index> pivots_;
  double noise_;
  Eigen::VectorXd residual_diagonal_;
};

/// Default rank floor(sqrt(n)).
Eigen::Index default_nystrom_rank(Eigen::Index n);

/// Pivoted partial Cholesky of K - K.jitter I with greedy maximum-residual
/// pivoting. Stops early if the residual diagonal is exhausted.
NystromPreconditioner nystrom_factor(const GramMatrix& K, Eigen::Index rank);

/// 1 + 2 lambda_{k+1} sqrt(4k(n-k)+1) / (eta sigma_xi^2).
double preconditioned_condition_bound(double lambda_kp1, Eigen::Index n, double eta,
                                      double sigma_xi2, Eigen::Index k);

/// 1 + 4 lambda_{k+1} n^{3/4} / (eta sigma_xi^2), the k = floor(sqrt n) relaxation.
double preconditioned_condition_bound_simplified(double lambda_kp1, Eigen::Index n, double eta,
                                                 double sigma_xi2);

/// ||I - P K||_2 with P = (K~ + noise I)^{-1}, by power iteration on
/// (I - P K)^T (I - P K).
double preconditioner_deviation(const GramMatrix& K, const NystromPreconditioner& P,
                                std::uint64_t seed, int max_iterations = 200,
                                double rel_tol = 1e-7);

struct SweepRow {
  Eigen::Index n;
  double lengthscale;
  double metric;
};

/// For every (n, l): inputs from sample_inputs(n, params, derive(seed, n)),
/// Gram with jitter eta sigma_xi^2, rank floor(sqrt n) (or `rank` when
/// positive) preconditioner, and the deviation metric above.
std::vector<SweepRow> effectiveness_sweep(const std::vector<Eigen::Index>& n_list,
                                          const std::vector<double>& lengthscales,
                                          const KernelParams& params_base, double eta,
                                          std::uint64_t seed, Eigen::Index rank = 0);

}  // namespace gpforge

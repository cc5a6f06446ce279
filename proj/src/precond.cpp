#include "gpforge/precond.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gpforge/rng.hpp"

namespace gpforge {

NystromPreconditioner::ShiftedInverse::ShiftedInverse(const NystromPreconditioner& parent,
                                                      double diag)
    : parent_(&parent), diag_(diag) {
  if (!(diag > 0.0)) throw std::invalid_argument("Nystrom inverse requires a positive diagonal");
  const Eigen::Index k = parent.rank();
  Eigen::MatrixXd core = parent.gram_of_factor_;
  core.diagonal().array() += diag;
  core_.compute(core);
  if (k > 0 && core_.info() != Eigen::Success)
    throw std::runtime_error("Nystrom inverse: singular core matrix");
}

Eigen::VectorXd NystromPreconditioner::ShiftedInverse::apply(
    const Eigen::Ref<const Eigen::VectorXd>& v) const {
  const Eigen::MatrixXd& F = parent_->factor_;
  if (v.size() != F.rows()) throw std::invalid_argument("Nystrom inverse: size mismatch");
  if (F.cols() == 0) return v / diag_;
  const Eigen::VectorXd t = core_.solve(F.transpose() * v);
  return (v - F * t) / diag_;
}

NystromPreconditioner::NystromPreconditioner(Eigen::MatrixXd factor,
                                             std::vector<Eigen::Index> pivots, double noise,
                                             Eigen::VectorXd residual_diagonal)
    : factor_(std::move(factor)),
      gram_of_factor_(factor_.transpose() * factor_),
      pivots_(std::move(pivots)),
      noise_(noise),
      residual_diagonal_(std::move(residual_diagonal)) {}

Eigen::VectorXd NystromPreconditioner::apply_inverse(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  return ShiftedInverse(*this, noise_).apply(v);
}

Eigen::Index default_nystrom_rank(Eigen::Index n) {
  auto k = static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(n))));
  while ((k + 1) * (k + 1) <= n) ++k;
  while (k * k > n) --k;
  return std::max<Eigen::Index>(k, 1);
}

NystromPreconditioner nystrom_factor(const GramMatrix& K, Eigen::Index rank) {
  const Eigen::Index n = K.size();
  if (rank < 1) throw std::invalid_argument("nystrom_factor: rank must be >= 1");
  if (rank > n)
    throw std::invalid_argument("nystrom_factor: rank " + std::to_string(rank) +
                                " exceeds matrix size " + std::to_string(n));

  Eigen::VectorXd residual = K.entries.diagonal().array() - K.jitter;
  const double trace = residual.sum();
  const double floor = 1e-14 * std::max(trace, 1e-300);
  Eigen::MatrixXd F(n, rank);
  std::vector<Eigen::Index> pivots;
  pivots.reserve(static_cast<std::size_t>(rank));

  Eigen::Index step = 0;
  for (; step < rank; ++step) {
    Eigen::Index pivot = 0;
    const double best = residual.maxCoeff(&pivot);
    if (!(best > floor)) break;
    Eigen::VectorXd col = K.entries.col(pivot);
    col(pivot) -= K.jitter;
    if (step > 0) col.noalias() -= F.leftCols(step) * F.row(pivot).head(step).transpose();
    col /= std::sqrt(best);
    F.col(step) = col;
    residual.array() -= col.array().square();
    residual(pivot) = 0.0;
    residual = residual.cwiseMax(0.0);
    pivots.push_back(pivot);
  }
  F.conservativeResize(n, step);
  return NystromPreconditioner(std::move(F), std::move(pivots), K.jitter, std::move(residual));
}

double preconditioned_condition_bound(double lambda_kp1, Eigen::Index n, double eta,
                                      double sigma_xi2, Eigen::Index k) {
  if (lambda_kp1 < 0.0) throw std::invalid_argument("lambda_{k+1} must be >= 0");
  const double nk = 4.0 * static_cast<double>(k) * static_cast<double>(n - k) + 1.0;
  return 1.0 + 2.0 * lambda_kp1 * std::sqrt(nk) / (eta * sigma_xi2);
}

double preconditioned_condition_bound_simplified(double lambda_kp1, Eigen::Index n, double eta,
                                                 double sigma_xi2) {
  if (lambda_kp1 < 0.0) throw std::invalid_argument("lambda_{k+1} must be >= 0");
  return 1.0 + 4.0 * lambda_kp1 * std::pow(static_cast<double>(n), 0.75) / (eta * sigma_xi2);
}

double preconditioner_deviation(const GramMatrix& K, const NystromPreconditioner& P,
                                std::uint64_t seed, int max_iterations, double rel_tol) {
  const Eigen::Index n = K.size();
  NormalGenerator gen(derive_seed(seed, Stream::Experiment));
  Eigen::VectorXd v = gen.vector(n);
  v.normalize();
  const auto inv = P.shifted_inverse(0.0);
  // M = I - P K, M^T = I - K P.
  auto apply_m = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return x - inv.apply(K.entries * x);
  };
  auto apply_mt = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return x - K.entries * inv.apply(x);
  };
  double estimate = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd w = apply_mt(apply_m(v));
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double next = std::sqrt(norm);
    v = w / norm;
    if (it > 0 && std::abs(next - estimate) <= rel_tol * next) return next;
    estimate = next;
  }
  return estimate;
}

std::vector<SweepRow> effectiveness_sweep(const std::vector<Eigen::Index>& n_list,
                                          const std::vector<double>& lengthscales,
                                          const KernelParams& params_base, double eta,
                                          std::uint64_t seed, Eigen::Index rank) {
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("effectiveness_sweep: eta in (0, 1]");
  std::vector<SweepRow> rows;
  rows.reserve(n_list.size() * lengthscales.size());
  for (const Eigen::Index n : n_list) {
    const std::uint64_t cell_seed = derive_seed(seed, static_cast<std::uint64_t>(n));
    const InputData inputs = sample_inputs(n, params_base, cell_seed);
    const Eigen::Index k = rank > 0 ? std::min(rank, n) : default_nystrom_rank(n);
    for (const double l : lengthscales) {
      KernelParams params = params_base;
      params.lengthscale = l;
      const GramMatrix K = gram(inputs, params, eta * params.noise_variance);
      const NystromPreconditioner P = nystrom_factor(K, k);
      rows.push_back({n, l, preconditioner_deviation(K, P, cell_seed)});
    }
  }
  return rows;
}

}  // namespace gpforge

#include "gpforge/exact.hpp"

#include <cmath>
#include <stdexcept>

#include "gpforge/errors.hpp"
#include "gpforge/rng.hpp"

namespace gpforge {

namespace {

// Unblocked left-looking factorization; only reached when the blocked
// factorization fails, to report which pivot went non-positive.
[[noreturn]] void locate_failing_pivot(const Eigen::Ref<const Eigen::MatrixXd>& K) {
  const Eigen::Index n = K.rows();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d = K(j, j) - L.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) throw FactorizationError(j, d);
    L(j, j) = std::sqrt(d);
    const Eigen::Index m = n - j - 1;
    if (m > 0) {
      L.col(j).tail(m) =
          (K.col(j).tail(m) - L.block(j + 1, 0, m, j) * L.row(j).head(j).transpose()) / L(j, j);
    }
  }
  // Blocked and unblocked disagree only at round-off level on the boundary.
  throw FactorizationError(n - 1, 0.0);
}

}  // namespace

Eigen::MatrixXd cholesky_factor(const Eigen::Ref<const Eigen::MatrixXd>& K) {
  if (K.rows() != K.cols()) throw std::invalid_argument("cholesky_factor: matrix must be square");
  if (K.rows() == 0) throw std::invalid_argument("cholesky_factor: empty matrix");
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) locate_failing_pivot(K);
  Eigen::MatrixXd L = llt.matrixL();
  if (!L.diagonal().allFinite() || (L.diagonal().array() <= 0.0).any()) locate_failing_pivot(K);
  return L;
}

Eigen::MatrixXd cholesky_factor(const GramMatrix& K) { return cholesky_factor(K.entries); }

GpSample exact_sample(const InputData& inputs, const KernelParams& params, std::uint64_t seed) {
  const GramMatrix K = gram(inputs, params, params.noise_variance);
  const Eigen::MatrixXd L = cholesky_factor(K);
  NormalGenerator gen(derive_seed(seed, Stream::Latent));
  const Eigen::VectorXd u = gen.vector(inputs.size());

  GpSample out;
  out.y = L.triangularView<Eigen::Lower>() * u;
  out.method = Method::Exact;
  out.params = params;
  out.seed = seed;
  return out;
}

Eigen::VectorXd whiten_with_factor(const Eigen::Ref<const Eigen::VectorXd>& y,
                                   const Eigen::Ref<const Eigen::MatrixXd>& lower) {
  if (y.size() != lower.rows())
    throw std::invalid_argument("whiten: sample length does not match covariance size");
  return lower.triangularView<Eigen::Lower>().solve(y);
}

Eigen::VectorXd whiten(const Eigen::Ref<const Eigen::VectorXd>& y, const GramMatrix& K_xi) {
  return whiten_with_factor(y, cholesky_factor(K_xi));
}

}  // namespace gpforge

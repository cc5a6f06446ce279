#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "gpforge/gp_sample.hpp"
#include "gpforge/kernel.hpp"

namespace gpforge {

/// Lower-triangular L with L L^T = K. Throws FactorizationError naming the
/// first non-positive pivot.
Eigen::MatrixXd cholesky_factor(const Eigen::Ref<const Eigen::MatrixXd>& K);
Eigen::MatrixXd cholesky_factor(const GramMatrix& K);

/// Exact O(n^3) draw y = L u, L the Cholesky factor of K + sigma_xi^2 I and
/// u the `Stream::Latent` normals of `seed`.
GpSample exact_sample(const InputData& inputs, const KernelParams& params, std::uint64_t seed);

/// z = L^{-1} y for K_xi = L L^T.
Eigen::VectorXd whiten(const Eigen::Ref<const Eigen::VectorXd>& y, const GramMatrix& K_xi);

/// Same as `whiten`, reusing a factor from `cholesky_factor`.
Eigen::VectorXd whiten_with_factor(const Eigen::Ref<const Eigen::VectorXd>& y,
                                   const Eigen::Ref<const Eigen::MatrixXd>& lower);

}  // namespace gpforge

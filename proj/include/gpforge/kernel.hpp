#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

namespace gpforge {

/// Hyperparameters of an isotropic RBF Gaussian process with additive noise.
struct KernelParams {
  double variance = 1.0;        // sigma_f^2, kernel scale
  double lengthscale = 1.0;     // l
  double noise_variance = 0.1;  // sigma_xi^2
  int dim = 1;                  // input dimension d

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;

  double sigma_f() const;
  double sigma_xi() const;
};

/// Input locations, one row per point.
struct InputData {
  Eigen::MatrixXd points;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
};

/// Dense kernel matrix with `jitter` already added to the diagonal.
struct GramMatrix {
  Eigen::MatrixXd entries;
  double jitter = 0.0;

  Eigen::Index size() const { return entries.rows(); }
};

/// sigma_f^2 exp(-|x - x'|^2 / (2 l^2)).
double rbf(const Eigen::Ref<const Eigen::VectorXd>& x,
           const Eigen::Ref<const Eigen::VectorXd>& x_prime, const KernelParams& params);

/// n i.i.d. draws from Normal(0, I_d / d), filled row by row from the
/// `Stream::Inputs` stream of `seed`.
InputData sample_inputs(Eigen::Index n, const KernelParams& params, std::uint64_t seed);

/// Draws one input row from an already-positioned inputs generator. Shared by
/// `sample_inputs` and the streaming RFF sampler so both see identical points.
class NormalGenerator;
void draw_input_row(NormalGenerator& gen, const KernelParams& params, std::span<double> row);

GramMatrix gram(const InputData& inputs, const KernelParams& params, double jitter);
GramMatrix gram(const Eigen::Ref<const Eigen::MatrixXd>& points, const KernelParams& params,
                double jitter);

}  // namespace gpforge

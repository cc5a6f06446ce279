#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "gpforge/gp_sample.hpp"
#include "gpforge/kernel.hpp"

namespace gpforge {

/// Spectral frequencies of the RBF kernel, one row per sin/cos pair.
struct FrequencyMatrix {
  Eigen::MatrixXd omegas;  // (D/2) x d
  std::uint64_t seed = 0;

  std::int64_t num_features() const { return 2 * static_cast<std::int64_t>(omegas.rows()); }
};

/// Row j is drawn from its own stream derive_seed(seed, Frequencies, j), so a
/// single row can be regenerated without materialising the others.
FrequencyMatrix sample_frequencies(std::int64_t num_features, const KernelParams& params,
                                   std::uint64_t seed);

/// sqrt(2/D) (sin w_0.x, cos w_0.x, sin w_1.x, cos w_1.x, ...), normalised so
/// that z(x).z(x) = 1.
Eigen::VectorXd feature_map(const Eigen::Ref<const Eigen::VectorXd>& x, const FrequencyMatrix& freqs);

/// Z with rows feature_map(x_i).
Eigen::MatrixXd feature_matrix(const Eigen::Ref<const Eigen::MatrixXd>& points,
                               const FrequencyMatrix& freqs);

/// y = sigma_f Z w + xi with w ~ N(0, I_D), xi ~ N(0, sigma_xi^2 I).
GpSample rff_sample(const InputData& inputs, const KernelParams& params, std::int64_t num_features,
                    std::uint64_t seed);

using SampleSink = std::function<void(std::size_t index, double value)>;

/// Memory-light variant: draws x_i, regenerates each frequency and weight
/// from its seed, and hands y_i to `sink` one element at a time. Emits the
/// same values as rff_sample(sample_inputs(n, params, seed), params, D, seed).
/// An exception thrown by the sink is rethrown as StreamingError.
void rff_sample_streaming(Eigen::Index n, const KernelParams& params, std::int64_t num_features,
                          std::uint64_t seed, const SampleSink& sink);

}  // namespace gpforge

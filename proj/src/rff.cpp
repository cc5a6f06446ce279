#include "gpforge/rff.hpp"

#include <cmath>
#include <exception>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpforge/errors.hpp"
#include "gpforge/rng.hpp"

namespace gpforge {

namespace {

void check_num_features(std::int64_t num_features) {
  if (num_features < 2 || num_features % 2 != 0)
    throw std::invalid_argument("number of features D must be even and >= 2, got " +
                                std::to_string(num_features));
}

void draw_frequency(const KernelParams& params, std::uint64_t seed, std::int64_t j,
                    std::span<double> omega) {
  NormalGenerator gen(derive_seed(seed, Stream::Frequencies, static_cast<std::uint64_t>(j)));
  const double inv_l = 1.0 / params.lengthscale;
  for (double& v : omega) v = inv_l * gen();
}

struct WeightPair {
  double sin_weight;
  double cos_weight;
};

WeightPair draw_weights(std::uint64_t seed, std::int64_t j) {
  NormalGenerator gen(derive_seed(seed, Stream::Weights, static_cast<std::uint64_t>(j)));
  const double a = gen();
  const double b = gen();
  return {a, b};
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Both the batch and streaming paths accumulate the latent value through this
// function so they agree bit for bit.
double accumulate_pair(double acc, double scale, double phase, WeightPair w) {
  return acc + scale * (std::sin(phase) * w.sin_weight + std::cos(phase) * w.cos_weight);
}

double finish_element(double latent, double noise, const KernelParams& params) {
  return params.sigma_f() * latent + params.sigma_xi() * noise;
}

}  // namespace

FrequencyMatrix sample_frequencies(std::int64_t num_features, const KernelParams& params,
                                   std::uint64_t seed) {
  params.validate();
  check_num_features(num_features);
  FrequencyMatrix out;
  out.seed = seed;
  const std::int64_t pairs = num_features / 2;
  out.omegas.resize(pairs, params.dim);
  std::vector<double> row(static_cast<std::size_t>(params.dim));
  for (std::int64_t j = 0; j < pairs; ++j) {
    draw_frequency(params, seed, j, row);
    for (int k = 0; k < params.dim; ++k) out.omegas(j, k) = row[static_cast<std::size_t>(k)];
  }
  return out;
}

Eigen::VectorXd feature_map(const Eigen::Ref<const Eigen::VectorXd>& x, const FrequencyMatrix& freqs) {
  if (x.size() != freqs.omegas.cols())
    throw std::invalid_argument("feature_map: input has length " + std::to_string(x.size()) +
                                " but frequencies have dimension " +
                                std::to_string(freqs.omegas.cols()));
  const Eigen::Index pairs = freqs.omegas.rows();
  const double scale = std::sqrt(2.0 / static_cast<double>(2 * pairs));
  Eigen::VectorXd z(2 * pairs);
  for (Eigen::Index j = 0; j < pairs; ++j) {
    const double phase = freqs.omegas.row(j).dot(x.transpose());
    z(2 * j) = scale * std::sin(phase);
    z(2 * j + 1) = scale * std::cos(phase);
  }
  return z;
}

Eigen::MatrixXd feature_matrix(const Eigen::Ref<const Eigen::MatrixXd>& points,
                               const FrequencyMatrix& freqs) {
  Eigen::MatrixXd Z(points.rows(), freqs.num_features());
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    Z.row(i) = feature_map(points.row(i).transpose(), freqs).transpose();
  return Z;
}

GpSample rff_sample(const InputData& inputs, const KernelParams& params, std::int64_t num_features,
                    std::uint64_t seed) {
  params.validate();
  check_num_features(num_features);
  if (inputs.dim() != params.dim)
    throw std::invalid_argument("rff_sample: input dimension does not match params.dim");

  const std::int64_t pairs = num_features / 2;
  const auto d = static_cast<std::size_t>(params.dim);
  std::vector<double> omegas(static_cast<std::size_t>(pairs) * d);
  std::vector<WeightPair> weights(static_cast<std::size_t>(pairs));
  for (std::int64_t j = 0; j < pairs; ++j) {
    draw_frequency(params, seed, j, std::span<double>(omegas).subspan(static_cast<std::size_t>(j) * d, d));
    weights[static_cast<std::size_t>(j)] = draw_weights(seed, j);
  }

  const Eigen::Index n = inputs.size();
  const double scale = std::sqrt(2.0 / static_cast<double>(num_features));
  NormalGenerator noise(derive_seed(seed, Stream::Noise));
  std::vector<double> x(d);

  GpSample out;
  out.y.resize(n);
  Eigen::VectorXd f(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) x[k] = inputs.points(i, static_cast<Eigen::Index>(k));
    double latent = 0.0;
    for (std::int64_t j = 0; j < pairs; ++j) {
      const auto omega = std::span<const double>(omegas).subspan(static_cast<std::size_t>(j) * d, d);
      latent = accumulate_pair(latent, scale, dot(omega, x), weights[static_cast<std::size_t>(j)]);
    }
    f(i) = params.sigma_f() * latent;
    out.y(i) = finish_element(latent, noise(), params);
  }
  out.f = std::move(f);
  out.method = Method::Rff;
  out.params = params;
  out.fidelity.num_features = num_features;
  out.seed = seed;
  return out;
}

void rff_sample_streaming(Eigen::Index n, const KernelParams& params, std::int64_t num_features,
                          std::uint64_t seed, const SampleSink& sink) {
  params.validate();
  check_num_features(num_features);
  if (n < 1) throw std::invalid_argument("rff_sample_streaming: n must be >= 1");

  const std::int64_t pairs = num_features / 2;
  const auto d = static_cast<std::size_t>(params.dim);
  const double scale = std::sqrt(2.0 / static_cast<double>(num_features));
  NormalGenerator inputs(derive_seed(seed, Stream::Inputs));
  NormalGenerator noise(derive_seed(seed, Stream::Noise));
  std::vector<double> x(d);
  std::vector<double> omega(d);

  for (Eigen::Index i = 0; i < n; ++i) {
    draw_input_row(inputs, params, x);
    double latent = 0.0;
    for (std::int64_t j = 0; j < pairs; ++j) {
      draw_frequency(params, seed, j, omega);
      latent = accumulate_pair(latent, scale, dot(omega, x), draw_weights(seed, j));
    }
    const double y = finish_element(latent, noise(), params);
    try {
      sink(static_cast<std::size_t>(i), y);
    } catch (const std::exception& e) {
      throw StreamingError(static_cast<std::size_t>(i), e.what());
    } catch (...) {
      throw StreamingError(static_cast<std::size_t>(i), "unknown sink failure");
    }
  }
}

}  // namespace gpforge

#include "gpforge/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpforge/rng.hpp"

namespace gpforge {

void KernelParams::validate() const {
  if (!(variance >= 0.0) || !std::isfinite(variance))
    throw std::invalid_argument("kernel variance must be finite and >= 0");
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
    throw std::invalid_argument("lengthscale must be finite and > 0");
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
    throw std::invalid_argument("noise variance must be finite and > 0");
  if (dim < 1) throw std::invalid_argument("input dimension must be >= 1");
}

double KernelParams::sigma_f() const { return std::sqrt(variance); }
double KernelParams::sigma_xi() const { return std::sqrt(noise_variance); }

double rbf(const Eigen::Ref<const Eigen::VectorXd>& x,
           const Eigen::Ref<const Eigen::VectorXd>& x_prime, const KernelParams& params) {
  if (x.size() != params.dim || x_prime.size() != params.dim)
    throw std::invalid_argument("rbf: expected vectors of length " + std::to_string(params.dim) +
                                ", got " + std::to_string(x.size()) + " and " +
                                std::to_string(x_prime.size()));
  const double sq = std::max(0.0, x.squaredNorm() + x_prime.squaredNorm() - 2.0 * x.dot(x_prime));
  return params.variance * std::exp(-sq / (2.0 * params.lengthscale * params.lengthscale));
}

void draw_input_row(NormalGenerator& gen, const KernelParams& params, std::span<double> row) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.dim));
  for (double& v : row) v = scale * gen();
}

InputData sample_inputs(Eigen::Index n, const KernelParams& params, std::uint64_t seed) {
  params.validate();
  if (n < 1) throw std::invalid_argument("sample_inputs: n must be >= 1");
  InputData out;
  out.seed = seed;
  out.points.resize(n, params.dim);
  NormalGenerator gen(derive_seed(seed, Stream::Inputs));
  std::vector<double> row(static_cast<std::size_t>(params.dim));
  for (Eigen::Index i = 0; i < n; ++i) {
    draw_input_row(gen, params, row);
    for (int j = 0; j < params.dim; ++j) out.points(i, j) = row[static_cast<std::size_t>(j)];
  }
  return out;
}

GramMatrix gram(const Eigen::Ref<const Eigen::MatrixXd>& points, const KernelParams& params,
                double jitter) {
  params.validate();
  if (!(jitter >= 0.0)) throw std::invalid_argument("gram: jitter must be >= 0");
  if (points.cols() != params.dim)
    throw std::invalid_argument("gram: input dimension " + std::to_string(points.cols()) +
                                " does not match params.dim " + std::to_string(params.dim));
  if (points.rows() < 1) throw std::invalid_argument("gram: need at least one point");
  if (!points.allFinite()) throw std::invalid_argument("gram: non-finite input");

  const Eigen::Index n = points.rows();
  const double inv_two_l2 = 1.0 / (2.0 * params.lengthscale * params.lengthscale);
  const Eigen::VectorXd sq_norms = points.rowwise().squaredNorm();
  Eigen::MatrixXd cross = points * points.transpose();

  GramMatrix out;
  out.jitter = jitter;
  out.entries.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out.entries(j, j) = params.variance + jitter;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double sq = std::max(0.0, sq_norms(i) + sq_norms(j) - 2.0 * cross(i, j));
      const double k = params.variance * std::exp(-sq * inv_two_l2);
      out.entries(i, j) = k;
      out.entries(j, i) = k;
    }
  }
  return out;
}

GramMatrix gram(const InputData& inputs, const KernelParams& params, double jitter) {
  return gram(inputs.points, params, jitter);
}

}  // namespace gpforge

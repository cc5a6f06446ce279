#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gpforge/gp_sample.hpp"
#include "gpforge/kernel.hpp"

namespace gpforge {

/// Standard normal CDF.
double normal_cdf(double z);

struct CvmResult {
  double statistic = 0.0;
  double alpha = 0.05;
  double critical_value = 0.0;
  bool reject = false;
};

/// Cramer-von Mises W^2 against a fully specified standard normal.
double cvm_statistic(const Eigen::Ref<const Eigen::VectorXd>& z);

/// Asymptotic critical value; alpha must be 0.10, 0.05 or 0.01.
double cvm_critical_value(double alpha);

CvmResult cvm_test(const Eigen::Ref<const Eigen::VectorXd>& z, double alpha);

struct Interval {
  double low;
  double high;
};

/// Normal-approximation interval rate +- z sqrt(rate (1 - rate) / N), clamped to [0, 1].
Interval binomial_ci(double rate, std::int64_t trials, double level = 0.95);

/// How the fidelity grid is read for the approximate samplers.
enum class GridScale {
  Absolute,  // D or J as given
  Fraction,  // multiples of the rescaler n^2 log n, sqrt(n) log n or n^{3/8} log n
};

/// The x-axis rescaler of a method at size n. Exact has none and returns 1.
double fidelity_rescaler(Method method, double n);

struct ExperimentConfig {
  Method method = Method::Exact;
  std::vector<Eigen::Index> n_list{64};
  KernelParams params;
  std::vector<double> fidelity_grid{0.0};
  GridScale grid_scale = GridScale::Absolute;
  double eta = 0.5;
  double alpha = 0.05;
  std::int64_t repeats = 100;
  std::uint64_t base_seed = 0;
  double epsilon = 0.1;                    // TV budget used to pick Q for CIQ
  std::optional<int> quadrature_points;    // overrides the Q bound
  double tol = 1e-10;
  Eigen::Index precond_rank = 0;           // 0 means floor(sqrt n)
  bool baseline = false;                   // also run the Cholesky band per n
  unsigned threads = 0;                    // 0 means hardware concurrency

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct ExperimentCell {
  Eigen::Index n = 0;
  double fidelity = 0.0;        // grid value as configured
  double parameter = 0.0;       // resolved D or J actually used (0 for exact)
  double rescaled = 0.0;        // parameter / rescaler(n)
  int quadrature_points = 0;    // Q used by CIQ cells
  double rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::int64_t repeats = 0;
  bool failed = false;
  std::string error;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ExperimentCell> cells;
  std::vector<ExperimentCell> baseline;  // exact cells, one per n, when requested
  std::optional<Interval> baseline_range;
};

/// Quadrature size used for CIQ cells: the override if set, otherwise the
/// bound with delta_q at half its cap.
int experiment_quadrature_points(const ExperimentConfig& config, Eigen::Index n);

/// Draws one sample for a cell. `parameter` is D for RFF and J for CIQ.
GpSample draw_method_sample(const ExperimentConfig& config, const InputData& inputs,
                            double parameter, int quadrature_points, std::uint64_t seed);

/// For every (n, fidelity) cell, repeats: fresh inputs, draw, whiten with the
/// true noisy Gram matrix, CvM test. Repeat r of cell c is seeded from
/// derive_seed(base_seed, Experiment, c, r), so the report does not depend on
/// thread count or completion order.
ExperimentReport rejection_rate_experiment(const ExperimentConfig& config);

}  // namespace gpforge

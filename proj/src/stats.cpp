#include "gpforge/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "gpforge/bounds.hpp"
#include "gpforge/ciq.hpp"
#include "gpforge/exact.hpp"
#include "gpforge/fidelity.hpp"
#include "gpforge/rff.hpp"
#include "gpforge/rng.hpp"

namespace gpforge {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double cvm_statistic(const Eigen::Ref<const Eigen::VectorXd>& z) {
  const Eigen::Index n = z.size();
  if (n < 1) throw std::invalid_argument("cvm_statistic: empty sample");
  std::vector<double> sorted(z.data(), z.data() + n);
  for (double v : sorted)
    if (!std::isfinite(v)) throw std::invalid_argument("cvm_statistic: non-finite value");
  std::sort(sorted.begin(), sorted.end());
  const double two_n = 2.0 * static_cast<double>(n);
  double w2 = 1.0 / (6.0 * two_n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = normal_cdf(sorted[i]) - (2.0 * static_cast<double>(i) + 1.0) / two_n;
    w2 += d * d;
  }
  return w2;
}

double cvm_critical_value(double alpha) {
  // Asymptotic upper quantiles of the W^2 null distribution.
  if (std::abs(alpha - 0.10) < 1e-12) return 0.347;
  if (std::abs(alpha - 0.05) < 1e-12) return 0.461;
  if (std::abs(alpha - 0.01) < 1e-12) return 0.743;
  throw std::invalid_argument("cvm_test: alpha must be one of 0.10, 0.05, 0.01");
}

CvmResult cvm_test(const Eigen::Ref<const Eigen::VectorXd>& z, double alpha) {
  CvmResult r;
  r.alpha = alpha;
  r.critical_value = cvm_critical_value(alpha);
  r.statistic = cvm_statistic(z);
  r.reject = r.statistic > r.critical_value;
  return r;
}

Interval binomial_ci(double rate, std::int64_t trials, double level) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("binomial_ci: rate outside [0, 1]");
  if (trials < 1) throw std::invalid_argument("binomial_ci: need at least one trial");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("binomial_ci: level outside (0, 1)");
  // Two-sided normal quantile by bisection on the CDF; 0.95 gives 1.959964.
  const double target = 0.5 + 0.5 * level;
  double lo = 0.0, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < target ? lo : hi) = mid;
  }
  const double z = 0.5 * (lo + hi);
  const double half = z * std::sqrt(rate * (1.0 - rate) / static_cast<double>(trials));
  return {std::max(0.0, rate - half), std::min(1.0, rate + half)};
}

double fidelity_rescaler(Method method, double n) {
  const double log_n = std::log(n);
  switch (method) {
    case Method::Exact: return 1.0;
    case Method::Rff: return n * n * log_n;
    case Method::Ciq: return std::sqrt(n) * log_n;
    case Method::CiqPreconditioned: return std::pow(n, 3.0 / 8.0) * log_n;
  }
  return 1.0;
}

void ExperimentConfig::validate() const {
  params.validate();
  if (n_list.empty()) throw std::invalid_argument("experiment: n_list is empty");
  for (auto n : n_list)
    if (n < 2) throw std::invalid_argument("experiment: every n must be >= 2");
  if (fidelity_grid.empty()) throw std::invalid_argument("experiment: fidelity_grid is empty");
  for (double v : fidelity_grid)
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("experiment: fidelity values must be finite and >= 0");
  if (repeats < 1) throw std::invalid_argument("experiment: repeats must be >= 1");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("experiment: eta must lie in (0, 1)");
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("experiment: epsilon must lie in (0, 1]");
  if (!(tol > 0.0)) throw std::invalid_argument("experiment: tol must be positive");
  if (quadrature_points && *quadrature_points < 1)
    throw std::invalid_argument("experiment: quadrature_points must be >= 1");
  cvm_critical_value(alpha);
}

int experiment_quadrature_points(const ExperimentConfig& config, Eigen::Index n) {
  if (config.quadrature_points) return *config.quadrature_points;
  const FidelitySpec f = make_ciq_fidelity(config.epsilon, config.eta, config.params);
  return ciq_min_quadrature(static_cast<double>(n), config.eta, config.params.noise_variance,
                            f.delta_q);
}

GpSample draw_method_sample(const ExperimentConfig& config, const InputData& inputs,
                            double parameter, int quadrature_points, std::uint64_t seed) {
  switch (config.method) {
    case Method::Exact:
      return exact_sample(inputs, config.params, seed);
    case Method::Rff:
      return rff_sample(inputs, config.params, static_cast<std::int64_t>(parameter), seed);
    case Method::Ciq:
    case Method::CiqPreconditioned: {
      CiqSampleOptions opts;
      opts.eta = config.eta;
      opts.quadrature_points = quadrature_points;
      opts.max_iterations = static_cast<int>(parameter);
      opts.tol = config.tol;
      opts.precondition = config.method == Method::CiqPreconditioned;
      opts.precond_rank = config.precond_rank;
      return ciq_sample(inputs, config.params, opts, seed).sample;
    }
  }
  throw std::logic_error("draw_method_sample: unknown method");
}

namespace {

double resolve_parameter(const ExperimentConfig& config, Eigen::Index n, double value) {
  if (config.method == Method::Exact) return 0.0;
  double v = value;
  if (config.grid_scale == GridScale::Fraction)
    v = value * fidelity_rescaler(config.method, static_cast<double>(n));
  if (config.method == Method::Rff) {
    if (config.grid_scale == GridScale::Fraction) {
      // Round up to the next even count so sin/cos pairs stay whole.
      const double pairs = std::max(1.0, std::ceil(0.5 * v));
      return 2.0 * pairs;
    }
    return std::round(v);
  }
  return std::max(1.0, std::ceil(v - 1e-9));
}

struct Job {
  std::size_t cell;
  std::int64_t repeat;
};

struct CellPlan {
  Eigen::Index n;
  double fidelity;
  double parameter;
  int q;
  ExperimentConfig config;  // method may differ for the baseline
  std::uint64_t seed_tag;
};

void run_plans(const std::vector<CellPlan>& plans, std::int64_t repeats, std::uint64_t base_seed,
               double alpha, unsigned threads, std::vector<ExperimentCell>& out) {
  const std::size_t total = plans.size() * static_cast<std::size_t>(repeats);
  std::vector<signed char> outcome(total, 0);
  std::vector<std::string> errors(total);
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= total) return;
      const std::size_t c = t / static_cast<std::size_t>(repeats);
      const auto r = static_cast<std::uint64_t>(t % static_cast<std::size_t>(repeats));
      const CellPlan& plan = plans[c];
      const std::uint64_t seed = derive_seed(base_seed, Stream::Experiment, plan.seed_tag, r);
      try {
        const InputData inputs = sample_inputs(plan.n, plan.config.params, seed);
        const GpSample s = draw_method_sample(plan.config, inputs, plan.parameter, plan.q, seed);
        const GramMatrix k_xi = gram(inputs, plan.config.params, plan.config.params.noise_variance);
        const Eigen::VectorXd z = whiten(s.y, k_xi);
        outcome[t] = cvm_test(z, alpha).reject ? 1 : 0;
      } catch (const std::exception& e) {
        outcome[t] = -1;
        errors[t] = e.what();
      }
    }
  };

  unsigned count = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  count = static_cast<unsigned>(std::min<std::size_t>(count, std::max<std::size_t>(total, 1)));
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(count);
    for (unsigned i = 0; i < count; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  out.clear();
  for (std::size_t c = 0; c < plans.size(); ++c) {
    const CellPlan& plan = plans[c];
    ExperimentCell cell;
    cell.n = plan.n;
    cell.fidelity = plan.fidelity;
    cell.parameter = plan.parameter;
    cell.rescaled = plan.parameter / fidelity_rescaler(plan.config.method, static_cast<double>(plan.n));
    cell.quadrature_points = plan.q;
    cell.repeats = repeats;
    std::int64_t rejects = 0;
    for (std::int64_t r = 0; r < repeats; ++r) {
      const std::size_t t = c * static_cast<std::size_t>(repeats) + static_cast<std::size_t>(r);
      if (outcome[t] < 0) {
        if (!cell.failed) cell.error = errors[t];
        cell.failed = true;
      } else {
        rejects += outcome[t];
      }
    }
    if (cell.failed) {
      cell.rate = cell.ci_low = cell.ci_high = std::nan("");
    } else {
      cell.rate = static_cast<double>(rejects) / static_cast<double>(repeats);
      const Interval ci = binomial_ci(cell.rate, repeats);
      cell.ci_low = ci.low;
      cell.ci_high = ci.high;
    }
    out.push_back(std::move(cell));
  }
}

}  // namespace

ExperimentReport rejection_rate_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentReport report;
  report.config = config;

  std::vector<CellPlan> plans;
  for (auto n : config.n_list) {
    int q = 0;
    if (config.method == Method::Ciq || config.method == Method::CiqPreconditioned)
      q = experiment_quadrature_points(config, n);
    for (double v : config.fidelity_grid) {
      const std::uint64_t tag = plans.size();
      plans.push_back({n, v, resolve_parameter(config, n, v), q, config, tag});
    }
  }
  run_plans(plans, config.repeats, config.base_seed, config.alpha, config.threads, report.cells);

  if (config.baseline) {
    std::vector<CellPlan> base;
    ExperimentConfig exact = config;
    exact.method = Method::Exact;
    constexpr std::uint64_t kBaselineTag = 0x62617365ULL << 32;
    for (auto n : config.n_list)
      base.push_back({n, 0.0, 0.0, 0, exact, kBaselineTag + base.size()});
    run_plans(base, config.repeats, config.base_seed, config.alpha, config.threads,
              report.baseline);
    Interval range{1.0, 0.0};
    bool any = false;
    for (const auto& c : report.baseline) {
      if (c.failed) continue;
      any = true;
      range.low = std::min(range.low, c.rate);
      range.high = std::max(range.high, c.rate);
    }
    if (any) report.baseline_range = range;
  }
  return report;
}

}  // namespace gpforge

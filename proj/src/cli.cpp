#include "gpforge/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpforge/bounds.hpp"
#include "gpforge/ciq.hpp"
#include "gpforge/errors.hpp"
#include "gpforge/exact.hpp"
#include "gpforge/fidelity.hpp"
#include "gpforge/precond.hpp"
#include "gpforge/rff.hpp"
#include "gpforge/stats.hpp"

namespace gpforge::cli {
namespace {

using json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

// Bad flags, bad config contents: exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("GPFORGE_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  const char* end = s + std::strlen(s);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s, end, v);
  if (ec != std::errc{} || p != end)
    throw UsageError(std::string("GPFORGE_SEED is not an unsigned integer: ") + s);
  return v;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  return f;
}

void close_checked(std::ofstream& f, const std::string& path) {
  f.close();
  if (!f) throw std::runtime_error("failed writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json load_object(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError(path + ": expected a JSON object");
  return j;
}

void reject_unknown(const json& j, const std::vector<std::string_view>& allowed,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw UsageError(where + ": unknown field \"" + key + "\"");
  }
}

void check_schema(const json& j, const std::string& where) {
  if (!j.contains("schema_version")) throw UsageError(where + ": missing schema_version");
  if (j.at("schema_version") != kSchemaVersion)
    throw UsageError(where + ": unsupported schema_version " + j.at("schema_version").dump());
}

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<T>();
}

double parse_number(std::string_view s, const std::string& where) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end)
    throw std::runtime_error(where + ": not a number: \"" + std::string(s) + "\"");
  return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

json params_json(const KernelParams& p) {
  return json{{"variance", p.variance},
              {"lengthscale", p.lengthscale},
              {"noise_variance", p.noise_variance},
              {"dim", p.dim}};
}

KernelParams params_from_json(const json& j) {
  reject_unknown(j, {"variance", "lengthscale", "noise_variance", "dim"}, "params");
  KernelParams p;
  take(j, "variance", p.variance);
  take(j, "lengthscale", p.lengthscale);
  take(j, "noise_variance", p.noise_variance);
  take(j, "dim", p.dim);
  return p;
}

// Kernel flags shared by several subcommands.
struct KernelFlags {
  KernelParams p;
  CLI::Option* dim = nullptr;

  void add(CLI::App* app, double default_noise, int default_dim) {
    p.noise_variance = default_noise;
    p.dim = default_dim;
    app->add_option("--variance", p.variance, "kernel scale sigma_f^2")->capture_default_str();
    app->add_option("--lengthscale", p.lengthscale, "RBF lengthscale l")->capture_default_str();
    app->add_option("--noise", p.noise_variance, "noise variance sigma_xi^2")->capture_default_str();
    dim = app->add_option("--dim", p.dim, "input dimension d")->capture_default_str();
  }
};

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

struct BoundsArgs {
  std::string method;
  std::int64_t n = 0;
  double epsilon = 0.1;
  double delta = 0.05;
  std::optional<double> delta_q;
  double eta = 0.5;
  double noise = 0.1;
  double variance = 1.0;
  int dim = 1;
  double c1 = 1.0;
  double c2 = 1.0;
  double c_tilde = 0.0;
  std::string rff_form = "printed";
  std::string json_path;
};

void load_bounds_json(const std::string& path, BoundsArgs& a) {
  const json j = load_object(path);
  reject_unknown(j,
                 {"schema_version", "method", "n", "epsilon", "delta", "delta_Q", "eta",
                  "noise_variance", "variance", "dim", "c1", "c2", "c_tilde", "rff_form",
                  // derived outputs, accepted so a printed result reparses
                  "D", "Q", "J", "kappa_bound", "regime", "gamma"},
                 path);
  check_schema(j, path);
  take(j, "method", a.method);
  take(j, "n", a.n);
  take(j, "epsilon", a.epsilon);
  take(j, "delta", a.delta);
  if (j.contains("delta_Q") && !j.at("delta_Q").is_null()) a.delta_q = j.at("delta_Q").get<double>();
  take(j, "eta", a.eta);
  take(j, "noise_variance", a.noise);
  take(j, "variance", a.variance);
  take(j, "dim", a.dim);
  take(j, "c1", a.c1);
  take(j, "c2", a.c2);
  take(j, "c_tilde", a.c_tilde);
  take(j, "rff_form", a.rff_form);
}

json compute_bounds(const BoundsArgs& a) {
  if (a.method.empty()) throw UsageError("bounds: --method is required");
  if (a.n < 1) throw UsageError("bounds: --n must be a positive integer");
  const Method method = parse_method(a.method);
  RffBoundForm form;
  if (a.rff_form == "printed") {
    form = RffBoundForm::AsPrinted;
  } else if (a.rff_form == "simplified") {
    form = RffBoundForm::Simplified;
  } else {
    throw UsageError("bounds: --rff-form must be printed or simplified");
  }

  KernelParams params;
  params.variance = a.variance;
  params.noise_variance = a.noise;
  params.dim = a.dim;
  params.validate();
  const double n = static_cast<double>(a.n);

  FidelitySpec spec;
  spec.epsilon = a.epsilon;
  spec.delta = a.delta;
  spec.eta = a.eta;
  spec.c_tilde = a.c_tilde;
  spec.delta_q = a.delta_q.value_or(0.5 * delta_q_cap(a.epsilon, a.eta, a.noise));
  spec.validate();

  DecayModel model;
  model.c1 = a.c1;
  model.c2 = a.c2;
  model.sigma_f = std::sqrt(a.variance);
  model.dim = a.dim;
  model.validate();
  IterationBudget budget{a.eta, a.noise, a.epsilon, spec.delta_q, a.c_tilde};

  json D = nullptr, Q = nullptr, J = nullptr;
  double kappa = condition_number_bound(n, a.eta, a.noise, a.variance);
  if (method == Method::Rff) {
    D = rff_min_features(n, a.epsilon, a.delta, a.noise, form);
  } else if (method == Method::Ciq || method == Method::CiqPreconditioned) {
    spec.validate_for_ciq(params);
    const int q = ciq_min_quadrature(n, a.eta, a.noise, spec.delta_q);
    Q = q;
    if (method == Method::Ciq) {
      J = ciq_min_iterations(n, a.eta, a.noise, a.epsilon, spec.delta_q, q);
    } else {
      const Eigen::Index k = default_nystrom_rank(a.n);
      const double lambda = belkin_lambda_bound(static_cast<double>(k + 1), n, model);
      J = precond_min_iterations(lambda, n, a.eta, a.noise, a.epsilon, spec.delta_q, a.c_tilde);
      kappa = preconditioned_condition_bound(lambda, a.n, a.eta, a.noise, k);
    }
  }
  const DecayRegimeResult regime = decay_regime(n, model, budget);

  return json{{"schema_version", kSchemaVersion},
              {"method", to_string(method)},
              {"n", a.n},
              {"epsilon", a.epsilon},
              {"delta", a.delta},
              {"delta_Q", spec.delta_q},
              {"eta", a.eta},
              {"noise_variance", a.noise},
              {"variance", a.variance},
              {"dim", a.dim},
              {"c1", a.c1},
              {"c2", a.c2},
              {"c_tilde", a.c_tilde},
              {"rff_form", a.rff_form},
              {"D", D},
              {"Q", Q},
              {"J", J},
              {"kappa_bound", kappa},
              {"regime", to_string(regime.regime)},
              {"gamma", regime.gamma}};
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

struct SampleArgs {
  std::string method;
  std::int64_t n = 0;
  KernelFlags kernel;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> features;
  std::optional<int> quadrature;
  std::optional<int> iterations;
  double eta = 0.5;
  double epsilon = 0.1;
  std::optional<double> delta_q;
  double tol = 1e-10;
  std::int64_t precond_rank = 0;
  double c1 = 1.0;
  double c2 = 1.0;
  std::string inputs_path;
  std::string save_inputs;
  std::string output;
};

void write_sample_row(std::ostream& os, std::size_t i, double v) {
  os << i << ',' << format_double(v) << '\n';
}

int cmd_sample(const SampleArgs& a, std::ostream& out) {
  const Method method = parse_method(a.method);
  KernelParams params = a.kernel.p;
  const std::uint64_t seed = a.seed ? *a.seed : env_seed().value_or(0);

  std::optional<InputData> inputs;
  if (!a.inputs_path.empty()) {
    inputs = read_inputs_csv(a.inputs_path);
    if (a.kernel.dim->count() > 0 && params.dim != inputs->dim())
      throw UsageError("sample: --dim disagrees with the input file");
    params.dim = static_cast<int>(inputs->dim());
    if (a.n > 0 && a.n != inputs->size()) throw UsageError("sample: --n disagrees with the input file");
  } else if (a.n < 1) {
    throw UsageError("sample: --n is required unless --inputs is given");
  }
  params.validate();
  const Eigen::Index n = inputs ? inputs->size() : a.n;

  if (method == Method::Rff) {
    if (!a.features) throw UsageError("sample: rff needs --D");
    if (*a.features < 2 || *a.features % 2 != 0)
      throw std::invalid_argument("sample: D must be a positive even number, got " +
                                  std::to_string(*a.features));
  }

  json fidelity = json::object();
  json report = nullptr;
  std::ofstream csv = open_for_write(a.output);
  csv << "index,y\n";

  const bool stream_rff = method == Method::Rff && !inputs && a.save_inputs.empty();
  if (!inputs && !stream_rff) inputs = sample_inputs(n, params, seed);
  if (!a.save_inputs.empty()) write_inputs_csv(a.save_inputs, *inputs);

  if (method == Method::Rff) {
    fidelity["D"] = *a.features;
    if (stream_rff) {
      rff_sample_streaming(n, params, *a.features, seed,
                           [&csv](std::size_t i, double v) {
                             write_sample_row(csv, i, v);
                             if (!csv) throw std::runtime_error("write failed");
                           });
    } else {
      const GpSample s = rff_sample(*inputs, params, *a.features, seed);
      for (Eigen::Index i = 0; i < s.y.size(); ++i) write_sample_row(csv, i, s.y(i));
    }
  } else if (method == Method::Exact) {
    const GpSample s = exact_sample(*inputs, params, seed);
    for (Eigen::Index i = 0; i < s.y.size(); ++i) write_sample_row(csv, i, s.y(i));
  } else {
    const FidelitySpec spec = make_ciq_fidelity(a.epsilon, a.eta, params, a.delta_q);
    const double nd = static_cast<double>(n);
    CiqSampleOptions opts;
    opts.eta = a.eta;
    opts.tol = a.tol;
    opts.precondition = method == Method::CiqPreconditioned;
    opts.precond_rank = a.precond_rank;
    opts.quadrature_points =
        a.quadrature.value_or(ciq_min_quadrature(nd, a.eta, params.noise_variance, spec.delta_q));
    if (a.iterations) {
      opts.max_iterations = *a.iterations;
    } else if (!opts.precondition) {
      opts.max_iterations = ciq_min_iterations(nd, a.eta, params.noise_variance, a.epsilon,
                                               spec.delta_q, opts.quadrature_points);
    } else {
      DecayModel model;
      model.c1 = a.c1;
      model.c2 = a.c2;
      model.sigma_f = params.sigma_f();
      model.dim = params.dim;
      model.validate();
      const Eigen::Index k = a.precond_rank > 0 ? a.precond_rank : default_nystrom_rank(n);
      const double lambda = belkin_lambda_bound(static_cast<double>(k + 1), nd, model);
      opts.max_iterations = precond_min_iterations(lambda, nd, a.eta, params.noise_variance,
                                                   a.epsilon, spec.delta_q);
    }
    if (opts.quadrature_points < 1 || opts.max_iterations < 1)
      throw std::invalid_argument("sample: Q and J must be positive");

    const CiqSampleResult r = ciq_sample(*inputs, params, opts, seed);
    for (Eigen::Index i = 0; i < r.sample.y.size(); ++i) write_sample_row(csv, i, r.sample.y(i));
    fidelity = json{{"epsilon", a.epsilon},
                    {"delta_Q", spec.delta_q},
                    {"eta", a.eta},
                    {"Q", opts.quadrature_points},
                    {"J", opts.max_iterations},
                    {"tol", a.tol}};
    if (opts.precondition)
      fidelity["precond_rank"] = a.precond_rank > 0 ? a.precond_rank : default_nystrom_rank(n);
    report = json{{"iterations_run", r.report.iterations_run},
                  {"max_residual", r.report.max_residual()},
                  {"all_converged", r.report.all_converged()},
                  {"breakdown", r.report.breakdown}};
  }
  close_checked(csv, a.output);

  json input_info{{"source", a.inputs_path.empty() ? "generated" : "file"}};
  if (a.inputs_path.empty()) {
    input_info["seed"] = seed;
  } else {
    input_info["path"] = a.inputs_path;
  }
  json sidecar{{"schema_version", kSchemaVersion},
               {"method", to_string(method)},
               {"n", n},
               {"seed", seed},
               {"params", params_json(params)},
               {"fidelity", fidelity},
               {"inputs", input_info}};
  if (!report.is_null()) sidecar["solver"] = report;
  std::ofstream side = open_for_write(a.output + ".json");
  side << sidecar.dump(2) << '\n';
  close_checked(side, a.output + ".json");
  out << a.output << '\n';
  return Ok;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int cmd_verify(const std::string& sample_path, std::string sidecar_path,
               const std::string& inputs_path, double alpha, std::ostream& out) {
  if (sidecar_path.empty()) sidecar_path = sample_path + ".json";
  const json side = load_object(sidecar_path);
  check_schema(side, sidecar_path);
  const KernelParams params = params_from_json(side.at("params"));
  params.validate();
  const Eigen::VectorXd y = read_sample_csv(sample_path);

  InputData inputs;
  if (!inputs_path.empty()) {
    inputs = read_inputs_csv(inputs_path);
  } else {
    const json& info = side.at("inputs");
    if (info.at("source") == "file") {
      inputs = read_inputs_csv(info.at("path").get<std::string>());
    } else {
      inputs = sample_inputs(y.size(), params, info.at("seed").get<std::uint64_t>());
    }
  }
  if (inputs.size() != y.size())
    throw std::runtime_error("verify: sample has " + std::to_string(y.size()) + " values but " +
                             std::to_string(inputs.size()) + " inputs");

  const GramMatrix K = gram(inputs, params, params.noise_variance);
  const CvmResult r = cvm_test(whiten(y, K), alpha);
  out << json{{"n", y.size()},
              {"statistic", r.statistic},
              {"alpha", r.alpha},
              {"critical_value", r.critical_value},
              {"reject", r.reject}}
             .dump(2)
      << '\n';
  return Ok;
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

std::string grid_scale_name(GridScale s) { return s == GridScale::Fraction ? "fraction" : "absolute"; }

GridScale parse_grid_scale(const std::string& s) {
  if (s == "absolute") return GridScale::Absolute;
  if (s == "fraction") return GridScale::Fraction;
  throw UsageError("grid_scale must be absolute or fraction, got \"" + s + "\"");
}

json config_json(const ExperimentConfig& c) {
  json j{{"schema_version", kSchemaVersion},
         {"method", to_string(c.method)},
         {"n_list", c.n_list},
         {"variance", c.params.variance},
         {"lengthscale", c.params.lengthscale},
         {"noise_variance", c.params.noise_variance},
         {"dim", c.params.dim},
         {"fidelity_grid", c.fidelity_grid},
         {"grid_scale", grid_scale_name(c.grid_scale)},
         {"eta", c.eta},
         {"alpha", c.alpha},
         {"repeats", c.repeats},
         {"base_seed", c.base_seed},
         {"epsilon", c.epsilon},
         {"quadrature_points", c.quadrature_points ? json(*c.quadrature_points) : json(nullptr)},
         {"tol", c.tol},
         {"precond_rank", c.precond_rank},
         {"baseline", c.baseline}};
  return j;
}

void apply_config_file(const std::string& path, ExperimentConfig& c, std::string& output,
                       unsigned& threads) {
  const json j = load_object(path);
  reject_unknown(j,
                 {"schema_version", "method", "n_list", "variance", "lengthscale",
                  "noise_variance", "dim", "fidelity_grid", "grid_scale", "eta", "alpha",
                  "repeats", "base_seed", "epsilon", "quadrature_points", "tol", "precond_rank",
                  "baseline", "threads", "output"},
                 path);
  check_schema(j, path);
  try {
    if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
    take(j, "n_list", c.n_list);
    take(j, "variance", c.params.variance);
    take(j, "lengthscale", c.params.lengthscale);
    take(j, "noise_variance", c.params.noise_variance);
    take(j, "dim", c.params.dim);
    take(j, "fidelity_grid", c.fidelity_grid);
    if (j.contains("grid_scale")) c.grid_scale = parse_grid_scale(j.at("grid_scale").get<std::string>());
    take(j, "eta", c.eta);
    take(j, "alpha", c.alpha);
    take(j, "repeats", c.repeats);
    take(j, "base_seed", c.base_seed);
    take(j, "epsilon", c.epsilon);
    if (j.contains("quadrature_points") && !j.at("quadrature_points").is_null())
      c.quadrature_points = j.at("quadrature_points").get<int>();
    take(j, "tol", c.tol);
    take(j, "precond_rank", c.precond_rank);
    take(j, "baseline", c.baseline);
    take(j, "threads", threads);
    take(j, "output", output);
  } catch (const json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

json cell_json(const ExperimentCell& c) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j{{"n", c.n},
         {"fidelity", c.fidelity},
         {"parameter", c.parameter},
         {"rescaled", num(c.rescaled)},
         {"quadrature_points", c.quadrature_points},
         {"rate", num(c.rate)},
         {"ci_low", num(c.ci_low)},
         {"ci_high", num(c.ci_high)},
         {"repeats", c.repeats},
         {"failed", c.failed}};
  if (c.failed) j["error"] = c.error;
  return j;
}

void write_report(const ExperimentReport& r, const std::string& prefix) {
  const std::string csv_path = prefix + ".csv";
  std::ofstream csv = open_for_write(csv_path);
  csv << "n,fidelity,rate,ci_low,ci_high,repeats,method,rescaled,parameter\n";
  const std::string method = to_string(r.config.method);
  for (const auto& c : r.cells) {
    csv << c.n << ',' << format_double(c.fidelity) << ',' << format_double(c.rate) << ','
        << format_double(c.ci_low) << ',' << format_double(c.ci_high) << ',' << c.repeats << ','
        << method << ',' << format_double(c.rescaled) << ',' << format_double(c.parameter) << '\n';
  }
  close_checked(csv, csv_path);

  json j{{"config", config_json(r.config)}, {"cells", json::array()}};
  for (const auto& c : r.cells) j["cells"].push_back(cell_json(c));
  if (!r.baseline.empty()) {
    j["baseline"] = json::array();
    for (const auto& c : r.baseline) j["baseline"].push_back(cell_json(c));
  }
  if (r.baseline_range)
    j["baseline_range"] = json{{"low", r.baseline_range->low}, {"high", r.baseline_range->high}};
  const std::string json_path = prefix + ".json";
  std::ofstream jf = open_for_write(json_path);
  jf << j.dump(2) << '\n';
  close_checked(jf, json_path);
}

// ---------------------------------------------------------------------------
// precond-sweep
// ---------------------------------------------------------------------------

std::vector<double> default_lengthscales() {
  std::vector<double> ls;
  for (int i = 0; i < 10; ++i) ls.push_back(std::pow(10.0, -2.0 + i / 3.0));
  return ls;
}

void write_sweep(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "n,lengthscale,metric\n";
  for (const auto& r : rows)
    os << r.n << ',' << format_double(r.lengthscale) << ',' << format_double(r.metric) << '\n';
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, p);
}

InputData read_inputs_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error(path + ": empty input file");
  const auto header = split_commas(lines[0]);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] != "x" + std::to_string(c))
      throw std::runtime_error(path + ": expected header x0,...,x{d-1}");
  }
  const Eigen::Index d = static_cast<Eigen::Index>(header.size());
  InputData data;
  data.points.resize(static_cast<Eigen::Index>(lines.size()) - 1, d);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_commas(lines[r]);
    const std::string where = path + ":" + std::to_string(r + 1);
    if (static_cast<Eigen::Index>(cells.size()) != d)
      throw std::runtime_error(where + ": expected " + std::to_string(d) + " columns");
    for (Eigen::Index c = 0; c < d; ++c)
      data.points(static_cast<Eigen::Index>(r) - 1, c) = parse_number(cells[c], where);
  }
  if (data.size() == 0) throw std::runtime_error(path + ": no points");
  return data;
}

void write_inputs_csv(const std::string& path, const InputData& inputs) {
  std::ofstream f = open_for_write(path);
  for (Eigen::Index c = 0; c < inputs.dim(); ++c) f << (c ? "," : "") << 'x' << c;
  f << '\n';
  for (Eigen::Index r = 0; r < inputs.size(); ++r) {
    for (Eigen::Index c = 0; c < inputs.dim(); ++c)
      f << (c ? "," : "") << format_double(inputs.points(r, c));
    f << '\n';
  }
  close_checked(f, path);
}

Eigen::VectorXd read_sample_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines[0] != "index,y") throw std::runtime_error(path + ": expected header index,y");
  Eigen::VectorXd y(static_cast<Eigen::Index>(lines.size()) - 1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_commas(lines[r]);
    const std::string where = path + ":" + std::to_string(r + 1);
    if (cells.size() != 2) throw std::runtime_error(where + ": expected index,y");
    if (parse_number(cells[0], where) != static_cast<double>(r - 1))
      throw std::runtime_error(where + ": indices must run 0, 1, 2, ...");
    y(static_cast<Eigen::Index>(r) - 1) = parse_number(cells[1], where);
  }
  if (y.size() == 0) throw std::runtime_error(path + ": no values");
  return y;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sampling from Gaussian process priors with fidelity guarantees", "gpforge"};
  app.require_subcommand(1, 1);

  // bounds
  BoundsArgs b;
  CLI::App* bounds = app.add_subcommand("bounds", "sufficient fidelity parameters as JSON");
  auto* b_method = bounds->add_option("--method", b.method, "exact, rff, ciq or pciq");
  auto* b_n = bounds->add_option("--n", b.n, "number of points");
  auto* b_eps = bounds->add_option("--eps", b.epsilon, "TV budget epsilon");
  auto* b_delta = bounds->add_option("--delta", b.delta, "RFF failure probability");
  auto* b_dq = bounds->add_option("--delta-q", b.delta_q, "quadrature budget (default: half the cap)");
  auto* b_eta = bounds->add_option("--eta", b.eta, "noise fraction folded into the kernel");
  auto* b_noise = bounds->add_option("--noise", b.noise, "noise variance sigma_xi^2");
  auto* b_var = bounds->add_option("--variance", b.variance, "kernel scale sigma_f^2");
  auto* b_dim = bounds->add_option("--dim", b.dim, "input dimension for the decay model");
  auto* b_c1 = bounds->add_option("--c1", b.c1, "eigenvalue decay rate constant");
  auto* b_c2 = bounds->add_option("--c2", b.c2, "eigenvalue decay scale constant");
  auto* b_ct = bounds->add_option("--c-tilde", b.c_tilde, "pseudo-constant of the iteration bounds");
  auto* b_form = bounds->add_option("--rff-form", b.rff_form, "printed or simplified");
  bounds->add_option("--json", b.json_path, "read arguments from a JSON file (flags win)");

  // sample
  SampleArgs s;
  CLI::App* sample = app.add_subcommand("sample", "draw one sample, write CSV and a JSON sidecar");
  sample->add_option("--method", s.method, "exact, rff, ciq or pciq")->required();
  sample->add_option("--n", s.n, "number of points (generated inputs)");
  s.kernel.add(sample, 0.1, 1);
  sample->add_option("--seed", s.seed, "seed (default: GPFORGE_SEED or 0)");
  sample->add_option("--D", s.features, "number of random features (rff)");
  sample->add_option("--Q", s.quadrature, "quadrature points (default from bounds)");
  sample->add_option("--J", s.iterations, "Krylov iterations (default from bounds)");
  sample->add_option("--eta", s.eta, "noise fraction folded into the kernel")->capture_default_str();
  sample->add_option("--eps", s.epsilon, "TV budget used for default Q, J")->capture_default_str();
  sample->add_option("--delta-q", s.delta_q, "quadrature budget (default: half the cap)");
  sample->add_option("--tol", s.tol, "solver residual tolerance")->capture_default_str();
  sample->add_option("--precond-rank", s.precond_rank, "Nystrom rank (default floor(sqrt n))");
  sample->add_option("--c1", s.c1, "decay constant for the pciq default J")->capture_default_str();
  sample->add_option("--c2", s.c2, "decay constant for the pciq default J")->capture_default_str();
  sample->add_option("--inputs", s.inputs_path, "input CSV (header x0,...)");
  sample->add_option("--save-inputs", s.save_inputs, "also write the generated inputs");
  sample->add_option("--output", s.output, "sample CSV path; sidecar is <path>.json")->required();

  // experiment
  ExperimentConfig ec;
  std::string e_config, e_output;
  unsigned e_threads = 0;
  std::string e_method, e_scale;
  std::vector<Eigen::Index> e_n;
  std::vector<double> e_grid;
  std::optional<std::uint64_t> e_seed;
  KernelFlags e_kernel;
  CLI::App* experiment = app.add_subcommand("experiment", "rejection-rate experiment over a grid");
  experiment->add_option("--config", e_config, "JSON config (schema_version 1)");
  auto* e_method_opt = experiment->add_option("--method", e_method, "exact, rff, ciq or pciq");
  auto* e_n_opt = experiment->add_option("--n", e_n, "sizes, comma separated")->delimiter(',');
  auto* e_grid_opt = experiment->add_option("--grid", e_grid, "fidelity grid, comma separated")->delimiter(',');
  auto* e_scale_opt = experiment->add_option("--grid-scale", e_scale, "absolute or fraction");
  auto* e_rep_opt = experiment->add_option("--repeats", ec.repeats, "repeats per cell");
  experiment->add_option("--seed", e_seed, "base seed");
  auto* e_alpha_opt = experiment->add_option("--alpha", ec.alpha, "significance level");
  auto* e_eta_opt = experiment->add_option("--eta", ec.eta, "noise fraction for CIQ");
  auto* e_eps_opt = experiment->add_option("--eps", ec.epsilon, "TV budget for the Q bound");
  std::optional<int> e_q;
  auto* e_q_opt = experiment->add_option("--Q", e_q, "quadrature points override");
  auto* e_tol_opt = experiment->add_option("--tol", ec.tol, "solver tolerance");
  auto* e_rank_opt = experiment->add_option("--precond-rank", ec.precond_rank, "Nystrom rank");
  auto* e_base_opt = experiment->add_flag("--baseline", ec.baseline, "also run the Cholesky band");
  auto* e_threads_opt = experiment->add_option("--threads", e_threads, "worker threads (0: all cores)");
  auto* e_out_opt = experiment->add_option("--output", e_output, "output prefix for .csv and .json");
  e_kernel.add(experiment, ec.params.noise_variance, ec.params.dim);
  std::vector<CLI::Option*> e_kernel_opts = {experiment->get_option("--variance"),
                                             experiment->get_option("--lengthscale"),
                                             experiment->get_option("--noise"), e_kernel.dim};

  // precond-sweep
  std::vector<Eigen::Index> p_n;
  std::vector<double> p_ls;
  double p_eta = 1.0;
  std::int64_t p_rank = 0;
  std::optional<std::uint64_t> p_seed;
  std::string p_output;
  KernelFlags p_kernel;
  CLI::App* sweep = app.add_subcommand("precond-sweep", "preconditioner quality over lengthscales");
  sweep->add_option("--n", p_n, "sizes, comma separated")->delimiter(',')->required();
  sweep->add_option("--lengthscales", p_ls, "lengthscale grid (default: 10 values 0.01..10)")
      ->delimiter(',');
  p_kernel.add(sweep, 0.001, 2);
  sweep->add_option("--eta", p_eta, "noise fraction in the preconditioned matrix")->capture_default_str();
  sweep->add_option("--rank", p_rank, "Nystrom rank (default floor(sqrt n))");
  sweep->add_option("--seed", p_seed, "seed");
  sweep->add_option("--output", p_output, "CSV path (default: stdout)");

  // verify
  std::string v_sample, v_sidecar, v_inputs;
  double v_alpha = 0.05;
  CLI::App* verify = app.add_subcommand("verify", "whiten an existing sample and run the CvM test");
  verify->add_option("sample", v_sample, "sample CSV written by `sample`")->required();
  verify->add_option("--sidecar", v_sidecar, "sidecar JSON (default: <sample>.json)");
  verify->add_option("--inputs", v_inputs, "input CSV (default: as recorded in the sidecar)");
  verify->add_option("--alpha", v_alpha, "significance level")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? Ok : UsageFailure;
  }

  try {
    if (bounds->parsed()) {
      if (!b.json_path.empty()) {
        BoundsArgs merged;
        load_bounds_json(b.json_path, merged);
        auto over = [](CLI::Option* o, auto& dst, const auto& src) {
          if (o->count() > 0) dst = src;
        };
        over(b_method, merged.method, b.method);
        over(b_n, merged.n, b.n);
        over(b_eps, merged.epsilon, b.epsilon);
        over(b_delta, merged.delta, b.delta);
        over(b_dq, merged.delta_q, b.delta_q);
        over(b_eta, merged.eta, b.eta);
        over(b_noise, merged.noise, b.noise);
        over(b_var, merged.variance, b.variance);
        over(b_dim, merged.dim, b.dim);
        over(b_c1, merged.c1, b.c1);
        over(b_c2, merged.c2, b.c2);
        over(b_ct, merged.c_tilde, b.c_tilde);
        over(b_form, merged.rff_form, b.rff_form);
        b = merged;
      } else if (b_n->count() == 0 || b_method->count() == 0) {
        err << "bounds: --method and --n are required (or --json FILE)\n" << bounds->help();
        return UsageFailure;
      }
      out << compute_bounds(b).dump(2) << '\n';
      return Ok;
    }
    if (sample->parsed()) return cmd_sample(s, out);
    if (verify->parsed()) return cmd_verify(v_sample, v_sidecar, v_inputs, v_alpha, out);
    if (sweep->parsed()) {
      KernelParams p = p_kernel.p;
      p.validate();
      const std::uint64_t seed = p_seed ? *p_seed : env_seed().value_or(0);
      const auto rows = effectiveness_sweep(p_n, p_ls.empty() ? default_lengthscales() : p_ls, p,
                                            p_eta, seed, p_rank);
      if (p_output.empty()) {
        write_sweep(out, rows);
      } else {
        std::ofstream f = open_for_write(p_output);
        write_sweep(f, rows);
        close_checked(f, p_output);
      }
      return Ok;
    }

    // experiment: defaults < config file < GPFORGE_SEED < flags
    ExperimentConfig c;
    unsigned threads = 0;
    std::string output;
    if (!e_config.empty()) apply_config_file(e_config, c, output, threads);
    if (auto env = env_seed()) c.base_seed = *env;
    if (e_method_opt->count()) c.method = parse_method(e_method);
    if (e_n_opt->count()) c.n_list = e_n;
    if (e_grid_opt->count()) c.fidelity_grid = e_grid;
    if (e_scale_opt->count()) c.grid_scale = parse_grid_scale(e_scale);
    if (e_rep_opt->count()) c.repeats = ec.repeats;
    if (e_seed) c.base_seed = *e_seed;
    if (e_alpha_opt->count()) c.alpha = ec.alpha;
    if (e_eta_opt->count()) c.eta = ec.eta;
    if (e_eps_opt->count()) c.epsilon = ec.epsilon;
    if (e_q_opt->count()) c.quadrature_points = e_q;
    if (e_tol_opt->count()) c.tol = ec.tol;
    if (e_rank_opt->count()) c.precond_rank = ec.precond_rank;
    if (e_base_opt->count()) c.baseline = ec.baseline;
    if (e_threads_opt->count()) threads = e_threads;
    if (e_out_opt->count()) output = e_output;
    if (e_kernel_opts[0]->count()) c.params.variance = e_kernel.p.variance;
    if (e_kernel_opts[1]->count()) c.params.lengthscale = e_kernel.p.lengthscale;
    if (e_kernel_opts[2]->count()) c.params.noise_variance = e_kernel.p.noise_variance;
    if (e_kernel_opts[3]->count()) c.params.dim = e_kernel.p.dim;
    c.threads = threads;
    if (output.empty()) throw UsageError("experiment: --output (or \"output\" in the config) is required");
    c.validate();

    const ExperimentReport r = rejection_rate_experiment(c);
    for (const auto& cell : r.cells) {
      if (cell.failed)
        err << "warning: cell n=" << cell.n << " fidelity=" << format_double(cell.fidelity)
            << " failed: " << cell.error << '\n';
    }
    write_report(r, output);
    out << output << ".csv\n" << output << ".json\n";
    return Ok;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return UsageFailure;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return UsageFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return RuntimeFailure;
  }
}

}  // namespace gpforge::cli

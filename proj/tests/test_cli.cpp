#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "gpforge/bounds.hpp"
#include "gpforge/cli.hpp"
#include "gpforge/exact.hpp"
#include "gpforge/fidelity.hpp"
#include "gpforge/rng.hpp"

using namespace gpforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("gpforge_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (scratch() / name).string(); }

std::string slurp(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const std::string& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("format_double keeps 17 significant digits") {
  CHECK(cli::format_double(0.1) == "0.10000000000000001");
  CHECK(cli::format_double(1.0) == "1");
  CHECK(cli::format_double(std::nan("")) == "nan");
  NormalGenerator g(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = g() * std::pow(10.0, (i % 40) - 20);
    CHECK(std::strtod(cli::format_double(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("inputs csv round trip") {
  KernelParams p;
  p.dim = 3;
  const InputData x = sample_inputs(20, p, 11);
  cli::write_inputs_csv(path("x.csv"), x);
  CHECK(slurp(path("x.csv")).rfind("x0,x1,x2\n", 0) == 0);
  const InputData back = cli::read_inputs_csv(path("x.csv"));
  CHECK(back.points == x.points);

  spit(path("bad.csv"), "x0,x1\n1,2\n3\n");
  CHECK_THROWS(cli::read_inputs_csv(path("bad.csv")));
  spit(path("bad2.csv"), "a,b\n1,2\n");
  CHECK_THROWS(cli::read_inputs_csv(path("bad2.csv")));
}

TEST_CASE("bounds reproduces the worked quadrature example") {
  const Outcome r = call({"bounds", "--method", "ciq", "--n", "1000", "--eps", "0.1", "--eta", "0.5",
                          "--noise", "0.1", "--delta-q", "1e-3"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j.at("Q") == 5);
  CHECK(j.at("Q") == ciq_min_quadrature(1000, 0.5, 0.1, 1e-3));
  CHECK(j.at("J") == ciq_min_iterations(1000, 0.5, 0.1, 0.1, 1e-3, 5));
  CHECK(j.at("kappa_bound").get<double>() == doctest::Approx(20001.0));
  CHECK(j.at("D").is_null());
  for (const char* key : {"method", "n", "epsilon", "delta", "delta_Q", "eta", "D", "Q", "J",
                          "kappa_bound", "regime"})
    CHECK(j.contains(key));

  const json rff = json::parse(call({"bounds", "--method", "rff", "--n", "100", "--delta", "0.01",
                                     "--noise", "1"})
                                   .out);
  CHECK(rff.at("D") == 6907756);
  CHECK(rff.at("Q").is_null());

  const json regime = json::parse(call({"bounds", "--method", "exact", "--n", "100", "--dim", "4"}).out);
  CHECK(regime.at("regime") == "i");
  CHECK(regime.at("gamma").get<double>() == doctest::Approx(2.448).epsilon(1e-3));
}

TEST_CASE("bounds json round trip and flag precedence") {
  const Outcome first = call({"bounds", "--method", "pciq", "--n", "512", "--dim", "2"});
  REQUIRE(first.code == 0);
  spit(path("b.json"), first.out);
  const Outcome again = call({"bounds", "--json", path("b.json")});
  CHECK(again.code == 0);
  CHECK(again.out == first.out);

  const json changed = json::parse(call({"bounds", "--json", path("b.json"), "--n", "1024"}).out);
  CHECK(changed.at("n") == 1024);
  CHECK(changed.at("method") == "pciq");

  spit(path("b_bad.json"), R"({"schema_version": 1, "method": "ciq", "n": 10, "extra": 1})");
  CHECK(call({"bounds", "--json", path("b_bad.json")}).code == 2);
}

TEST_CASE("bounds usage and constraint errors") {
  CHECK(call({"bounds", "--method", "ciq"}).code == 2);
  CHECK(call({"bounds", "--n", "10"}).code == 2);
  CHECK(call({}).code == 2);
  CHECK(call({"frobnicate"}).code == 2);
  CHECK(call({"bounds", "--method", "ciq", "--n", "ten"}).code == 2);
  CHECK(call({"bounds", "--help"}).code == 0);
  const Outcome cap = call({"bounds", "--method", "ciq", "--n", "1000", "--delta-q", "0.5"});
  CHECK(cap.code != 0);
  CHECK(cap.err.find("delta_q") != std::string::npos);
}

TEST_CASE("sample exact is byte identical and matches the library") {
  const std::string a = path("e1.csv"), b = path("e2.csv");
  REQUIRE(call({"sample", "--method", "exact", "--n", "8", "--seed", "5", "--output", a}).code == 0);
  REQUIRE(call({"sample", "--method", "exact", "--n", "8", "--seed", "5", "--output", b}).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).rfind("index,y\n", 0) == 0);
  CHECK(count_lines(slurp(a)) == 9);

  KernelParams p;
  const GpSample s = exact_sample(sample_inputs(8, p, 5), p, 5);
  CHECK(cli::read_sample_csv(a) == s.y);

  const json side = json::parse(slurp(a + ".json"));
  CHECK(side.at("method") == "exact");
  CHECK(side.at("seed") == 5);
  CHECK(side.at("params").at("noise_variance") == 0.1);
}

TEST_CASE("sample rff: odd D rejected, streaming equals batch") {
  CHECK(call({"sample", "--method", "rff", "--n", "8", "--D", "3", "--output", path("r.csv")}).code == 2);
  CHECK(call({"sample", "--method", "rff", "--n", "8", "--output", path("r.csv")}).code == 2);

  const std::string streamed = path("rs.csv"), batch = path("rb.csv");
  REQUIRE(call({"sample", "--method", "rff", "--n", "50", "--D", "64", "--seed", "2", "--dim", "2",
                "--output", streamed})
              .code == 0);
  // Saving the inputs forces the in-memory path.
  REQUIRE(call({"sample", "--method", "rff", "--n", "50", "--D", "64", "--seed", "2", "--dim", "2",
                "--save-inputs", path("rb_x.csv"), "--output", batch})
              .code == 0);
  CHECK(slurp(streamed) == slurp(batch));
  // Same draw when the saved inputs are read back.
  REQUIRE(call({"sample", "--method", "rff", "--D", "64", "--seed", "2", "--inputs", path("rb_x.csv"),
                "--output", path("rf.csv")})
              .code == 0);
  CHECK(slurp(path("rf.csv")) == slurp(batch));
  CHECK(call({"sample", "--method", "rff", "--D", "64", "--dim", "3", "--inputs", path("rb_x.csv"),
              "--output", path("rf.csv")})
            .code == 2);
}

TEST_CASE("sample ciq defaults come from the bounds (golden file)") {
  const json golden = json::parse(slurp(GPFORGE_GOLDEN_DIR "/sample_ciq_defaults.json"));
  const std::string out = path("c.csv");
  REQUIRE(call({"sample", "--method", "ciq", "--n", "64", "--seed", "3", "--output", out}).code == 0);
  const json side = json::parse(slurp(out + ".json"));
  CHECK(side.at("fidelity") == golden.at("fidelity"));

  // The frozen values agree with the calculators they came from.
  KernelParams p;
  const double dq = 0.5 * delta_q_cap(0.1, 0.5, p.noise_variance);
  const int Q = ciq_min_quadrature(64, 0.5, p.noise_variance, dq);
  CHECK(golden.at("fidelity").at("delta_Q").get<double>() == doctest::Approx(dq).epsilon(1e-15));
  CHECK(golden.at("fidelity").at("Q") == Q);
  CHECK(golden.at("fidelity").at("J") == ciq_min_iterations(64, 0.5, p.noise_variance, 0.1, dq, Q));
  CHECK(side.at("solver").at("all_converged") == true);

  CHECK(call({"sample", "--method", "ciq", "--n", "64", "--delta-q", "1", "--output", out}).code == 2);
}

TEST_CASE("verify whitens a written sample") {
  const std::string out = path("v.csv");
  REQUIRE(call({"sample", "--method", "pciq", "--n", "128", "--seed", "8", "--dim", "2", "--output", out}).code == 0);
  const Outcome r = call({"verify", out});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j.at("n") == 128);
  CHECK(j.at("critical_value") == 0.461);
  CHECK(j.at("statistic").get<double>() > 0.0);

  // Exact draws from several seeds: a whitened correct sample should rarely be rejected.
  int rejects = 0;
  for (int seed = 0; seed < 20; ++seed) {
    REQUIRE(call({"sample", "--method", "exact", "--n", "64", "--seed", std::to_string(seed),
                  "--output", out})
                .code == 0);
    rejects += json::parse(call({"verify", out}).out).at("reject").get<bool>();
  }
  CHECK(rejects <= 5);

  CHECK(call({"verify", path("missing.csv")}).code == 1);
}

TEST_CASE("experiment from a minimal config") {
  const std::string cfg = path("cfg.json"), prefix = path("exp");
  spit(cfg, R"({"schema_version": 1, "method": "exact", "n_list": [64], "repeats": 50, "base_seed": 4})");
  const auto t0 = std::chrono::steady_clock::now();
  const Outcome r = call({"experiment", "--config", cfg, "--output", prefix});
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(r.code == 0);
  CHECK(seconds < 10.0);
  const std::string csv = slurp(prefix + ".csv");
  CHECK(csv.rfind("n,fidelity,rate,ci_low,ci_high,repeats,method,rescaled", 0) == 0);
  CHECK(count_lines(csv) == 2);

  REQUIRE(call({"experiment", "--config", cfg, "--output", prefix}).code == 0);
  CHECK(slurp(prefix + ".csv") == csv);

  const json report = json::parse(slurp(prefix + ".json"));
  CHECK(report.at("config").at("schema_version") == 1);
  CHECK(report.at("cells").size() == 1);
  const double rate = report.at("cells")[0].at("rate").get<double>();
  CHECK(report.at("cells")[0].at("ci_low").get<double>() <= rate);
  CHECK(rate <= report.at("cells")[0].at("ci_high").get<double>());
}

TEST_CASE("experiment grid, overrides and seeds") {
  const std::string cfg = path("cfg2.json"), prefix = path("exp2");
  spit(cfg, R"({"schema_version": 1, "method": "rff", "n_list": [16, 32, 64], "fidelity_grid": [2, 8],
               "repeats": 10, "base_seed": 1, "output": ")" + prefix + R"("})");
  REQUIRE(call({"experiment", "--config", cfg, "--threads", "2"}).code == 0);
  const std::string base = slurp(prefix + ".csv");
  CHECK(count_lines(base) == 1 + 3 * 2);

  // Flags override file values.
  REQUIRE(call({"experiment", "--config", cfg, "--grid", "2,8,32", "--n", "16"}).code == 0);
  CHECK(count_lines(slurp(prefix + ".csv")) == 1 + 3);

  // GPFORGE_SEED overrides the file's seed; --seed overrides both.
  REQUIRE(call({"experiment", "--config", cfg, "--seed", "7"}).code == 0);
  const std::string seven = slurp(prefix + ".csv");
  ::setenv("GPFORGE_SEED", "7", 1);
  REQUIRE(call({"experiment", "--config", cfg}).code == 0);
  CHECK(slurp(prefix + ".csv") == seven);
  REQUIRE(call({"experiment", "--config", cfg, "--seed", "1"}).code == 0);
  CHECK(slurp(prefix + ".csv") == base);
  ::setenv("GPFORGE_SEED", "seven", 1);
  CHECK(call({"experiment", "--config", cfg}).code == 2);
  ::unsetenv("GPFORGE_SEED");

  // A failing cell is reported, not fatal.
  const Outcome odd = call({"experiment", "--config", cfg, "--grid", "3,4", "--n", "16"});
  CHECK(odd.code == 0);
  CHECK(odd.err.find("warning") != std::string::npos);
  CHECK(slurp(prefix + ".csv").find("nan") != std::string::npos);
}

TEST_CASE("experiment config errors exit 2") {
  const std::string cfg = path("bad.json");
  spit(cfg, R"({"schema_version": 1, "mehtod": "rff", "output": "x"})");
  CHECK(call({"experiment", "--config", cfg}).code == 2);
  spit(cfg, R"({"method": "rff", "output": "x"})");
  CHECK(call({"experiment", "--config", cfg}).code == 2);
  spit(cfg, R"({"schema_version": 2, "output": "x"})");
  CHECK(call({"experiment", "--config", cfg}).code == 2);
  spit(cfg, R"({"schema_version": 1, "repeats": 0, "output": "x"})");
  CHECK(call({"experiment", "--config", cfg}).code == 2);
  spit(cfg, R"({"schema_version": 1, "n_list": "many", "output": "x"})");
  CHECK(call({"experiment", "--config", cfg}).code == 2);
  spit(cfg, "{not json");
  CHECK(call({"experiment", "--config", cfg}).code == 2);
  CHECK(call({"experiment", "--method", "exact"}).code == 2);
}

TEST_CASE("precond-sweep rows and determinism") {
  const Outcome r = call({"precond-sweep", "--n", "50,60,70"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("n,lengthscale,metric\n", 0) == 0);
  CHECK(count_lines(r.out) == 1 + 30);
  CHECK(call({"precond-sweep", "--n", "50,60,70"}).out == r.out);
  CHECK(call({"precond-sweep", "--n", "50,60,70", "--seed", "3"}).out != r.out);
  REQUIRE(call({"precond-sweep", "--n", "40", "--lengthscales", "0.1,1", "--output", path("sw.csv")}).code == 0);
  CHECK(count_lines(slurp(path("sw.csv"))) == 3);
  CHECK(call({"precond-sweep"}).code == 2);
}

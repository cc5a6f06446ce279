#include "gpforge/ciq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "gpforge/elliptic.hpp"
#include "gpforge/rng.hpp"

namespace gpforge {

double QuadratureScheme::inverse_sqrt(double a) const {
  double s = 0.0;
  for (std::size_t q = 0; q < shifts.size(); ++q) s += weights[q] / (shifts[q] + a);
  return s;
}

double QuadratureScheme::sqrt(double a) const { return a * inverse_sqrt(a); }

QuadratureScheme build_quadrature(double lambda_min, double lambda_max, int num_points) {
  if (!(lambda_min > 0.0) || !(lambda_max >= lambda_min) || !std::isfinite(lambda_max))
    throw std::invalid_argument("build_quadrature: need 0 < lambda_min <= lambda_max");
  if (num_points < 1) throw std::invalid_argument("build_quadrature: need at least one node");

  const double k = std::sqrt(lambda_min / lambda_max);
  const double k_prime = elliptic_K_complementary(k);
  const double sqrt_min = std::sqrt(lambda_min);
  const double prefactor = 2.0 * sqrt_min * k_prime / (std::numbers::pi * num_points);

  QuadratureScheme out;
  out.num_points = num_points;
  out.lambda_min = lambda_min;
  out.lambda_max = lambda_max;
  out.shifts.reserve(static_cast<std::size_t>(num_points));
  out.weights.reserve(static_cast<std::size_t>(num_points));
  for (int q = 0; q < num_points; ++q) {
    const double u = (q + 0.5) * k_prime / num_points;
    const JacobiValues v = jacobi_elliptic_complementary(u, k);
    const double sc = v.sn / v.cn;
    out.shifts.push_back(lambda_min * sc * sc);
    out.weights.push_back(prefactor * v.dn / (v.cn * v.cn));
  }
  return out;
}

bool SolveReport::all_converged() const {
  return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; });
}

double SolveReport::max_residual() const {
  double m = 0.0;
  for (double r : residual_norms) m = std::max(m, r);
  return m;
}

namespace {

struct MinresShiftState {
  Eigen::VectorXd x;
  Eigen::VectorXd w;
  Eigen::VectorXd w_prev;
  double cs = -1.0;
  double sn = 0.0;
  double dbar = 0.0;
  double eps = 0.0;
  double phibar = 0.0;
};

ShiftedSolveResult multishift_minres(const MatVec& K, const std::vector<double>& shifts,
                                     const Eigen::Ref<const Eigen::VectorXd>& u,
                                     int max_iterations, double tol) {
  const Eigen::Index n = u.size();
  const std::size_t num_shifts = shifts.size();
  ShiftedSolveResult out;
  SolveReport& rep = out.report;
  rep.residual_norms.assign(num_shifts, 0.0);
  rep.converged.assign(num_shifts, true);
  rep.shift_iterations.assign(num_shifts, 0);

  const double beta1 = u.norm();
  if (beta1 == 0.0) {
    out.solutions.assign(num_shifts, Eigen::VectorXd::Zero(n));
    return out;
  }

  std::vector<MinresShiftState> state(num_shifts);
  for (auto& s : state) {
    s.x = Eigen::VectorXd::Zero(n);
    s.w = Eigen::VectorXd::Zero(n);
    s.w_prev = Eigen::VectorXd::Zero(n);
    s.phibar = beta1;
  }

  Eigen::VectorXd v_prev = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = u / beta1;
  double beta = 0.0;  // coupling between v_prev and v
  Eigen::VectorXd w_next(n);

  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::VectorXd p = K(v);
    const double alpha = v.dot(p);
    p -= alpha * v;
    if (it > 1) p -= beta * v_prev;
    const double beta_next = p.norm();
    rep.iterations_run = it;

    const double scale = std::abs(alpha) + beta;
    const bool invariant = beta_next <= 8.0 * std::numeric_limits<double>::epsilon() * scale;
    const double coupling = invariant ? 0.0 : beta_next;

    std::vector<double> history(num_shifts);
    bool all_done = true;
    for (std::size_t q = 0; q < num_shifts; ++q) {
      MinresShiftState& s = state[q];
      const double shifted_alpha = alpha + shifts[q];
      const double old_eps = s.eps;
      const double delta = s.cs * s.dbar + s.sn * shifted_alpha;
      const double gbar = s.sn * s.dbar - s.cs * shifted_alpha;
      s.eps = s.sn * coupling;
      s.dbar = -s.cs * coupling;
      double gamma = std::hypot(gbar, coupling);
      if (gamma == 0.0) gamma = std::numeric_limits<double>::min();
      s.cs = gbar / gamma;
      s.sn = coupling / gamma;
      const double phi = s.cs * s.phibar;
      s.phibar = s.sn * s.phibar;

      w_next = (v - old_eps * s.w_prev - delta * s.w) / gamma;
      s.w_prev.swap(s.w);
      s.w.swap(w_next);
      s.x += phi * s.w;

      const double rel = std::abs(s.phibar) / beta1;
      history[q] = rel;
      rep.residual_norms[q] = rel;
      rep.shift_iterations[q] = it;
      rep.converged[q] = rel <= tol;
      all_done = all_done && rep.converged[q];
    }
    rep.residual_history.push_back(std::move(history));

    if (invariant) {
      rep.breakdown = true;
      break;
    }
    if (all_done) break;
    v_prev.swap(v);
    v = p / beta_next;
    beta = beta_next;
  }

  out.solutions.reserve(num_shifts);
  for (auto& s : state) out.solutions.push_back(std::move(s.x));
  return out;
}

ShiftedSolveResult preconditioned_cg(const MatVec& K, const std::vector<double>& shifts,
                                     const Eigen::Ref<const Eigen::VectorXd>& u,
                                     int max_iterations, double tol,
                                     const NystromPreconditioner& precond) {
  const Eigen::Index n = u.size();
  if (precond.size() != n) throw std::invalid_argument("shifted_solve: preconditioner size mismatch");
  const std::size_t num_shifts = shifts.size();
  ShiftedSolveResult out;
  SolveReport& rep = out.report;
  rep.residual_norms.assign(num_shifts, 0.0);
  rep.converged.assign(num_shifts, true);
  rep.shift_iterations.assign(num_shifts, 0);
  out.solutions.assign(num_shifts, Eigen::VectorXd::Zero(n));

  const double bnorm = u.norm();
  if (bnorm == 0.0) return out;

  std::vector<std::vector<double>> per_shift_history(num_shifts);
  for (std::size_t q = 0; q < num_shifts; ++q) {
    const double shift = shifts[q];
    const auto inverse = precond.shifted_inverse(shift);
    Eigen::VectorXd& x = out.solutions[q];
    Eigen::VectorXd r = u;
    Eigen::VectorXd z = inverse.apply(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    double rel = 1.0;
    int it = 0;
    while (it < max_iterations) {
      ++it;
      const Eigen::VectorXd Ap = K(p) + shift * p;
      const double pAp = p.dot(Ap);
      if (!(pAp > 0.0)) {
        rep.breakdown = true;
        break;
      }
      const double step = rz / pAp;
      x += step * p;
      r -= step * Ap;
      rel = r.norm() / bnorm;
      per_shift_history[q].push_back(rel);
      if (rel <= tol) break;
      z = inverse.apply(r);
      const double rz_next = r.dot(z);
      p = z + (rz_next / rz) * p;
      rz = rz_next;
    }
    rep.residual_norms[q] = rel;
    rep.converged[q] = rel <= tol;
    rep.shift_iterations[q] = it;
    rep.iterations_run = std::max(rep.iterations_run, it);
  }
  rep.residual_history.resize(static_cast<std::size_t>(rep.iterations_run));
  for (int it = 0; it < rep.iterations_run; ++it) {
    auto& row = rep.residual_history[static_cast<std::size_t>(it)];
    row.resize(num_shifts);
    for (std::size_t q = 0; q < num_shifts; ++q) {
      const auto& h = per_shift_history[q];
      row[q] = h.empty() ? 1.0 : h[std::min(h.size() - 1, static_cast<std::size_t>(it))];
    }
  }
  return out;
}

}  // namespace

ShiftedSolveResult shifted_solve_operator(const MatVec& K, const std::vector<double>& shifts,
                                          const Eigen::Ref<const Eigen::VectorXd>& u, int max_iterations,
                                          double tol, const NystromPreconditioner* precond) {
  if (max_iterations < 1) throw std::invalid_argument("shifted_solve: need at least one iteration");
  if (shifts.empty()) throw std::invalid_argument("shifted_solve: no shifts given");
  if (precond) return preconditioned_cg(K, shifts, u, max_iterations, tol, *precond);
  return multishift_minres(K, shifts, u, max_iterations, tol);
}

ShiftedSolveResult shifted_solve(const Eigen::Ref<const Eigen::MatrixXd>& K,
                                 const std::vector<double>& shifts,
                                 const Eigen::Ref<const Eigen::VectorXd>& u, int max_iterations,
                                 double tol, const NystromPreconditioner* precond) {
  if (K.rows() != K.cols() || K.rows() != u.size())
    throw std::invalid_argument("shifted_solve: operator and vector sizes disagree");
  const MatVec op = [&K](const Eigen::VectorXd& x) -> Eigen::VectorXd { return K * x; };
  return shifted_solve_operator(op, shifts, u, max_iterations, tol, precond);
}

std::pair<double, double> spectral_envelope(const GramMatrix& K) {
  const double n = static_cast<double>(K.size());
  const double upper = K.entries.trace() - (n - 1.0) * K.jitter;
  return {K.jitter, std::max(upper, K.jitter)};
}

CiqResult ciq_sqrt_mv(const GramMatrix& K, const Eigen::Ref<const Eigen::VectorXd>& u,
                      const CiqOptions& options) {
  if (u.size() != K.size()) throw std::invalid_argument("ciq_sqrt_mv: vector length mismatch");
  const auto [lambda_min, lambda_max] = options.spectrum.value_or(spectral_envelope(K));
  if (!(lambda_min > 0.0))
    throw std::invalid_argument("ciq_sqrt_mv: kernel needs positive jitter (or explicit spectrum)");

  CiqResult out;
  out.scheme = build_quadrature(lambda_min, lambda_max, options.quadrature_points);
  ShiftedSolveResult solved = shifted_solve(K.entries, out.scheme.shifts, u,
                                            options.max_iterations, options.tol, options.precond);
  Eigen::VectorXd combined = Eigen::VectorXd::Zero(u.size());
  for (std::size_t q = 0; q < solved.solutions.size(); ++q)
    combined += out.scheme.weights[q] * solved.solutions[q];
  out.value = K.entries * combined;
  out.report = std::move(solved.report);
  return out;
}

CiqSampleResult ciq_sample(const InputData& inputs, const KernelParams& params,
                           const CiqSampleOptions& options, std::uint64_t seed) {
  params.validate();
  if (!(options.eta > 0.0 && options.eta < 1.0))
    throw std::invalid_argument("ciq_sample: eta must lie in (0, 1)");
  const double kernel_noise = options.eta * params.noise_variance;
  const GramMatrix K = gram(inputs, params, kernel_noise);
  const Eigen::Index n = inputs.size();

  std::optional<NystromPreconditioner> precond;
  if (options.precondition) {
    const Eigen::Index rank =
        options.precond_rank > 0 ? std::min(options.precond_rank, n) : default_nystrom_rank(n);
    precond.emplace(nystrom_factor(K, rank));
  }

  NormalGenerator latent(derive_seed(seed, Stream::Latent));
  const Eigen::VectorXd u = latent.vector(n);
  CiqOptions ciq;
  ciq.quadrature_points = options.quadrature_points;
  ciq.max_iterations = options.max_iterations;
  ciq.tol = options.tol;
  ciq.precond = precond ? &*precond : nullptr;
  CiqResult root = ciq_sqrt_mv(K, u, ciq);

  NormalGenerator noise(derive_seed(seed, Stream::Noise));
  const double noise_scale = std::sqrt((1.0 - options.eta) * params.noise_variance);

  CiqSampleResult out;
  out.sample.y = root.value + noise_scale * noise.vector(n);
  out.sample.f = std::move(root.value);
  out.sample.method = options.precondition ? Method::CiqPreconditioned : Method::Ciq;
  out.sample.params = params;
  out.sample.fidelity.eta = options.eta;
  out.sample.fidelity.quadrature_points = options.quadrature_points;
  out.sample.fidelity.iterations = options.max_iterations;
  out.sample.seed = seed;
  out.report = std::move(root.report);
  return out;
}

}  // namespace gpforge

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "gpforge/bounds.hpp"
#include "gpforge/ciq.hpp"
#include "gpforge/elliptic.hpp"
#include "gpforge/kernel.hpp"
#include "gpforge/rng.hpp"

using namespace gpforge;

namespace {

// K(k) = pi/2 sum_m [(2m)! / (2^{2m} (m!)^2)]^2 k^{2m}, fine for moderate k.
double elliptic_K_series(double k) {
  double term = 1.0, sum = 1.0;
  for (int m = 1; m < 400; ++m) {
    const double c = (2.0 * m - 1.0) / (2.0 * m);
    term *= c * c * k * k;
    sum += term;
  }
  return 0.5 * std::numbers::pi * sum;
}

Eigen::MatrixXd dense_sqrt(const Eigen::MatrixXd& K) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K);
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

double max_relative_scalar_error(const QuadratureScheme& s) {
  double worst = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    const double a = s.lambda_min * std::pow(s.lambda_max / s.lambda_min, i / 2000.0);
    worst = std::max(worst, std::abs(s.sqrt(a) - std::sqrt(a)) / std::sqrt(a));
  }
  return worst;
}

}  // namespace

TEST_CASE("complete elliptic integral") {
  CHECK(elliptic_K(0.0) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
  CHECK(elliptic_K(1.0 / std::sqrt(2.0)) == doctest::Approx(1.854074677).epsilon(1e-9));
  CHECK(elliptic_K(1.0 / std::sqrt(2.0)) ==
        doctest::Approx(elliptic_K_series(1.0 / std::sqrt(2.0))).epsilon(1e-12));
  CHECK(elliptic_K(0.3) == doctest::Approx(elliptic_K_series(0.3)).epsilon(1e-13));
  double prev = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double v = elliptic_K(i / 100.0);
    CHECK(v > prev);
    prev = v;
  }
  CHECK_THROWS_AS(elliptic_K(1.0), std::domain_error);
  CHECK_THROWS_AS(elliptic_K(-0.1), std::domain_error);
  // K'(k) = K(sqrt(1 - k^2)).
  CHECK(elliptic_K_complementary(0.6) == doctest::Approx(elliptic_K(0.8)).epsilon(1e-13));
}

TEST_CASE("jacobi elliptic functions") {
  const CnDn zero = jacobi_cn_dn(0.0, 0.7);
  CHECK(zero.cn == doctest::Approx(1.0));
  CHECK(zero.dn == doctest::Approx(1.0));
  for (double t : {-2.0, -0.3, 0.4, 1.1, 3.0}) {
    const CnDn c = jacobi_cn_dn(t, 0.0);
    CHECK(std::abs(c.cn - std::cos(t)) < 1e-12);
    CHECK(std::abs(c.dn - 1.0) < 1e-12);
  }
  for (double k : {0.1, 0.5, 0.9, 0.999}) {
    for (double t = -3.0; t <= 3.0; t += 0.25) {
      const JacobiValues v = jacobi_elliptic(t, k);
      CHECK(std::abs(v.sn * v.sn + v.cn * v.cn - 1.0) < 1e-12);
      CHECK(std::abs(v.dn * v.dn - (1.0 - k * k * (1.0 - v.cn * v.cn))) < 1e-10);
    }
    // sn(K) = 1, cn(K) = 0, dn(K) = sqrt(1 - k^2).
    const JacobiValues q = jacobi_elliptic(elliptic_K(k), k);
    CHECK(std::abs(q.sn - 1.0) < 1e-12);
    CHECK(std::abs(q.cn) < 1e-8);
    CHECK(std::abs(q.dn - std::sqrt(1.0 - k * k)) < 1e-8);
  }
  // Derivative check: d sn / du = cn dn.
  const double k = 0.8, u = 0.7, h = 1e-5;
  const double num = (jacobi_elliptic(u + h, k).sn - jacobi_elliptic(u - h, k).sn) / (2 * h);
  const JacobiValues v = jacobi_elliptic(u, k);
  CHECK(std::abs(num - v.cn * v.dn) < 1e-9);
}

TEST_CASE("quadrature degenerate spectrum") {
  for (int Q : {1, 2, 5, 8}) {
    const QuadratureScheme s = build_quadrature(1.0, 1.0, Q);
    CHECK(std::abs(s.sqrt(1.0) - 1.0) < 1e-10);
    CHECK(s.shifts.size() == static_cast<std::size_t>(Q));
  }
  CHECK_THROWS_AS(build_quadrature(0.0, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(build_quadrature(2.0, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(build_quadrature(1.0, 2.0, 0), std::invalid_argument);
}

TEST_CASE("quadrature nodes are positive, ordered and finite") {
  const QuadratureScheme s = build_quadrature(1e-3, 1e3, 8);
  for (std::size_t q = 0; q < s.shifts.size(); ++q) {
    CHECK(s.shifts[q] > 0.0);
    CHECK(std::isfinite(s.weights[q]));
    CHECK(s.weights[q] > 0.0);
    if (q > 0) CHECK(s.shifts[q] > s.shifts[q - 1]);
  }
}

TEST_CASE("quadrature error follows the exponential rate in Q") {
  // Doubling Q multiplies the error by about exp(-2 Q pi^2 / (log kappa + 3)).
  for (double kappa : {1e2, 1e4, 1e6}) {
    for (int Q : {4, 8}) {
      const double e1 = max_relative_scalar_error(build_quadrature(1e-3, 1e-3 * kappa, Q));
      const double e2 = max_relative_scalar_error(build_quadrature(1e-3, 1e-3 * kappa, 2 * Q));
      const double predicted = std::exp(-2.0 * Q * std::numbers::pi * std::numbers::pi /
                                        (std::log(kappa) + 3.0));
      if (e2 < 1e-13) continue;  // at rounding level
      CHECK(e2 / e1 <= predicted);
    }
  }
}

TEST_CASE("scalar quadrature error at kappa = 1e6, Q = 8 is under the unit-constant bound") {
  // Known failure: the midpoint rule's error constant is about 3.5, so the
  // unit constant chosen for the big-O term is not met on the scalar grid.
  const QuadratureScheme s = build_quadrature(1e-3, 1e3, 8);
  const double bound = ciq_error_bound(8, 1, 1e6, 1e-3, 0.0).eps_q;
  CHECK(max_relative_scalar_error(s) <= bound);
}

TEST_CASE("shifted solve: identity operator") {
  Eigen::VectorXd u(5);
  u << 1, -2, 3, 0.5, 4;
  const auto r = shifted_solve(Eigen::MatrixXd::Identity(5, 5), {3.0}, u, 1, 1e-12);
  CHECK((r.solutions[0] - u / 4.0).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(r.report.iterations_run == 1);
}

TEST_CASE("shifted solve: diagonal closed form and monotone residuals") {
  Eigen::VectorXd d(16), u(16);
  for (int i = 0; i < 16; ++i) {
    d(i) = i + 1.0;
    u(i) = std::sin(1.0 + i);
  }
  const Eigen::MatrixXd K = d.asDiagonal();
  const std::vector<double> shifts{0.1, 1.0, 10.0};
  const auto r = shifted_solve(K, shifts, u, 16, 1e-12);
  for (std::size_t q = 0; q < 3; ++q) {
    const Eigen::VectorXd expected = u.array() / (d.array() + shifts[q]);
    CHECK((r.solutions[q] - expected).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(r.report.converged[q]);
  }
  for (std::size_t it = 1; it < r.report.residual_history.size(); ++it)
    for (std::size_t q = 0; q < 3; ++q)
      CHECK(r.report.residual_history[it][q] <= r.report.residual_history[it - 1][q] * (1 + 1e-12));
  CHECK(r.report.iterations_run <= 16);
}

TEST_CASE("shifted solve agrees with dense solves on an RBF Gram") {
  KernelParams p;
  p.dim = 2;
  const GramMatrix K = gram(sample_inputs(60, p, 4), p, 0.05);
  const Eigen::VectorXd u = NormalGenerator(3).vector(60);
  const std::vector<double> shifts{1e-3, 0.1, 5.0};
  const auto r = shifted_solve(K.entries, shifts, u, 200, 1e-11);
  CHECK(r.report.all_converged());
  for (std::size_t q = 0; q < shifts.size(); ++q) {
    const Eigen::MatrixXd A = K.entries + shifts[q] * Eigen::MatrixXd::Identity(60, 60);
    const Eigen::VectorXd x = A.ldlt().solve(u);
    CHECK((r.solutions[q] - x).norm() <= 1e-8 * x.norm());
  }
  CHECK_THROWS_AS(shifted_solve(K.entries, shifts, u, 0, 1e-8), std::invalid_argument);
  CHECK_THROWS_AS(shifted_solve(K.entries, {}, u, 5, 1e-8), std::invalid_argument);
}

TEST_CASE("breakdown returns the exact iterate") {
  // Two distinct eigenvalues: the Krylov space is invariant after two steps.
  Eigen::VectorXd d(6);
  d << 2, 2, 2, 5, 5, 5;
  Eigen::VectorXd u = Eigen::VectorXd::Ones(6);
  const auto r = shifted_solve(Eigen::MatrixXd(d.asDiagonal()), {0.5}, u, 10, 0.0);
  CHECK(r.report.breakdown);
  CHECK(r.report.iterations_run == 2);
  const Eigen::VectorXd expected = u.array() / (d.array() + 0.5);
  CHECK((r.solutions[0] - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ciq square root on scalar and diagonal spectra") {
  const double c = 2.7;
  const GramMatrix cI{c * Eigen::MatrixXd::Identity(10, 10), c};
  const Eigen::VectorXd u = NormalGenerator(8).vector(10);
  for (int Q : {8, 12}) {
    CiqOptions opt;
    opt.quadrature_points = Q;
    opt.max_iterations = 2;
    const CiqResult r = ciq_sqrt_mv(cI, u, opt);
    CHECK((r.value - std::sqrt(c) * u).cwiseAbs().maxCoeff() < 1e-8);
  }

  const GramMatrix D{Eigen::Vector2d(4.0, 9.0).asDiagonal().toDenseMatrix(), 4.0};
  CiqOptions opt;
  opt.quadrature_points = 12;
  opt.max_iterations = 8;
  const CiqResult r = ciq_sqrt_mv(D, Eigen::Vector2d(1.0, 1.0), opt);
  CHECK(std::abs(r.value(0) - 2.0) < 1e-6);
  CHECK(std::abs(r.value(1) - 3.0) < 1e-6);
  CHECK(r.report.iterations_run <= 8);
}

TEST_CASE("spectral envelope of an RBF Gram") {
  KernelParams p;
  p.variance = 1.5;
  const GramMatrix K = gram(sample_inputs(20, p, 1), p, 0.02);
  const auto [lo, hi] = spectral_envelope(K);
  CHECK(lo == 0.02);
  CHECK(hi == doctest::Approx(20 * 1.5 + 0.02).epsilon(1e-12));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K.entries);
  CHECK(eig.eigenvalues().minCoeff() >= lo - 1e-12);
  CHECK(eig.eigenvalues().maxCoeff() <= hi + 1e-12);
}

TEST_CASE("ciq matches the dense square root on an RBF Gram") {
  KernelParams p;
  p.dim = 2;
  p.noise_variance = 0.1;
  const GramMatrix K = gram(sample_inputs(64, p, 12), p, 0.05);
  const Eigen::VectorXd u = NormalGenerator(77).vector(64);
  const Eigen::VectorXd exact = dense_sqrt(K.entries) * u;
  CiqOptions opt;
  opt.quadrature_points = 20;
  opt.max_iterations = 200;
  opt.tol = 1e-12;
  const CiqResult r = ciq_sqrt_mv(K, u, opt);
  CHECK((r.value - exact).norm() <= 1e-7 * exact.norm());
}

TEST_CASE("more iterations never increase the final residual") {
  KernelParams p;
  p.dim = 2;
  const GramMatrix K = gram(sample_inputs(64, p, 2), p, 0.05);
  const Eigen::VectorXd u = NormalGenerator(5).vector(64);
  double prev = 1e300;
  for (int J : {1, 2, 4, 8, 16, 32, 64}) {
    CiqOptions opt;
    opt.quadrature_points = 6;
    opt.max_iterations = J;
    const double res = ciq_sqrt_mv(K, u, opt).report.max_residual();
    CHECK(res <= prev * (1 + 1e-12));
    prev = res;
  }
}

TEST_CASE("ciq sample: determinism, scalar case and noise split") {
  KernelParams p;
  p.variance = 1.3;
  p.noise_variance = 0.4;
  CiqSampleOptions opt;
  opt.eta = 0.25;
  opt.quadrature_points = 8;
  const InputData X1 = sample_inputs(1, p, 3);
  const CiqSampleResult r = ciq_sample(X1, p, opt, 21);
  const double u = NormalGenerator(derive_seed(21, Stream::Latent))();
  const double xi = NormalGenerator(derive_seed(21, Stream::Noise))();
  const double expected = std::sqrt(1.3 + 0.25 * 0.4) * u + std::sqrt(0.75 * 0.4) * xi;
  CHECK(std::abs(r.sample.y(0) - expected) < 1e-8);
  CHECK(r.sample.method == Method::Ciq);

  const InputData X = sample_inputs(50, p, 3);
  CHECK(ciq_sample(X, p, opt, 4).sample.y == ciq_sample(X, p, opt, 4).sample.y);
  opt.eta = 1.0;
  CHECK_THROWS_AS(ciq_sample(X, p, opt, 4), std::invalid_argument);
}

TEST_CASE("ciq sample covariance matches the noisy Gram") {
  KernelParams p;
  p.noise_variance = 0.25;
  p.dim = 2;
  const InputData X = sample_inputs(4, p, 9);
  const GramMatrix K = gram(X, p, p.noise_variance);
  CiqSampleOptions opt;
  opt.quadrature_points = 16;
  opt.max_iterations = 32;
  const int reps = 20000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(4, 4);
  for (int r = 0; r < reps; ++r) {
    const Eigen::VectorXd y = ciq_sample(X, p, opt, 7000 + r).sample.y;
    acc += y * y.transpose();
  }
  acc /= reps;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double k = K.entries(i, j);
      const double se = std::sqrt((K.entries(i, i) * K.entries(j, j) + k * k) / reps);
      CHECK(std::abs(acc(i, j) - k) < 4.0 * se);
    }
}

TEST_CASE("preconditioned ciq agrees with the unpreconditioned value") {
  KernelParams p;
  p.dim = 2;
  p.noise_variance = 0.1;
  const InputData X = sample_inputs(100, p, 6);
  CiqSampleOptions a;
  a.quadrature_points = 10;
  a.max_iterations = 400;
  a.tol = 1e-12;
  CiqSampleOptions b = a;
  b.precondition = true;
  const CiqSampleResult ra = ciq_sample(X, p, a, 3);
  const CiqSampleResult rb = ciq_sample(X, p, b, 3);
  CHECK(rb.sample.method == Method::CiqPreconditioned);
  CHECK(ra.report.all_converged());
  CHECK(rb.report.all_converged());
  CHECK((ra.sample.y - rb.sample.y).norm() <= 1e-8 * ra.sample.y.norm());
}

#include "kbsindy/error.hpp"
#include "kbsindy/kernel.hpp"
#include "kbsindy/regression.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace kbsindy;

namespace {

struct Instance {
  Eigen::MatrixXd theta;
  Eigen::VectorXd y;
  GramMatrix gram;
};

// Sparse parametric truth plus a smooth Gaussian-kernel component and noise.
Instance random_instance(SplitMix64& rng, Eigen::Index m = 60, Eigen::Index p = 6) {
  Instance in;
  in.theta = test::random_matrix(m, p, rng);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(p);
  truth(0) = 3.0;
  truth(p / 2) = -2.0;
  const Eigen::MatrixXd z = test::random_matrix(m, 1, rng);
  in.gram = build_gram(KernelSpec{GaussianKernel{1.0 + rng.uniform(), 0.5 + rng.uniform()}, {}}, z);
  in.y = in.theta * truth + z.col(0).array().sin().matrix() + test::random_vector(m, rng, 0.1);
  return in;
}

Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  return a.completeOrthogonalDecomposition().pseudoInverse() * b;
}

}  // namespace

TEST_CASE("least squares") {
  SplitMix64 rng(20);
  const Eigen::VectorXd y = test::random_vector(5, rng);
  CHECK(test::rel_diff(least_squares(Eigen::MatrixXd::Identity(5, 5), y), y) < 1e-14);

  const Eigen::MatrixXd theta = test::random_matrix(30, 4, rng);
  const Eigen::VectorXd v = test::random_vector(4, rng);
  CHECK(test::rel_diff(least_squares(theta, theta * v), v) < 1e-10);

  Eigen::MatrixXd dup(30, 5);
  dup << theta, theta.col(1);
  const Eigen::VectorXd rhs = test::random_vector(30, rng);
  CHECK(test::rel_diff(least_squares(dup, rhs), pinv_solve(dup, rhs)) < 1e-8);
}

TEST_CASE("weighted least squares") {
  SplitMix64 rng(21);
  const Eigen::MatrixXd theta = test::random_matrix(20, 3, rng);
  const Eigen::VectorXd y = test::random_vector(20, rng);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(20, 20);
  CHECK(test::rel_diff(weighted_least_squares(theta, y, 4.2 * I), least_squares(theta, y)) < 1e-10);

  const Eigen::MatrixXd L = test::random_matrix(20, 20, rng);
  const Eigen::MatrixXd A = L * L.transpose() + 0.5 * I;
  const Eigen::MatrixXd Ainv = A.inverse();
  const Eigen::VectorXd direct =
      (theta.transpose() * Ainv * theta).partialPivLu().solve(theta.transpose() * Ainv * y);
  CHECK(test::rel_diff(weighted_least_squares(theta, y, A), direct) < 1e-9);

  const Eigen::MatrixXd A5 = L.topLeftCorner(5, 5) * L.topLeftCorner(5, 5).transpose() + I.topLeftCorner(5, 5);
  CHECK(test::rel_diff(weighted_least_squares(Eigen::MatrixXd::Identity(5, 5), y.head(5), A5), y.head(5)) < 1e-10);
}

TEST_CASE("sindy thresholding") {
  SplitMix64 rng(22);
  const Eigen::MatrixXd theta = test::random_matrix(40, 3, rng);
  const Eigen::VectorXd y = theta * Eigen::Vector3d(5, 0, 0) + 0.0 * test::random_vector(40, rng);

  const Eigen::VectorXd noisy = y + test::random_vector(40, rng, 0.5);
  const SparseSolution none = sindy(theta, noisy, 0.0);
  CHECK(none.support.size() == 3);
  CHECK(test::rel_diff(none.coefficients, least_squares(theta, noisy)) < 1e-12);

  const SparseSolution exact = sindy(theta, y, 1.0);
  CHECK(exact.support == std::vector<Eigen::Index>{0});
  CHECK(exact.coefficients(0) == doctest::Approx(5.0).epsilon(1e-8));
  CHECK(exact.coefficients.tail(2).isZero(0.0));
  CHECK(exact.converged);

  const SparseSolution empty = sindy(theta, y, 100.0);
  CHECK(empty.support.empty());
  CHECK(empty.coefficients.isZero(0.0));
  CHECK(empty.converged);
}

TEST_CASE("survivors of a capped run still clear the threshold") {
  SplitMix64 rng(23);
  const Eigen::MatrixXd theta = test::random_matrix(30, 12, rng);
  const Eigen::VectorXd y = test::random_vector(30, rng);
  const SparseSolution s = sindy(theta, y, 0.3, 1);
  for (auto i : s.support) CHECK(std::abs(s.coefficients(i)) >= 0.3);
}

TEST_CASE("zero kernel reduces to sindy on 50 instances") {
  SplitMix64 rng(24);
  for (int t = 0; t < 50; ++t) {
    Instance in = random_instance(rng);
    const GramMatrix zero{Eigen::MatrixXd::Zero(in.y.size(), in.y.size()), in.gram.anchors};
    const double lambda = 0.5 * rng.uniform();
    const KbSindyFit kb = kb_sindy(in.theta, in.y, zero, 0.3, lambda);
    const SparseSolution s = sindy(in.theta, in.y, lambda);
    CHECK(kb.parametric.support == s.support);
    CHECK(kb.parametric.coefficients == s.coefficients);
  }
}

TEST_CASE("lambda = 0 matches the closed form") {
  SplitMix64 rng(25);
  for (int t = 0; t < 20; ++t) {
    Instance in = random_instance(rng);
    const KbSindyFit kb = kb_sindy(in.theta, in.y, in.gram, 0.2, 0.0);
    const auto [xi_p, xi_k] = closed_form_estimate(in.theta, in.y, in.gram.K, 0.2);
    CHECK(test::rel_diff(kb.parametric.coefficients, xi_p) < 1e-9);
    CHECK(test::rel_diff(kb.xi_kernel, xi_k) < 1e-9);
  }
}

TEST_CASE("huge lambda leaves pure kernel regression") {
  SplitMix64 rng(26);
  Instance in = random_instance(rng);
  const KbSindyFit kb = kb_sindy(in.theta, in.y, in.gram, 0.2, 1e6);
  CHECK(kb.parametric.coefficients.isZero(0.0));
  const Eigen::MatrixXd A = in.gram.K + 0.2 * Eigen::MatrixXd::Identity(in.y.size(), in.y.size());
  CHECK(test::rel_diff(kb.xi_kernel, A.ldlt().solve(in.y)) < 1e-9);
}

TEST_CASE("residual identity y - Theta Xi - K xi = eta^2 xi") {
  SplitMix64 rng(27);
  for (int t = 0; t < 20; ++t) {
    Instance in = random_instance(rng);
    const double eta2 = 0.05 + rng.uniform();
    const KbSindyFit kb = kb_sindy(in.theta, in.y, in.gram, eta2, 0.4 * rng.uniform());
    const Eigen::VectorXd r = in.y - in.theta * kb.parametric.coefficients - in.gram.K * kb.xi_kernel;
    CHECK((r - eta2 * kb.xi_kernel).norm() / r.norm() < 1e-8);
  }
}

TEST_CASE("closed form with a zero kernel") {
  SplitMix64 rng(28);
  const Eigen::MatrixXd theta = test::random_matrix(25, 3, rng);
  const Eigen::VectorXd y = test::random_vector(25, rng);
  const auto [xi_p, xi_k] = closed_form_estimate(theta, y, Eigen::MatrixXd::Zero(25, 25), 0.5);
  CHECK(test::rel_diff(xi_p, least_squares(theta, y)) < 1e-10);
  CHECK(test::rel_diff(xi_k, (y - theta * xi_p) / 0.5) < 1e-10);
}

TEST_CASE("closed form minimizes the regularized objective") {
  SplitMix64 rng(29);
  Instance in = random_instance(rng, 30, 4);
  const double eta2 = 0.3;
  const auto [xi_p, xi_k] = closed_form_estimate(in.theta, in.y, in.gram.K, eta2);
  const double best = regularized_objective(in.theta, in.y, in.gram.K, eta2, xi_p, xi_k);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd dp = test::random_vector(xi_p.size(), rng, 1e-3);
    const Eigen::VectorXd dk = test::random_vector(xi_k.size(), rng, 1e-3);
    CHECK(regularized_objective(in.theta, in.y, in.gram.K, eta2, xi_p + dp, xi_k + dk) >= best - 1e-12 * best);
  }

  // Central-difference gradient in every coordinate.
  const double h = 1e-5;
  const double scale = std::max(1.0, best);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < xi_p.size() + xi_k.size(); ++i) {
    Eigen::VectorXd p1 = xi_p, p2 = xi_p, k1 = xi_k, k2 = xi_k;
    if (i < xi_p.size()) {
      p1(i) += h;
      p2(i) -= h;
    } else {
      k1(i - xi_p.size()) += h;
      k2(i - xi_p.size()) -= h;
    }
    const double g = (regularized_objective(in.theta, in.y, in.gram.K, eta2, p1, k1) -
                      regularized_objective(in.theta, in.y, in.gram.K, eta2, p2, k2)) /
                     (2 * h);
    worst = std::max(worst, std::abs(g) / scale);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("kernel weighting hat trace and jitter") {
  SplitMix64 rng(30);
  const Eigen::MatrixXd z = test::random_matrix(40, 2, rng);
  const Eigen::MatrixXd K = build_gram(KernelSpec{GaussianKernel{2.0, 1.0}, {}}, z).K;
  const KernelWeighting w(K, 0.1);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues();
  double spectral = 0.0;
  for (double e : ev) spectral += e / (e + 0.1);
  CHECK(w.hat_trace() == doctest::Approx(spectral).epsilon(1e-8));
  CHECK(KernelWeighting(Eigen::MatrixXd::Zero(5, 5), 1.0).kernel_is_zero());
  CHECK_THROWS_AS(kb_sindy(Eigen::MatrixXd::Ones(4, 1), Eigen::VectorXd::Ones(4),
                           GramMatrix{Eigen::MatrixXd::Identity(5, 5), Eigen::MatrixXd::Zero(5, 1)}, 1.0, 0.0),
                  Error);
}

TEST_CASE("fit_model carries the selected state") {
  SplitMix64 rng(31);
  Dataset d;
  d.times = Eigen::VectorXd::LinSpaced(50, 0, 49);
  d.states = test::random_matrix(50, 2, rng);
  d.aux = test::random_matrix(50, 1, rng);
  d.targets = 2.0 * d.states.col(0) + d.aux.col(0).array().tanh().matrix();
  d.assign_default_names();
  const MonomialLibrary lib = enumerate_monomials(2, 2);
  const KernelSet k{KernelSpec{GaussianKernel{1.0, 1.0}, {}}};
  const ModelEstimate m = fit_model(d, lib, k, 0.01, 0.5);
  CHECK(m.lambda == 0.5);
  CHECK(m.noise_var == 0.01);
  CHECK(m.anchors == d.aux);
  CHECK(m.support() == std::vector<Eigen::Index>{0});
  CHECK(m.xi_parametric(0) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(m.dof == doctest::Approx(1.0 + KernelWeighting(build_gram(k, d.aux).K, 0.01).hat_trace()));
}

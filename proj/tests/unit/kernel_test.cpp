#include "kbsindy/error.hpp"
#include "kbsindy/kernel.hpp"
#include "kbsindy/library.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace kbsindy;

namespace {

KernelSpec gaussian(double scale, double width) { return {GaussianKernel{scale, width}, {}}; }
KernelSpec poly(int first, std::vector<double> scales) { return {PolySumKernel{first, std::move(scales)}, {}}; }

// Explicit feature map: Psi has one column per degree-j monomial, W holds the weights.
Eigen::MatrixXd feature_gram(const Eigen::MatrixXd& z, int j) {
  const MonomialLibrary lib = homogeneous_monomials(static_cast<int>(z.cols()), j);
  const Eigen::MatrixXd psi = build_theta(lib, z);
  Eigen::VectorXd w(static_cast<Eigen::Index>(lib.size()));
  for (std::size_t k = 0; k < lib.size(); ++k) w(static_cast<Eigen::Index>(k)) = static_cast<double>(monomial_weight(lib.monomials[k].exponents));
  return psi * w.asDiagonal() * psi.transpose();
}

}  // namespace

TEST_CASE("eval_kernel hand values") {
  Eigen::VectorXd a(2), b(2);
  a << 1, 1;
  b << 1, -1;
  CHECK(eval_kernel(gaussian(2, 1), a, a) == 2.0);
  CHECK(eval_kernel(poly(2, {1.0}), a, b) == 0.0);
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(1), z2 = Eigen::VectorXd::Constant(1, 2.0);
  CHECK(eval_kernel(gaussian(1, 4), z0, z2) == doctest::Approx(0.367879441171).epsilon(1e-10));
}

TEST_CASE("build_gram basics") {
  SplitMix64 rng(5);
  const Eigen::MatrixXd z1 = test::random_matrix(1, 3, rng);
  const GramMatrix g = build_gram(gaussian(1.5, 2.0), z1);
  REQUIRE(g.K.rows() == 1);
  CHECK(g.K(0, 0) == doctest::Approx(1.5));
  const Eigen::MatrixXd z = test::random_matrix(8, 3, rng);
  CHECK(build_gram(gaussian(0.0, 2.0), z).K.isZero(0.0));
  CHECK(build_gram(poly(3, {0.0, 0.0}), z).K.isZero(0.0));
  Eigen::MatrixXd bad = z;
  bad(2, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(build_gram(gaussian(1, 1), bad), Error);
}

TEST_CASE("polynomial Gram equals the weighted feature-map product") {
  SplitMix64 rng(6);
  for (int n = 1; n <= 3; ++n) {
    for (int j = 1; j <= 4; ++j) {
      const Eigen::MatrixXd z = test::random_matrix(5, n, rng);
      const Eigen::MatrixXd K = build_gram(poly(j, {1.0}), z).K;
      CHECK(test::rel_diff(K, feature_gram(z, j)) < 1e-10);
    }
  }
}

TEST_CASE("Gram matrices are symmetric and PSD") {
  SplitMix64 rng(7);
  const Eigen::MatrixXd z = test::random_matrix(40, 3, rng);
  for (const auto& spec : {gaussian(2.0, 0.5), gaussian(1.0, 50.0), poly(2, {0.3, 0.1, 0.01})}) {
    const Eigen::MatrixXd K = build_gram(spec, z).K;
    CHECK(K == K.transpose());
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues();
    CHECK(ev.minCoeff() >= -1e-10 * K.trace() / 40.0);
  }
}

TEST_CASE("Gaussian width limits") {
  SplitMix64 rng(8);
  const Eigen::MatrixXd z = test::random_matrix(6, 2, rng);
  const Eigen::MatrixXd wide = build_gram(gaussian(3.0, 1e12), z).K;
  CHECK((wide - Eigen::MatrixXd::Constant(6, 6, 3.0)).cwiseAbs().maxCoeff() < 1e-9);
  const Eigen::MatrixXd narrow = build_gram(gaussian(3.0, 1e-6), z).K;
  CHECK((narrow - 3.0 * Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kernel sets add and column selection restricts inputs") {
  SplitMix64 rng(9);
  const Eigen::MatrixXd z = test::random_matrix(7, 3, rng);
  KernelSpec first = gaussian(1.0, 2.0);
  first.columns = {0};
  KernelSpec second = poly(2, {0.5});
  second.columns = {1, 2};
  const Eigen::MatrixXd sum = build_gram(KernelSet{first, second}, z).K;
  const Eigen::MatrixXd a = build_gram(gaussian(1.0, 2.0), z.col(0)).K;
  const Eigen::MatrixXd b = build_gram(poly(2, {0.5}), z.rightCols(2)).K;
  CHECK(test::rel_diff(sum, a + b) < 1e-14);
  CHECK(test::rel_diff(cross_gram(KernelSet{first, second}, z, z), sum) < 1e-14);
}

TEST_CASE("multinomial theorem holds exhaustively for small n and j") {
  SplitMix64 rng(10);
  for (int n = 1; n <= 3; ++n) {
    for (int j = 1; j <= 4; ++j) {
      const Eigen::VectorXd a = test::random_vector(n, rng), b = test::random_vector(n, rng);
      double sum = 0.0;
      for (const auto& m : homogeneous_monomials(n, j).monomials)
        sum += static_cast<double>(monomial_weight(m.exponents)) * m.evaluate(a) * m.evaluate(b);
      CHECK(sum == doctest::Approx(std::pow(a.dot(b), j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("monomial weights") {
  CHECK(monomial_weight({1, 1}) == 2);
  CHECK(monomial_weight({4, 0, 0}) == 1);
  CHECK(monomial_weight({2, 1}) == 3);
  CHECK_THROWS_AS(monomial_weight({0, 0}), Error);
}

TEST_CASE("extracted monomials reproduce the kernel part") {
  SplitMix64 rng(11);
  const Eigen::MatrixXd anchors = test::random_matrix(8, 3, rng);
  const Eigen::VectorXd xi = test::random_vector(8, rng);
  const KernelSpec spec = poly(2, {0.7, 0.2, 0.05});

  for (const auto& [m, c] : extract_monomial_coefficients(spec, anchors, Eigen::VectorXd::Zero(8))) CHECK(c == 0.0);

  const auto coefficients = extract_monomial_coefficients(spec, anchors, xi);
  CHECK(coefficients.size() == 6 + 10 + 15);
  for (int p = 0; p < 20; ++p) {
    const Eigen::VectorXd z = test::random_vector(3, rng);
    double from_monomials = 0.0;
    for (const auto& [m, c] : coefficients) from_monomials += c * m.evaluate(z);
    const double direct = (cross_gram(KernelSet{spec}, z.transpose(), anchors) * xi)(0);
    CHECK(from_monomials == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("single-anchor extraction by hand") {
  Eigen::MatrixXd z(1, 2);
  z << 1, 0;
  const auto c = extract_monomial_coefficients(poly(2, {1.0}), z, Eigen::VectorXd::Constant(1, 2.5));
  for (const auto& [m, v] : c) CHECK(v == (monomial_name(m) == "x1^2" ? 2.5 : 0.0));
  CHECK_THROWS_AS(extract_monomial_coefficients(gaussian(1, 1), z, Eigen::VectorXd::Ones(1)), Error);
}

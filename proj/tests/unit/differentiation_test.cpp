#include "kbsindy/differentiation.hpp"
#include "kbsindy/error.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <numbers>

using namespace kbsindy;

namespace {

double interior_max_error(const Eigen::VectorXd& t, const Eigen::VectorXd& got, auto&& exact, double keep) {
  const double lo = t(0) + 0.5 * (1 - keep) * (t(t.size() - 1) - t(0));
  const double hi = t(t.size() - 1) - 0.5 * (1 - keep) * (t(t.size() - 1) - t(0));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i)
    if (t(i) >= lo && t(i) <= hi) worst = std::max(worst, std::abs(got(i) - exact(t(i))));
  return worst;
}

}  // namespace

TEST_CASE("a line is differentiated exactly for any penalty") {
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(50, 0.0, 1.0);
  for (double mu : {1e-6, 1.0, 1e6}) {
    const SmoothedSeries s = smooth_and_differentiate(t, t, mu);
    CHECK((s.derivatives.array() - 1.0).abs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("spline derivative of sin") {
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(200, 0.0, 2 * std::numbers::pi);
  const Eigen::VectorXd y = t.array().sin();
  const SmoothedSeries s = smooth_and_differentiate(t, y);
  CHECK(interior_max_error(t, s.derivatives, [](double x) { return std::cos(x); }, 0.8) < 1e-3);
}

TEST_CASE("noise variance estimate") {
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(500, 0.0, 10.0);
  double mean = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SplitMix64 rng(derive_seed(1234, seed));
    const Eigen::VectorXd y = t.array().sin() + 0.5 * (0.3 * t.array()).cos();
    const SmoothedSeries s = smooth_and_differentiate(t, y + test::random_vector(500, rng, 0.1));
    CHECK(s.noise_var_hat > 0.005);
    CHECK(s.noise_var_hat < 0.02);
    mean += s.noise_var_hat / 20.0;
  }
  CHECK(mean == doctest::Approx(0.01).epsilon(0.25));
}

TEST_CASE("the smoother is linear at a fixed penalty") {
  SplitMix64 rng(70);
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(80, 0.0, 4.0);
  const Eigen::VectorXd a = test::random_vector(80, rng), b = test::random_vector(80, rng);
  const SmoothedSeries sa = smooth_and_differentiate(t, a, 0.1), sb = smooth_and_differentiate(t, b, 0.1);
  const SmoothedSeries sc = smooth_and_differentiate(t, 2.0 * a - 3.0 * b, 0.1);
  CHECK(test::rel_diff(sc.values, 2.0 * sa.values - 3.0 * sb.values) < 1e-10);
  CHECK(test::rel_diff(sc.derivatives, 2.0 * sa.derivatives - 3.0 * sb.derivatives) < 1e-10);
}

TEST_CASE("penalty limits") {
  SplitMix64 rng(71);
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(40, 0.0, 1.0);
  const Eigen::VectorXd y = test::random_vector(40, rng);
  double last = std::numeric_limits<double>::infinity();
  for (double mu : {1e-4, 1e-7, 1e-10, 1e-13}) {
    const double r = (smooth_and_differentiate(t, y, mu).values - y).norm();
    CHECK(r < last);
    last = r;
  }
  CHECK(last < 1e-5 * y.norm());
  Eigen::MatrixXd X(40, 2);
  X << Eigen::VectorXd::Ones(40), t;
  const Eigen::VectorXd line = X * X.colPivHouseholderQr().solve(y);
  CHECK((smooth_and_differentiate(t, y, 1e12).values - line).norm() < 1e-4 * y.norm());
}

TEST_CASE("segments are smoothed independently") {
  const Eigen::VectorXd t = (Eigen::VectorXd(8) << 0, 1, 2, 3, 10, 14, 18, 22).finished();
  const Eigen::VectorXd y = t.array().square();
  const SmoothedSeries s = smooth_segments(t, y, {0, 4});
  const SmoothedSeries second = smooth_and_differentiate(t.tail(4), y.tail(4));
  CHECK(test::rel_diff(s.values.tail(4), second.values) < 1e-12);
  CHECK_THROWS_AS(smooth_and_differentiate(t.head(3), y.head(3)), Error);
}

TEST_CASE("finite differences") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(21, -1.0, 1.0);
  const Eigen::VectorXd q = (3.0 * x.array().square() - x.array() + 2.0).matrix();
  CHECK((finite_difference(x, q, 2).array() - 6.0).abs().maxCoeff() < 1e-9);
  CHECK((finite_difference(x, (4.0 * x.array() - 1).matrix(), 1).array() - 4.0).abs().maxCoeff() < 1e-12);
  CHECK((finite_difference(x, q, 1) - (6.0 * x.array() - 1.0).matrix()).cwiseAbs().maxCoeff() < 1e-9);

  const Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(1000, 0.0, 2 * std::numbers::pi);
  const Eigen::VectorXd d2 = finite_difference(g, g.array().sin().matrix(), 2);
  CHECK(interior_max_error(g, d2, [](double v) { return -std::sin(v); }, 0.98) < 1e-4);

  Eigen::VectorXd uneven = x;
  uneven(5) += 0.01;
  try {
    finite_difference(uneven, q, 1);
    FAIL("expected unsupported grid");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unsupported);
  }
}

TEST_CASE("field differences along either axis") {
  const Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(11, 0.0, 1.0);
  Eigen::MatrixXd f(11, 11);
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) f(i, j) = g(i) * g(i) + 3.0 * g(j);
  CHECK((finite_difference(g, f, 1, Axis::space).array() - 3.0).abs().maxCoeff() < 1e-10);
  CHECK((finite_difference(g, f, 2, Axis::time).array() - 2.0).abs().maxCoeff() < 1e-9);
}

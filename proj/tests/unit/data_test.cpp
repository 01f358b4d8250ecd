#include "kbsindy/data.hpp"
#include "kbsindy/error.hpp"
#include "kbsindy/systems.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <fstream>

using namespace kbsindy;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

Dataset ramp(Eigen::Index m) {
  Dataset d;
  d.times = Eigen::VectorXd::LinSpaced(m, 0.0, static_cast<double>(m - 1));
  d.states = d.times;
  d.aux.resize(m, 0);
  d.targets = 2.0 * d.times;
  d.assign_default_names();
  return d;
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::io;
}

}  // namespace

TEST_CASE("load_csv reads a minimal file") {
  const auto dir = test::scratch_dir("data_min");
  write_text(dir / "a.csv", "t,x1,y\n0,1,2\n1,2,3\n2,3,4\n");
  const Dataset d = load_csv(dir / "a.csv", {"t", {"x1"}, "y", {}});
  CHECK(d.size() == 3);
  CHECK(d.state_dim() == 1);
  CHECK(d.aux_dim() == 0);
  CHECK(d.targets(2) == 4.0);
}

TEST_CASE("duplicated timestamps are rejected") {
  const auto dir = test::scratch_dir("data_dup");
  write_text(dir / "a.csv", "t,x1,y\n0,1,2\n1,2,3\n1,3,4\n");
  CHECK(kind_of([&] { load_csv(dir / "a.csv", {"t", {"x1"}, "y", {}}); }) == ErrorKind::validation);
}

TEST_CASE("missing column and bad cells map to error kinds") {
  const auto dir = test::scratch_dir("data_bad");
  write_text(dir / "a.csv", "t,x1,y\n0,1,2\n1,abc,3\n");
  CHECK(kind_of([&] { load_csv(dir / "a.csv", {"t", {"x2"}, "y", {}}); }) == ErrorKind::schema);
  CHECK(kind_of([&] { load_csv(dir / "a.csv", {"t", {"x1"}, "y", {}}); }) == ErrorKind::parse);
  CHECK(kind_of([&] { load_csv(dir / "nope.csv", {"t", {"x1"}, "y", {}}); }) == ErrorKind::io);
}

TEST_CASE("a Lorenz export round-trips bit for bit") {
  LorenzConfig c;
  c.h = TanhH{};
  c.noise = NoiseSpec::snr(60.0, 5);
  c.seed = 9;
  const Dataset d = simulate_lorenz(c).dataset;
  REQUIRE(d.size() == 1000);
  const auto dir = test::scratch_dir("data_roundtrip");
  save_csv(dir / "l.csv", d);
  const Dataset back = load_csv(dir / "l.csv", schema_of(d));
  CHECK(back.times == d.times);
  CHECK(back.states == d.states);
  CHECK(back.aux == d.aux);
  CHECK(back.targets == d.targets);
  CHECK(back.state_names == d.state_names);
  CHECK(back.aux_names == d.aux_names);
}

TEST_CASE("split_contiguous block sizes") {
  Split s = split_contiguous(ramp(2000), {0.5, 0.5, 0.0});
  CHECK(s.train.size() == 1000);
  REQUIRE(s.validation);
  CHECK(s.validation->size() == 1000);
  CHECK(s.validation->times(0) == 1000.0);
  CHECK_FALSE(s.test);

  s = split_contiguous(ramp(10), {1.0, 0.0, 0.0});
  CHECK(s.train.size() == 10);
  CHECK_FALSE(s.validation);

  s = split_contiguous(ramp(7), {0.5, 0.25, 0.25});
  CHECK(s.train.size() == 4);
  CHECK(s.validation->size() == 1);
  CHECK(s.test->size() == 2);
  CHECK(s.test->times(0) == 5.0);

  CHECK(kind_of([] { split_contiguous(ramp(10), {0.5, 0.2, 0.2}); }) == ErrorKind::config);
}

TEST_CASE("prediction_fit") {
  Eigen::VectorXd y(2), yh(2);
  y << 3, 4;
  yh << 3, 0;
  CHECK(prediction_fit(y, y) == doctest::Approx(100.0));
  CHECK(prediction_fit(y, Eigen::VectorXd::Zero(2)) == doctest::Approx(0.0));
  CHECK(prediction_fit(y, yh) == doctest::Approx(20.0));
  CHECK(kind_of([] { prediction_fit(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3)); }) ==
        ErrorKind::undefined_metric);
}

TEST_CASE("prediction_fit is permutation invariant and continuous at a perfect fit") {
  SplitMix64 rng(3);
  const Eigen::VectorXd y = test::random_vector(50, rng);
  const Eigen::VectorXd v = test::random_vector(50, rng);
  const Eigen::VectorXd yh = y + 0.3 * v;
  Eigen::PermutationMatrix<Eigen::Dynamic> p(50);
  p.setIdentity();
  for (int i = 49; i > 0; --i) p.applyTranspositionOnTheRight(i, static_cast<int>(rng.next() % (i + 1)));
  const Eigen::VectorXd py = p * y, pyh = p * yh;
  CHECK(prediction_fit(py, pyh) == doctest::Approx(prediction_fit(y, yh)).epsilon(1e-12));
  double last = prediction_fit(y, yh);
  for (double eps : {1e-1, 1e-3, 1e-6}) {
    const double f = prediction_fit(y, y + eps * v);
    CHECK(f >= last);
    last = f;
  }
  CHECK(last == doctest::Approx(100.0).epsilon(1e-4));
}

TEST_CASE("validate catches shape and ordering problems") {
  Dataset d = ramp(5);
  d.targets.resize(4);
  CHECK(kind_of([&] { d.validate(); }) == ErrorKind::shape);
  d = ramp(5);
  d.states(2, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(kind_of([&] { d.validate(); }) == ErrorKind::validation);
}

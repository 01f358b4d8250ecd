#include "kbsindy/error.hpp"
#include "kbsindy/model_io.hpp"
#include "kbsindy/predictor.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace kbsindy;

TEST_CASE("models survive a save/load cycle exactly") {
  SplitMix64 rng(80);
  Dataset d;
  d.times = Eigen::VectorXd::LinSpaced(30, 0, 29);
  d.states = test::random_matrix(30, 2, rng);
  d.aux = test::random_matrix(30, 2, rng);
  d.targets = d.states.col(0) + d.aux.col(1).array().sin().matrix();
  d.assign_default_names();
  KernelSpec g{GaussianKernel{1.3, 0.7}, {1}};
  KernelSpec p{PolySumKernel{3, {0.01, 0.001}}, {}};
  const ModelEstimate m = fit_model(d, enumerate_monomials(2, 2), KernelSet{g, p}, 0.05, 0.3);

  const auto dir = test::scratch_dir("model_io");
  save_model(dir / "m.json", m);
  const ModelEstimate back = load_model(dir / "m.json");
  CHECK(back.library.monomials == m.library.monomials);
  CHECK(back.xi_parametric == m.xi_parametric);
  CHECK(back.xi_kernel == m.xi_kernel);
  CHECK(back.anchors == m.anchors);
  CHECK(back.noise_var == m.noise_var);
  CHECK(back.lambda == m.lambda);
  CHECK(back.dof == m.dof);
  const Eigen::MatrixXd xs = test::random_matrix(5, 2, rng), zs = test::random_matrix(5, 2, rng);
  CHECK(predict_batch(back, xs, zs) == predict_batch(m, xs, zs));
  CHECK(model_to_json(back).dump() == model_to_json(m).dump());
}

TEST_CASE("kernel and library JSON") {
  const KernelSpec k = kernel_from_json(nlohmann::ordered_json::parse(R"({"family":"gaussian","scale":2,"width":3})"));
  REQUIRE(k.is_gaussian());
  CHECK(std::get<GaussianKernel>(k.family).width == 3.0);
  CHECK_THROWS_AS(kernel_from_json(nlohmann::ordered_json::parse(R"({"family":"laplace"})")), Error);
  const MonomialLibrary lib =
      library_from_json(nlohmann::ordered_json::parse(R"({"n":3,"order":2,"include_constant":false})"));
  CHECK(lib.size() == 9);
  CHECK(library_from_json(library_to_json(lib)).monomials == lib.monomials);
}

TEST_CASE("unreadable or mismatched model files") {
  const auto dir = test::scratch_dir("model_bad");
  try {
    load_model(dir / "missing.json");
    FAIL("expected io error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
  }
  auto j = nlohmann::ordered_json::parse(R"({"schema_version": 99})");
  CHECK_THROWS_AS(model_from_json(j), Error);
}

#include "kbsindy/error.hpp"
#include "kbsindy/experiment.hpp"
#include "kbsindy/model_io.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace kbsindy;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

json small_lorenz(int runs = 2) {
  json j = json::parse(R"({
    "schema_version": 1, "name": "small", "runs": 2, "seed": 5,
    "system": {"kind": "lorenz", "h": {"kind": "tanh", "amplitude": 10, "gain": 1},
               "h_target": "input", "target_state": 1, "samples": 400, "snr": 60},
    "library": {"order": 2},
    "kernel": [{"family": "gaussian", "scale": [0, 10, 100], "width": [1, 3]}],
    "selection": {"strategy": "bic", "lambda_grid": {"logspace": [-1, 0, 3]}, "noise_var": "injected"},
    "split": [0.75, 0.25, 0],
    "baselines": [{"name": "sindy", "order": 2}]
  })");
  j["runs"] = runs;
  return j;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every regular file under root, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << s;
}

void hand_bundle(const fs::path& dir, const std::string& estimates) {
  write_text(dir / "summary.json",
             R"({"schema_version":1,"run_results":[{"seed":7,"kbsindy":{"validation_fit":90.0}}]})");
  write_text(dir / "run_000" / "coefficients.csv", "name,estimate,true\n" + estimates);
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

TEST_CASE("coefficient error over the union of names") {
  const std::vector<std::pair<std::string, double>> truth{{"x1", 3.0}, {"x1^2", -3.0}};
  const Eigen::Vector3d est(3.0, -2.0, 0.0);
  CHECK(coefficient_error(truth, {"x1", "x1^2", "x1^3"}, est) == doctest::Approx(1.0));
  CHECK(coefficient_error(truth, {"x1"}, Eigen::VectorXd::Constant(1, 3.0)) == doctest::Approx(3.0));
}

TEST_CASE("hand-built bundles compare by coefficient error") {
  const auto dir = test::scratch_dir("compare_hand");
  hand_bundle(dir / "a", "x1,3,3\nx1^2,-2,-3\nx1^3,0,0\n");
  hand_bundle(dir / "b", "x1,3,3\nx1^2,-3,-3\nx1^3,0,0\n");
  const Comparison c = compare_runs(dir / "a", "kbsindy", dir / "b", "kbsindy");
  REQUIRE(c.rows.size() == 1);
  CHECK(c.rows[0].error_a == doctest::Approx(1.0));
  CHECK(c.rows[0].error_b == 0.0);
  CHECK(c.wins_b == 1);
  const Comparison self = compare_runs(dir / "a", "kbsindy", dir / "a", "kbsindy");
  CHECK(self.rows[0].error_a == self.rows[0].error_b);
  CHECK(self.ties == 1);

  write_text(dir / "c" / "summary.json", R"({"run_results":[{"seed":7},{"seed":8}]})");
  CHECK(kind_of([&] { compare_runs(dir / "a", "kbsindy", dir / "c", "kbsindy"); }) == ErrorKind::comparison);
  write_text(dir / "d" / "summary.json", R"({"run_results":[{"seed":9}]})");
  CHECK(kind_of([&] { compare_runs(dir / "a", "kbsindy", dir / "d", "kbsindy"); }) == ErrorKind::comparison);
}

TEST_CASE("config validation") {
  json j = small_lorenz();
  j["schema_version"] = 7;
  CHECK(kind_of([&] { config_from_json(j); }) == ErrorKind::schema);
  j = small_lorenz();
  j["selection"]["strategy"] = "holdout";
  j["split"] = {1, 0, 0};
  CHECK(kind_of([&] { config_from_json(j); }) == ErrorKind::config);
  j = small_lorenz();
  j["selection"]["lambda_grid"] = json::array();
  CHECK(kind_of([&] { config_from_json(j); }) == ErrorKind::config);
  j = small_lorenz();
  j.erase("library");
  CHECK_THROWS_AS(config_from_json(j), Error);

  const ExperimentConfig c = config_from_json(small_lorenz());
  CHECK(c.search.lambda_grid.size() == 3);
  CHECK(c.search.lambda_grid.front() == doctest::Approx(0.1));
  const ExperimentConfig again = config_from_json(config_to_json(c));
  CHECK(config_to_json(again).dump() == config_to_json(c).dump());
}

TEST_CASE("every preset parses") {
  const auto names = preset_names();
  CHECK(names.size() >= 14);
  for (const auto& n : names) {
    const ExperimentConfig c = config_from_json(preset_config(n));
    CHECK(c.name == n);
  }
  CHECK(kind_of([] { preset_config("nope"); }) == ErrorKind::config);
}

TEST_CASE("small Lorenz experiment end to end") {
  ExperimentConfig c = config_from_json(small_lorenz());
  const auto dir = test::scratch_dir("exp_small");
  c.output = dir / "bundle";
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.runs.size() == 2);
  for (const auto& run : r.runs) {
    const json& m = run.kbsindy.metrics;
    CHECK(m.at("support_exact").get<bool>());
    CHECK(m.at("residual_identity").get<double>() < 1e-8);
    CHECK(run.baselines.size() == 1);
  }
  CHECK(r.runs[0].seed != r.runs[1].seed);
  for (const char* f : {"config.json", "summary.json", "run_000/model.json", "run_000/scores.csv",
                        "run_000/coefficients.csv", "run_000/h_grid.csv", "run_000/train.csv",
                        "run_000/validation.csv", "run_001/baselines/sindy/model.json"})
    CHECK(fs::exists(c.output / f));
  CHECK(verify_bundle(c.output).empty());

  // A tampered estimate is caught.
  std::string coeffs = slurp(c.output / "run_001" / "coefficients.csv");
  coeffs.replace(coeffs.find('\n') + 1, 0, "x9,1,0\n");
  write_text(c.output / "run_001" / "coefficients.csv", coeffs);
  CHECK_FALSE(verify_bundle(c.output).empty());
}

TEST_CASE("same seed gives byte-identical bundles") {
  const auto dir = test::scratch_dir("exp_determinism");
  ExperimentConfig c = config_from_json(small_lorenz(1));
  c.output = dir / "a";
  run_experiment(c);
  c.output = dir / "b";
  run_experiment(c);
  CHECK(snapshot(dir / "a") == snapshot(dir / "b"));
}

TEST_CASE("a zero scale grid is pure Sindy") {
  json j = small_lorenz(1);
  j["kernel"][0]["scale"] = {0};
  j.erase("baselines");
  const ExperimentResult with_zero = run_experiment(config_from_json(j));
  j.erase("kernel");
  const ExperimentResult plain = run_experiment(config_from_json(j));
  CHECK(with_zero.runs[0].kbsindy.model.xi_parametric == plain.runs[0].kbsindy.model.xi_parametric);
  CHECK(with_zero.runs[0].kbsindy.metrics.at("lambda") == plain.runs[0].kbsindy.metrics.at("lambda"));
}

TEST_CASE("csv systems load relative to the config") {
  const auto dir = test::scratch_dir("exp_csv");
  const Simulation s = simulate_system(small_lorenz().at("system"), 3);
  save_csv(dir / "data.csv", s.dataset);
  json j = small_lorenz(1);
  j["system"] = {{"kind", "csv"}, {"path", "data.csv"}, 
                 {"schema", {{"time", "t"}, {"states", {"x1", "x2", "x3"}}, {"target", "dx2"}, {"aux", {"u"}}}},
                 {"noise_var", s.target_noise_var}};
  j.erase("baselines");
  const ExperimentConfig c = config_from_json(j, dir);
  const ExperimentResult r = run_experiment(c);
  CHECK(r.runs[0].kbsindy.model.support().size() == 3);
  j["system"]["path"] = "missing.csv";
  CHECK(kind_of([&] { config_from_json(j, dir); }) == ErrorKind::config);
}

TEST_CASE("order norms split the fitted function by degree") {
  NfirConfig nc;
  nc.steps = 300;
  nc.noise_sd = 0.1;
  const Simulation sim = simulate_nfir(nc);
  const KernelSpec poly{PolySumKernel{3, {0.0, 1e-4, 0.0}}, {}};
  const ModelEstimate m = fit_model(sim.dataset, enumerate_monomials(10, 2), KernelSet{poly}, 0.01, 0.05);
  const auto norms = order_component_norms(m, sim.dataset, 5);
  REQUIRE(norms.size() == 5);
  CHECK(norms[2] == 0.0);
  CHECK(norms[4] == 0.0);
  const Eigen::VectorXd k4 = build_gram(poly, sim.dataset.aux).K * m.xi_kernel;
  CHECK(norms[3] == doctest::Approx(k4.norm()).epsilon(1e-10));
  const Eigen::MatrixXd theta = build_theta(m.library, sim.dataset.states);
  Eigen::VectorXd first = Eigen::VectorXd::Zero(300);
  for (Eigen::Index t = 0; t < 10; ++t) first += theta.col(t) * m.xi_parametric(t);
  CHECK(norms[0] == doctest::Approx(first.norm()).epsilon(1e-10));
}

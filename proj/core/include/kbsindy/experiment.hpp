#pragma once

#include "kbsindy/data.hpp"
#include "kbsindy/kernel.hpp"
#include "kbsindy/library.hpp"
#include "kbsindy/regression.hpp"
#include "kbsindy/selection.hpp"
#include "kbsindy/systems.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kbsindy {

inline constexpr int kConfigSchemaVersion = 1;

/// A pure-Sindy comparison model fitted alongside KB-Sindy on the same split.
struct BaselineSpec {
  std::string name;
  int order = 1;
  std::vector<int> degrees;  ///< keep only these monomial degrees; empty keeps 1..order
  bool include_constant = false;
  std::vector<double> lambda_grid;  ///< empty: reuse the experiment's grid
};

/// Declarative description of one benchmark; see config_from_json for the text form.
struct ExperimentConfig {
  std::string name;
  nlohmann::ordered_json system;  ///< {"kind": lorenz | gene | calcium | logistic_ar | nfir | csv, ...}
  int runs = 1;
  std::uint64_t seed = 1;

  int library_order = 1;
  std::vector<int> library_degrees;
  bool include_constant = false;

  std::string aux_source = "system";  ///< or "states": the kernel reads the library states
  std::string derivatives = "exact";  ///< or "spline": smooth states and differentiate
  int derivative_state = 0;           ///< state differentiated when derivatives = spline

  KernelSet kernel;
  SearchSpace search;
  std::string search_kind = "grid";     ///< or "two_stage"
  std::string noise_var = "injected";   ///< eta^2 source: injected | smoother | value
  double noise_var_value = 0.0;
  std::string bic_noise = "noise_var";  ///< eta-hat^2 in BIC: noise_var | residual
  bool refine = false;
  int max_iter = kDefaultMaxIter;

  std::array<double, 3> split{1.0, 0.0, 0.0};
  std::string test = "none";  ///< or "resimulate": independent noiseless run

  std::vector<BaselineSpec> baselines;
  std::optional<double> guided_refit_ratio;  ///< refit Sindy on orders whose norm >= ratio * max
  bool order_norms = false;
  int h_grid_points = 200;

  std::filesystem::path output;
};

ExperimentConfig config_from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir = {});
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Names of the bundled experiment configurations.
std::vector<std::string> preset_names();
/// A bundled configuration in the text form accepted by config_from_json.
nlohmann::ordered_json preset_config(const std::string& name);

/// Runs the simulator named by a system block. `test_copy` asks for the
/// independent noiseless trajectory used as a test set.
Simulation simulate_system(const nlohmann::ordered_json& system, std::uint64_t seed, bool test_copy = false);

struct FittedModel {
  std::string name;
  ModelEstimate model;
  SearchResult search;
  nlohmann::ordered_json metrics;
};

struct RunResult {
  std::uint64_t seed = 0;
  Simulation simulation;
  Split split;
  double noise_var = 0.0;
  FittedModel kbsindy;
  std::vector<FittedModel> baselines;
  nlohmann::ordered_json summary;
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  nlohmann::ordered_json summary;
};

/// Simulates, identifies, selects and scores every Monte-Carlo run. Writes the
/// report bundle when config.output is set.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// sqrt(sum (true - estimate)^2) over the union of named terms; missing terms count as 0.
double coefficient_error(const std::vector<std::pair<std::string, double>>& truth,
                         const std::vector<std::string>& names, const Eigen::Ref<const Eigen::VectorXd>& estimate);

/// Norm over the given points of the order-j part of f-hat, j = 1 .. max_order:
/// degree-j library terms plus the order-j polynomial-kernel component.
std::vector<double> order_component_norms(const ModelEstimate& model, const Dataset& data, int max_order);

struct ComparisonRow {
  int run = 0;
  double error_a = 0.0, error_b = 0.0;
  double fit_a = 0.0, fit_b = 0.0;  ///< NaN when the bundle has no fit
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  int wins_a = 0, wins_b = 0, ties = 0;  ///< by coefficient error
};

/// Pairs runs of two bundles. `model` is "kbsindy" or a baseline name.
Comparison compare_runs(const std::filesystem::path& bundle_a, const std::string& model_a,
                        const std::filesystem::path& bundle_b, const std::string& model_b);
void write_comparison(const std::filesystem::path& path, const Comparison& comparison);

/// Recomputes summary numbers from the per-run artifacts; returns one message
/// per disagreement (empty when the bundle is consistent).
std::vector<std::string> verify_bundle(const std::filesystem::path& bundle);

}  // namespace kbsindy

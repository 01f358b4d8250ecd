// kbsindy command line: simulate, identify, search, compare, report.

#include "kbsindy/error.hpp"
#include "kbsindy/experiment.hpp"
#include "kbsindy/model_io.hpp"
#include "kbsindy/predictor.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace kbsindy;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json load_config_json(const std::string& config, const std::string& preset) {
  if (!config.empty() && !preset.empty()) throw Error(ErrorKind::config, "give either --config or --preset, not both");
  if (!preset.empty()) return preset_config(preset);
  if (config.empty()) throw Error(ErrorKind::config, "one of --config or --preset is required");
  return read_json(config);
}

ExperimentConfig resolve_config(const std::string& config, const std::string& preset, std::optional<int> runs,
                                std::optional<std::uint64_t> seed) {
  json j = load_config_json(config, preset);
  if (runs) j["runs"] = *runs;
  if (seed) j["seed"] = *seed;
  const fs::path base = config.empty() ? fs::path{} : fs::path(config).parent_path();
  return config_from_json(j, base.empty() ? fs::path(".") : base);
}

json coefficient_json(const ModelEstimate& model) {
  json out = json::object();
  const auto names = model.library.names();
  for (auto i : model.support()) out[names[static_cast<std::size_t>(i)]] = model.xi_parametric(i);
  return out;
}

struct DataOptions {
  std::string path, time = "t", target = "y", states, aux;
};

void add_data_options(CLI::App* app, DataOptions& d) {
  app->add_option("--data", d.path, "CSV file with one row per sample")->required()->check(CLI::ExistingFile);
  app->add_option("--time", d.time, "time column")->capture_default_str();
  app->add_option("--target", d.target, "target column")->capture_default_str();
  app->add_option("--states", d.states, "comma-separated library state columns")->required();
  app->add_option("--aux", d.aux, "comma-separated kernel input columns");
}

Dataset load_data(const DataOptions& d) {
  return load_csv(d.path, CsvSchema{d.time, split_list(d.states), d.target, split_list(d.aux)});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel-based sparse identification of nonlinear dynamics"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate a system block and write CSV plus a JSON sidecar");
  std::string sim_config, sim_preset, sim_out;
  std::uint64_t sim_seed = 1;
  bool sim_test_copy = false;
  sim->add_option("--config", sim_config, "experiment config or bare system block (JSON)");
  sim->add_option("--preset", sim_preset, "bundled experiment whose system block is used");
  sim->add_option("--seed", sim_seed, "simulation seed")->capture_default_str();
  sim->add_flag("--noiseless", sim_test_copy, "produce the noiseless test-set variant");
  sim->add_option("--out", sim_out, "output CSV path")->required();

  // identify
  auto* ident = app.add_subcommand("identify", "Fit one KB-Sindy model with fixed hyperparameters");
  DataOptions id_data;
  add_data_options(ident, id_data);
  int id_order = 2;
  bool id_constant = false;
  double id_lambda = 0.0, id_noise = 1.0;
  int id_max_iter = kDefaultMaxIter;
  std::vector<std::string> id_kernels;
  std::string id_out;
  ident->add_option("--order", id_order, "monomial library order")->capture_default_str();
  ident->add_flag("--constant", id_constant, "include the constant term");
  ident->add_option("--lambda", id_lambda, "sparsity threshold")->capture_default_str();
  ident->add_option("--noise-var", id_noise, "noise variance eta^2 in A = K + eta^2 I")->capture_default_str();
  ident->add_option("--max-iter", id_max_iter, "thresholding refit limit")->capture_default_str();
  ident->add_option("--kernel", id_kernels, "kernel component as JSON, repeatable");
  ident->add_option("--out", id_out, "write the model JSON here");

  // search
  auto* search = app.add_subcommand("search", "Select hyperparameters for the first run of an experiment");
  std::string se_config, se_preset, se_out;
  std::optional<std::uint64_t> se_seed;
  search->add_option("--config", se_config, "experiment config (JSON)");
  search->add_option("--preset", se_preset, "bundled experiment name");
  search->add_option("--seed", se_seed, "override the experiment seed");
  search->add_option("--out", se_out, "directory for model.json and scores.csv")->required();

  // compare
  auto* cmp = app.add_subcommand("compare", "Pair the runs of two report bundles");
  std::string cmp_a, cmp_b, cmp_model_a = "kbsindy", cmp_model_b = "kbsindy", cmp_out;
  cmp->add_option("bundle_a", cmp_a, "first bundle directory")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("bundle_b", cmp_b, "second bundle directory")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("--model-a", cmp_model_a, "model in bundle A: kbsindy or a baseline name")->capture_default_str();
  cmp->add_option("--model-b", cmp_model_b, "model in bundle B")->capture_default_str();
  cmp->add_option("--out", cmp_out, "comparison CSV path");

  // report
  auto* rep = app.add_subcommand("report", "Run an experiment and write its report bundle");
  std::string rep_config, rep_preset, rep_out, rep_verify, rep_dump;
  std::optional<int> rep_runs;
  std::optional<std::uint64_t> rep_seed;
  bool rep_list = false;
  rep->add_option("--config", rep_config, "experiment config (JSON)");
  rep->add_option("--preset", rep_preset, "bundled experiment name");
  rep->add_option("--out", rep_out, "bundle directory");
  rep->add_option("--runs", rep_runs, "override the Monte-Carlo run count");
  rep->add_option("--seed", rep_seed, "override the experiment seed");
  rep->add_option("--verify", rep_verify, "recompute an existing bundle's summary from its artifacts");
  rep->add_flag("--list-presets", rep_list, "print bundled experiment names");
  rep->add_option("--dump-preset", rep_dump, "print a bundled config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", {{"kind", "usage_error"}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  }

  try {
    if (sim->parsed()) {
      const json j = load_config_json(sim_config, sim_preset);
      const json system = j.contains("system") ? j.at("system") : j;
      const Simulation s = simulate_system(system, sim_seed, sim_test_copy);
      fs::path out = sim_out;
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      save_csv(out, s.dataset);
      json sidecar{{"seed", sim_seed}, {"noiseless", sim_test_copy}, {"system", system}, {"parameters", s.parameters}};
      json truth = json::object();
      for (const auto& [name, v] : s.true_coefficients) truth[name] = v;
      sidecar["true_coefficients"] = truth;
      sidecar["target_noise_var"] = s.target_noise_var;
      fs::path side = out;
      write_json(side.replace_extension(".json"), sidecar);
      std::cout << json{{"samples", s.dataset.size()}, {"csv", out.string()}, {"sidecar", side.string()}}.dump() << '\n';
    } else if (ident->parsed()) {
      const Dataset d = load_data(id_data);
      KernelSet kernel;
      for (const auto& k : id_kernels) kernel.push_back(kernel_from_json(json::parse(k)));
      const MonomialLibrary lib = enumerate_monomials(static_cast<int>(d.state_dim()), id_order, id_constant);
      const ModelEstimate model = fit_model(d, lib, kernel, id_noise, id_lambda, id_max_iter);
      if (!id_out.empty()) save_model(id_out, model);
      std::cout << json{{"coefficients", coefficient_json(model)},
                        {"dof", model.dof},
                        {"iterations", model.iterations},
                        {"converged", model.converged},
                        {"train_fit", prediction_fit(d.targets, predict_batch(model, d.states, d.aux))}}
                       .dump(2)
                << '\n';
    } else if (search->parsed()) {
      ExperimentConfig c = resolve_config(se_config, se_preset, 1, se_seed);
      c.baselines.clear();
      c.guided_refit_ratio.reset();
      c.output.clear();
      const ExperimentResult r = run_experiment(c);
      const FittedModel& kb = r.runs.front().kbsindy;
      fs::create_directories(se_out);
      save_model(fs::path(se_out) / "model.json", kb.model);
      write_score_table(fs::path(se_out) / "scores.csv", kb.search);
      std::cout << kb.metrics.dump(2) << '\n';
    } else if (cmp->parsed()) {
      const Comparison c = compare_runs(cmp_a, cmp_model_a, cmp_b, cmp_model_b);
      if (!cmp_out.empty()) write_comparison(cmp_out, c);
      std::cout << json{{"runs", c.rows.size()}, {"wins_a", c.wins_a}, {"wins_b", c.wins_b}, {"ties", c.ties}}.dump()
                << '\n';
    } else if (rep->parsed()) {
      if (rep_list) {
        for (const auto& n : preset_names()) std::cout << n << '\n';
      } else if (!rep_dump.empty()) {
        std::cout << preset_config(rep_dump).dump(2) << '\n';
      } else if (!rep_verify.empty()) {
        const auto problems = verify_bundle(rep_verify);
        std::cout << json{{"consistent", problems.empty()}, {"problems", problems}}.dump(2) << '\n';
        if (!problems.empty()) return 1;
      } else {
        ExperimentConfig c = resolve_config(rep_config, rep_preset, rep_runs, rep_seed);
        if (rep_out.empty()) throw Error(ErrorKind::config, "--out is required to run an experiment");
        c.output = rep_out;
        const ExperimentResult r = run_experiment(c);
        std::cout << r.summary.at("aggregate").dump(2) << '\n';
      }
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }
  return 0;
}

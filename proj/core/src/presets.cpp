#include "kbsindy/error.hpp"
#include "kbsindy/experiment.hpp"

#include <map>

namespace kbsindy {

namespace {

// Desk-scale versions of the published experiments. Grids were pinned by a
// calibration run and are frozen; change them only together with the
// acceptance thresholds.
const std::map<std::string, const char*>& preset_table() {
  static const std::map<std::string, const char*> table{
      {"lorenz_input", R"json({
  "schema_version": 1, "name": "lorenz_input", "runs": 1, "seed": 11,
  "system": {"kind": "lorenz", "h": {"kind": "tanh", "amplitude": 10, "gain": 1},
             "h_target": "input", "target_state": 1, "samples": 1000, "snr": 60},
  "library": {"order": 4},
  "kernel": [{"family": "gaussian", "scale": [0, 1, 10, 100, 1000], "width": [0.3, 1, 3, 10]}],
  "selection": {"strategy": "bic", "lambda_grid": {"logspace": [-2, 0, 9]}, "noise_var": "injected"},
  "baselines": [{"name": "sindy", "order": 4}]
})json"},
      {"lorenz_input_snr9", R"json({
  "schema_version": 1, "name": "lorenz_input_snr9", "runs": 1, "seed": 11,
  "system": {"kind": "lorenz", "h": {"kind": "tanh", "amplitude": 10, "gain": 1},
             "h_target": "input", "target_state": 1, "samples": 1000, "snr": 9},
  "library": {"order": 4},
  "kernel": [{"family": "gaussian", "scale": [0, 1, 10, 100, 1000], "width": [0.3, 1, 3, 10]}],
  "selection": {"strategy": "bic", "lambda_grid": {"logspace": [-2, 0, 9]}, "noise_var": "injected"}
})json"},
      {"lorenz_eq1", R"json({
  "schema_version": 1, "name": "lorenz_eq1", "runs": 1, "seed": 11,
  "system": {"kind": "lorenz", "h": {"kind": "tanh", "amplitude": 10, "gain": 1},
             "h_target": "input", "target_state": 0, "samples": 1000, "snr": 60},
  "library": {"order": 4},
  "kernel": [{"family": "gaussian", "scale": [0, 1, 10, 100, 1000], "width": [0.3, 1, 3, 10]}],
  "selection": {"strategy": "bic", "lambda_grid": {"logspace": [-2, 0, 9]}, "noise_var": "injected"}
})json"},
      {"lorenz_eq3", R"json({
  "schema_version": 1, "name": "lorenz_eq3", "runs": 1, "seed": 11,
  "system": {"kind": "lorenz", "h": {"kind": "tanh", "amplitude": 10, "gain": 1},
             "h_target": "input", "target_state": 2, "samples": 1000, "snr": 60},
  "library": {"order": 4},
  "kernel": [{"family": "gaussian", "scale": [0, 1, 10, 100, 1000], "width": [0.3, 1, 3, 10]}],
  "selection": {"strategy": "bic", "lambda_grid": {"logspace": [-2, 0, 9]}, "noise_var": "injected"}
})json"},
      {"lorenz_feedback", R"json({
  "schema_version": 1, "name": "lorenz_feedback", "runs": 1, "seed": 12,
  "system": {"kind": "lorenz", "h": {"kind": "sine", "amplitude": 10, "frequency": 1},
             "h_target": "output", "target_state": 1, "samples": 1000, "snr": 60},
  "library": {"order": 4},
  "kernel": [{"family": "gaussian", "scale": [0, 1, 10, 100, 1000], "width": [0.3, 1, 3, 10, 30, 100]}],
  "selection": {"strategy": "bic", "lambda_grid": {"logspace": [-2, 0, 9]}, "noise_var": "injected"},
  "baselines": [{"name": "sindy", "order": 4}]
})json"},
      {"lorenz_10input", R"json({
  "schema_version": 1, "name": "lorenz_10input", "runs": 20, "seed": 13,
  "system": {"kind": "lorenz", "h": {"kind": "mean_tanh", "amplitude": 10},
             "h_target": "inputs", "n_inputs": 10, "target_state": 1, "samples": 1000, "snr": 60},
  "library": {"order": 4},
  "kernel": [{"family": "gaussian", "scale": [0, 1, 10, 100, 1000], "width": [1, 3, 10, 30, 100]}],
  "selection": {"strategy": "bic", "lambda_grid": {"logspace": [-2, 0, 9]}, "noise_var": "injected"}
})json"},
      {"gene_hill_weak", R"json({
  "schema_version": 1, "name": "gene_hill_weak", "runs": 1, "seed": 21,
  "system": {"kind": "gene", "h": {"kind": "hill", "s1": 0.5, "S": 100, "q": 2}, "gamma": 0.01,
             "schedule": [[100, 0.5], [500, 2]], "cv": 0.05},
  "library": {"order": 2},
  "derivatives": "spline", "derivative_state": 0,
  "kernel": [{"family": "gaussian", "columns": [0], "scale": [0, 0.01, 0.1, 1, 10], "width": [100, 1000, 10000, 100000]}],
  "selection": {"strategy": "bic", "lambda_grid": {"logspace": [-6, -2, 9]}, "noise_var": 0.01},
  "baselines": [{"name": "sindy", "order": 2}]
})json"},
      {"gene_hill_strong", R"json({
  "schema_version": 1, "name": "gene_hill_strong", "runs": 1, "seed": 22,
  "system": {"kind": "gene", "h": {"kind": "hill", "s1": 0.5, "S": 1000, "q": 4}, "gamma": 0.05,
             "schedule": [[100, 0.5], [500, 2]], "cv": 0.05},
  "library": {"order": 2},
  "derivatives": "spline", "derivative_state": 0,
  "kernel": [{"family": "gaussian", "columns": [0], "scale": [0, 0.01, 0.1, 1, 10], "width": [1000, 10000, 100000, 1000000]}],
  "selection": {"strategy": "bic", "lambda_grid": {"logspace": [-6, -2, 9]}, "noise_var": 0.01},
  "baselines": [{"name": "sindy", "order": 2}]
})json"},
      {"gene_posneg", R"json({
  "schema_version": 1, "name": "gene_posneg", "runs": 1, "seed": 23,
  "system": {"kind": "gene", "h": {"kind": "rational_quartic"}, "gamma": 0.01,
             "schedule": [[200, 0.5], [400, 4]], "cv": 0.05},
  "library": {"order": 2},
  "derivatives": "spline", "derivative_state": 0,
  "kernel": [{"family": "gaussian", "columns": [0], "scale": [0, 0.01, 0.1, 1, 10], "width": [100, 1000, 10000, 100000]}],
  "selection": {"strategy": "bic", "lambda_grid": {"logspace": [-6, -2, 9]}, "noise_var": 0.01},
  "baselines": [{"name": "sindy", "order": 2}]
})json"},
      {"calcium", R"json({
  "schema_version": 1, "name": "calcium", "runs": 1, "seed": 31,
  "system": {"kind": "calcium", "cells": 100, "dx": 1, "dt": 0.002, "burn_in": 2, "duration": 10,
             "samples": 2000, "snr_space": 20, "snr_time": 10},
  "library": {"order": 1},
  "kernel": [{"family": "gaussian", "scale": [0, 10, 100, 1000, 10000], "width": [0.01, 0.03, 0.1, 0.3, 1]}],
  "selection": {"strategy": "bic", "lambda_grid": {"logspace": [-1, 1, 9]}, "noise_var": "injected"},
  "baselines": [{"name": "sindy", "order": 1}]
})json"},
      {"logistic_ar", R"json({
  "schema_version": 1, "name": "logistic_ar", "runs": 100, "seed": 41,
  "system": {"kind": "logistic_ar", "r": 3, "a": 0.8, "b": 0.05, "x0": 0.5, "steps": 200, "snr": 60},
  "library": {"order": 3},
  "kernel": [{"family": "gaussian", "scale": [0, 0.0001, 0.001, 0.01, 0.1], "width": [1, 3, 10, 30, 100]}],
  "selection": {"strategy": "bic", "lambda_grid": {"logspace": [-2, 0.4, 13]}, "noise_var": "injected"},
  "baselines": [{"name": "sindy", "order": 3}]
})json"},
      {"nfir_alpha0", R"json({
  "schema_version": 1, "name": "nfir_alpha0", "runs": 20, "seed": 51,
  "system": {"kind": "nfir", "alpha": 0, "steps": 2000, "test_steps": 2000, "lags": 10, "noise_sd": 0.5},
  "library": {"order": 2},
  "kernel": [{"family": "poly_sum", "first_order": 3, "last_order": 5,
              "scale": [0, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3]}],
  "selection": {"strategy": "holdout", "search": "two_stage", "refine": true,
                "lambda_grid": {"logspace": [-2, 1, 10]}, "noise_var": "injected"},
  "split": [0.5, 0.5, 0], "test": "resimulate",
  "baselines": [{"name": "sindy_o2", "order": 2}, {"name": "sindy_o3", "order": 3}, {"name": "sindy_o4", "order": 4}],
  "guided_refit": {"ratio": 0.1},
  "order_norms": true
})json"},
      {"nfir_alpha1", R"json({
  "schema_version": 1, "name": "nfir_alpha1", "runs": 20, "seed": 52,
  "system": {"kind": "nfir", "alpha": 1, "steps": 2000, "test_steps": 2000, "lags": 10, "noise_sd": 0.5},
  "library": {"order": 2},
  "kernel": [{"family": "poly_sum", "first_order": 3, "last_order": 5,
              "scale": [0, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3]}],
  "selection": {"strategy": "holdout", "search": "two_stage", "refine": true,
                "lambda_grid": {"logspace": [-2, 1, 10]}, "noise_var": "injected"},
  "split": [0.5, 0.5, 0], "test": "resimulate",
  "baselines": [{"name": "sindy_o2", "order": 2}, {"name": "sindy_o3", "order": 3}, {"name": "sindy_o4", "order": 4}],
  "order_norms": true
})json"},
      {"stacked_lorenz", R"json({
  "schema_version": 1, "name": "stacked_lorenz", "runs": 1, "seed": 61,
  "system": {"kind": "lorenz", "copies": 4, "x0": "random", "target_state": 1, "samples": 2000, "snr": 60},
  "library": {"order": 2},
  "aux_source": "states",
  "kernel": [{"family": "poly_sum", "first_order": 3, "last_order": 4,
              "scale": [0, 0.001, 0.01, 0.1, 1, 10]}],
  "selection": {"strategy": "holdout", "lambda_grid": {"logspace": [-2, 1, 10]}, "noise_var": "injected"},
  "split": [0.5, 0.5, 0], "test": "resimulate"
})json"},
      {"stacked_lorenz_order1", R"json({
  "schema_version": 1, "name": "stacked_lorenz_order1", "runs": 1, "seed": 61,
  "system": {"kind": "lorenz", "copies": 4, "x0": "random", "target_state": 1, "samples": 2000, "snr": 60},
  "library": {"order": 1},
  "aux_source": "states",
  "kernel": [{"family": "poly_sum", "first_order": 2, "last_order": 3,
              "scale": [0, 0.001, 0.01, 0.1, 1, 10]}],
  "selection": {"strategy": "holdout", "lambda_grid": {"logspace": [-2, 1, 10]}, "noise_var": "injected"},
  "split": [0.5, 0.5, 0], "test": "resimulate"
})json"},
  };
  return table;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : preset_table()) names.push_back(name);
  return names;
}

nlohmann::ordered_json preset_config(const std::string& name) {
  const auto& table = preset_table();
  const auto it = table.find(name);
  if (it == table.end()) throw Error(ErrorKind::config, "unknown preset \"" + name + "\"");
  return nlohmann::ordered_json::parse(it->second);
}

}  // namespace kbsindy

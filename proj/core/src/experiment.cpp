#include "kbsindy/experiment.hpp"

#include "kbsindy/error.hpp"
#include "kbsindy/differentiation.hpp"
#include "kbsindy/model_io.hpp"
#include "kbsindy/parallel.hpp"
#include "kbsindy/predictor.hpp"
#include "kbsindy/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace kbsindy {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class T>
T value_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::schema, std::string("field \"") + key + "\": " + e.what());
  }
}

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorKind::schema, std::string("missing field \"") + key + "\"");
  return j.at(key);
}

std::vector<double> number_list(const json& j, const char* what) {
  if (j.is_number()) return {j.get<double>()};
  if (j.is_object() && j.contains("logspace")) {
    const auto spec = j.at("logspace").get<std::vector<double>>();
    if (spec.size() != 3 || spec[2] < 1) throw Error(ErrorKind::schema, std::string(what) + ": logspace needs [lo, hi, count]");
    const int n = static_cast<int>(spec[2]);
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
      const double e = n == 1 ? spec[0] : spec[0] + (spec[1] - spec[0]) * i / (n - 1);
      out.push_back(std::pow(10.0, e));
    }
    return out;
  }
  if (!j.is_array()) throw Error(ErrorKind::schema, std::string(what) + " must be a number list");
  return j.get<std::vector<double>>();
}

json double_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double as_double(const json& j) { return j.is_number() ? j.get<double>() : kNaN; }

// --- system blocks ----------------------------------------------------------

LorenzConfig lorenz_config(const json& s, std::uint64_t seed, bool test_copy) {
  LorenzConfig c;
  c.sigma = value_or(s, "sigma", c.sigma);
  c.rho = value_or(s, "rho", c.rho);
  c.beta = value_or(s, "beta", c.beta);
  if (s.contains("h") && !s.at("h").is_null()) c.h = h_from_json(s.at("h"));
  const std::string target = value_or<std::string>(s, "h_target", "input");
  if (target == "input") {
    c.h_target = HTarget::input;
  } else if (target == "output") {
    c.h_target = HTarget::output;
  } else if (target == "inputs") {
    c.h_target = HTarget::inputs;
  } else {
    throw Error(ErrorKind::schema, "h_target must be input, output or inputs");
  }
  c.n_inputs = value_or(s, "n_inputs", c.n_inputs);
  c.copies = value_or(s, "copies", c.copies);
  c.target_state = value_or(s, "target_state", c.target_state);
  if (s.contains("x0")) {
    const auto& x0 = s.at("x0");
    c.x0 = x0.is_string() && x0.get<std::string>() == "random" ? std::vector<double>{} : x0.get<std::vector<double>>();
  }
  if (test_copy) c.x0.clear();
  c.dt = value_or(s, "dt", c.dt);
  c.stride = value_or(s, "stride", c.stride);
  c.samples = value_or(s, "samples", c.samples);
  c.burn_in_samples = value_or(s, "burn_in_samples", c.burn_in_samples);
  c.input_hold = value_or(s, "input_hold", c.input_hold);
  c.input_range = value_or(s, "input_range", c.input_range);
  const double snr = value_or(s, "snr", 0.0);
  c.noise = snr > 0.0 && !test_copy ? NoiseSpec::snr(snr, derive_seed(seed, 10)) : NoiseSpec::none();
  c.seed = seed;
  return c;
}

GeneConfig gene_config(const json& s, std::uint64_t seed, bool test_copy) {
  GeneConfig c;
  if (s.contains("h")) c.h = h_from_json(s.at("h"));
  c.delta1 = value_or(s, "delta1", c.delta1);
  c.delta2 = value_or(s, "delta2", c.delta2);
  c.gamma = value_or(s, "gamma", c.gamma);
  if (s.contains("x0")) {
    const auto x0 = s.at("x0").get<std::vector<double>>();
    if (x0.size() != 2) throw Error(ErrorKind::schema, "gene x0 needs two values");
    c.x0 << x0[0], x0[1];
  }
  c.dt = value_or(s, "dt", c.dt);
  if (s.contains("schedule")) {
    c.schedule.clear();
    for (const auto& block : s.at("schedule")) {
      const auto b = block.get<std::vector<double>>();
      if (b.size() != 2) throw Error(ErrorKind::schema, "schedule entries are [count, interval]");
      c.schedule.emplace_back(static_cast<int>(b[0]), b[1]);
    }
  }
  const double cv = value_or(s, "cv", 0.05);
  c.noise = test_copy || cv == 0.0 ? NoiseSpec::none() : NoiseSpec::cv(cv, derive_seed(seed, 10));
  return c;
}

CalciumConfig calcium_config(const json& s, std::uint64_t seed, bool test_copy) {
  CalciumConfig c;
  auto& p = c.params;
  p.v0 = value_or(s, "v0", p.v0), p.v1 = value_or(s, "v1", p.v1), p.beta = value_or(s, "beta", p.beta);
  p.vm2 = value_or(s, "vm2", p.vm2), p.vm3 = value_or(s, "vm3", p.vm3);
  p.k2 = value_or(s, "k2", p.k2), p.kr = value_or(s, "kr", p.kr), p.ka = value_or(s, "ka", p.ka);
  p.kf = value_or(s, "kf", p.kf), p.k = value_or(s, "k", p.k);
  p.n = value_or(s, "n", p.n), p.m = value_or(s, "m", p.m), p.p = value_or(s, "p", p.p);
  p.dz = value_or(s, "dz", p.dz), p.dy = value_or(s, "dy", p.dy);
  c.cells = value_or(s, "cells", c.cells);
  c.dx = value_or(s, "dx", c.dx);
  c.dt = value_or(s, "dt", c.dt);
  c.burn_in = value_or(s, "burn_in", c.burn_in);
  c.duration = value_or(s, "duration", c.duration);
  c.z0 = value_or(s, "z0", c.z0), c.y0 = value_or(s, "y0", c.y0);
  c.init_amplitude = value_or(s, "init_amplitude", c.init_amplitude);
  c.samples = value_or(s, "samples", c.samples);
  c.snr_space = value_or(s, "snr_space", c.snr_space);
  c.snr_time = value_or(s, "snr_time", c.snr_time);
  if (test_copy) c.snr_space = c.snr_time = std::numeric_limits<double>::infinity();
  c.seed = seed;
  return c;
}

Simulation load_csv_system(const json& s, const fs::path& base_dir) {
  fs::path path = require(s, "path").get<std::string>();
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  const json& sch = require(s, "schema");
  CsvSchema schema{value_or<std::string>(sch, "time", "t"), value_or<std::vector<std::string>>(sch, "states", {}),
                   value_or<std::string>(sch, "target", "y"), value_or<std::vector<std::string>>(sch, "aux", {})};
  Simulation sim;
  sim.dataset = load_csv(path, schema);
  sim.clean_states = sim.dataset.states;
  sim.clean_targets = sim.dataset.targets;
  sim.h_values = Eigen::VectorXd::Zero(sim.dataset.size());
  sim.target_noise_var = value_or(s, "noise_var", 0.0);
  if (s.contains("true_coefficients")) {
    for (const auto& [name, v] : s.at("true_coefficients").items()) sim.true_coefficients.emplace_back(name, v.get<double>());
  }
  sim.parameters = s;
  return sim;
}

// --- library and kernels ----------------------------------------------------

MonomialLibrary make_library(int n, int order, const std::vector<int>& degrees, bool include_constant) {
  MonomialLibrary lib = enumerate_monomials(n, order, include_constant);
  if (degrees.empty()) return lib;
  std::vector<Monomial> kept;
  for (const auto& m : lib.monomials) {
    if (std::find(degrees.begin(), degrees.end(), m.degree()) != degrees.end()) kept.push_back(m);
  }
  lib.monomials = std::move(kept);
  if (lib.monomials.empty()) throw Error(ErrorKind::config, "library degree filter removed every term");
  return lib;
}

void parse_kernel(const json& j, ExperimentConfig& c) {
  if (!j.is_array()) throw Error(ErrorKind::schema, "\"kernel\" must be a list of components");
  for (const auto& comp : j) {
    KernelSpec spec;
    spec.columns = value_or<std::vector<int>>(comp, "columns", {});
    const std::string family = require(comp, "family").get<std::string>();
    if (family == "gaussian") {
      const auto scales = number_list(require(comp, "scale"), "gaussian scale grid");
      const auto widths = number_list(require(comp, "width"), "gaussian width grid");
      if (scales.empty() || widths.empty()) throw Error(ErrorKind::config, "empty Gaussian grid");
      spec.family = GaussianKernel{scales.front(), widths.front()};
      c.search.kernel_grids.push_back(scales);
      c.search.kernel_grids.push_back(widths);
    } else if (family == "poly_sum") {
      const int first = require(comp, "first_order").get<int>();
      const int last = value_or(comp, "last_order", first);
      if (last < first) throw Error(ErrorKind::config, "poly_sum last_order < first_order");
      std::vector<std::vector<double>> grids;
      if (comp.contains("scales")) {
        for (const auto& g : comp.at("scales")) grids.push_back(number_list(g, "poly_sum scale grid"));
      } else {
        grids.assign(static_cast<std::size_t>(last - first + 1), number_list(require(comp, "scale"), "poly_sum scale grid"));
      }
      if (static_cast<int>(grids.size()) != last - first + 1) {
        throw Error(ErrorKind::config, "poly_sum needs one scale grid per order");
      }
      PolySumKernel p{first, {}};
      for (const auto& g : grids) {
        if (g.empty()) throw Error(ErrorKind::config, "empty poly_sum scale grid");
        p.scales.push_back(g.front());
        c.search.kernel_grids.push_back(g);
      }
      spec.family = p;
    } else {
      throw Error(ErrorKind::schema, "unknown kernel family \"" + family + "\"");
    }
    c.kernel.push_back(spec);
  }
}

json kernel_config_json(const ExperimentConfig& c) {
  json out = json::array();
  std::size_t slot = 0;
  for (const auto& spec : c.kernel) {
    json comp;
    if (spec.is_gaussian()) {
      comp["family"] = "gaussian";
      comp["scale"] = c.search.kernel_grids.at(slot++);
      comp["width"] = c.search.kernel_grids.at(slot++);
    } else {
      const auto& p = std::get<PolySumKernel>(spec.family);
      comp["family"] = "poly_sum";
      comp["first_order"] = p.first_order;
      comp["last_order"] = p.last_order();
      json grids = json::array();
      for (std::size_t i = 0; i < p.scales.size(); ++i) grids.push_back(c.search.kernel_grids.at(slot++));
      comp["scales"] = grids;
    }
    comp["columns"] = spec.columns;
    out.push_back(comp);
  }
  return out;
}

// --- metrics ----------------------------------------------------------------

std::vector<std::pair<std::string, double>> coefficient_rows(const Simulation& sim, const std::vector<std::string>& names,
                                                             const Eigen::VectorXd& estimate,
                                                             std::vector<double>* truth_out) {
  std::map<std::string, double> truth(sim.true_coefficients.begin(), sim.true_coefficients.end());
  std::vector<std::pair<std::string, double>> rows;
  std::vector<double> truths;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    rows.emplace_back(names[i], estimate(static_cast<Eigen::Index>(i)));
    truths.push_back(truth.count(names[i]) ? truth[names[i]] : 0.0);
    seen.insert(names[i]);
  }
  for (const auto& [name, v] : sim.true_coefficients) {
    if (!seen.count(name)) rows.emplace_back(name, 0.0), truths.push_back(v);
  }
  if (truth_out) *truth_out = truths;
  return rows;
}

struct Evaluation {
  json metrics;
  std::vector<std::pair<std::string, double>> coefficients;
  std::vector<double> truth;
};

double fit_on(const ModelEstimate& model, const Dataset& d) {
  const Eigen::VectorXd y_hat = predict_batch(model, d.states, d.aux);
  try {
    return prediction_fit(d.targets, y_hat);
  } catch (const Error&) {
    return kNaN;
  }
}

double residual_identity(const ModelEstimate& model, const Dataset& train) {
  const Eigen::MatrixXd theta = build_theta(model.library, train.states);
  Eigen::VectorXd r = train.targets - theta * model.xi_parametric;
  const double scale = r.norm();
  if (!is_disabled(model.kernel)) r -= build_gram(model.kernel, model.anchors).K * model.xi_kernel;
  r -= model.noise_var * model.xi_kernel;
  return scale > 0.0 ? r.norm() / scale : r.norm();
}

Evaluation evaluate_model(const ModelEstimate& model, const SearchResult& search, const Simulation& sim,
                          const Split& split, const std::optional<Dataset>& test) {
  Evaluation ev;
  json& m = ev.metrics;
  const auto names = model.library.names();
  m["lambda"] = model.lambda;
  json hyper = json::object();
  const auto& row = search.best_row();
  for (std::size_t s = 0; s < search.slot_names.size(); ++s) hyper[search.slot_names[s]] = row.kernel_values[s];
  m["kernel_hyperparameters"] = hyper;
  m["kernel_active"] = !is_disabled(model.kernel);
  m["dof"] = model.dof;
  m["nnz"] = model.nnz();
  m["iterations"] = model.iterations;
  m["converged"] = model.converged;
  json support = json::array();
  for (auto i : model.support()) support.push_back(names[static_cast<std::size_t>(i)]);
  m["support"] = support;

  ev.coefficients = coefficient_rows(sim, names, model.xi_parametric, &ev.truth);
  if (!sim.true_coefficients.empty()) {
    std::set<std::string> est, tru;
    for (const auto& s : support) est.insert(s.get<std::string>());
    for (const auto& [name, v] : sim.true_coefficients) tru.insert(name);
    m["support_exact"] = est == tru;
    double sq = 0.0, max_rel = 0.0;
    std::map<std::string, double> estimate(ev.coefficients.begin(), ev.coefficients.end());
    for (std::size_t i = 0; i < ev.coefficients.size(); ++i) {
      const double d = ev.truth[i] - ev.coefficients[i].second;
      sq += d * d;
    }
    for (const auto& [name, v] : sim.true_coefficients) max_rel = std::max(max_rel, std::abs(estimate[name] - v) / std::abs(v));
    m["coefficient_error"] = std::sqrt(sq);
    m["max_relative_coefficient_error"] = max_rel;
  }
  m["train_fit"] = double_or_null(fit_on(model, split.train));
  m["validation_fit"] = split.validation ? double_or_null(fit_on(model, *split.validation)) : json(nullptr);
  m["test_fit"] = test ? double_or_null(fit_on(model, *test)) : json(nullptr);
  m["residual_identity"] = residual_identity(model, split.train);
  return ev;
}

// ĥ against the true h, on a grid over the visited range (scalar aux) or at the training points.
struct HGrid {
  Eigen::MatrixXd z;
  Eigen::VectorXd h_hat, h_true;
};

HGrid h_grid(const ModelEstimate& model, const Simulation& sim, const Dataset& train, int points) {
  HGrid g;
  if (train.aux_dim() == 1 && sim.true_h) {
    const double lo = train.aux.col(0).minCoeff(), hi = train.aux.col(0).maxCoeff();
    g.z = Eigen::VectorXd::LinSpaced(points, lo, hi);
  } else {
    g.z = train.aux;
  }
  g.h_hat = predict_h_batch(model, g.z);
  g.h_true.resize(g.z.rows());
  for (Eigen::Index i = 0; i < g.z.rows(); ++i) {
    g.h_true(i) = sim.true_h ? sim.true_h(g.z.row(i).transpose()) : sim.h_values(i);
  }
  return g;
}

json h_metrics(const HGrid& g) {
  const double rmse = std::sqrt((g.h_hat - g.h_true).squaredNorm() / static_cast<double>(g.h_true.size()));
  const double range_true = g.h_true.maxCoeff() - g.h_true.minCoeff();
  const double range_hat = g.h_hat.maxCoeff() - g.h_hat.minCoeff();
  return {{"rmse", rmse},
          {"range_true", range_true},
          {"range_hat", range_hat},
          {"relative_rmse_true", double_or_null(range_true > 0.0 ? rmse / range_true : kNaN)},
          {"relative_rmse_hat", double_or_null(range_hat > 0.0 ? rmse / range_hat : kNaN)}};
}

// --- artifact writers ---------------------------------------------------------

void write_coefficients(const fs::path& path, const Evaluation& ev) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "name,estimate,true\n";
  for (std::size_t i = 0; i < ev.coefficients.size(); ++i) {
    out << ev.coefficients[i].first << ',' << format_double(ev.coefficients[i].second) << ','
        << format_double(ev.truth[i]) << '\n';
  }
}

void write_h_grid(const fs::path& path, const HGrid& g) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  for (Eigen::Index c = 0; c < g.z.cols(); ++c) out << (g.z.cols() == 1 ? std::string("z") : "z" + std::to_string(c + 1)) << ',';
  out << "h_hat,h_true\n";
  for (Eigen::Index i = 0; i < g.z.rows(); ++i) {
    for (Eigen::Index c = 0; c < g.z.cols(); ++c) out << format_double(g.z(i, c)) << ',';
    out << format_double(g.h_hat(i)) << ',' << format_double(g.h_true(i)) << '\n';
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, path.string() + ": empty file");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(split(line));
  }
  return t;
}

double parse_number(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::parse, path.string() + ": bad number \"" + s + "\"");
  }
}

double error_from_csv(const fs::path& path) {
  const CsvTable t = read_table(path);
  if (t.header != std::vector<std::string>{"name", "estimate", "true"}) {
    throw Error(ErrorKind::parse, path.string() + ": expected header name,estimate,true");
  }
  double sq = 0.0;
  for (const auto& r : t.rows) {
    if (r.size() != 3) throw Error(ErrorKind::parse, path.string() + ": malformed row");
    const double d = parse_number(r[2], path) - parse_number(r[1], path);
    sq += d * d;
  }
  return std::sqrt(sq);
}

std::string run_dir_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%03zu", i);
  return buf;
}

json aggregate(const std::vector<json>& metrics) {
  auto collect = [&](const char* key) {
    std::vector<double> v;
    for (const auto& m : metrics) {
      if (m.contains(key) && m.at(key).is_number()) v.push_back(m.at(key).get<double>());
    }
    return v;
  };
  auto stats = [](std::vector<double> v) -> json {
    if (v.empty()) return nullptr;
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    const std::size_t n = v.size();
    const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    return {{"mean", sum / static_cast<double>(n)}, {"median", median}, {"min", v.front()}, {"max", v.back()}};
  };
  json a;
  int exact = 0, counted = 0;
  for (const auto& m : metrics) {
    if (m.contains("support_exact")) ++counted, exact += m.at("support_exact").get<bool>() ? 1 : 0;
  }
  if (counted) a["support_exact_count"] = exact;
  a["coefficient_error"] = stats(collect("coefficient_error"));
  a["max_relative_coefficient_error"] = stats(collect("max_relative_coefficient_error"));
  a["validation_fit"] = stats(collect("validation_fit"));
  a["test_fit"] = stats(collect("test_fit"));
  return a;
}

Dataset with_state_aux(Dataset d) {
  d.aux = d.states;
  d.aux_names.clear();
  for (const auto& n : d.state_names) d.aux_names.push_back("z_" + n);
  return d;
}

FittedModel fit_baseline(const BaselineSpec& b, const ExperimentConfig& c, const Split& split,
                         const SearchOptions& options) {
  const MonomialLibrary lib = make_library(static_cast<int>(split.train.state_dim()), b.order, b.degrees, b.include_constant);
  SearchSpace space{b.lambda_grid.empty() ? c.search.lambda_grid : b.lambda_grid, {}, c.search.strategy};
  FittedModel f;
  f.name = b.name;
  f.search = grid_search(split.train, space, lib, KernelSet{}, split.validation, options);
  f.model = f.search.best;
  return f;
}

RunResult execute_run(const ExperimentConfig& c, std::size_t index) {
  RunResult run;
  run.seed = derive_seed(c.seed, index);
  run.simulation = c.system.value("kind", "") == "csv" ? Simulation{} : simulate_system(c.system, run.seed, false);
  if (c.system.value("kind", "") == "csv") run.simulation = load_csv_system(c.system, {});
  Simulation& sim = run.simulation;
  Dataset data = sim.dataset;

  double smoother_var = kNaN;
  if (c.derivatives == "spline") {
    std::vector<Eigen::Index> starts{0};
    if (c.system.value("kind", "") == "gene") starts = gene_segment_starts(gene_config(c.system, run.seed, false));
    if (c.derivative_state < 0 || c.derivative_state >= data.state_dim()) {
      throw Error(ErrorKind::config, "derivative_state out of range");
    }
    for (Eigen::Index col = 0; col < data.state_dim(); ++col) {
      const SmoothedSeries s = smooth_segments(data.times, data.states.col(col), starts);
      if (col == c.derivative_state) {
        data.targets = s.derivatives;
        smoother_var = s.derivative_var_hat;
      }
      data.states.col(col) = s.values;
    }
    for (Eigen::Index col = 0; col < data.aux_dim(); ++col) {
      data.aux.col(col) = smooth_segments(data.times, data.aux.col(col), starts).values;
    }
  } else if (c.derivatives != "exact") {
    throw Error(ErrorKind::config, "derivatives must be exact or spline");
  }
  if (c.aux_source == "states") {
    data = with_state_aux(std::move(data));
  } else if (c.aux_source != "system") {
    throw Error(ErrorKind::config, "aux_source must be system or states");
  }

  if (c.noise_var == "injected") {
    run.noise_var = sim.target_noise_var;
  } else if (c.noise_var == "smoother") {
    if (!std::isfinite(smoother_var)) throw Error(ErrorKind::config, "noise_var = smoother needs derivatives = spline");
    run.noise_var = smoother_var;
  } else if (c.noise_var == "value") {
    run.noise_var = c.noise_var_value;
  } else {
    throw Error(ErrorKind::config, "noise_var must be injected, smoother or value");
  }
  if (!(run.noise_var > 0.0)) throw Error(ErrorKind::config, "noise variance for the kernel weighting must be positive");

  run.split = split_contiguous(data, c.split);
  std::optional<Dataset> test = run.split.test;
  if (c.test == "resimulate") {
    Simulation t = simulate_system(c.system, derive_seed(run.seed, 77), true);
    Dataset td = t.dataset;
    td.states = t.clean_states;
    td.targets = t.clean_targets;
    test = c.aux_source == "states" ? with_state_aux(std::move(td)) : td;
  } else if (c.test != "none") {
    throw Error(ErrorKind::config, "test must be none or resimulate");
  }
  run.split.test = test;

  const Dataset& train = run.split.train;
  const MonomialLibrary lib =
      make_library(static_cast<int>(train.state_dim()), c.library_order, c.library_degrees, c.include_constant);
  SearchOptions options;
  options.noise_var = run.noise_var;
  options.max_iter = c.max_iter;
  options.nelder_mead_refine = c.refine;
  if (c.bic_noise == "residual") {
    options.bic_noise_var = residual_noise_variance(build_theta(lib, train.states), train.targets);
  } else if (c.bic_noise != "noise_var") {
    throw Error(ErrorKind::config, "bic_noise must be noise_var or residual");
  }

  FittedModel& kb = run.kbsindy;
  kb.name = "kbsindy";
  kb.search = c.search_kind == "two_stage" ? two_stage_search(train, c.search, lib, c.kernel, run.split.validation, options)
                                           : grid_search(train, c.search, lib, c.kernel, run.split.validation, options);
  if (c.search_kind != "grid" && c.search_kind != "two_stage") throw Error(ErrorKind::config, "search must be grid or two_stage");
  kb.model = kb.search.best;

  for (const auto& b : c.baselines) run.baselines.push_back(fit_baseline(b, c, run.split, options));

  int max_order = lib.order;
  for (const auto& k : c.kernel) {
    if (k.is_poly_sum()) max_order = std::max(max_order, std::get<PolySumKernel>(k.family).last_order());
  }
  std::vector<double> norms;
  if (c.order_norms || c.guided_refit_ratio) norms = order_component_norms(kb.model, train, max_order);
  if (c.guided_refit_ratio) {
    const double top = *std::max_element(norms.begin(), norms.end());
    BaselineSpec g{"guided_refit", 0, {}, false, {}};
    for (std::size_t j = 0; j < norms.size(); ++j) {
      if (top > 0.0 && norms[j] >= *c.guided_refit_ratio * top) {
        g.degrees.push_back(static_cast<int>(j + 1));
        g.order = static_cast<int>(j + 1);
      }
    }
    if (g.degrees.empty()) throw Error(ErrorKind::numerical, "guided refit found no active order");
    run.baselines.push_back(fit_baseline(g, c, run.split, options));
    run.baselines.back().metrics["degrees"] = g.degrees;
  }

  // Metrics.
  json summary;
  summary["seed"] = run.seed;
  summary["noise_var"] = run.noise_var;
  if (options.bic_noise_var) summary["bic_noise_var"] = *options.bic_noise_var;
  summary["schema"] = {{"time", train.time_name},
                       {"states", train.state_names},
                       {"aux", train.aux_names},
                       {"target", train.target_name}};
  summary["samples"] = {{"train", train.size()},
                        {"validation", run.split.validation ? run.split.validation->size() : 0},
                        {"test", test ? test->size() : 0}};

  const Evaluation ev = evaluate_model(kb.model, kb.search, sim, run.split, test);
  kb.metrics = ev.metrics;
  if (!c.kernel.empty() && train.aux_dim() > 0 && (sim.true_h || sim.h_values.size() >= train.size())) {
    kb.metrics["h"] = h_metrics(h_grid(kb.model, sim, train, c.h_grid_points));
  }
  if (!norms.empty()) kb.metrics["order_norms"] = norms;
  summary["kbsindy"] = kb.metrics;
  json baselines = json::object();
  for (auto& b : run.baselines) {
    const json extra = b.metrics;
    b.metrics = evaluate_model(b.model, b.search, sim, run.split, test).metrics;
    for (const auto& [k, v] : extra.items()) b.metrics[k] = v;
    baselines[b.name] = b.metrics;
  }
  summary["baselines"] = baselines;
  summary["simulation"] = sim.parameters;
  run.summary = summary;
  return run;
}

void write_run(const fs::path& dir, const RunResult& run, const ExperimentConfig& c) {
  fs::create_directories(dir);
  const Simulation& sim = run.simulation;
  const auto write_model = [&](const fs::path& d, const FittedModel& f) {
    fs::create_directories(d);
    save_model(d / "model.json", f.model);
    write_score_table(d / "scores.csv", f.search);
    write_coefficients(d / "coefficients.csv", evaluate_model(f.model, f.search, sim, run.split, run.split.test));
  };
  write_model(dir, run.kbsindy);
  if (!c.kernel.empty() && run.split.train.aux_dim() > 0) {
    write_h_grid(dir / "h_grid.csv", h_grid(run.kbsindy.model, sim, run.split.train, c.h_grid_points));
  }
  for (const auto& b : run.baselines) write_model(dir / "baselines" / b.name, b);
  save_csv(dir / "train.csv", run.split.train);
  if (run.split.validation) save_csv(dir / "validation.csv", *run.split.validation);
  if (run.split.test) save_csv(dir / "test.csv", *run.split.test);
  write_json(dir / "simulation.json", sim.parameters);
}

json model_metrics(const json& run, const std::string& model) {
  if (model == "kbsindy") return run.at("kbsindy");
  const json& b = run.at("baselines");
  if (!b.contains(model)) throw Error(ErrorKind::comparison, "bundle has no model named \"" + model + "\"");
  return b.at(model);
}

fs::path model_dir(const fs::path& bundle, std::size_t run, const std::string& model) {
  fs::path d = bundle / run_dir_name(run);
  return model == "kbsindy" ? d : d / "baselines" / model;
}

}  // namespace

// --- public API -------------------------------------------------------------

ExperimentConfig config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorKind::schema, "config must be a JSON object");
  const int version = value_or(j, "schema_version", 0);
  if (version != kConfigSchemaVersion) {
    throw Error(ErrorKind::schema, "unsupported config schema_version " + std::to_string(version));
  }
  ExperimentConfig c;
  c.name = value_or<std::string>(j, "name", "experiment");
  c.system = require(j, "system");
  if (c.system.value("kind", "") == "csv" && c.system.contains("path") && !base_dir.empty()) {
    fs::path p = c.system.at("path").get<std::string>();
    if (p.is_relative()) c.system["path"] = (base_dir / p).string();
    if (!fs::exists(c.system.at("path").get<std::string>())) {
      throw Error(ErrorKind::config, "referenced data file does not exist: " + c.system.at("path").get<std::string>());
    }
  }
  c.runs = value_or(j, "runs", 1);
  if (c.runs < 1) throw Error(ErrorKind::config, "runs must be >= 1");
  c.seed = value_or<std::uint64_t>(j, "seed", 1);

  const json& lib = require(j, "library");
  c.library_order = require(lib, "order").get<int>();
  c.library_degrees = value_or<std::vector<int>>(lib, "degrees", {});
  c.include_constant = value_or(lib, "include_constant", false);

  c.aux_source = value_or<std::string>(j, "aux_source", "system");
  c.derivatives = value_or<std::string>(j, "derivatives", "exact");
  c.derivative_state = value_or(j, "derivative_state", 0);
  if (j.contains("kernel")) parse_kernel(j.at("kernel"), c);

  const json& sel = require(j, "selection");
  const std::string strategy = value_or<std::string>(sel, "strategy", "bic");
  if (strategy == "bic") {
    c.search.strategy = SelectionStrategy::bic;
  } else if (strategy == "holdout") {
    c.search.strategy = SelectionStrategy::holdout;
  } else {
    throw Error(ErrorKind::schema, "selection strategy must be bic or holdout");
  }
  c.search.lambda_grid = number_list(require(sel, "lambda_grid"), "lambda_grid");
  c.search_kind = value_or<std::string>(sel, "search", "grid");
  if (sel.contains("noise_var") && sel.at("noise_var").is_number()) {
    c.noise_var = "value";
    c.noise_var_value = sel.at("noise_var").get<double>();
  } else {
    c.noise_var = value_or<std::string>(sel, "noise_var", "injected");
  }
  c.bic_noise = value_or<std::string>(sel, "bic_noise", "noise_var");
  c.refine = value_or(sel, "refine", false);
  c.max_iter = value_or(sel, "max_iter", kDefaultMaxIter);

  if (j.contains("split")) {
    const auto s = j.at("split").get<std::vector<double>>();
    if (s.size() != 3) throw Error(ErrorKind::schema, "split needs [train, validation, test] fractions");
    c.split = {s[0], s[1], s[2]};
  }
  c.test = value_or<std::string>(j, "test", "none");
  if (j.contains("baselines")) {
    for (const auto& b : j.at("baselines")) {
      BaselineSpec spec;
      spec.name = require(b, "name").get<std::string>();
      spec.order = require(b, "order").get<int>();
      spec.degrees = value_or<std::vector<int>>(b, "degrees", {});
      spec.include_constant = value_or(b, "include_constant", false);
      if (b.contains("lambda_grid")) spec.lambda_grid = number_list(b.at("lambda_grid"), "baseline lambda_grid");
      if (spec.name == "kbsindy") throw Error(ErrorKind::config, "baseline name \"kbsindy\" is reserved");
      c.baselines.push_back(spec);
    }
  }
  if (j.contains("guided_refit") && !j.at("guided_refit").is_null()) {
    c.guided_refit_ratio = value_or(j.at("guided_refit"), "ratio", 1e-3);
  }
  c.order_norms = value_or(j, "order_norms", false);
  c.h_grid_points = value_or(j, "h_grid_points", 200);
  if (j.contains("output")) c.output = j.at("output").get<std::string>();

  c.search.validate(c.kernel);
  if (c.search.strategy == SelectionStrategy::holdout && !(c.split[1] > 0.0)) {
    throw Error(ErrorKind::config, "holdout selection needs a validation fraction");
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["name"] = c.name;
  j["system"] = c.system;
  j["runs"] = c.runs;
  j["seed"] = c.seed;
  j["library"] = {{"order", c.library_order}, {"degrees", c.library_degrees}, {"include_constant", c.include_constant}};
  j["aux_source"] = c.aux_source;
  j["derivatives"] = c.derivatives;
  j["derivative_state"] = c.derivative_state;
  j["kernel"] = kernel_config_json(c);
  json sel;
  sel["strategy"] = c.search.strategy == SelectionStrategy::bic ? "bic" : "holdout";
  sel["search"] = c.search_kind;
  sel["lambda_grid"] = c.search.lambda_grid;
  if (c.noise_var == "value") {
    sel["noise_var"] = c.noise_var_value;
  } else {
    sel["noise_var"] = c.noise_var;
  }
  sel["bic_noise"] = c.bic_noise;
  sel["refine"] = c.refine;
  sel["max_iter"] = c.max_iter;
  j["selection"] = sel;
  j["split"] = c.split;
  j["test"] = c.test;
  json bs = json::array();
  for (const auto& b : c.baselines) {
    bs.push_back({{"name", b.name},
                  {"order", b.order},
                  {"degrees", b.degrees},
                  {"include_constant", b.include_constant},
                  {"lambda_grid", b.lambda_grid}});
  }
  j["baselines"] = bs;
  j["guided_refit"] = c.guided_refit_ratio ? json{{"ratio", *c.guided_refit_ratio}} : json(nullptr);
  j["order_norms"] = c.order_norms;
  j["h_grid_points"] = c.h_grid_points;
  return j;
}

ExperimentConfig load_config(const fs::path& path) {
  return config_from_json(read_json(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

Simulation simulate_system(const json& system, std::uint64_t seed, bool test_copy) {
  const std::string kind = require(system, "kind").get<std::string>();
  if (kind == "lorenz") return simulate_lorenz(lorenz_config(system, seed, test_copy));
  if (kind == "gene") return simulate_gene(gene_config(system, seed, test_copy));
  if (kind == "calcium") return simulate_calcium_rde(calcium_config(system, seed, test_copy));
  if (kind == "logistic_ar") {
    LogisticConfig c;
    c.r = value_or(system, "r", c.r);
    c.a = value_or(system, "a", c.a);
    c.b = value_or(system, "b", c.b);
    c.x0 = value_or(system, "x0", c.x0);
    c.e0 = value_or(system, "e0", c.e0);
    c.steps = value_or(system, "steps", c.steps);
    c.snr = value_or(system, "snr", c.snr);
    c.seed = seed;
    return simulate_logistic_ar(c);
  }
  if (kind == "nfir") {
    NfirConfig c;
    c.alpha = value_or(system, "alpha", c.alpha);
    c.steps = value_or(system, "steps", c.steps);
    c.lags = value_or(system, "lags", c.lags);
    c.noise_sd = test_copy ? 0.0 : value_or(system, "noise_sd", c.noise_sd);
    if (test_copy) c.steps = value_or(system, "test_steps", c.steps);
    c.seed = seed;
    return simulate_nfir(c);
  }
  if (kind == "csv") return load_csv_system(system, {});
  throw Error(ErrorKind::schema, "unknown system kind \"" + kind + "\"");
}

double coefficient_error(const std::vector<std::pair<std::string, double>>& truth, const std::vector<std::string>& names,
                         const Eigen::Ref<const Eigen::VectorXd>& estimate) {
  if (static_cast<Eigen::Index>(names.size()) != estimate.size()) throw Error(ErrorKind::shape, "names and estimate differ");
  std::map<std::string, double> diff;
  for (const auto& [name, v] : truth) diff[name] += v;
  for (std::size_t i = 0; i < names.size(); ++i) diff[names[i]] -= estimate(static_cast<Eigen::Index>(i));
  double sq = 0.0;
  for (const auto& [name, d] : diff) sq += d * d;
  return std::sqrt(sq);
}

std::vector<double> order_component_norms(const ModelEstimate& model, const Dataset& data, int max_order) {
  const Eigen::MatrixXd theta = build_theta(model.library, data.states);
  std::vector<double> norms;
  for (int j = 1; j <= max_order; ++j) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(data.size());
    for (std::size_t t = 0; t < model.library.size(); ++t) {
      if (model.library.monomials[t].degree() == j) v += theta.col(static_cast<Eigen::Index>(t)) * model.xi_parametric(static_cast<Eigen::Index>(t));
    }
    for (const auto& spec : model.kernel) {
      const auto* p = std::get_if<PolySumKernel>(&spec.family);
      if (!p || j < p->first_order || j > p->last_order()) continue;
      const double scale = p->scales[static_cast<std::size_t>(j - p->first_order)];
      if (scale == 0.0) continue;
      const Eigen::MatrixXd inner = select_columns(spec, data.aux) * select_columns(spec, model.anchors).transpose();
      v += scale * (inner.array().pow(j).matrix() * model.xi_kernel);
    }
    norms.push_back(v.norm());
  }
  return norms;
}

ExperimentResult run_experiment(const ExperimentConfig& c) {
  ExperimentResult result;
  result.runs.resize(static_cast<std::size_t>(c.runs));
  parallel_for(result.runs.size(), [&](std::size_t i) { result.runs[i] = execute_run(c, i); });

  json& s = result.summary;
  s["schema_version"] = kConfigSchemaVersion;
  s["name"] = c.name;
  s["runs"] = c.runs;
  json runs = json::array();
  std::vector<json> kb_metrics;
  std::map<std::string, std::vector<json>> base_metrics;
  for (const auto& r : result.runs) {
    runs.push_back(r.summary);
    kb_metrics.push_back(r.kbsindy.metrics);
    for (const auto& b : r.baselines) base_metrics[b.name].push_back(b.metrics);
  }
  json agg;
  agg["kbsindy"] = aggregate(kb_metrics);
  json bagg = json::object();
  for (const auto& r0 : result.runs.front().baselines) {
    const auto& ms = base_metrics[r0.name];
    json a = aggregate(ms);
    int err_wins = 0, fit_wins = 0;
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const double ke = as_double(kb_metrics[i].value("coefficient_error", json(nullptr)));
      const double be = as_double(ms[i].value("coefficient_error", json(nullptr)));
      if (ke < be) ++err_wins;
      const char* fit_key = kb_metrics[i]["test_fit"].is_number() ? "test_fit" : "validation_fit";
      const double kf = as_double(kb_metrics[i].value(fit_key, json(nullptr)));
      const double bf = as_double(ms[i].value(fit_key, json(nullptr)));
      if (kf > bf) ++fit_wins;
    }
    a["kbsindy_error_wins"] = err_wins;
    a["kbsindy_fit_wins"] = fit_wins;
    bagg[r0.name] = a;
  }
  agg["baselines"] = bagg;
  s["aggregate"] = agg;
  s["run_results"] = runs;

  if (!c.output.empty()) {
    fs::create_directories(c.output);
    write_json(c.output / "config.json", config_to_json(c));
    for (std::size_t i = 0; i < result.runs.size(); ++i) write_run(c.output / run_dir_name(i), result.runs[i], c);
    write_json(c.output / "summary.json", s);
  }
  return result;
}

Comparison compare_runs(const fs::path& bundle_a, const std::string& model_a, const fs::path& bundle_b,
                        const std::string& model_b) {
  const json sa = read_json(bundle_a / "summary.json"), sb = read_json(bundle_b / "summary.json");
  const auto& ra = require(sa, "run_results");
  const auto& rb = require(sb, "run_results");
  if (ra.size() != rb.size()) {
    throw Error(ErrorKind::comparison, "bundles have different run counts (" + std::to_string(ra.size()) + " vs " +
                                           std::to_string(rb.size()) + ")");
  }
  Comparison out;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].value("seed", json(0)) != rb[i].value("seed", json(0))) {
      throw Error(ErrorKind::comparison, "run " + std::to_string(i) + " was generated from different seeds");
    }
    ComparisonRow row;
    row.run = static_cast<int>(i);
    row.error_a = error_from_csv(model_dir(bundle_a, i, model_a) / "coefficients.csv");
    row.error_b = error_from_csv(model_dir(bundle_b, i, model_b) / "coefficients.csv");
    const json ma = model_metrics(ra[i], model_a), mb = model_metrics(rb[i], model_b);
    const char* key = ma.value("test_fit", json(nullptr)).is_number() ? "test_fit" : "validation_fit";
    row.fit_a = as_double(ma.value(key, json(nullptr)));
    row.fit_b = as_double(mb.value(key, json(nullptr)));
    if (row.error_a < row.error_b) {
      ++out.wins_a;
    } else if (row.error_b < row.error_a) {
      ++out.wins_b;
    } else {
      ++out.ties;
    }
    out.rows.push_back(row);
  }
  return out;
}

void write_comparison(const fs::path& path, const Comparison& cmp) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "run,error_a,error_b,error_diff,fit_a,fit_b,winner\n";
  for (const auto& r : cmp.rows) {
    const char* winner = r.error_a < r.error_b ? "a" : r.error_b < r.error_a ? "b" : "tie";
    auto num = [](double v) { return std::isnan(v) ? std::string("nan") : format_double(v); };
    out << r.run << ',' << num(r.error_a) << ',' << num(r.error_b) << ',' << num(r.error_a - r.error_b) << ','
        << num(r.fit_a) << ',' << num(r.fit_b) << ',' << winner << '\n';
  }
}

std::vector<std::string> verify_bundle(const fs::path& bundle) {
  std::vector<std::string> problems;
  const json s = read_json(bundle / "summary.json");
  const auto& runs = require(s, "run_results");
  const auto close = [](double a, double b) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
  };
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const json& run = runs[i];
    const json& sch = require(run, "schema");
    const CsvSchema schema{sch.at("time").get<std::string>(), sch.at("states").get<std::vector<std::string>>(),
                           sch.at("target").get<std::string>(), sch.at("aux").get<std::vector<std::string>>()};
    const fs::path dir = bundle / run_dir_name(i);
    std::optional<Dataset> validation, test;
    if (fs::exists(dir / "validation.csv")) validation = load_csv(dir / "validation.csv", schema);
    if (fs::exists(dir / "test.csv")) test = load_csv(dir / "test.csv", schema);

    std::vector<std::string> models{"kbsindy"};
    for (const auto& [name, v] : run.at("baselines").items()) models.push_back(name);
    for (const auto& name : models) {
      const json m = model_metrics(run, name);
      const fs::path mdir = model_dir(bundle, i, name);
      const std::string where = run_dir_name(i) + "/" + name;
      if (m.contains("coefficient_error")) {
        const double e = error_from_csv(mdir / "coefficients.csv");
        if (!close(e, m.at("coefficient_error").get<double>())) problems.push_back(where + ": coefficient_error differs");
      }
      const ModelEstimate model = load_model(mdir / "model.json");
      const auto check_fit = [&](const char* key, const std::optional<Dataset>& d) {
        if (!d) return;
        const Eigen::VectorXd y_hat = predict_batch(model, d->states, d->aux);
        double fit = kNaN;
        try {
          fit = prediction_fit(d->targets, y_hat);
        } catch (const Error&) {
        }
        if (!close(fit, as_double(m.value(key, json(nullptr))))) problems.push_back(where + ": " + key + " differs");
      };
      check_fit("validation_fit", validation);
      check_fit("test_fit", test);
    }
  }
  return problems;
}

}  // namespace kbsindy

#include "kbsindy/selection.hpp"

#include "kbsindy/error.hpp"
#include "kbsindy/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace kbsindy {

std::vector<HyperparameterSlot> hyperparameter_slots(const KernelSet& kernel) {
  std::vector<HyperparameterSlot> slots;
  const bool prefix = kernel.size() > 1;
  for (std::size_t c = 0; c < kernel.size(); ++c) {
    const std::string head = prefix ? "k" + std::to_string(c) + "_" : "";
    if (kernel[c].is_gaussian()) {
      slots.push_back({c, HyperparameterSlot::Kind::scale, 0, head + "scale"});
      slots.push_back({c, HyperparameterSlot::Kind::width, 0, head + "width"});
    } else {
      const auto& p = std::get<PolySumKernel>(kernel[c].family);
      for (int j = p.first_order; j <= p.last_order(); ++j) {
        slots.push_back({c, HyperparameterSlot::Kind::scale, j, head + "scale_o" + std::to_string(j)});
      }
    }
  }
  return slots;
}

KernelSet with_hyperparameters(const KernelSet& kernel, const std::vector<double>& values) {
  const auto slots = hyperparameter_slots(kernel);
  if (values.size() != slots.size()) throw Error(ErrorKind::shape, "hyperparameter count does not match kernel");
  KernelSet out = kernel;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    auto& spec = out[slots[s].component];
    if (auto* g = std::get_if<GaussianKernel>(&spec.family)) {
      (slots[s].kind == HyperparameterSlot::Kind::scale ? g->scale : g->width) = values[s];
    } else {
      auto& p = std::get<PolySumKernel>(spec.family);
      p.scales[static_cast<std::size_t>(slots[s].order - p.first_order)] = values[s];
    }
  }
  return out;
}

void SearchSpace::validate(const KernelSet& kernel) const {
  if (lambda_grid.empty()) throw Error(ErrorKind::config, "empty lambda grid");
  for (double l : lambda_grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw Error(ErrorKind::config, "lambda grid values must be finite and >= 0");
  }
  const auto slots = hyperparameter_slots(kernel);
  if (kernel_grids.size() != slots.size()) {
    throw Error(ErrorKind::config, "expected " + std::to_string(slots.size()) + " kernel grids, got " +
                                       std::to_string(kernel_grids.size()));
  }
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (kernel_grids[s].empty()) throw Error(ErrorKind::config, "empty grid for " + slots[s].name);
    for (double v : kernel_grids[s]) {
      const bool ok = slots[s].kind == HyperparameterSlot::Kind::width ? v > 0.0 : v >= 0.0;
      if (!ok || !std::isfinite(v)) throw Error(ErrorKind::config, "invalid value in grid for " + slots[s].name);
    }
  }
}

double degrees_of_freedom(const GramMatrix& gram, double noise_var, Eigen::Index support_size) {
  const KernelWeighting w(gram.K, noise_var);
  return w.hat_trace() + static_cast<double>(support_size);
}

double bic_score(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& y_hat,
                 double noise_var_hat, double dof, Eigen::Index m) {
  if (y.size() != y_hat.size()) throw Error(ErrorKind::shape, "bic_score: length mismatch");
  return (y - y_hat).squaredNorm() + noise_var_hat * std::log(static_cast<double>(m)) * dof;
}

double residual_noise_variance(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                               const Eigen::Ref<const Eigen::VectorXd>& y) {
  const Eigen::Index m = theta.rows(), p = theta.cols();
  if (m <= p) {
    throw Error(ErrorKind::insufficient_data, "residual variance needs more samples than library terms");
  }
  const Eigen::VectorXd r = y - theta * least_squares(theta, y);
  return r.squaredNorm() / static_cast<double>(m - p);
}

namespace {

// Kernel matrices that do not depend on the hyperparameters, for the train
// anchors and (optionally) validation-to-train cross terms.
struct BaseMatrices {
  // Gaussian: squared distances. PolySum: Hadamard powers of the inner products, one per order.
  std::vector<Eigen::MatrixXd> train;
  std::vector<Eigen::MatrixXd> cross;
};

class KernelCache {
 public:
  KernelCache(const KernelSet& kernel, const Eigen::MatrixXd& anchors, const Eigen::MatrixXd* points)
      : kernel_(kernel) {
    for (const auto& spec : kernel) {
      const Eigen::MatrixXd z = select_columns(spec, anchors);
      const Eigen::MatrixXd zp = points ? select_columns(spec, *points) : Eigen::MatrixXd();
      BaseMatrices base;
      if (spec.is_gaussian()) {
        base.train.push_back(squared_distances(z, z));
        if (points) base.cross.push_back(squared_distances(zp, z));
      } else {
        const auto& p = std::get<PolySumKernel>(spec.family);
        const Eigen::MatrixXd inner = z * z.transpose();
        Eigen::MatrixXd power = inner.array().pow(p.first_order).matrix();
        Eigen::MatrixXd inner_x, power_x;
        if (points) {
          inner_x = zp * z.transpose();
          power_x = inner_x.array().pow(p.first_order).matrix();
        }
        for (std::size_t i = 0; i < p.scales.size(); ++i) {
          if (i > 0) {
            power.array() *= inner.array();
            if (points) power_x.array() *= inner_x.array();
          }
          base.train.push_back(power);
          if (points) base.cross.push_back(power_x);
        }
      }
      bases_.push_back(std::move(base));
    }
  }

  // Same arithmetic as build_gram / cross_gram so cached and fresh matrices agree bit for bit.
  Eigen::MatrixXd gram(const KernelSet& k, Eigen::Index m) const { return assemble(k, m, m, false); }
  Eigen::MatrixXd cross(const KernelSet& k, Eigen::Index rows, Eigen::Index m) const {
    return assemble(k, rows, m, true);
  }

 private:
  Eigen::MatrixXd assemble(const KernelSet& k, Eigen::Index rows, Eigen::Index cols, bool cross) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
    for (std::size_t c = 0; c < k.size(); ++c) {
      if (k[c].is_disabled()) continue;
      const auto& mats = cross ? bases_[c].cross : bases_[c].train;
      Eigen::MatrixXd part;
      if (const auto* g = std::get_if<GaussianKernel>(&k[c].family)) {
        part = g->scale * (-mats[0].array() / g->width).exp();
      } else {
        const auto& p = std::get<PolySumKernel>(k[c].family);
        part = Eigen::MatrixXd::Zero(rows, cols);
        for (std::size_t i = 0; i < p.scales.size(); ++i) {
          if (p.scales[i] != 0.0) part += p.scales[i] * mats[i];
        }
      }
      if (!cross) part.triangularView<Eigen::StrictlyLower>() = part.transpose();
      out += part;
    }
    return out;
  }

  KernelSet kernel_;
  std::vector<BaseMatrices> bases_;
};

struct Problem {
  const Dataset& train;
  const std::optional<Dataset>& validation;
  const MonomialLibrary& library;
  const KernelSet& kernel;
  const SearchOptions& options;
  SelectionStrategy strategy;

  Eigen::MatrixXd theta;
  Eigen::MatrixXd anchors;
  Eigen::MatrixXd theta_val;
  Eigen::MatrixXd aux_val;
  double bic_noise = 0.0;
  std::optional<KernelCache> cache;

  Problem(const Dataset& tr, const std::optional<Dataset>& val, const MonomialLibrary& lib, const KernelSet& k,
          const SearchOptions& opt, SelectionStrategy strat)
      : train(tr), validation(val), library(lib), kernel(k), options(opt), strategy(strat) {
    train.validate();
    if (!(options.noise_var > 0.0)) throw Error(ErrorKind::validation, "noise variance must be positive");
    if (strategy == SelectionStrategy::holdout && !validation) {
      throw Error(ErrorKind::config, "holdout selection needs a validation set");
    }
    if (train.size() < 2) throw Error(ErrorKind::insufficient_data, "search needs at least two samples");
    for (const auto& spec : kernel) spec.validate();
    theta = build_theta(library, train.states);
    anchors = train.aux.rows() == train.size() ? train.aux : Eigen::MatrixXd(train.size(), 0);
    const bool has_kernel = !kernel.empty();
    if (has_kernel && anchors.cols() == 0) throw Error(ErrorKind::shape, "kernel search needs aux columns");
    if (validation) {
      validation->validate();
      theta_val = build_theta(library, validation->states);
      aux_val = validation->aux.rows() == validation->size() ? validation->aux
                                                               : Eigen::MatrixXd(validation->size(), 0);
      if (has_kernel && aux_val.cols() != anchors.cols()) {
        throw Error(ErrorKind::shape, "validation aux dimension differs from training aux");
      }
    }
    bic_noise = options.bic_noise_var ? *options.bic_noise_var : options.noise_var;
    if (!(bic_noise >= 0.0)) throw Error(ErrorKind::validation, "BIC noise variance must be nonnegative");
    if (has_kernel) cache.emplace(kernel, anchors, validation ? &aux_val : nullptr);
  }

  Eigen::MatrixXd gram(const KernelSet& k) const {
    return cache ? cache->gram(k, train.size()) : Eigen::MatrixXd::Zero(train.size(), train.size());
  }
};

double score_of(const ScoreRow& row, SelectionStrategy strategy) {
  // Lower is better in both cases.
  return strategy == SelectionStrategy::bic ? row.bic : -row.validation_fit;
}

double scale_sum(const std::vector<double>& values, const std::vector<HyperparameterSlot>& slots) {
  double sum = 0.0;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].kind == HyperparameterSlot::Kind::scale) sum += values[s];
  }
  return sum;
}

// True when a should be preferred to b.
bool better(const ScoreRow& a, const ScoreRow& b, SelectionStrategy strategy,
            const std::vector<HyperparameterSlot>& slots) {
  const double sa = score_of(a, strategy), sb = score_of(b, strategy);
  if (std::isnan(sa) != std::isnan(sb)) return std::isnan(sb);
  const double tol = 1e-12 * std::max({1.0, std::abs(sa), std::abs(sb)});
  if (std::abs(sa - sb) > tol) return sa < sb;
  if (a.dof != b.dof) return a.dof < b.dof;
  if (a.lambda != b.lambda) return a.lambda > b.lambda;
  const double ca = scale_sum(a.kernel_values, slots), cb = scale_sum(b.kernel_values, slots);
  if (ca != cb) return ca < cb;
  return a.kernel_values < b.kernel_values;
}

std::vector<std::vector<double>> cartesian(const std::vector<std::vector<double>>& grids) {
  std::vector<std::vector<double>> out{{}};
  for (const auto& g : grids) {
    std::vector<std::vector<double>> next;
    next.reserve(out.size() * g.size());
    for (const auto& prefix : out) {
      for (double v : g) {
        auto row = prefix;
        row.push_back(v);
        next.push_back(std::move(row));
      }
    }
    out = std::move(next);
  }
  return out;
}

struct Evaluated {
  ScoreRow row;
  KbSindyFit fit;
  double hat_trace = 0.0;
};

// All lambdas for one kernel setting; the factorization is shared.
std::vector<Evaluated> evaluate(const Problem& pb, const std::vector<double>& values,
                                const std::vector<double>& lambdas, int stage, bool keep_fits) {
  const KernelSet k = with_hyperparameters(pb.kernel, values);
  const Eigen::MatrixXd K = pb.gram(k);
  const KbSindySolver solver(pb.theta, pb.train.targets, K, pb.options.noise_var);
  const double hat = solver.weighting().hat_trace();
  const bool kernel_on = !is_disabled(k);
  Eigen::MatrixXd cross;
  if (pb.validation && kernel_on) cross = pb.cache->cross(k, pb.validation->size(), pb.train.size());

  std::vector<Evaluated> out;
  out.reserve(lambdas.size());
  for (double lambda : lambdas) {
    Evaluated e;
    e.fit = solver.solve(lambda, pb.options.max_iter);
    e.hat_trace = hat;
    ScoreRow& row = e.row;
    row.stage = stage;
    row.lambda = lambda;
    row.kernel_values = values;
    const Eigen::VectorXd& xi = e.fit.parametric.coefficients;
    Eigen::VectorXd y_hat = pb.theta * xi;
    if (kernel_on) y_hat += K * e.fit.xi_kernel;
    row.rss = (pb.train.targets - y_hat).squaredNorm();
    row.nnz = static_cast<Eigen::Index>(e.fit.parametric.support.size());
    row.dof = hat + static_cast<double>(row.nnz);
    row.bic = row.rss + pb.bic_noise * std::log(static_cast<double>(pb.train.size())) * row.dof;
    row.validation_fit = std::numeric_limits<double>::quiet_NaN();
    if (pb.validation) {
      Eigen::VectorXd y_val = pb.theta_val * xi;
      if (kernel_on) y_val += cross * e.fit.xi_kernel;
      try {
        row.validation_fit = prediction_fit(pb.validation->targets, y_val);
      } catch (const Error&) {
        // zero validation target: the fit stays undefined
      }
    }
    if (!keep_fits) e.fit = {};
    out.push_back(std::move(e));
  }
  return out;
}

ModelEstimate to_model(const Problem& pb, const std::vector<double>& values, double lambda) {
  const KernelSet k = with_hyperparameters(pb.kernel, values);
  const Eigen::MatrixXd K = pb.gram(k);
  const KbSindySolver solver(pb.theta, pb.train.targets, K, pb.options.noise_var);
  KbSindyFit fit = solver.solve(lambda, pb.options.max_iter);
  ModelEstimate model;
  model.library = pb.library;
  model.xi_parametric = std::move(fit.parametric.coefficients);
  model.kernel = k;
  model.anchors = pb.anchors;
  model.xi_kernel = std::move(fit.xi_kernel);
  model.noise_var = pb.options.noise_var;
  model.lambda = lambda;
  model.iterations = fit.parametric.iterations;
  model.converged = fit.parametric.converged;
  model.dof = solver.weighting().hat_trace() + static_cast<double>(fit.parametric.support.size());
  return model;
}

std::vector<ScoreRow> scan(const Problem& pb, const std::vector<std::vector<double>>& combos,
                           const std::vector<double>& lambdas, int stage) {
  std::vector<std::vector<Evaluated>> results(combos.size());
  parallel_for(combos.size(), [&](std::size_t i) { results[i] = evaluate(pb, combos[i], lambdas, stage, false); });
  std::vector<ScoreRow> rows;
  rows.reserve(combos.size() * lambdas.size());
  for (auto& r : results) {
    for (auto& e : r) rows.push_back(std::move(e.row));
  }
  return rows;
}

std::size_t argbest(const std::vector<ScoreRow>& rows, std::size_t first, SelectionStrategy strategy,
                    const std::vector<HyperparameterSlot>& slots) {
  std::size_t best = first;
  for (std::size_t i = first + 1; i < rows.size(); ++i) {
    if (better(rows[i], rows[best], strategy, slots)) best = i;
  }
  return best;
}

// Nelder-Mead over log10 of the nonzero scale slots at lambda = 0.
void refine_scales(const Problem& pb, std::vector<ScoreRow>& table, std::size_t& best,
                   const std::vector<HyperparameterSlot>& slots) {
  const std::vector<double> start = table[best].kernel_values;
  std::vector<std::size_t> free;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].kind == HyperparameterSlot::Kind::scale && start[s] > 0.0) free.push_back(s);
  }
  if (free.empty()) return;
  const std::size_t n = free.size();
  auto values_of = [&](const std::vector<double>& p) {
    auto v = start;
    for (std::size_t i = 0; i < n; ++i) v[free[i]] = std::pow(10.0, p[i]);
    return v;
  };
  auto objective = [&](const std::vector<double>& p) {
    ScoreRow row = evaluate(pb, values_of(p), {0.0}, 1, false).front().row;
    const double f = score_of(row, pb.strategy);
    table.push_back(std::move(row));
    return std::isnan(f) ? std::numeric_limits<double>::infinity() : f;
  };

  std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) simplex[0][i] = std::log10(start[free[i]]);
  for (std::size_t j = 1; j <= n; ++j) {
    simplex[j] = simplex[0];
    simplex[j][j - 1] += 0.5;
  }
  std::vector<double> f(n + 1);
  for (std::size_t j = 0; j <= n; ++j) f[j] = objective(simplex[j]);

  for (int iter = 0; iter < 40 * static_cast<int>(n); ++iter) {
    std::vector<std::size_t> order(n + 1);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
    const std::size_t lo = order.front(), hi = order.back(), second = order[n - 1];
    if (std::abs(f[hi] - f[lo]) <= 1e-10 * (std::abs(f[lo]) + 1e-12)) break;
    std::vector<double> centroid(n, 0.0);
    for (std::size_t j = 0; j <= n; ++j) {
      if (j == hi) continue;
      for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[j][i] / static_cast<double>(n);
    }
    auto along = [&](double t) {
      std::vector<double> p(n);
      for (std::size_t i = 0; i < n; ++i) p[i] = centroid[i] + t * (simplex[hi][i] - centroid[i]);
      return p;
    };
    const auto reflected = along(-1.0);
    const double fr = objective(reflected);
    if (fr < f[lo]) {
      const auto expanded = along(-2.0);
      const double fe = objective(expanded);
      if (fe < fr) {
        simplex[hi] = expanded, f[hi] = fe;
      } else {
        simplex[hi] = reflected, f[hi] = fr;
      }
    } else if (fr < f[second]) {
      simplex[hi] = reflected, f[hi] = fr;
    } else {
      const auto contracted = along(0.5);
      const double fc = objective(contracted);
      if (fc < f[hi]) {
        simplex[hi] = contracted, f[hi] = fc;
      } else {
        for (std::size_t j = 0; j <= n; ++j) {
          if (j == lo) continue;
          for (std::size_t i = 0; i < n; ++i) simplex[j][i] = simplex[lo][i] + 0.5 * (simplex[j][i] - simplex[lo][i]);
          f[j] = objective(simplex[j]);
        }
      }
    }
  }
  best = argbest(table, 0, pb.strategy, slots);
}

std::vector<std::string> names_of(const std::vector<HyperparameterSlot>& slots) {
  std::vector<std::string> names;
  for (const auto& s : slots) names.push_back(s.name);
  return names;
}

}  // namespace

SearchResult grid_search(const Dataset& train, const SearchSpace& space, const MonomialLibrary& library,
                         const KernelSet& kernel, const std::optional<Dataset>& validation,
                         const SearchOptions& options) {
  space.validate(kernel);
  const Problem pb(train, validation, library, kernel, options, space.strategy);
  const auto slots = hyperparameter_slots(kernel);

  SearchResult result;
  result.slot_names = names_of(slots);
  result.table = scan(pb, cartesian(space.kernel_grids), space.lambda_grid, 1);
  result.best_index = argbest(result.table, 0, space.strategy, slots);
  const ScoreRow& best = result.table[result.best_index];
  result.best = to_model(pb, best.kernel_values, best.lambda);
  return result;
}

SearchResult two_stage_search(const Dataset& train, const SearchSpace& space, const MonomialLibrary& library,
                              const KernelSet& kernel, const std::optional<Dataset>& validation,
                              const SearchOptions& options) {
  space.validate(kernel);
  const Problem pb(train, validation, library, kernel, options, space.strategy);
  const auto slots = hyperparameter_slots(kernel);

  SearchResult result;
  result.slot_names = names_of(slots);
  result.table = scan(pb, cartesian(space.kernel_grids), {0.0}, 1);
  std::size_t stage1 = argbest(result.table, 0, space.strategy, slots);
  if (options.nelder_mead_refine) refine_scales(pb, result.table, stage1, slots);
  const std::vector<double> chosen = result.table[stage1].kernel_values;

  const std::size_t first = result.table.size();
  for (auto& row : scan(pb, {chosen}, space.lambda_grid, 2)) result.table.push_back(std::move(row));
  result.best_index = argbest(result.table, first, space.strategy, slots);
  const ScoreRow& best = result.table[result.best_index];
  result.best = to_model(pb, best.kernel_values, best.lambda);
  return result;
}

void write_score_table(const std::filesystem::path& path, const SearchResult& result) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "stage,lambda";
  for (const auto& name : result.slot_names) out << ',' << name;
  out << ",rss,dof,nnz,bic,validation_fit,selected\n";
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    const ScoreRow& r = result.table[i];
    out << r.stage << ',' << format_double(r.lambda);
    for (double v : r.kernel_values) out << ',' << format_double(v);
    out << ',' << format_double(r.rss) << ',' << format_double(r.dof) << ',' << r.nnz << ','
        << format_double(r.bic) << ',' << (std::isnan(r.validation_fit) ? std::string("nan") : format_double(r.validation_fit))
        << ',' << (i == result.best_index ? 1 : 0) << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace kbsindy

#pragma once

#include "kbsindy/data.hpp"
#include "kbsindy/kernel.hpp"
#include "kbsindy/library.hpp"
#include "kbsindy/regression.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kbsindy {

enum class SelectionStrategy { bic, holdout };

/// A tunable kernel hyperparameter: the scale or width of a Gaussian component,
/// or the scale attached to one order of a polynomial-sum component.
struct HyperparameterSlot {
  enum class Kind { scale, width };
  std::size_t component = 0;
  Kind kind = Kind::scale;
  int order = 0;  ///< polynomial order for PolySum scales, 0 otherwise
  std::string name;
};

std::vector<HyperparameterSlot> hyperparameter_slots(const KernelSet& kernel);
KernelSet with_hyperparameters(const KernelSet& kernel, const std::vector<double>& values);

struct SearchSpace {
  std::vector<double> lambda_grid;
  /// One grid per slot of hyperparameter_slots(kernel template), same order.
  std::vector<std::vector<double>> kernel_grids;
  SelectionStrategy strategy = SelectionStrategy::bic;

  void validate(const KernelSet& kernel) const;
};

struct SearchOptions {
  double noise_var = 1.0;                ///< eta^2 in A = K + eta^2 I
  std::optional<double> bic_noise_var;   ///< eta-hat^2 in the BIC penalty; defaults to noise_var
  int max_iter = kDefaultMaxIter;
  bool nelder_mead_refine = false;       ///< polish stage-1 kernel scales of two_stage_search
};

struct ScoreRow {
  int stage = 1;
  double lambda = 0.0;
  std::vector<double> kernel_values;
  double rss = 0.0;
  double dof = 0.0;
  Eigen::Index nnz = 0;
  double bic = 0.0;
  double validation_fit = 0.0;  ///< NaN when no validation data was given
};

struct SearchResult {
  ModelEstimate best;
  std::size_t best_index = 0;
  std::vector<std::string> slot_names;
  std::vector<ScoreRow> table;

  const ScoreRow& best_row() const { return table.at(best_index); }
};

/// trace(K (K + noise_var I)^-1) + support_size.
double degrees_of_freedom(const GramMatrix& gram, double noise_var, Eigen::Index support_size);

/// ||y - y_hat||^2 + noise_var_hat * ln(m) * dof.
double bic_score(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& y_hat,
                 double noise_var_hat, double dof, Eigen::Index m);

/// Residual variance ||y - Theta Xi_LS||^2 / (m - p) of the unpenalized fit;
/// the BIC noise level when no better estimate is available.
double residual_noise_variance(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                               const Eigen::Ref<const Eigen::VectorXd>& y);

/// Evaluates KB-Sindy at every (lambda, kernel hyperparameter) grid point and
/// keeps the minimum-BIC or maximum-validation-fit model. Ties go to smaller
/// dof, then larger lambda, then smaller total kernel scale.
SearchResult grid_search(const Dataset& train, const SearchSpace& space, const MonomialLibrary& library,
                         const KernelSet& kernel, const std::optional<Dataset>& validation,
                         const SearchOptions& options);

/// Stage 1 fixes lambda = 0 and scans the kernel grids; stage 2 keeps the
/// chosen kernel and scans lambda. Table rows carry their stage number.
SearchResult two_stage_search(const Dataset& train, const SearchSpace& space, const MonomialLibrary& library,
                              const KernelSet& kernel, const std::optional<Dataset>& validation,
                              const SearchOptions& options);

/// CSV: stage, lambda, one column per slot, rss, dof, nnz, bic, validation_fit, selected.
void write_score_table(const std::filesystem::path& path, const SearchResult& result);

}  // namespace kbsindy

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace kbsindy {

struct SmoothedSeries {
  Eigen::VectorXd values;
  Eigen::VectorXd derivatives;
  double noise_var_hat = 0.0;
  double penalty = 0.0;
  /// Sampling variance of each derivative estimate under white noise of
  /// variance noise_var_hat, and its mean over the samples.
  Eigen::VectorXd derivative_var;
  double derivative_var_hat = 0.0;
};

/// Cubic smoothing spline minimizing sum (s_i - g(t_i))^2 + mu * int g''^2,
/// solved in O(m) with a banded factorization. mu comes from generalized
/// cross-validation unless given. derivative_var needs one solve per sample,
/// so the whole call is O(m^2).
SmoothedSeries smooth_and_differentiate(const Eigen::Ref<const Eigen::VectorXd>& times,
                                        const Eigen::Ref<const Eigen::VectorXd>& samples,
                                        std::optional<double> penalty = std::nullopt);

/// Smooths each block [starts[k], starts[k+1]) on its own, e.g. the separate
/// sampling regimes of one experiment. noise_var_hat pools the blocks.
SmoothedSeries smooth_segments(const Eigen::Ref<const Eigen::VectorXd>& times,
                               const Eigen::Ref<const Eigen::VectorXd>& samples,
                               const std::vector<Eigen::Index>& starts);

/// GCV score m * RSS / tr(I - S)^2 for a fixed penalty.
double gcv_score(const Eigen::Ref<const Eigen::VectorXd>& times, const Eigen::Ref<const Eigen::VectorXd>& samples,
                 double penalty);

enum class Axis { time, space };

/// First or second derivative on a uniform grid: central differences inside,
/// one-sided second-order stencils at the ends.
Eigen::VectorXd finite_difference(const Eigen::Ref<const Eigen::VectorXd>& grid,
                                  const Eigen::Ref<const Eigen::VectorXd>& samples, int order);

/// Same stencils applied to a field whose rows are time steps and columns are
/// space points. Axis::time differentiates down columns, Axis::space along rows.
Eigen::MatrixXd finite_difference(const Eigen::Ref<const Eigen::VectorXd>& grid,
                                  const Eigen::Ref<const Eigen::MatrixXd>& field, int order, Axis axis);

}  // namespace kbsindy

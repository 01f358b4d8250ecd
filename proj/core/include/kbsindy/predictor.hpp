#pragma once

#include "kbsindy/regression.hpp"

#include <Eigen/Dense>

namespace kbsindy {

/// h-hat(z) = sum_i xi_i K(z, z_i).
double predict_h(const ModelEstimate& model, const Eigen::Ref<const Eigen::VectorXd>& z);

/// Parametric part sum_i phi_i(x) Xi_i plus predict_h(z).
double predict_f(const ModelEstimate& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& z);

/// Row-wise predict_f.
Eigen::VectorXd predict_batch(const ModelEstimate& model, const Eigen::Ref<const Eigen::MatrixXd>& states,
                              const Eigen::Ref<const Eigen::MatrixXd>& aux);

/// Row-wise predict_h over a set of z points.
Eigen::VectorXd predict_h_batch(const ModelEstimate& model, const Eigen::Ref<const Eigen::MatrixXd>& aux);

/// Parametric part only, row-wise.
Eigen::VectorXd predict_parametric(const ModelEstimate& model, const Eigen::Ref<const Eigen::MatrixXd>& states);

}  // namespace kbsindy

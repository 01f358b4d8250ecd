#include "kbsindy/predictor.hpp"

#include "kbsindy/error.hpp"

namespace kbsindy {

double predict_h(const ModelEstimate& model, const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() != model.anchors.cols()) throw Error(ErrorKind::shape, "z length differs from anchor dimension");
  return predict_h_batch(model, z.transpose())[0];
}

double predict_f(const ModelEstimate& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (x.size() != model.library.n) throw Error(ErrorKind::shape, "x length differs from library dimension");
  return predict_batch(model, x.transpose(), z.transpose())[0];
}

Eigen::VectorXd predict_h_batch(const ModelEstimate& model, const Eigen::Ref<const Eigen::MatrixXd>& aux) {
  if (is_disabled(model.kernel) || model.xi_kernel.size() == 0) return Eigen::VectorXd::Zero(aux.rows());
  if (aux.cols() != model.anchors.cols()) throw Error(ErrorKind::shape, "aux columns differ from anchor dimension");
  return cross_gram(model.kernel, aux, model.anchors) * model.xi_kernel;
}

Eigen::VectorXd predict_parametric(const ModelEstimate& model, const Eigen::Ref<const Eigen::MatrixXd>& states) {
  if (model.library.size() == 0) return Eigen::VectorXd::Zero(states.rows());
  return build_theta(model.library, states) * model.xi_parametric;
}

Eigen::VectorXd predict_batch(const ModelEstimate& model, const Eigen::Ref<const Eigen::MatrixXd>& states,
                              const Eigen::Ref<const Eigen::MatrixXd>& aux) {
  Eigen::VectorXd out = predict_parametric(model, states);
  if (is_disabled(model.kernel) || model.xi_kernel.size() == 0) return out;
  if (states.rows() != aux.rows()) throw Error(ErrorKind::shape, "states and aux row counts differ");
  return out + predict_h_batch(model, aux);
}

}  // namespace kbsindy

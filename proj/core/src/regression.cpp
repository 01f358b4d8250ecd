#include "kbsindy/regression.hpp"

#include "kbsindy/error.hpp"

#include <algorithm>
#include <cmath>

namespace kbsindy {

namespace {

constexpr double kRankTolerance = 1e-10;

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorKind::validation, std::string("non-finite entries in ") + what);
}

Eigen::VectorXd pseudo_inverse_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sigma = svd.singularValues();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.cols());
  if (sigma.size() == 0 || sigma[0] == 0.0) return out;
  const double cutoff = kRankTolerance * sigma[0];
  const Eigen::VectorXd uty = svd.matrixU().transpose() * y;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma[i] > cutoff) out += svd.matrixV().col(i) * (uty[i] / sigma[i]);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// LeastSquaresProblem

LeastSquaresProblem::LeastSquaresProblem(Eigen::MatrixXd design, Eigen::VectorXd y)
    : design_(std::move(design)), y_(std::move(y)) {
  if (design_.rows() != y_.size()) throw Error(ErrorKind::shape, "design rows differ from target length");
  if (design_.rows() < 1) throw Error(ErrorKind::validation, "least squares needs at least one row");
  require_finite(design_, "regression matrix");
  require_finite(y_, "targets");
  column_scale_ = design_.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < column_scale_.size(); ++j) {
    if (column_scale_[j] == 0.0) column_scale_[j] = 1.0;
  }
  scaled_ = design_ * column_scale_.cwiseInverse().asDiagonal();
}

Eigen::VectorXd LeastSquaresProblem::solve(const std::vector<Eigen::Index>& columns) const {
  const auto s = static_cast<Eigen::Index>(columns.size());
  if (s == 0) return {};
  Eigen::MatrixXd X(design_.rows(), s);
  for (Eigen::Index k = 0; k < s; ++k) X.col(k) = scaled_.col(columns[static_cast<std::size_t>(k)]);

  bool full_rank = X.rows() >= s;
  Eigen::VectorXd scaled_solution;
  if (full_rank) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    const Eigen::VectorXd diag = qr.matrixQR().diagonal().cwiseAbs();
    const double largest = diag.maxCoeff();
    full_rank = largest > 0.0 && diag.minCoeff() > kRankTolerance * largest && diag.allFinite();
    if (full_rank) scaled_solution = qr.solve(y_);
  }
  if (full_rank) {
    Eigen::VectorXd out(s);
    for (Eigen::Index k = 0; k < s; ++k) out[k] = scaled_solution[k] / column_scale_[columns[static_cast<std::size_t>(k)]];
    return out;
  }

  // Minimum-norm solution in the original (unscaled) coordinates.
  Eigen::MatrixXd raw(design_.rows(), s);
  for (Eigen::Index k = 0; k < s; ++k) raw.col(k) = design_.col(columns[static_cast<std::size_t>(k)]);
  return pseudo_inverse_solve(raw, y_);
}

const Eigen::VectorXd& LeastSquaresProblem::full_solution() const {
  if (!full_) {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(cols()));
    for (Eigen::Index j = 0; j < cols(); ++j) all[static_cast<std::size_t>(j)] = j;
    full_ = solve(all);
  }
  return *full_;
}

// ---------------------------------------------------------------------------
// Thresholding loop

SparseSolution sequential_threshold(const LeastSquaresProblem& problem, double lambda, int max_iter) {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::validation, "lambda must be nonnegative");
  const Eigen::Index p = problem.cols();
  SparseSolution sol;
  sol.coefficients = Eigen::VectorXd::Zero(p);
  if (p == 0) {
    sol.converged = true;
    return sol;
  }

  Eigen::VectorXd xi = problem.full_solution();
  if (!xi.allFinite()) throw Error(ErrorKind::numerical, "least-squares estimate is not finite");
  std::vector<Eigen::Index> previous(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) previous[static_cast<std::size_t>(j)] = j;

  while (true) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index j : previous) {
      if (std::abs(xi[j]) >= lambda) support.push_back(j);
    }
    if (support == previous) {
      sol.converged = true;
      break;
    }
    for (Eigen::Index j : previous) {
      if (std::abs(xi[j]) < lambda) xi[j] = 0.0;
    }
    if (support.empty()) {
      sol.converged = true;
      previous.clear();
      break;
    }
    if (sol.iterations >= max_iter) {
      previous = std::move(support);
      sol.converged = false;
      break;
    }
    const Eigen::VectorXd refit = problem.solve(support);
    if (!refit.allFinite()) throw Error(ErrorKind::numerical, "restricted least-squares estimate is not finite");
    for (std::size_t k = 0; k < support.size(); ++k) xi[support[k]] = refit[static_cast<Eigen::Index>(k)];
    ++sol.iterations;
    previous = std::move(support);
  }

  sol.coefficients = xi;
  sol.support = previous;
  return sol;
}

Eigen::VectorXd least_squares(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                              const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (theta.cols() < 1) throw Error(ErrorKind::validation, "least squares needs at least one column");
  return LeastSquaresProblem(theta, y).full_solution();
}

SparseSolution sindy(const Eigen::Ref<const Eigen::MatrixXd>& theta, const Eigen::Ref<const Eigen::VectorXd>& y,
                     double lambda, int max_iter) {
  return sequential_threshold(LeastSquaresProblem(theta, y), lambda, max_iter);
}

// ---------------------------------------------------------------------------
// Kernel weighting

namespace {

Eigen::LLT<Eigen::MatrixXd> factor_with_jitter(const Eigen::MatrixXd& A, double& jitter) {
  jitter = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() == Eigen::Success) return llt;
  const double base = A.trace() / static_cast<double>(A.rows());
  for (double rel = 1e-12; rel <= 1e-6 * (1.0 + 1e-9); rel *= 10.0) {
    jitter = rel * base;
    Eigen::MatrixXd shifted = A;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw Error(ErrorKind::numerical, "matrix is not positive definite even after jitter");
}

}  // namespace

KernelWeighting::KernelWeighting(const Eigen::Ref<const Eigen::MatrixXd>& K, double noise_var)
    : size_(K.rows()), noise_var_(noise_var) {
  if (K.rows() != K.cols()) throw Error(ErrorKind::shape, "kernel matrix must be square");
  if (!(noise_var > 0.0)) throw Error(ErrorKind::validation, "noise variance must be positive");
  require_finite(K, "kernel matrix");
  zero_kernel_ = (K.array() == 0.0).all();
  if (zero_kernel_) return;
  Eigen::MatrixXd A = K;
  A.diagonal().array() += noise_var;
  llt_ = factor_with_jitter(A, jitter_);
}

Eigen::VectorXd KernelWeighting::solve(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != size_) throw Error(ErrorKind::shape, "vector length differs from kernel size");
  if (zero_kernel_) return v / noise_var_;
  return llt_.solve(v);
}

Eigen::MatrixXd KernelWeighting::whiten(const Eigen::Ref<const Eigen::MatrixXd>& M) const {
  if (M.rows() != size_) throw Error(ErrorKind::shape, "matrix rows differ from kernel size");
  if (zero_kernel_) return M / std::sqrt(noise_var_);
  Eigen::MatrixXd out = M;
  llt_.matrixL().solveInPlace(out);
  return out;
}

double KernelWeighting::hat_trace() const {
  if (zero_kernel_) return 0.0;
  if (!hat_trace_) {
    Eigen::MatrixXd inv_l = Eigen::MatrixXd::Identity(size_, size_);
    llt_.matrixL().solveInPlace(inv_l);
    const double trace_inverse = inv_l.squaredNorm();
    const double m = static_cast<double>(size_);
    hat_trace_ = std::clamp(m - effective_diagonal() * trace_inverse, 0.0, m);
  }
  return *hat_trace_;
}

Eigen::VectorXd weighted_least_squares(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                                       const Eigen::Ref<const Eigen::VectorXd>& y,
                                       const Eigen::Ref<const Eigen::MatrixXd>& A) {
  if (A.rows() != theta.rows() || A.cols() != theta.rows()) throw Error(ErrorKind::shape, "weight matrix size mismatch");
  require_finite(A, "weight matrix");
  if (!A.isApprox(A.transpose(), 1e-12)) throw Error(ErrorKind::numerical, "weight matrix is not symmetric");
  double jitter = 0.0;
  const auto llt = factor_with_jitter(A, jitter);
  Eigen::MatrixXd tw = theta;
  Eigen::VectorXd yw = y;
  llt.matrixL().solveInPlace(tw);
  llt.matrixL().solveInPlace(yw);
  return LeastSquaresProblem(std::move(tw), std::move(yw)).full_solution();
}

// ---------------------------------------------------------------------------
// KB-Sindy

namespace {

LeastSquaresProblem whitened_problem(const KernelWeighting& w, const Eigen::Ref<const Eigen::MatrixXd>& theta,
                                     const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (w.kernel_is_zero()) return LeastSquaresProblem(theta, y);
  return LeastSquaresProblem(w.whiten(theta), w.whiten(y));
}

}  // namespace

KbSindySolver::KbSindySolver(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                             const Eigen::Ref<const Eigen::VectorXd>& y,
                             const Eigen::Ref<const Eigen::MatrixXd>& K, double noise_var)
    : theta_(theta), y_(y), weighting_(K, noise_var), problem_(whitened_problem(weighting_, theta, y)) {
  if (K.rows() != y.size()) throw Error(ErrorKind::shape, "Gram matrix size differs from target length");
}

KbSindyFit KbSindySolver::solve(double lambda, int max_iter) const {
  KbSindyFit fit;
  fit.parametric = sequential_threshold(problem_, lambda, max_iter);
  const Eigen::VectorXd residual = theta_.cols() > 0 ? Eigen::VectorXd(y_ - theta_ * fit.parametric.coefficients)
                                                     : y_;
  fit.xi_kernel = weighting_.solve(residual);
  return fit;
}

KbSindyFit kb_sindy(const Eigen::Ref<const Eigen::MatrixXd>& theta, const Eigen::Ref<const Eigen::VectorXd>& y,
                    const GramMatrix& gram, double noise_var, double lambda, int max_iter) {
  if (gram.K.rows() != y.size() || theta.rows() != y.size()) {
    throw Error(ErrorKind::shape, "Gram matrix, regression matrix and targets disagree in size");
  }
  return KbSindySolver(theta, y, gram.K, noise_var).solve(lambda, max_iter);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> closed_form_estimate(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                                                                 const Eigen::Ref<const Eigen::VectorXd>& y,
                                                                 const Eigen::Ref<const Eigen::MatrixXd>& K,
                                                                 double noise_var) {
  const KernelWeighting w(K, noise_var);
  const LeastSquaresProblem problem = whitened_problem(w, theta, y);
  Eigen::VectorXd xi = problem.full_solution();
  Eigen::VectorXd kernel_weights = w.solve(y - theta * xi);
  return {std::move(xi), std::move(kernel_weights)};
}

double regularized_objective(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                             const Eigen::Ref<const Eigen::VectorXd>& y,
                             const Eigen::Ref<const Eigen::MatrixXd>& K, double noise_var,
                             const Eigen::Ref<const Eigen::VectorXd>& xi_parametric,
                             const Eigen::Ref<const Eigen::VectorXd>& xi_kernel) {
  const Eigen::VectorXd k_xi = K * xi_kernel;
  return (y - theta * xi_parametric - k_xi).squaredNorm() + noise_var * xi_kernel.dot(k_xi);
}

// ---------------------------------------------------------------------------

std::vector<Eigen::Index> ModelEstimate::support() const {
  std::vector<Eigen::Index> out;
  for (Eigen::Index j = 0; j < xi_parametric.size(); ++j) {
    if (xi_parametric[j] != 0.0) out.push_back(j);
  }
  return out;
}

ModelEstimate fit_model(const Dataset& data, const MonomialLibrary& library, const KernelSet& kernel,
                        double noise_var, double lambda, int max_iter) {
  const Eigen::MatrixXd theta = build_theta(library, data.states);
  const Eigen::MatrixXd anchors = data.aux.rows() == data.size() ? data.aux : Eigen::MatrixXd(data.size(), 0);
  const GramMatrix gram = build_gram(kernel, anchors);
  const KbSindySolver solver(theta, data.targets, gram.K, noise_var);
  KbSindyFit fit = solver.solve(lambda, max_iter);

  ModelEstimate model;
  model.library = library;
  model.xi_parametric = std::move(fit.parametric.coefficients);
  model.kernel = kernel;
  model.anchors = anchors;
  model.xi_kernel = std::move(fit.xi_kernel);
  model.noise_var = noise_var;
  model.lambda = lambda;
  model.iterations = fit.parametric.iterations;
  model.converged = fit.parametric.converged;
  model.dof = solver.weighting().hat_trace() + static_cast<double>(fit.parametric.support.size());
  return model;
}

}  // namespace kbsindy

#pragma once

#include "kbsindy/data.hpp"
#include "kbsindy/kernel.hpp"
#include "kbsindy/library.hpp"

#include <Eigen/Dense>

#include <optional>
#include <utility>
#include <vector>

namespace kbsindy {

inline constexpr int kDefaultMaxIter = 25;

/// Least squares on a fixed design with column equilibration. Restricted
/// solves use Householder QR; a column set that is rank-deficient (or wider
/// than tall) falls back to the SVD pseudo-inverse with cutoff 1e-10 * sigma_max,
/// which returns the minimum-norm solution.
class LeastSquaresProblem {
 public:
  LeastSquaresProblem(Eigen::MatrixXd design, Eigen::VectorXd y);

  Eigen::Index rows() const noexcept { return design_.rows(); }
  Eigen::Index cols() const noexcept { return design_.cols(); }

  /// Coefficients for the listed columns, in the order given.
  Eigen::VectorXd solve(const std::vector<Eigen::Index>& columns) const;
  /// Solution on every column; computed once and cached.
  const Eigen::VectorXd& full_solution() const;

 private:
  Eigen::MatrixXd design_;
  Eigen::VectorXd y_;
  Eigen::VectorXd column_scale_;
  Eigen::MatrixXd scaled_;
  mutable std::optional<Eigen::VectorXd> full_;
};

struct SparseSolution {
  Eigen::VectorXd coefficients;
  std::vector<Eigen::Index> support;
  int iterations = 0;
  bool converged = false;
};

/// Sequential thresholding on a prepared problem: start from the full least
/// squares fit, zero every |coefficient| < lambda, refit on the survivors and
/// repeat until the support stops changing or max_iter refits have been done.
/// A run that hits max_iter is thresholded once more so every surviving
/// coefficient satisfies |value| >= lambda; converged is then false.
SparseSolution sequential_threshold(const LeastSquaresProblem& problem, double lambda,
                                    int max_iter = kDefaultMaxIter);

Eigen::VectorXd least_squares(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                              const Eigen::Ref<const Eigen::VectorXd>& y);

/// (Theta^T A^-1 Theta)^-1 Theta^T A^-1 y via the Cholesky factor of A.
Eigen::VectorXd weighted_least_squares(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                                       const Eigen::Ref<const Eigen::VectorXd>& y,
                                       const Eigen::Ref<const Eigen::MatrixXd>& A);

SparseSolution sindy(const Eigen::Ref<const Eigen::MatrixXd>& theta, const Eigen::Ref<const Eigen::VectorXd>& y,
                     double lambda, int max_iter = kDefaultMaxIter);

/// Cholesky factorization of A = K + noise_var * I. A failed factorization is
/// retried with jitter 1e-12 * trace(A)/m, growing tenfold up to 1e-6 * trace(A)/m.
class KernelWeighting {
 public:
  KernelWeighting(const Eigen::Ref<const Eigen::MatrixXd>& K, double noise_var);

  Eigen::Index size() const noexcept { return size_; }
  double noise_var() const noexcept { return noise_var_; }
  /// Diagonal actually added to K (noise_var plus any jitter).
  double effective_diagonal() const noexcept { return noise_var_ + jitter_; }
  bool kernel_is_zero() const noexcept { return zero_kernel_; }

  /// A^-1 v through the factor; A^-1 itself is never formed.
  Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  /// L^-1 M.
  Eigen::MatrixXd whiten(const Eigen::Ref<const Eigen::MatrixXd>& M) const;
  /// trace(K A^-1) = m - d * trace(A^-1), with trace(A^-1) = ||L^-1||_F^2.
  double hat_trace() const;

 private:
  Eigen::Index size_ = 0;
  double noise_var_ = 0.0;
  double jitter_ = 0.0;
  bool zero_kernel_ = false;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  mutable std::optional<double> hat_trace_;
};

struct KbSindyFit {
  SparseSolution parametric;  ///< Xi-hat and its support
  Eigen::VectorXd xi_kernel;  ///< xi-hat = A^-1 (y - Theta Xi-hat)
};

/// Reusable KB-Sindy state for one (Theta, y, K, noise_var): the factor of A
/// and the whitened least-squares problem are shared by every lambda.
/// With K identically zero the unweighted problem is used directly, so the
/// parametric estimate is exactly the Sindy one.
class KbSindySolver {
 public:
  KbSindySolver(const Eigen::Ref<const Eigen::MatrixXd>& theta, const Eigen::Ref<const Eigen::VectorXd>& y,
                const Eigen::Ref<const Eigen::MatrixXd>& K, double noise_var);

  KbSindyFit solve(double lambda, int max_iter = kDefaultMaxIter) const;
  const KernelWeighting& weighting() const noexcept { return weighting_; }

 private:
  Eigen::MatrixXd theta_;
  Eigen::VectorXd y_;
  KernelWeighting weighting_;
  LeastSquaresProblem problem_;
};

KbSindyFit kb_sindy(const Eigen::Ref<const Eigen::MatrixXd>& theta, const Eigen::Ref<const Eigen::VectorXd>& y,
                    const GramMatrix& gram, double noise_var, double lambda, int max_iter = kDefaultMaxIter);

/// Non-sparse estimator: Xi = (Theta^T A^-1 Theta)^-1 Theta^T A^-1 y, xi = A^-1 (y - Theta Xi).
std::pair<Eigen::VectorXd, Eigen::VectorXd> closed_form_estimate(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                                                                 const Eigen::Ref<const Eigen::VectorXd>& y,
                                                                 const Eigen::Ref<const Eigen::MatrixXd>& K,
                                                                 double noise_var);

/// ||y - Theta Xi - K xi||^2 + noise_var * xi^T K xi.
double regularized_objective(const Eigen::Ref<const Eigen::MatrixXd>& theta,
                             const Eigen::Ref<const Eigen::VectorXd>& y,
                             const Eigen::Ref<const Eigen::MatrixXd>& K, double noise_var,
                             const Eigen::Ref<const Eigen::VectorXd>& xi_parametric,
                             const Eigen::Ref<const Eigen::VectorXd>& xi_kernel);

/// Everything needed to evaluate f-hat(x, z) = sum_i phi_i(x) Xi_i + sum_k K(z, z_k) xi_k.
struct ModelEstimate {
  MonomialLibrary library;
  Eigen::VectorXd xi_parametric;
  KernelSet kernel;
  Eigen::MatrixXd anchors;
  Eigen::VectorXd xi_kernel;
  double noise_var = 0.0;

  double lambda = 0.0;
  int iterations = 0;
  bool converged = true;
  double dof = 0.0;

  std::vector<Eigen::Index> support() const;
  Eigen::Index nnz() const { return static_cast<Eigen::Index>(support().size()); }
};

/// KB-Sindy on a dataset: Theta from the states, Gram matrix from the aux columns.
ModelEstimate fit_model(const Dataset& data, const MonomialLibrary& library, const KernelSet& kernel,
                        double noise_var, double lambda, int max_iter = kDefaultMaxIter);

}  // namespace kbsindy

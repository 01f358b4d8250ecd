#pragma once

#include "kbsindy/library.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

namespace kbsindy {

/// scale * exp(-||za - zb||^2 / width). scale = 0 disables the component.
struct GaussianKernel {
  double scale = 1.0;
  double width = 1.0;
};

/// sum_j scales[j - first_order] * (za^T zb)^j for j = first_order .. last_order().
/// With a bias space of monomials up to order r, first_order is r + 1.
struct PolySumKernel {
  int first_order = 2;
  std::vector<double> scales;

  int last_order() const noexcept { return first_order + static_cast<int>(scales.size()) - 1; }
};

/// One nonparametric component. `columns` selects the aux columns it reads;
/// empty means all of them.
struct KernelSpec {
  std::variant<GaussianKernel, PolySumKernel> family;
  std::vector<int> columns;

  bool is_gaussian() const noexcept { return std::holds_alternative<GaussianKernel>(family); }
  bool is_poly_sum() const noexcept { return std::holds_alternative<PolySumKernel>(family); }
  /// True when every scale is zero, i.e. the component contributes nothing.
  bool is_disabled() const noexcept;
  void validate() const;
};

/// Several components add up: K = sum_c K_c. An empty set is the zero kernel.
using KernelSet = std::vector<KernelSpec>;

bool is_disabled(const KernelSet& kernels) noexcept;

struct GramMatrix {
  Eigen::MatrixXd K;
  Eigen::MatrixXd anchors;
};

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& za,
                   const Eigen::Ref<const Eigen::VectorXd>& zb);
double eval_kernel(const KernelSet& kernels, const Eigen::Ref<const Eigen::VectorXd>& za,
                   const Eigen::Ref<const Eigen::VectorXd>& zb);

/// K[i, k] = kernel(anchor_i, anchor_k); the lower triangle mirrors the upper one.
GramMatrix build_gram(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& anchors);
GramMatrix build_gram(const KernelSet& kernels, const Eigen::Ref<const Eigen::MatrixXd>& anchors);

/// C[a, i] = kernel(points_a, anchors_i), the M x m matrix used for prediction.
Eigen::MatrixXd cross_gram(const KernelSet& kernels, const Eigen::Ref<const Eigen::MatrixXd>& points,
                           const Eigen::Ref<const Eigen::MatrixXd>& anchors);

/// j! / (k1! ... kn!) for an exponent vector summing to j >= 1.
std::uint64_t monomial_weight(const std::vector<int>& exponents);

/// Coefficients of the monomials implicitly carried by the PolySum part of a
/// fitted model: for each order j and each degree-j monomial h,
/// coefficient = weight(h) * scale_j * sum_i xi_i h(z_i).
/// Gaussian specs are rejected with ErrorKind::unsupported.
std::vector<std::pair<Monomial, double>> extract_monomial_coefficients(
    const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& anchors,
    const Eigen::Ref<const Eigen::VectorXd>& xi);

/// Squared Euclidean distances between rows, computed from differences.
Eigen::MatrixXd squared_distances(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                  const Eigen::Ref<const Eigen::MatrixXd>& b);

/// Rows of `aux` restricted to the component's columns.
Eigen::MatrixXd select_columns(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& aux);

}  // namespace kbsindy

#include "kbsindy/kernel.hpp"

#include "kbsindy/error.hpp"

#include <cmath>

namespace kbsindy {

namespace {

double int_pow(double base, int exponent) {
  double result = 1.0;
  for (int e = 0; e < exponent; ++e) result *= base;
  return result;
}

double poly_sum_value(const PolySumKernel& k, double inner) {
  double value = 0.0;
  for (std::size_t i = 0; i < k.scales.size(); ++i) {
    if (k.scales[i] != 0.0) value += k.scales[i] * int_pow(inner, k.first_order + static_cast<int>(i));
  }
  return value;
}

// Kernel matrix between two point sets that already carry only the selected columns.
Eigen::MatrixXd component_matrix(const KernelSpec& spec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                 bool symmetric) {
  Eigen::MatrixXd out;
  if (const auto* g = std::get_if<GaussianKernel>(&spec.family)) {
    out = squared_distances(a, b);
    out = g->scale * (-out.array() / g->width).exp();
  } else {
    const auto& p = std::get<PolySumKernel>(spec.family);
    const Eigen::MatrixXd inner = a * b.transpose();
    out = Eigen::MatrixXd::Zero(a.rows(), b.rows());
    Eigen::MatrixXd power = inner.array().pow(p.first_order).matrix();
    for (std::size_t i = 0; i < p.scales.size(); ++i) {
      if (i > 0) power.array() *= inner.array();
      if (p.scales[i] != 0.0) out += p.scales[i] * power;
    }
  }
  if (symmetric) out.triangularView<Eigen::StrictlyLower>() = out.transpose();
  return out;
}

}  // namespace

bool KernelSpec::is_disabled() const noexcept {
  if (const auto* g = std::get_if<GaussianKernel>(&family)) return g->scale == 0.0;
  for (double s : std::get<PolySumKernel>(family).scales) {
    if (s != 0.0) return false;
  }
  return true;
}

void KernelSpec::validate() const {
  if (const auto* g = std::get_if<GaussianKernel>(&family)) {
    if (!(g->width > 0.0)) throw Error(ErrorKind::validation, "Gaussian kernel width must be positive");
    if (!(g->scale >= 0.0)) throw Error(ErrorKind::validation, "Gaussian kernel scale must be nonnegative");
  } else {
    const auto& p = std::get<PolySumKernel>(family);
    if (p.first_order < 1 || p.scales.empty()) {
      throw Error(ErrorKind::validation, "polynomial kernel needs first order >= 1 and at least one scale");
    }
    for (double s : p.scales) {
      if (!(s >= 0.0)) throw Error(ErrorKind::validation, "polynomial kernel scales must be nonnegative");
    }
  }
  for (int c : columns) {
    if (c < 0) throw Error(ErrorKind::validation, "negative kernel column index");
  }
}

bool is_disabled(const KernelSet& kernels) noexcept {
  for (const auto& k : kernels) {
    if (!k.is_disabled()) return false;
  }
  return true;
}

Eigen::MatrixXd select_columns(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& aux) {
  if (spec.columns.empty()) return aux;
  Eigen::MatrixXd out(aux.rows(), static_cast<Eigen::Index>(spec.columns.size()));
  for (std::size_t c = 0; c < spec.columns.size(); ++c) {
    if (spec.columns[c] >= aux.cols()) throw Error(ErrorKind::shape, "kernel column index out of range");
    out.col(static_cast<Eigen::Index>(c)) = aux.col(spec.columns[c]);
  }
  return out;
}

Eigen::MatrixXd squared_distances(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                  const Eigen::Ref<const Eigen::MatrixXd>& b) {
  if (a.cols() != b.cols()) throw Error(ErrorKind::shape, "point dimensions differ");
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    d.col(j) = (a.rowwise() - b.row(j)).rowwise().squaredNorm();
  }
  return d;
}

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& za,
                   const Eigen::Ref<const Eigen::VectorXd>& zb) {
  if (za.size() != zb.size()) throw Error(ErrorKind::shape, "eval_kernel: vector lengths differ");
  Eigen::VectorXd a = za, b = zb;
  if (!spec.columns.empty()) {
    a = select_columns(spec, za.transpose()).transpose();
    b = select_columns(spec, zb.transpose()).transpose();
  }
  if (const auto* g = std::get_if<GaussianKernel>(&spec.family)) {
    return g->scale * std::exp(-(a - b).squaredNorm() / g->width);
  }
  return poly_sum_value(std::get<PolySumKernel>(spec.family), a.dot(b));
}

double eval_kernel(const KernelSet& kernels, const Eigen::Ref<const Eigen::VectorXd>& za,
                   const Eigen::Ref<const Eigen::VectorXd>& zb) {
  double value = 0.0;
  for (const auto& k : kernels) value += eval_kernel(k, za, zb);
  return value;
}

GramMatrix build_gram(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& anchors) {
  return build_gram(KernelSet{spec}, anchors);
}

GramMatrix build_gram(const KernelSet& kernels, const Eigen::Ref<const Eigen::MatrixXd>& anchors) {
  if (anchors.rows() < 1) throw Error(ErrorKind::validation, "build_gram needs at least one anchor");
  if (!anchors.allFinite()) throw Error(ErrorKind::validation, "non-finite kernel anchor");
  GramMatrix gram{Eigen::MatrixXd::Zero(anchors.rows(), anchors.rows()), anchors};
  for (const auto& k : kernels) {
    k.validate();
    if (k.is_disabled()) continue;
    const Eigen::MatrixXd z = select_columns(k, anchors);
    gram.K += component_matrix(k, z, z, true);
  }
  return gram;
}

Eigen::MatrixXd cross_gram(const KernelSet& kernels, const Eigen::Ref<const Eigen::MatrixXd>& points,
                           const Eigen::Ref<const Eigen::MatrixXd>& anchors) {
  if (points.cols() != anchors.cols()) throw Error(ErrorKind::shape, "cross_gram: dimension mismatch");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(points.rows(), anchors.rows());
  for (const auto& k : kernels) {
    if (k.is_disabled()) continue;
    out += component_matrix(k, select_columns(k, points), select_columns(k, anchors), false);
  }
  return out;
}

std::uint64_t monomial_weight(const std::vector<int>& exponents) {
  int total = 0;
  std::uint64_t weight = 1;
  for (int k : exponents) {
    if (k < 0) throw Error(ErrorKind::validation, "negative exponent");
    total += k;
    // multinomial = prod_i C(k_1 + ... + k_i, k_i)
    const std::uint64_t b = binomial(total, k);
    if (__builtin_mul_overflow(weight, b, &weight)) {
      throw Error(ErrorKind::arithmetic, "multinomial weight overflows 64 bits");
    }
  }
  if (total < 1) throw Error(ErrorKind::validation, "monomial weight needs total degree >= 1");
  return weight;
}

std::vector<std::pair<Monomial, double>> extract_monomial_coefficients(
    const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& anchors,
    const Eigen::Ref<const Eigen::VectorXd>& xi) {
  const auto* poly = std::get_if<PolySumKernel>(&spec.family);
  if (poly == nullptr) {
    throw Error(ErrorKind::unsupported, "monomial extraction needs a polynomial kernel");
  }
  if (xi.size() != anchors.rows()) throw Error(ErrorKind::shape, "xi length differs from anchor count");
  const Eigen::MatrixXd z = select_columns(spec, anchors);
  const int d = static_cast<int>(z.cols());

  std::vector<std::pair<Monomial, double>> out;
  for (std::size_t i = 0; i < poly->scales.size(); ++i) {
    const int order = poly->first_order + static_cast<int>(i);
    const MonomialLibrary lib = homogeneous_monomials(d, order);
    const Eigen::MatrixXd h = build_theta(lib, z);  // H_kj as columns
    const Eigen::VectorXd projections = h.transpose() * xi;
    for (std::size_t k = 0; k < lib.size(); ++k) {
      const double w = static_cast<double>(monomial_weight(lib.monomials[k].exponents));
      out.emplace_back(lib.monomials[k], w * poly->scales[i] * projections[static_cast<Eigen::Index>(k)]);
    }
  }
  return out;
}

}  // namespace kbsindy

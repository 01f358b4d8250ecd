#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace kbsindy {

/// Exponent vector of a monomial x1^k1 * ... * xn^kn.
struct Monomial {
  std::vector<int> exponents;

  int degree() const noexcept;
  double evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  friend bool operator==(const Monomial&, const Monomial&) = default;
  friend auto operator<=>(const Monomial&, const Monomial&) = default;
};

/// Report name such as "x1^2*x3". The constant monomial is "1". Variables are
/// named x1..xn unless `variables` supplies other names.
std::string monomial_name(const Monomial& monomial, const std::vector<std::string>& variables = {});

/// Inverse of monomial_name for the default x1..xn naming.
Monomial parse_monomial(const std::string& name, int n);

/// Ordered monomial basis. Columns of Theta follow `monomials`.
struct MonomialLibrary {
  int n = 0;
  int order = 0;
  bool include_constant = false;
  std::vector<Monomial> monomials;

  std::size_t size() const noexcept { return monomials.size(); }
  std::vector<std::string> names() const;
};

/// All monomials in n variables of degree 1..r (0..r with the constant), graded
/// by degree and, within a degree, in descending lexicographic order of the
/// exponent vector: x1, x2, x1^2, x1*x2, x2^2 for n = r = 2.
MonomialLibrary enumerate_monomials(int n, int r, bool include_constant = false);

/// Library holding only the monomials of degree exactly `degree`.
MonomialLibrary homogeneous_monomials(int n, int degree);

/// Theta[i, j] = prod_k states(i, k) ^ exponents_j[k].
Eigen::MatrixXd build_theta(const MonomialLibrary& library, const Eigen::Ref<const Eigen::MatrixXd>& states);

struct EmbeddedMonomialCount {
  std::uint64_t with_multiplicity = 0;  ///< n^j
  std::uint64_t distinct = 0;           ///< C(n + j - 1, j)
};

/// Number of degree-j monomials carried by the homogeneous polynomial kernel
/// (z^T z')^j in n variables. Throws ErrorKind::arithmetic on 64-bit overflow.
EmbeddedMonomialCount count_embedded_monomials(int n, int j);

/// C(n, k) with overflow checking.
std::uint64_t binomial(int n, int k);

}  // namespace kbsindy

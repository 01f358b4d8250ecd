#include "kbsindy/library.hpp"

#include "kbsindy/error.hpp"

#include <charconv>
#include <numeric>

namespace kbsindy {

namespace {

// Exponent vectors of total degree `degree` in descending lexicographic order.
void append_degree(int n, int degree, std::vector<Monomial>& out) {
  std::vector<int> current(static_cast<std::size_t>(n), 0);
  auto recurse = [&](auto&& self, int position, int remaining) -> void {
    if (position == n - 1) {
      current[static_cast<std::size_t>(position)] = remaining;
      out.push_back(Monomial{current});
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      current[static_cast<std::size_t>(position)] = k;
      self(self, position + 1, remaining - k);
    }
    current[static_cast<std::size_t>(position)] = 0;
  };
  recurse(recurse, 0, degree);
}

bool mul_overflows(std::uint64_t a, std::uint64_t b, std::uint64_t& out) {
  return __builtin_mul_overflow(a, b, &out);
}

}  // namespace

int Monomial::degree() const noexcept {
  return std::accumulate(exponents.begin(), exponents.end(), 0);
}

double Monomial::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != static_cast<Eigen::Index>(exponents.size())) {
    throw Error(ErrorKind::shape, "monomial dimension mismatch");
  }
  double value = 1.0;
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    for (int e = 0; e < exponents[k]; ++e) value *= x[static_cast<Eigen::Index>(k)];
  }
  return value;
}

std::string monomial_name(const Monomial& monomial, const std::vector<std::string>& variables) {
  std::string name;
  for (std::size_t k = 0; k < monomial.exponents.size(); ++k) {
    const int e = monomial.exponents[k];
    if (e == 0) continue;
    if (!name.empty()) name += '*';
    name += k < variables.size() ? variables[k] : "x" + std::to_string(k + 1);
    if (e > 1) name += '^' + std::to_string(e);
  }
  return name.empty() ? "1" : name;
}

Monomial parse_monomial(const std::string& name, int n) {
  Monomial m{std::vector<int>(static_cast<std::size_t>(n), 0)};
  if (name == "1") return m;
  std::size_t pos = 0;
  while (pos < name.size()) {
    const auto next = name.find('*', pos);
    const std::string factor = name.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    pos = next == std::string::npos ? name.size() : next + 1;
    if (factor.size() < 2 || factor[0] != 'x') throw Error(ErrorKind::parse, "bad monomial factor '" + factor + "'");
    const auto caret = factor.find('^');
    int var = 0, power = 1;
    const std::string var_text = factor.substr(1, caret == std::string::npos ? std::string::npos : caret - 1);
    auto r1 = std::from_chars(var_text.data(), var_text.data() + var_text.size(), var);
    if (r1.ec != std::errc{} || var < 1 || var > n) throw Error(ErrorKind::parse, "bad variable in '" + name + "'");
    if (caret != std::string::npos) {
      const std::string p = factor.substr(caret + 1);
      auto r2 = std::from_chars(p.data(), p.data() + p.size(), power);
      if (r2.ec != std::errc{} || power < 1) throw Error(ErrorKind::parse, "bad exponent in '" + name + "'");
    }
    m.exponents[static_cast<std::size_t>(var - 1)] += power;
  }
  return m;
}

std::vector<std::string> MonomialLibrary::names() const {
  std::vector<std::string> out;
  out.reserve(monomials.size());
  for (const auto& m : monomials) out.push_back(monomial_name(m));
  return out;
}

MonomialLibrary enumerate_monomials(int n, int r, bool include_constant) {
  if (n < 1 || r < 1) throw Error(ErrorKind::validation, "enumerate_monomials needs n >= 1 and r >= 1");
  MonomialLibrary lib{n, r, include_constant, {}};
  for (int degree = include_constant ? 0 : 1; degree <= r; ++degree) append_degree(n, degree, lib.monomials);
  return lib;
}

MonomialLibrary homogeneous_monomials(int n, int degree) {
  if (n < 1 || degree < 0) throw Error(ErrorKind::validation, "homogeneous_monomials needs n >= 1, degree >= 0");
  MonomialLibrary lib{n, degree, degree == 0, {}};
  append_degree(n, degree, lib.monomials);
  return lib;
}

Eigen::MatrixXd build_theta(const MonomialLibrary& library, const Eigen::Ref<const Eigen::MatrixXd>& states) {
  if (states.cols() != library.n) {
    throw Error(ErrorKind::shape, "build_theta: states have " + std::to_string(states.cols()) +
                                      " columns, library expects " + std::to_string(library.n));
  }
  const Eigen::Index m = states.rows();
  const int max_power = std::max(library.order, 1);

  // powers[k](i, e) = states(i, k)^e
  std::vector<Eigen::MatrixXd> powers(static_cast<std::size_t>(library.n));
  for (int k = 0; k < library.n; ++k) {
    auto& pk = powers[static_cast<std::size_t>(k)];
    pk.resize(m, max_power + 1);
    pk.col(0).setOnes();
    for (int e = 1; e <= max_power; ++e) pk.col(e) = pk.col(e - 1).cwiseProduct(states.col(k));
  }

  Eigen::MatrixXd theta(m, static_cast<Eigen::Index>(library.size()));
  for (std::size_t j = 0; j < library.size(); ++j) {
    auto col = theta.col(static_cast<Eigen::Index>(j));
    col.setOnes();
    const auto& ex = library.monomials[j].exponents;
    for (int k = 0; k < library.n; ++k) {
      const int e = ex[static_cast<std::size_t>(k)];
      if (e > max_power) {
        throw Error(ErrorKind::validation, "monomial degree exceeds library order");
      }
      if (e > 0) col.array() *= powers[static_cast<std::size_t>(k)].col(e).array();
    }
  }
  return theta;
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (int i = 1; i <= k; ++i) {
    // result * (n - k + i) / i stays integral at every step
    const std::uint64_t g = std::gcd(result, static_cast<std::uint64_t>(i));
    const std::uint64_t num = static_cast<std::uint64_t>(n - k + i) / (static_cast<std::uint64_t>(i) / g);
    std::uint64_t next = 0;
    if (mul_overflows(result / g, num, next)) throw Error(ErrorKind::arithmetic, "binomial coefficient overflows 64 bits");
    result = next;
  }
  return result;
}

EmbeddedMonomialCount count_embedded_monomials(int n, int j) {
  if (n < 1 || j < 1) throw Error(ErrorKind::validation, "count_embedded_monomials needs n >= 1 and j >= 1");
  std::uint64_t power = 1;
  for (int i = 0; i < j; ++i) {
    if (mul_overflows(power, static_cast<std::uint64_t>(n), power)) {
      throw Error(ErrorKind::arithmetic, "n^j overflows 64 bits");
    }
  }
  return {power, binomial(n + j - 1, j)};
}

}  // namespace kbsindy

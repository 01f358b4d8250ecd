#include "kbsindy/differentiation.hpp"

#include "kbsindy/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kbsindy {

namespace {

// Reinsch form of the smoothing spline. With n = m - 2 interior knots, Q is the
// m x n second-difference operator and R the n x n tridiagonal Gram matrix of
// the B-spline second derivatives. B = R + mu Q^T Q is pentadiagonal.
class SplineSystem {
 public:
  SplineSystem(const Eigen::Ref<const Eigen::VectorXd>& t) : m_(t.size()), n_(t.size() - 2), h_(t.size() - 1) {
    for (Eigen::Index i = 0; i + 1 < m_; ++i) h_(i) = t(i + 1) - t(i);
    // Columns of Q: three nonzeros at rows j, j+1, j+2.
    q0_.resize(n_), q1_.resize(n_), q2_.resize(n_);
    r0_.resize(n_), r1_ = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      q0_(j) = 1.0 / h_(j);
      q1_(j) = -1.0 / h_(j) - 1.0 / h_(j + 1);
      q2_(j) = 1.0 / h_(j + 1);
      r0_(j) = (h_(j) + h_(j + 1)) / 3.0;
      if (j + 1 < n_) r1_(j) = h_(j + 1) / 6.0;
    }
    // Bands of Q^T Q.
    qq0_.resize(n_), qq1_ = Eigen::VectorXd::Zero(n_), qq2_ = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      qq0_(j) = q0_(j) * q0_(j) + q1_(j) * q1_(j) + q2_(j) * q2_(j);
      if (j + 1 < n_) qq1_(j) = q1_(j) * q0_(j + 1) + q2_(j) * q1_(j + 1);
      if (j + 2 < n_) qq2_(j) = q2_(j) * q0_(j + 2);
    }
  }

  double scale() const { return r0_.sum() / qq0_.sum(); }

  // LDL^T of B for penalty mu; L is unit lower triangular with two subdiagonals.
  void factor(double mu) {
    mu_ = mu;
    d_.resize(n_), l1_ = Eigen::VectorXd::Zero(n_), l2_ = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      const double b0 = r0_(i) + mu * qq0_(i);
      double di = b0;
      if (i >= 1) di -= l1_(i) * l1_(i) * d_(i - 1);
      if (i >= 2) di -= l2_(i) * l2_(i) * d_(i - 2);
      if (!(di > 0.0)) throw Error(ErrorKind::numerical, "smoothing spline system is not positive definite");
      d_(i) = di;
      if (i + 1 < n_) {
        double b1 = r1_(i) + mu * qq1_(i);
        if (i >= 1) b1 -= l1_(i) * l2_(i + 1) * d_(i - 1);
        l1_(i + 1) = b1 / di;
      }
      if (i + 2 < n_) l2_(i + 2) = mu * qq2_(i) / di;
    }
  }

  Eigen::VectorXd solve(Eigen::VectorXd x) const {
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (i >= 1) x(i) -= l1_(i) * x(i - 1);
      if (i >= 2) x(i) -= l2_(i) * x(i - 2);
    }
    for (Eigen::Index i = 0; i < n_; ++i) x(i) /= d_(i);
    for (Eigen::Index i = n_ - 1; i >= 0; --i) {
      if (i + 1 < n_) x(i) -= l1_(i + 1) * x(i + 1);
      if (i + 2 < n_) x(i) -= l2_(i + 2) * x(i + 2);
    }
    return x;
  }

  Eigen::VectorXd qt(const Eigen::Ref<const Eigen::VectorXd>& s) const {
    Eigen::VectorXd out(n_);
    for (Eigen::Index j = 0; j < n_; ++j) out(j) = q0_(j) * s(j) + q1_(j) * s(j + 1) + q2_(j) * s(j + 2);
    return out;
  }

  Eigen::VectorXd q(const Eigen::Ref<const Eigen::VectorXd>& g) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      out(j) += q0_(j) * g(j);
      out(j + 1) += q1_(j) * g(j);
      out(j + 2) += q2_(j) * g(j);
    }
    return out;
  }

  // tr(I - S) = mu tr(B^-1 Q^T Q), using only the band of B^-1.
  double residual_trace() const {
    Eigen::VectorXd s0(n_), s1 = Eigen::VectorXd::Zero(n_), s2 = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index i = n_ - 1; i >= 0; --i) {
      const double a = i + 1 < n_ ? l1_(i + 1) : 0.0;
      const double b = i + 2 < n_ ? l2_(i + 2) : 0.0;
      const double s11 = i + 1 < n_ ? s0(i + 1) : 0.0;
      const double s12 = i + 2 < n_ ? s1(i + 1) : 0.0;
      const double s22 = i + 2 < n_ ? s0(i + 2) : 0.0;
      if (i + 2 < n_) s2(i) = -a * s12 - b * s22;
      if (i + 1 < n_) s1(i) = -a * s11 - b * s12;
      s0(i) = 1.0 / d_(i) - a * s1(i) - b * s2(i);
    }
    double tr = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) tr += s0(i) * qq0_(i) + 2.0 * (s1(i) * qq1_(i) + s2(i) * qq2_(i));
    return mu_ * tr;
  }

  struct Fit {
    Eigen::VectorXd g;
    Eigen::VectorXd gamma;  // second derivatives at all m knots, zero at the ends
  };

  Fit fit(const Eigen::Ref<const Eigen::VectorXd>& s) const {
    const Eigen::VectorXd inner = solve(qt(s));
    Fit f;
    f.g = s - mu_ * q(inner);
    f.gamma = Eigen::VectorXd::Zero(m_);
    f.gamma.segment(1, n_) = inner;
    return f;
  }

  Eigen::VectorXd derivative(const Fit& f) const {
    Eigen::VectorXd d(m_);
    for (Eigen::Index i = 0; i + 1 < m_; ++i) {
      d(i) = (f.g(i + 1) - f.g(i)) / h_(i) - h_(i) * (2.0 * f.gamma(i) + f.gamma(i + 1)) / 6.0;
    }
    const Eigen::Index k = m_ - 2;
    d(m_ - 1) = (f.g(m_ - 1) - f.g(k)) / h_(k) + h_(k) * (f.gamma(k) + 2.0 * f.gamma(m_ - 1)) / 6.0;
    return d;
  }

  Eigen::Index size() const { return m_; }

 private:
  Eigen::Index m_, n_;
  Eigen::VectorXd h_;
  Eigen::VectorXd q0_, q1_, q2_, r0_, r1_, qq0_, qq1_, qq2_;
  double mu_ = 0.0;
  Eigen::VectorXd d_, l1_, l2_;
};

void check_input(const Eigen::Ref<const Eigen::VectorXd>& times, const Eigen::Ref<const Eigen::VectorXd>& samples) {
  if (times.size() != samples.size()) throw Error(ErrorKind::shape, "times and samples differ in length");
  if (times.size() < 4) throw Error(ErrorKind::insufficient_data, "spline smoothing needs at least 4 samples");
  if (!times.allFinite() || !samples.allFinite()) throw Error(ErrorKind::validation, "non-finite sample");
  for (Eigen::Index i = 1; i < times.size(); ++i) {
    if (!(times(i) > times(i - 1))) throw Error(ErrorKind::validation, "sample times must be strictly increasing");
  }
}

struct GcvValue {
  double score, rss, trace;
};

GcvValue gcv_at(SplineSystem& sys, const Eigen::Ref<const Eigen::VectorXd>& s, double mu) {
  sys.factor(mu);
  const auto f = sys.fit(s);
  const double rss = (s - f.g).squaredNorm();
  const double tr = sys.residual_trace();
  const double m = static_cast<double>(sys.size());
  return {tr > 0.0 ? m * rss / (tr * tr) : std::numeric_limits<double>::infinity(), rss, tr};
}

double choose_penalty(SplineSystem& sys, const Eigen::Ref<const Eigen::VectorXd>& s) {
  const double base = sys.scale();
  constexpr double lo = -10.0, hi = 6.0, step = 0.25;
  double best_p = lo, best = std::numeric_limits<double>::infinity();
  for (double p = lo; p <= hi + 1e-12; p += step) {
    double v;
    try {
      v = gcv_at(sys, s, base * std::pow(10.0, p)).score;
    } catch (const Error&) {
      continue;
    }
    if (v < best) best = v, best_p = p;
  }
  if (!std::isfinite(best)) throw Error(ErrorKind::numerical, "GCV failed for every penalty");
  // Golden-section refinement on the bracketing interval.
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::max(lo, best_p - step), b = std::min(hi, best_p + step);
  auto f = [&](double p) { return gcv_at(sys, s, base * std::pow(10.0, p)).score; };
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 40 && b - a > 1e-6; ++it) {
    if (fc < fd) {
      b = d, d = c, fd = fc, c = b - phi * (b - a), fc = f(c);
    } else {
      a = c, c = d, fc = fd, d = a + phi * (b - a), fd = f(d);
    }
  }
  const double p = 0.5 * (a + b);
  return base * std::pow(10.0, f(p) <= best ? p : best_p);
}

double uniform_step(const Eigen::Ref<const Eigen::VectorXd>& grid) {
  const Eigen::Index m = grid.size();
  const double h = (grid(m - 1) - grid(0)) / static_cast<double>(m - 1);
  if (!(h > 0.0)) throw Error(ErrorKind::unsupported, "grid must be increasing");
  for (Eigen::Index i = 1; i < m; ++i) {
    if (std::abs(grid(i) - grid(i - 1) - h) > 1e-6 * h) {
      throw Error(ErrorKind::unsupported, "finite differences need a uniform grid");
    }
  }
  return h;
}

}  // namespace

SmoothedSeries smooth_and_differentiate(const Eigen::Ref<const Eigen::VectorXd>& times,
                                        const Eigen::Ref<const Eigen::VectorXd>& samples,
                                        std::optional<double> penalty) {
  check_input(times, samples);
  SplineSystem sys(times);
  const double mu = penalty ? *penalty : choose_penalty(sys, samples);
  if (!(mu > 0.0) || !std::isfinite(mu)) throw Error(ErrorKind::validation, "spline penalty must be positive");
  const GcvValue g = gcv_at(sys, samples, mu);
  const auto fit = sys.fit(samples);

  SmoothedSeries out;
  out.values = fit.g;
  out.derivatives = sys.derivative(fit);
  out.penalty = mu;
  out.noise_var_hat = g.trace > 0.0 ? g.rss / g.trace : 0.0;

  // Rows of the derivative smoother D S, one unit impulse at a time.
  const Eigen::Index m = times.size();
  Eigen::VectorXd row_norms = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    e(j) = 1.0;
    row_norms += sys.derivative(sys.fit(e)).cwiseAbs2();
    e(j) = 0.0;
  }
  out.derivative_var = out.noise_var_hat * row_norms;
  out.derivative_var_hat = out.derivative_var.mean();
  return out;
}

SmoothedSeries smooth_segments(const Eigen::Ref<const Eigen::VectorXd>& times,
                               const Eigen::Ref<const Eigen::VectorXd>& samples,
                               const std::vector<Eigen::Index>& starts) {
  if (times.size() != samples.size()) throw Error(ErrorKind::shape, "times and samples differ in length");
  const Eigen::Index m = times.size();
  std::vector<Eigen::Index> edges = starts;
  if (edges.empty() || edges.front() != 0) edges.insert(edges.begin(), 0);
  edges.push_back(m);
  for (std::size_t k = 1; k < edges.size(); ++k) {
    if (edges[k] <= edges[k - 1]) throw Error(ErrorKind::validation, "segment starts must increase inside the series");
  }
  SmoothedSeries out;
  out.values.resize(m), out.derivatives.resize(m), out.derivative_var.resize(m);
  double rss = 0.0, trace = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const Eigen::Index b = edges[k], n = edges[k + 1] - b;
    const auto part = smooth_and_differentiate(times.segment(b, n), samples.segment(b, n));
    out.values.segment(b, n) = part.values;
    out.derivatives.segment(b, n) = part.derivatives;
    out.derivative_var.segment(b, n) = part.derivative_var;
    const double tr = part.noise_var_hat > 0.0 ? (samples.segment(b, n) - part.values).squaredNorm() / part.noise_var_hat : 0.0;
    rss += (samples.segment(b, n) - part.values).squaredNorm();
    trace += tr;
    out.penalty = std::max(out.penalty, part.penalty);
  }
  out.noise_var_hat = trace > 0.0 ? rss / trace : 0.0;
  out.derivative_var_hat = out.derivative_var.mean();
  return out;
}

double gcv_score(const Eigen::Ref<const Eigen::VectorXd>& times, const Eigen::Ref<const Eigen::VectorXd>& samples,
                 double penalty) {
  check_input(times, samples);
  SplineSystem sys(times);
  return gcv_at(sys, samples, penalty).score;
}

Eigen::VectorXd finite_difference(const Eigen::Ref<const Eigen::VectorXd>& grid,
                                  const Eigen::Ref<const Eigen::VectorXd>& samples, int order) {
  if (order != 1 && order != 2) throw Error(ErrorKind::validation, "finite difference order must be 1 or 2");
  if (grid.size() != samples.size()) throw Error(ErrorKind::shape, "grid and samples differ in length");
  const Eigen::Index m = grid.size();
  if (m < 3) throw Error(ErrorKind::insufficient_data, "finite differences need at least 3 points");
  const double h = uniform_step(grid);
  const auto& s = samples;
  Eigen::VectorXd d(m);
  if (order == 1) {
    for (Eigen::Index i = 1; i + 1 < m; ++i) d(i) = (s(i + 1) - s(i - 1)) / (2.0 * h);
    d(0) = (-3.0 * s(0) + 4.0 * s(1) - s(2)) / (2.0 * h);
    d(m - 1) = (3.0 * s(m - 1) - 4.0 * s(m - 2) + s(m - 3)) / (2.0 * h);
  } else {
    const double h2 = h * h;
    for (Eigen::Index i = 1; i + 1 < m; ++i) d(i) = (s(i - 1) - 2.0 * s(i) + s(i + 1)) / h2;
    if (m >= 4) {
      d(0) = (2.0 * s(0) - 5.0 * s(1) + 4.0 * s(2) - s(3)) / h2;
      d(m - 1) = (2.0 * s(m - 1) - 5.0 * s(m - 2) + 4.0 * s(m - 3) - s(m - 4)) / h2;
    } else {
      d(0) = d(m - 1) = (s(0) - 2.0 * s(1) + s(2)) / h2;
    }
  }
  return d;
}

Eigen::MatrixXd finite_difference(const Eigen::Ref<const Eigen::VectorXd>& grid,
                                  const Eigen::Ref<const Eigen::MatrixXd>& field, int order, Axis axis) {
  Eigen::MatrixXd out(field.rows(), field.cols());
  if (axis == Axis::time) {
    for (Eigen::Index c = 0; c < field.cols(); ++c) out.col(c) = finite_difference(grid, field.col(c), order);
  } else {
    for (Eigen::Index r = 0; r < field.rows(); ++r) {
      out.row(r) = finite_difference(grid, field.row(r).transpose(), order).transpose();
    }
  }
  return out;
}

}  // namespace kbsindy

#include "kbsindy/systems.hpp"

#include "kbsindy/error.hpp"
#include "kbsindy/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace kbsindy {

namespace {

template <class Vec, class Rhs>
Vec rk4_step(const Vec& x, double dt, Rhs&& f) {
  const Vec k1 = f(x);
  const Vec k2 = f(Vec(x + 0.5 * dt * k1));
  const Vec k3 = f(Vec(x + 0.5 * dt * k2));
  const Vec k4 = f(Vec(x + dt * k3));
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

int steps_per(double interval, double dt, const char* what) {
  const double ratio = interval / dt;
  const long n = std::lround(ratio);
  if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * ratio) {
    throw Error(ErrorKind::config, std::string(what) + " must be a positive multiple of the integration step");
  }
  return static_cast<int>(n);
}

double column_variance(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) return 0.0;
  return (v.array() - v.mean()).square().mean();
}

nlohmann::ordered_json noise_json(const NoiseSpec& n) {
  static constexpr const char* kinds[] = {"none", "snr", "cv"};
  return {{"kind", kinds[static_cast<int>(n.kind)]}, {"value", n.value}, {"seed", n.seed}};
}

std::string state_name(int i) { return "x" + std::to_string(i + 1); }

}  // namespace

void NoiseSpec::validate() const {
  if (kind == Kind::snr && !(value > 0.0)) throw Error(ErrorKind::validation, "SNR must be positive");
  if (kind == Kind::cv && !(value >= 0.0)) throw Error(ErrorKind::validation, "coefficient of variation must be >= 0");
}

void add_noise(Eigen::Ref<Eigen::MatrixXd> values, const NoiseSpec& noise) {
  noise.validate();
  if (noise.kind == NoiseSpec::Kind::none) return;
  SplitMix64 rng(noise.seed);
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    const double sd = noise.kind == NoiseSpec::Kind::snr ? std::sqrt(column_variance(values.col(c)) / noise.value) : 0.0;
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
      const double s = noise.kind == NoiseSpec::Kind::snr ? sd : noise.value * std::abs(values(r, c));
      values(r, c) += s * rng.normal();
    }
  }
}

void validate(const HFunctionSpec& h) {
  if (const auto* hill = std::get_if<HillH>(&h)) {
    if (!(hill->S > 0.0) || !(hill->q >= 1.0)) throw Error(ErrorKind::validation, "Hill function needs S > 0 and q >= 1");
  } else if (const auto* r = std::get_if<RationalQuarticH>(&h)) {
    if (!(r->sigma > 0.0 && r->xi > 0.0 && r->lambda > 0.0)) {
      throw Error(ErrorKind::validation, "rational h needs positive denominator coefficients");
    }
  } else if (const auto* s = std::get_if<SineH>(&h)) {
    if (!std::isfinite(s->amplitude) || !std::isfinite(s->frequency)) throw Error(ErrorKind::validation, "bad sine h");
  }
}

double evaluate_h(const HFunctionSpec& h, const Eigen::Ref<const Eigen::VectorXd>& z) {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ZeroH>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, Ar1NoiseH>) {
          throw Error(ErrorKind::unsupported, "AR(1) noise has no pointwise value");
        } else if constexpr (std::is_same_v<T, MeanTanhH>) {
          return f.amplitude * std::tanh(z.mean());
        } else {
          if (z.size() < 1) throw Error(ErrorKind::shape, "h needs a scalar argument");
          const double x = z(0);
          if constexpr (std::is_same_v<T, TanhH>) return f.amplitude * std::tanh(f.gain * x);
          if constexpr (std::is_same_v<T, SineH>) return f.amplitude * std::sin(f.frequency * x);
          if constexpr (std::is_same_v<T, HillH>) return f.s1 / (1.0 + std::pow(std::max(x, 0.0) / f.S, f.q));
          if constexpr (std::is_same_v<T, RationalQuarticH>) {
            const double x2 = x * x, x4 = x2 * x2;
            return (f.alpha * x4 + f.beta * x2 + f.gamma) / (f.sigma * x4 + f.xi * x2 + f.lambda);
          }
        }
      },
      h);
}

std::string h_name(const HFunctionSpec& h) {
  static constexpr const char* names[] = {"zero", "tanh", "sine", "hill", "rational_quartic", "ar1_noise", "mean_tanh"};
  return names[h.index()];
}

nlohmann::ordered_json h_to_json(const HFunctionSpec& h) {
  nlohmann::ordered_json j{{"kind", h_name(h)}};
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, TanhH>) j["amplitude"] = f.amplitude, j["gain"] = f.gain;
        if constexpr (std::is_same_v<T, SineH>) j["amplitude"] = f.amplitude, j["frequency"] = f.frequency;
        if constexpr (std::is_same_v<T, HillH>) j["s1"] = f.s1, j["S"] = f.S, j["q"] = f.q;
        if constexpr (std::is_same_v<T, RationalQuarticH>) {
          j["alpha"] = f.alpha, j["beta"] = f.beta, j["gamma"] = f.gamma;
          j["sigma"] = f.sigma, j["xi"] = f.xi, j["lambda"] = f.lambda;
        }
        if constexpr (std::is_same_v<T, Ar1NoiseH>) j["a"] = f.a, j["b"] = f.b;
        if constexpr (std::is_same_v<T, MeanTanhH>) j["amplitude"] = f.amplitude;
      },
      h);
  return j;
}

HFunctionSpec h_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object() || !j.contains("kind")) throw Error(ErrorKind::schema, "h function needs a \"kind\"");
  const std::string kind = j.at("kind").get<std::string>();
  auto num = [&](const char* key, double fallback) { return j.contains(key) ? j.at(key).get<double>() : fallback; };
  HFunctionSpec h;
  if (kind == "zero") {
    h = ZeroH{};
  } else if (kind == "tanh") {
    h = TanhH{num("amplitude", 10.0), num("gain", 1.0)};
  } else if (kind == "sine") {
    h = SineH{num("amplitude", 10.0), num("frequency", 0.1)};
  } else if (kind == "hill") {
    h = HillH{num("s1", 0.5), num("S", 100.0), num("q", 2.0)};
  } else if (kind == "rational_quartic") {
    RationalQuarticH r;
    h = RationalQuarticH{num("alpha", r.alpha), num("beta", r.beta),   num("gamma", r.gamma),
                         num("sigma", r.sigma), num("xi", r.xi),       num("lambda", r.lambda)};
  } else if (kind == "ar1_noise") {
    h = Ar1NoiseH{num("a", 0.8), num("b", 0.05)};
  } else if (kind == "mean_tanh") {
    h = MeanTanhH{num("amplitude", 1.0)};
  } else {
    throw Error(ErrorKind::schema, "unknown h function kind \"" + kind + "\"");
  }
  validate(h);
  return h;
}

// ---------------------------------------------------------------------------

Eigen::Vector3d lorenz_rhs(const Eigen::Vector3d& x, double sigma, double rho, double beta, double forcing) {
  return {sigma * (x(1) - x(0)), x(0) * (rho - x(2)) - x(1) + forcing, x(0) * x(1) - beta * x(2)};
}

Simulation simulate_lorenz(const LorenzConfig& c) {
  if (!(c.dt > 0.0) || c.stride < 1 || c.samples < 1 || c.burn_in_samples < 0) {
    throw Error(ErrorKind::config, "Lorenz needs dt > 0, stride >= 1 and samples >= 1");
  }
  if (c.copies < 1) throw Error(ErrorKind::config, "Lorenz needs at least one copy");
  const int n = 3 * c.copies;
  if (c.target_state < 0 || c.target_state >= n) throw Error(ErrorKind::config, "Lorenz target state out of range");
  const int n_inputs = c.h_target == HTarget::inputs ? c.n_inputs : 1;
  if (n_inputs < 1) throw Error(ErrorKind::config, "need at least one input");
  if (c.h) validate(*c.h);
  c.noise.validate();

  Eigen::VectorXd x(n);
  if (c.x0.empty()) {
    SplitMix64 rng(derive_seed(c.seed, 2));
    for (int k = 0; k < c.copies; ++k) {
      x(3 * k) = rng.uniform(-15.0, 15.0);
      x(3 * k + 1) = rng.uniform(-15.0, 15.0);
      x(3 * k + 2) = rng.uniform(10.0, 40.0);
    }
  } else {
    if (static_cast<int>(c.x0.size()) != n) throw Error(ErrorKind::config, "Lorenz x0 has the wrong length");
    x = Eigen::Map<const Eigen::VectorXd>(c.x0.data(), n);
  }

  const int hold = steps_per(c.input_hold, c.dt, "input hold time");
  const long total_steps = static_cast<long>(c.burn_in_samples + c.samples - 1) * c.stride;
  const long n_blocks = total_steps / hold + 1;
  Eigen::MatrixXd inputs(n_blocks, n_inputs);
  {
    SplitMix64 rng(derive_seed(c.seed, 1));
    for (Eigen::Index b = 0; b < n_blocks; ++b) {
      for (int i = 0; i < n_inputs; ++i) inputs(b, i) = rng.uniform(-c.input_range, c.input_range);
    }
  }

  auto aux_of = [&](const Eigen::VectorXd& s, long step) -> Eigen::VectorXd {
    if (c.h_target == HTarget::output) return Eigen::VectorXd::Constant(1, s(0) + s(1) + s(2));
    return inputs.row(step / hold).transpose();
  };
  auto forcing = [&](const Eigen::VectorXd& s, long step) {
    return c.h ? evaluate_h(*c.h, aux_of(s, step)) : 0.0;
  };
  auto rhs = [&](const Eigen::VectorXd& s, long step) {
    Eigen::VectorXd d(n);
    for (int k = 0; k < c.copies; ++k) {
      d.segment<3>(3 * k) = lorenz_rhs(s.segment<3>(3 * k), c.sigma, c.rho, c.beta, k == 0 ? forcing(s, step) : 0.0);
    }
    return d;
  };

  const int aux_dim = c.h_target == HTarget::output ? 1 : n_inputs;
  Simulation sim;
  Dataset& d = sim.dataset;
  d.times.resize(c.samples);
  d.states.resize(c.samples, n);
  d.aux.resize(c.samples, aux_dim);
  sim.clean_targets.resize(c.samples);
  sim.h_values.resize(c.samples);

  long step = 0;
  for (int k = 0; k < c.burn_in_samples + c.samples; ++k) {
    const long target_step = static_cast<long>(k) * c.stride;
    for (; step < target_step; ++step) {
      x = rk4_step(x, c.dt, [&](const Eigen::VectorXd& s) { return rhs(s, step); });
      if (!x.allFinite()) throw Error(ErrorKind::integration, "Lorenz state blew up at step " + std::to_string(step));
    }
    if (k < c.burn_in_samples) continue;
    const int i = k - c.burn_in_samples;
    d.times(i) = static_cast<double>(step) * c.dt;
    d.states.row(i) = x.transpose();
    const Eigen::VectorXd z = aux_of(x, step);
    d.aux.row(i) = z.transpose();
    sim.h_values(i) = c.target_state == 1 ? forcing(x, step) : 0.0;
    sim.clean_targets(i) = rhs(x, step)(c.target_state);
  }

  sim.clean_states = d.states;
  d.targets = sim.clean_targets;
  add_noise(d.targets, c.noise);
  if (c.noise.kind == NoiseSpec::Kind::snr) sim.target_noise_var = column_variance(sim.clean_targets) / c.noise.value;
  if (c.h && c.target_state == 1) {
    const HFunctionSpec h = *c.h;
    sim.true_h = [h](const Eigen::VectorXd& z) { return evaluate_h(h, z); };
  } else {
    sim.true_h = [](const Eigen::VectorXd&) { return 0.0; };
  }
  for (int i = 0; i < n; ++i) d.state_names.push_back(state_name(i));
  if (c.h_target == HTarget::output) {
    d.aux_names = {"o"};
  } else {
    for (int i = 0; i < aux_dim; ++i) d.aux_names.push_back(aux_dim == 1 ? "u" : "u" + std::to_string(i + 1));
  }
  d.target_name = "dx" + std::to_string(c.target_state + 1);

  const int copy = c.target_state / 3, eq = c.target_state % 3, base = 3 * copy;
  const auto nm = [&](int a) { return state_name(base + a); };
  if (eq == 0) {
    sim.true_coefficients = {{nm(0), -c.sigma}, {nm(1), c.sigma}};
  } else if (eq == 1) {
    sim.true_coefficients = {{nm(0), c.rho}, {nm(1), -1.0}, {nm(0) + "*" + nm(2), -1.0}};
  } else {
    sim.true_coefficients = {{nm(0) + "*" + nm(1), 1.0}, {nm(2), -c.beta}};
  }

  auto& p = sim.parameters;
  p["system"] = "lorenz";
  p["sigma"] = c.sigma, p["rho"] = c.rho, p["beta"] = c.beta;
  p["h"] = c.h ? h_to_json(*c.h) : nlohmann::ordered_json(nullptr);
  static constexpr const char* targets[] = {"input", "output", "inputs"};
  p["h_target"] = targets[static_cast<int>(c.h_target)];
  p["n_inputs"] = n_inputs, p["copies"] = c.copies, p["target_state"] = c.target_state;
  p["x0"] = c.x0, p["dt"] = c.dt, p["stride"] = c.stride, p["samples"] = c.samples;
  p["burn_in_samples"] = c.burn_in_samples, p["input_hold"] = c.input_hold, p["input_range"] = c.input_range;
  p["noise"] = noise_json(c.noise), p["seed"] = c.seed;
  return sim;
}

// ---------------------------------------------------------------------------

Eigen::Vector2d gene_rhs(const Eigen::Vector2d& x, const GeneConfig& c) {
  return {-c.delta1 * x(0) + evaluate_h(c.h, x.tail<1>()), c.gamma * x(0) - c.delta2 * x(1)};
}

std::vector<Eigen::Index> gene_segment_starts(const GeneConfig& c) {
  std::vector<Eigen::Index> starts;
  Eigen::Index at = 0;
  for (const auto& [count, interval] : c.schedule) {
    (void)interval;
    starts.push_back(at);
    at += count;
  }
  return starts;
}

Simulation simulate_gene(const GeneConfig& c) {
  if (!(c.delta1 > 0.0 && c.delta2 > 0.0 && c.gamma > 0.0 && c.dt > 0.0)) {
    throw Error(ErrorKind::config, "gene model rates and step must be positive");
  }
  if (c.schedule.empty()) throw Error(ErrorKind::config, "gene sampling schedule is empty");
  validate(c.h);
  c.noise.validate();
  int m = 0;
  for (const auto& [count, interval] : c.schedule) {
    if (count < 1) throw Error(ErrorKind::config, "sampling regime needs at least one sample");
    steps_per(interval, c.dt, "sampling interval");
    m += count;
  }

  Simulation sim;
  Dataset& d = sim.dataset;
  d.times.resize(m);
  d.states.resize(m, 2);
  sim.clean_targets.resize(m);
  sim.h_values.resize(m);

  Eigen::Vector2d x = c.x0;
  long step = 0;
  int i = 0;
  auto record = [&] {
    d.times(i) = static_cast<double>(step) * c.dt;
    d.states.row(i) = x.transpose();
    sim.clean_targets(i) = gene_rhs(x, c)(0);
    sim.h_values(i) = evaluate_h(c.h, x.tail<1>());
    ++i;
  };
  bool first = true;
  for (const auto& [count, interval] : c.schedule) {
    const int per = steps_per(interval, c.dt, "sampling interval");
    for (int s = 0; s < count; ++s) {
      if (!first) {
        for (int k = 0; k < per; ++k, ++step) {
          x = rk4_step(x, c.dt, [&](const Eigen::Vector2d& v) { return gene_rhs(v, c); });
          if (!x.allFinite() || x.minCoeff() < 0.0) {
            throw Error(ErrorKind::integration, "gene state left the positive orthant at step " + std::to_string(step));
          }
        }
      }
      first = false;
      record();
    }
  }

  sim.clean_states = d.states;
  add_noise(d.states, c.noise);
  d.aux = d.states.col(1);
  d.targets = sim.clean_targets;
  d.state_names = {"x1", "x2"};
  d.aux_names = {"z_x2"};
  d.target_name = "dx1";
  sim.true_coefficients = {{"x1", -c.delta1}};
  const HFunctionSpec h = c.h;
  sim.true_h = [h](const Eigen::VectorXd& z) { return evaluate_h(h, z); };

  auto& p = sim.parameters;
  p["system"] = "gene";
  p["h"] = h_to_json(c.h);
  p["delta1"] = c.delta1, p["delta2"] = c.delta2, p["gamma"] = c.gamma;
  p["x0"] = {c.x0(0), c.x0(1)}, p["dt"] = c.dt;
  nlohmann::ordered_json sched = nlohmann::ordered_json::array();
  for (const auto& [count, interval] : c.schedule) sched.push_back({{"count", count}, {"interval", interval}});
  p["schedule"] = sched;
  p["noise"] = noise_json(c.noise);
  return sim;
}

// ---------------------------------------------------------------------------

Eigen::Vector2d calcium_reaction(const CalciumParams& p, double Z, double Y) {
  const double zn = std::pow(Z, p.n), ym = std::pow(Y, p.m), zp = std::pow(Z, p.p);
  const double v2 = p.vm2 * zn / (std::pow(p.k2, p.n) + zn);
  const double v3 = p.vm3 * ym / (std::pow(p.kr, p.m) + ym) * zp / (std::pow(p.ka, p.p) + zp);
  return {p.v0 + p.v1 * p.beta - v2 + v3 + p.kf * Y - p.k * Z, v2 - v3 - p.kf * Y};
}

CalciumSimulation simulate_calcium_rde(const CalciumConfig& c) {
  const auto& P = c.params;
  if (c.cells < 4 || !(c.dx > 0.0) || !(c.dt > 0.0) || !(c.duration > 0.0) || c.burn_in < 0.0 || c.samples < 1) {
    throw Error(ErrorKind::config, "calcium grid needs >= 4 cells and positive dx, dt, duration");
  }
  const double max_d = std::max(P.dz, P.dy);
  if (max_d > 0.0 && c.dt > 0.4 * c.dx * c.dx / (2.0 * max_d)) {
    throw Error(ErrorKind::config, "calcium time step violates the explicit stability bound");
  }
  const int N = c.cells;
  const double inv_dx2 = 1.0 / (c.dx * c.dx);
  const double length = c.dx * (N - 1);

  // Zero-flux boundaries through mirrored ghost cells.
  auto laplacian = [&](const Eigen::Ref<const Eigen::VectorXd>& u) {
    Eigen::VectorXd l(N);
    l(0) = 2.0 * (u(1) - u(0)) * inv_dx2;
    l(N - 1) = 2.0 * (u(N - 2) - u(N - 1)) * inv_dx2;
    l.segment(1, N - 2) = (u.head(N - 2) - 2.0 * u.segment(1, N - 2) + u.tail(N - 2)) * inv_dx2;
    return l;
  };
  auto rhs = [&](const Eigen::VectorXd& s) {
    Eigen::VectorXd d(2 * N);
    const auto Z = s.head(N), Y = s.tail(N);
    d.head(N) = P.dz * laplacian(Z);
    d.tail(N) = P.dy * laplacian(Y);
    for (int i = 0; i < N; ++i) {
      const Eigen::Vector2d r = calcium_reaction(P, Z(i), Y(i));
      d(i) += r(0);
      d(N + i) += r(1);
    }
    return d;
  };

  Eigen::VectorXd s(2 * N);
  for (int i = 0; i < N; ++i) {
    s(i) = c.z0 + c.init_amplitude * std::cos(std::numbers::pi * c.dx * i / length);
    s(N + i) = c.y0;
  }
  const long burn_steps = std::lround(c.burn_in / c.dt);
  const long window = std::lround(c.duration / c.dt);
  if (window < 1) throw Error(ErrorKind::config, "calcium sampling window is shorter than one step");
  for (long k = 0; k < burn_steps; ++k) {
    s = rk4_step(s, c.dt, rhs);
    if (!s.allFinite()) throw Error(ErrorKind::integration, "calcium field blew up at step " + std::to_string(k));
  }
  Eigen::MatrixXd Zf(window, N), Yf(window, N);
  for (long k = 0; k < window; ++k) {
    Zf.row(k) = s.head(N).transpose();
    Yf.row(k) = s.tail(N).transpose();
    s = rk4_step(s, c.dt, rhs);
    if (!s.allFinite()) {
      throw Error(ErrorKind::integration, "calcium field blew up at step " + std::to_string(burn_steps + k));
    }
  }

  const long interior = static_cast<long>(N - 2);
  const long population = window * interior;
  if (c.samples > population) throw Error(ErrorKind::config, "more calcium samples requested than grid points");
  std::set<long> picks;
  SplitMix64 rng(derive_seed(c.seed, 1));
  while (static_cast<int>(picks.size()) < c.samples) {
    picks.insert(static_cast<long>(rng.uniform() * static_cast<double>(population)));
  }

  CalciumSimulation sim;
  Dataset& d = sim.dataset;
  const int m = c.samples;
  d.times.resize(m);
  d.states.resize(m, 4);
  d.aux.resize(m, 2);
  sim.clean_targets.resize(m);
  sim.h_values.resize(m);
  int row = 0;
  for (long id : picks) {
    const long k = id / interior;
    const int i = static_cast<int>(id % interior) + 1;
    const auto Z = Zf.row(k), Y = Yf.row(k);
    const double zx = (Z(i + 1) - Z(i - 1)) / (2.0 * c.dx), zxx = (Z(i + 1) - 2.0 * Z(i) + Z(i - 1)) * inv_dx2;
    const double yx = (Y(i + 1) - Y(i - 1)) / (2.0 * c.dx), yxx = (Y(i + 1) - 2.0 * Y(i) + Y(i - 1)) * inv_dx2;
    const double f = calcium_reaction(P, Z(i), Y(i))(0);
    d.times(row) = row;
    d.states.row(row) << zx, zxx, yx, yxx;
    d.aux.row(row) << Z(i), Y(i);
    sim.h_values(row) = f;
    sim.clean_targets(row) = P.dz * zxx + f;
    ++row;
  }
  sim.clean_states = d.states;
  add_noise(d.states, NoiseSpec::snr(c.snr_space, derive_seed(c.seed, 2)));
  d.targets = sim.clean_targets;
  add_noise(d.targets, NoiseSpec::snr(c.snr_time, derive_seed(c.seed, 3)));
  sim.target_noise_var = column_variance(sim.clean_targets) / c.snr_time;
  sim.true_h = [P](const Eigen::VectorXd& z) { return calcium_reaction(P, z(0), z(1))(0); };
  d.time_name = "sample";
  d.state_names = {"Z_x", "Z_xx", "Y_x", "Y_xx"};
  d.aux_names = {"Z", "Y"};
  d.target_name = "Z_t";
  sim.true_coefficients = {{"x2", P.dz}};
  if (c.keep_fields) {
    sim.Z = std::move(Zf);
    sim.Y = std::move(Yf);
    sim.field_times = Eigen::VectorXd::LinSpaced(window, c.burn_in, c.burn_in + c.dt * static_cast<double>(window - 1));
  }

  auto& p = sim.parameters;
  p["system"] = "calcium";
  p["v0"] = P.v0, p["v1"] = P.v1, p["beta"] = P.beta, p["vm2"] = P.vm2, p["vm3"] = P.vm3;
  p["k2"] = P.k2, p["kr"] = P.kr, p["ka"] = P.ka, p["kf"] = P.kf, p["k"] = P.k;
  p["n"] = P.n, p["m"] = P.m, p["p"] = P.p, p["dz"] = P.dz, p["dy"] = P.dy;
  p["cells"] = c.cells, p["dx"] = c.dx, p["dt"] = c.dt, p["burn_in"] = c.burn_in, p["duration"] = c.duration;
  p["z0"] = c.z0, p["y0"] = c.y0, p["init_amplitude"] = c.init_amplitude;
  p["samples"] = c.samples, p["snr_space"] = c.snr_space, p["snr_time"] = c.snr_time, p["seed"] = c.seed;
  return sim;
}

// ---------------------------------------------------------------------------

Simulation simulate_logistic_ar(const LogisticConfig& c) {
  if (c.steps < 2) throw Error(ErrorKind::config, "logistic map needs at least two steps");
  if (!(c.snr > 0.0)) throw Error(ErrorKind::config, "logistic map SNR must be positive");
  Simulation sim;
  Dataset& d = sim.dataset;
  const int m = c.steps;
  d.times.resize(m);
  d.states.resize(m, 1);
  d.aux.resize(m, 1);
  sim.clean_targets.resize(m);
  sim.h_values.resize(m);
  SplitMix64 rng(derive_seed(c.seed, 1));
  double x = c.x0, e = c.e0;
  for (int k = 0; k < m; ++k) {
    const double next = c.r * x * (1.0 - x) + e;
    if (!std::isfinite(next) || std::abs(next) > 1e6) {
      throw Error(ErrorKind::integration, "logistic map diverged at step " + std::to_string(k));
    }
    d.times(k) = k;
    d.states(k, 0) = x;
    d.aux(k, 0) = k;
    sim.clean_targets(k) = next;
    sim.h_values(k) = e;
    x = next;
    e = c.a * e + c.b * rng.normal();
  }
  sim.clean_states = d.states;
  d.targets = sim.clean_targets;
  add_noise(d.targets, NoiseSpec::snr(c.snr, derive_seed(c.seed, 2)));
  sim.target_noise_var = column_variance(sim.clean_targets) / c.snr;
  d.time_name = "k";
  d.state_names = {"x1"};
  d.aux_names = {"k"};
  d.target_name = "x_next";
  sim.true_coefficients = {{"x1", c.r}, {"x1^2", -c.r}};

  auto& p = sim.parameters;
  p["system"] = "logistic_ar";
  p["r"] = c.r, p["a"] = c.a, p["b"] = c.b, p["x0"] = c.x0, p["e0"] = c.e0;
  p["steps"] = c.steps, p["snr"] = c.snr, p["seed"] = c.seed;
  return sim;
}

// ---------------------------------------------------------------------------

double nfir_output(double alpha, const Eigen::Ref<const Eigen::VectorXd>& u) {
  if (u.size() < 7) throw Error(ErrorKind::shape, "NFIR output needs at least 7 lags");
  // u(k - 1) holds u_{t-k}.
  const double linear = u(0) + 0.6 * u(1) + 0.35 * u(2) + 0.9 * u(3) + 0.35 * u(4) + 0.2 * u(5) + 0.2 * u(6);
  const double quadratic = u(0) * u(0) + 0.25 * u(3) * u(3) + 0.25 * u(0) * u(1) + 0.5 * u(0) * u(2) -
                           u(1) * u(2) + 0.5 * u(1) * u(3);
  const double cubic = 0.1 * u(2) * u(2) * u(2);
  const double u1 = u(0) * u(0);
  return alpha * (linear + quadratic + cubic) + 0.2 * u1 * u1;
}

std::vector<std::pair<std::string, double>> nfir_coefficients(double alpha, int lags) {
  if (lags < 7) throw Error(ErrorKind::config, "NFIR needs at least 7 lags");
  std::vector<std::pair<std::string, double>> out;
  if (alpha != 0.0) {
    const std::pair<const char*, double> terms[] = {
        {"x1", 1.0},     {"x2", 0.6},      {"x3", 0.35},     {"x4", 0.9},      {"x5", 0.35},
        {"x6", 0.2},     {"x7", 0.2},      {"x1^2", 1.0},    {"x1*x2", 0.25},  {"x1*x3", 0.5},
        {"x2*x3", -1.0}, {"x2*x4", 0.5},   {"x4^2", 0.25},   {"x3^3", 0.1}};
    for (const auto& [name, v] : terms) out.emplace_back(name, alpha * v);
  }
  out.emplace_back("x1^4", 0.2);
  return out;
}

Simulation simulate_nfir(const NfirConfig& c) {
  if (c.steps <= c.lags) throw Error(ErrorKind::config, "NFIR needs more steps than lags");
  if (c.lags < 7) throw Error(ErrorKind::config, "NFIR needs at least 7 lags");
  if (!(c.noise_sd >= 0.0)) throw Error(ErrorKind::config, "NFIR noise level must be >= 0");
  const int m = c.steps;
  Eigen::VectorXd u(m);
  if (c.input) {
    if (c.input->size() != m) throw Error(ErrorKind::shape, "NFIR input override has the wrong length");
    u = *c.input;
  } else {
    SplitMix64 rng(derive_seed(c.seed, 1));
    for (int t = 0; t < m; ++t) u(t) = rng.normal();
  }
  SplitMix64 noise(derive_seed(c.seed, 2));

  Simulation sim;
  Dataset& d = sim.dataset;
  d.times.resize(m);
  d.states.resize(m, c.lags);
  sim.clean_targets.resize(m);
  d.targets.resize(m);
  for (int t = 0; t < m; ++t) {
    for (int k = 1; k <= c.lags; ++k) d.states(t, k - 1) = t - k >= 0 ? u(t - k) : 0.0;
    d.times(t) = t;
    sim.clean_targets(t) = nfir_output(c.alpha, d.states.row(t).transpose());
    d.targets(t) = sim.clean_targets(t) + c.noise_sd * noise.normal();
  }
  sim.clean_states = d.states;
  d.aux = d.states;
  sim.h_values = Eigen::VectorXd::Zero(m);
  sim.target_noise_var = c.noise_sd * c.noise_sd;
  d.time_name = "t";
  for (int k = 0; k < c.lags; ++k) {
    d.state_names.push_back(state_name(k));
    d.aux_names.push_back("u_lag" + std::to_string(k + 1));
  }
  d.target_name = "y";
  sim.true_coefficients = nfir_coefficients(c.alpha, c.lags);

  auto& p = sim.parameters;
  p["system"] = "nfir";
  p["alpha"] = c.alpha, p["steps"] = c.steps, p["lags"] = c.lags, p["noise_sd"] = c.noise_sd;
  p["seed"] = c.seed, p["input_override"] = c.input.has_value();
  return sim;
}

}  // namespace kbsindy

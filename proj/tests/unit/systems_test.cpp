#include "kbsindy/error.hpp"
#include "kbsindy/systems.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace kbsindy;

namespace {

double variance(const Eigen::VectorXd& v) { return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size()); }

Eigen::VectorXd lorenz_state_at_one(double dt) {
  LorenzConfig c;
  c.dt = dt;
  c.stride = static_cast<int>(std::lround(1.0 / dt));
  c.samples = 2;
  return simulate_lorenz(c).dataset.states.row(1).transpose();
}

}  // namespace

TEST_CASE("Lorenz right-hand side") {
  CHECK(lorenz_rhs(Eigen::Vector3d(1, 1, 1), 10, 28, 8.0 / 3.0)(1) == doctest::Approx(26.0));
  CHECK(lorenz_rhs(Eigen::Vector3d(1, 1, 1), 10, 28, 8.0 / 3.0, 4.0)(1) == doctest::Approx(30.0));
}

TEST_CASE("a zero h leaves the trajectory unchanged") {
  LorenzConfig a;
  LorenzConfig b = a;
  b.h = ZeroH{};
  CHECK(simulate_lorenz(a).dataset.states == simulate_lorenz(b).dataset.states);
}

TEST_CASE("Lorenz target SNR is close to the request") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    LorenzConfig c;
    c.h = TanhH{};
    c.seed = seed;
    c.noise = NoiseSpec::snr(60.0, derive_seed(seed, 10));
    const Simulation s = simulate_lorenz(c);
    const double snr = variance(s.clean_targets) / variance(s.dataset.targets - s.clean_targets);
    CHECK(snr >= 50.0);
    CHECK(snr <= 72.0);
    CHECK(s.dataset.states == s.clean_states);
  }
}

TEST_CASE("RK4 converges at fourth order") {
  // The ratio tends to 16 from above: about 22 at dt = 0.01, 20 at 0.005, 17 at 0.00125.
  const Eigen::VectorXd ref = lorenz_state_at_one(0.005 / 64.0);
  const double coarse = (lorenz_state_at_one(0.005) - ref).norm();
  const double fine = (lorenz_state_at_one(0.0025) - ref).norm();
  const double ratio = coarse / fine;
  CHECK(ratio > 14.0);
  CHECK(ratio < 21.0);
}

TEST_CASE("simulators are deterministic in the seed") {
  LorenzConfig c;
  c.h = TanhH{};
  c.noise = NoiseSpec::snr(60.0, 3);
  c.seed = 4;
  const Simulation a = simulate_lorenz(c), b = simulate_lorenz(c);
  CHECK(a.dataset.targets == b.dataset.targets);
  CHECK(a.dataset.aux == b.dataset.aux);
  c.seed = 5;
  CHECK(simulate_lorenz(c).dataset.aux != a.dataset.aux);
}

TEST_CASE("stacked Lorenz copies are independent") {
  LorenzConfig c;
  c.copies = 4;
  c.x0.clear();
  c.seed = 8;
  c.samples = 200;
  const Simulation s = simulate_lorenz(c);
  CHECK(s.dataset.state_dim() == 12);
  LorenzConfig one;
  one.x0 = {s.clean_states(0, 3), s.clean_states(0, 4), s.clean_states(0, 5)};
  one.samples = 200;
  const Eigen::MatrixXd single = simulate_lorenz(one).dataset.states;
  CHECK((single - s.clean_states.middleCols(3, 3)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("gene model fixed point") {
  GeneConfig c;
  c.noise = NoiseSpec::none();
  // Newton iteration with a central-difference Jacobian.
  Eigen::Vector2d x(10.0, 50.0);
  for (int it = 0; it < 100; ++it) {
    const Eigen::Vector2d f = gene_rhs(x, c);
    Eigen::Matrix2d J;
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d e = Eigen::Vector2d::Zero();
      e(k) = 1e-6 * std::max(1.0, std::abs(x(k)));
      J.col(k) = (gene_rhs(x + e, c) - gene_rhs(x - e, c)) / (2 * e(k));
    }
    x -= J.partialPivLu().solve(f);
  }
  CHECK(gene_rhs(x, c).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(x.minCoeff() > 0.0);
}

TEST_CASE("gene trajectories converge for weak and strong feedback") {
  for (const HillH h : {HillH{0.5, 100.0, 2.0}, HillH{0.5, 1000.0, 4.0}}) {
    GeneConfig c;
    c.h = h;
    c.noise = NoiseSpec::none();
    c.schedule = {{100, 0.5}, {2000, 10.0}};
    const Simulation s = simulate_gene(c);
    CHECK(s.dataset.states.allFinite());
    const Eigen::Vector2d end = s.dataset.states.bottomRows(1).transpose();
    CHECK(gene_rhs(end, c).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, end.norm()));
  }
}

TEST_CASE("noiseless gene data ignores the seed") {
  GeneConfig a;
  a.noise = NoiseSpec::cv(0.0, 1);
  GeneConfig b = a;
  b.noise = NoiseSpec::cv(0.0, 2);
  CHECK(simulate_gene(a).dataset.states == simulate_gene(b).dataset.states);
  CHECK(gene_segment_starts(a) == std::vector<Eigen::Index>{0, 100});
}

TEST_CASE("calcium without diffusion is the reaction ODE") {
  CalciumConfig c;
  c.params.dz = c.params.dy = 0.0;
  c.init_amplitude = 0.0;
  c.cells = 10;
  c.burn_in = 0.0;
  c.duration = 1.0;
  c.samples = 50;
  c.snr_space = c.snr_time = 1e300;
  c.keep_fields = true;
  const CalciumSimulation s = simulate_calcium_rde(c);
  CHECK(s.clean_states.cwiseAbs().maxCoeff() == 0.0);
  // Every cell follows the same ODE, so the field stays uniform.
  for (Eigen::Index k = 0; k < s.Z.rows(); k += 50)
    CHECK(s.Z.row(k).maxCoeff() - s.Z.row(k).minCoeff() == 0.0);
}

TEST_CASE("calcium oscillates on the desk-scale grid") {
  CalciumConfig c;
  c.keep_fields = true;
  const CalciumSimulation s = simulate_calcium_rde(c);
  for (int cell : {10, 50, 90}) {
    const Eigen::VectorXd z = s.Z.col(cell).tail(s.Z.rows() / 2);
    CHECK(z.maxCoeff() / z.minCoeff() > 2.0);
  }
}

TEST_CASE("calcium total mass is conserved without sources") {
  CalciumConfig c;
  c.params.v0 = 0.0;
  c.params.k = 0.0;
  c.params.beta = 0.0;
  c.burn_in = 0.0;
  c.duration = 5.0;
  c.keep_fields = true;
  const CalciumSimulation s = simulate_calcium_rde(c);
  auto total = [&](Eigen::Index k) {
    const Eigen::VectorXd u = (s.Z.row(k) + s.Y.row(k)).transpose();
    return c.dx * (u.sum() - 0.5 * (u(0) + u(u.size() - 1)));
  };
  const double start = total(0);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < s.Z.rows(); k += 100) worst = std::max(worst, std::abs(total(k) - start));
  CHECK(worst / start < 1e-3);
}

TEST_CASE("calcium rejects an unstable step") {
  CalciumConfig c;
  c.dt = 0.05;
  try {
    simulate_calcium_rde(c);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

TEST_CASE("logistic map with red noise") {
  LogisticConfig c;
  c.b = 0.0;
  const Simulation s = simulate_logistic_ar(c);
  CHECK(s.clean_targets(0) == doctest::Approx(0.75));
  CHECK(s.h_values.isZero(0.0));

  LogisticConfig white;
  white.a = 0.0;
  white.steps = 10000;
  white.r = 2.0;
  const Eigen::VectorXd e = simulate_logistic_ar(white).h_values.tail(9999);
  CHECK(variance(e) == doctest::Approx(0.05 * 0.05).epsilon(0.05));

  LogisticConfig red;
  red.steps = 10000;
  red.r = 3.0;
  const Eigen::VectorXd er = simulate_logistic_ar(red).h_values.tail(9000);
  CHECK(variance(er) == doctest::Approx(0.0025 / 0.36).epsilon(0.2));
}

TEST_CASE("NFIR outputs") {
  NfirConfig c;
  c.noise_sd = 0.0;
  c.steps = 300;
  const Simulation s = simulate_nfir(c);
  for (Eigen::Index t = 0; t < 300; ++t) CHECK(s.dataset.targets(t) == doctest::Approx(0.2 * std::pow(s.dataset.states(t, 0), 4)).epsilon(1e-14));
  CHECK(s.dataset.states(0, 0) == 0.0);
  CHECK(s.dataset.states(5, 4) == s.dataset.states(1, 0));

  NfirConfig quiet;
  quiet.alpha = 1.0;
  quiet.steps = 200;
  quiet.input = Eigen::VectorXd::Zero(200);
  const Simulation q = simulate_nfir(quiet);
  CHECK(q.clean_targets.isZero(0.0));
  CHECK(variance(q.dataset.targets) == doctest::Approx(0.25).epsilon(0.3));
}

TEST_CASE("NFIR output variance against a long direct simulation") {
  // Independent long-run estimate straight from nfir_output.
  SplitMix64 rng(99);
  Eigen::VectorXd u(100010);
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.normal();
  SplitMix64 noise(100);
  Eigen::VectorXd y(100000);
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    Eigen::VectorXd lags(10);
    for (int k = 0; k < 10; ++k) lags(k) = u(t + 9 - k);
    y(t) = nfir_output(1.0, lags) + 0.5 * noise.normal();
  }
  const Eigen::VectorXd long_run = [&] {
    NfirConfig big;
    big.alpha = 1.0;
    big.seed = 3;
    big.steps = 100010;
    return simulate_nfir(big).dataset.targets.tail(100000).eval();
  }();
  CHECK(variance(long_run) == doctest::Approx(variance(y)).epsilon(0.05));
}

TEST_CASE("h functions round-trip through JSON") {
  const std::vector<HFunctionSpec> hs{ZeroH{}, TanhH{3, 2}, SineH{10, 1}, HillH{0.5, 100, 2}, RationalQuarticH{},
                                      Ar1NoiseH{}, MeanTanhH{10}};
  const Eigen::VectorXd z = Eigen::VectorXd::Constant(1, 0.7);
  for (const auto& h : hs) {
    const HFunctionSpec back = h_from_json(h_to_json(h));
    CHECK(h_name(back) == h_name(h));
    if (!std::holds_alternative<Ar1NoiseH>(h)) CHECK(evaluate_h(back, z) == evaluate_h(h, z));
  }
  CHECK(evaluate_h(RationalQuarticH{}, Eigen::VectorXd::Zero(1)) == doctest::Approx(0.5));
}

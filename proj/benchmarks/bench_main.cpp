// Micro-benchmarks for the hot paths: Gram build, KB-Sindy solve, selection
// grid and the smoothing spline.

#include "kbsindy/differentiation.hpp"
#include "kbsindy/kernel.hpp"
#include "kbsindy/library.hpp"
#include "kbsindy/regression.hpp"
#include "kbsindy/rng.hpp"
#include "kbsindy/selection.hpp"
#include "kbsindy/systems.hpp"

#include <benchmark/benchmark.h>

using namespace kbsindy;

namespace {

Eigen::MatrixXd normal_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

Dataset lorenz_data(int samples) {
  LorenzConfig c;
  c.h = TanhH{};
  c.samples = samples;
  c.noise = NoiseSpec::snr(60.0, 3);
  return simulate_lorenz(c).dataset;
}

void BM_GaussianGram(benchmark::State& state) {
  const Eigen::MatrixXd z = normal_matrix(state.range(0), 1, 1);
  const KernelSpec spec{GaussianKernel{10.0, 3.0}, {}};
  for (auto _ : state) benchmark::DoNotOptimize(build_gram(spec, z).K.data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GaussianGram)->RangeMultiplier(2)->Range(128, 2048)->Complexity(benchmark::oNSquared);

void BM_PolySumGram(benchmark::State& state) {
  const Eigen::MatrixXd z = normal_matrix(state.range(0), 10, 2);
  const KernelSpec spec{PolySumKernel{3, {1e-5, 1e-4, 1e-7}}, {}};
  for (auto _ : state) benchmark::DoNotOptimize(build_gram(spec, z).K.data());
}
BENCHMARK(BM_PolySumGram)->Arg(500)->Arg(1000);

void BM_KbSindySolve(benchmark::State& state) {
  const Eigen::Index m = state.range(0);
  const Dataset d = lorenz_data(static_cast<int>(m));
  const Eigen::MatrixXd theta = build_theta(enumerate_monomials(3, 4), d.states);
  const GramMatrix gram = build_gram(KernelSpec{GaussianKernel{10.0, 3.0}, {}}, d.aux);
  for (auto _ : state) {
    const KbSindySolver solver(theta, d.targets, gram.K, 8.0);
    benchmark::DoNotOptimize(solver.solve(0.5).xi_kernel.data());
  }
}
BENCHMARK(BM_KbSindySolve)->Arg(250)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_SindySolve(benchmark::State& state) {
  const Dataset d = lorenz_data(static_cast<int>(state.range(0)));
  const Eigen::MatrixXd theta = build_theta(enumerate_monomials(3, 4), d.states);
  for (auto _ : state) benchmark::DoNotOptimize(sindy(theta, d.targets, 0.5).coefficients.data());
}
BENCHMARK(BM_SindySolve)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_GridSearch(benchmark::State& state) {
  const Dataset d = lorenz_data(static_cast<int>(state.range(0)));
  const KernelSet kernel{KernelSpec{GaussianKernel{}, {}}};
  SearchSpace space;
  space.lambda_grid = {0.1, 0.3, 1.0};
  space.kernel_grids = {{0.0, 10.0, 100.0}, {1.0, 3.0}};
  SearchOptions options;
  options.noise_var = 8.0;
  const MonomialLibrary lib = enumerate_monomials(3, 2);
  for (auto _ : state) benchmark::DoNotOptimize(grid_search(d, space, lib, kernel, std::nullopt, options).table.size());
}
BENCHMARK(BM_GridSearch)->Arg(300)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_SmoothingSpline(benchmark::State& state) {
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(state.range(0), 0.0, 10.0);
  const Eigen::VectorXd y = t.array().sin().matrix() + 0.1 * normal_matrix(t.size(), 1, 4);
  for (auto _ : state) benchmark::DoNotOptimize(smooth_and_differentiate(t, y).derivatives.data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SmoothingSpline)->RangeMultiplier(4)->Range(256, 16384)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();

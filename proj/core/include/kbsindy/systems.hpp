#pragma once

#include "kbsindy/data.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace kbsindy {

struct NoiseSpec {
  enum class Kind { none, snr, cv };
  Kind kind = Kind::none;
  /// Target SNR (signal variance over noise variance) or coefficient of variation.
  double value = 0.0;
  std::uint64_t seed = 0;

  static NoiseSpec none() { return {}; }
  static NoiseSpec snr(double ratio, std::uint64_t seed) { return {Kind::snr, ratio, seed}; }
  static NoiseSpec cv(double c, std::uint64_t seed) { return {Kind::cv, c, seed}; }
  void validate() const;
};

/// Adds zero-mean Gaussian noise in place. SNR noise uses one variance per
/// column, var(column) / SNR; CV noise has standard deviation value * |x|.
void add_noise(Eigen::Ref<Eigen::MatrixXd> values, const NoiseSpec& noise);

// Known nonlinearities used to generate data.
struct ZeroH {};
struct TanhH {
  double amplitude = 10.0;
  double gain = 1.0;
};
struct SineH {
  double amplitude = 10.0;
  double frequency = 0.1;
};
struct HillH {
  double s1 = 0.5;
  double S = 100.0;
  double q = 2.0;
};
/// (alpha x^4 + beta x^2 + gamma) / (sigma x^4 + xi x^2 + lambda).
struct RationalQuarticH {
  double alpha = 7.36e-11, beta = 1.7e-5, gamma = 0.0011;
  double sigma = 8.9e-9, xi = 8.6e-6, lambda = 0.0022;
};
/// Colored noise e_{k+1} = a e_k + b z_k; a process, so it has no pointwise value.
struct Ar1NoiseH {
  double a = 0.8;
  double b = 0.05;
};
/// amplitude * tanh(mean of the inputs).
struct MeanTanhH {
  double amplitude = 1.0;
};

using HFunctionSpec = std::variant<ZeroH, TanhH, SineH, HillH, RationalQuarticH, Ar1NoiseH, MeanTanhH>;

void validate(const HFunctionSpec& h);
double evaluate_h(const HFunctionSpec& h, const Eigen::Ref<const Eigen::VectorXd>& z);
std::string h_name(const HFunctionSpec& h);
nlohmann::ordered_json h_to_json(const HFunctionSpec& h);
HFunctionSpec h_from_json(const nlohmann::ordered_json& j);

/// Result of a simulator. `dataset` is what an identification method sees;
/// the rest is ground truth for scoring.
struct Simulation {
  Dataset dataset;
  Eigen::MatrixXd clean_states;
  Eigen::VectorXd clean_targets;
  /// True h at every sample (zero where the system has none).
  Eigen::VectorXd h_values;
  /// Nonzero coefficients of the parametric part, keyed by monomial name.
  std::vector<std::pair<std::string, double>> true_coefficients;
  /// Variance of the noise added to the targets (0 when none was added).
  double target_noise_var = 0.0;
  /// True nonparametric part as a function of the aux vector, when it has one.
  std::function<double(const Eigen::VectorXd&)> true_h;
  nlohmann::ordered_json parameters;
};

enum class HTarget { input, output, inputs };

struct LorenzConfig {
  double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
  std::optional<HFunctionSpec> h;  ///< added to the second equation of the first copy
  HTarget h_target = HTarget::input;
  int n_inputs = 1;                ///< HTarget::inputs only
  int copies = 1;                  ///< decoupled Lorenz systems stacked into 3 * copies states
  int target_state = 1;            ///< 0-based state whose derivative is the target
  std::vector<double> x0{-8.0, 7.0, 27.0};  ///< empty: random per copy from seed
  double dt = 0.001;
  int stride = 10;
  int samples = 1000;
  int burn_in_samples = 0;
  double input_hold = 0.1;
  double input_range = 3.0;
  NoiseSpec noise;
  std::uint64_t seed = 1;
};

Simulation simulate_lorenz(const LorenzConfig& config);

/// Right-hand side of one Lorenz copy with an additive term on the second equation.
Eigen::Vector3d lorenz_rhs(const Eigen::Vector3d& x, double sigma, double rho, double beta, double forcing = 0.0);

struct GeneConfig {
  HFunctionSpec h = HillH{};
  double delta1 = 5.78e-3;
  double delta2 = 1.16e-3;
  double gamma = 0.01;
  Eigen::Vector2d x0 = Eigen::Vector2d::Zero();
  double dt = 0.05;
  /// Consecutive sampling regimes: (sample count, sampling interval in seconds).
  std::vector<std::pair<int, double>> schedule{{100, 0.5}, {500, 2.0}};
  NoiseSpec noise = NoiseSpec::cv(0.05, 1);
};

/// Noisy (x1, x2) samples with aux = noisy x2. Targets are the exact dx1/dt;
/// experiments replace them by smoothed derivative estimates.
Simulation simulate_gene(const GeneConfig& config);

Eigen::Vector2d gene_rhs(const Eigen::Vector2d& x, const GeneConfig& config);

/// Index of the first sample of every sampling regime.
std::vector<Eigen::Index> gene_segment_starts(const GeneConfig& config);

struct CalciumParams {
  double v0 = 1.0, v1 = 7.3, beta = 0.4;
  double vm2 = 65.0, vm3 = 500.0;
  double k2 = 1.0, kr = 2.0, ka = 0.9;
  double kf = 1.0, k = 10.0;
  int n = 2, m = 2, p = 4;
  double dz = 20.0, dy = 0.1;
};

/// Reaction terms (f, g) of the cytosolic and pool equations.
Eigen::Vector2d calcium_reaction(const CalciumParams& p, double Z, double Y);

struct CalciumConfig {
  CalciumParams params;
  int cells = 100;
  double dx = 1.0;
  double dt = 0.002;
  double burn_in = 2.0;   ///< seconds simulated before the sampling window
  double duration = 10.0;  ///< seconds in the sampling window
  /// Initial condition Z = z0 + amp * cos(pi x / L), Y = y0.
  double z0 = 0.3, y0 = 1.5, init_amplitude = 0.3;
  int samples = 2000;
  double snr_space = 20.0;
  double snr_time = 10.0;
  std::uint64_t seed = 1;
  bool keep_fields = false;
};

struct CalciumSimulation : Simulation {
  /// Recorded fields over the sampling window (rows: time steps, columns: cells);
  /// filled only with keep_fields.
  Eigen::MatrixXd Z, Y;
  Eigen::VectorXd field_times;
};

CalciumSimulation simulate_calcium_rde(const CalciumConfig& config);

struct LogisticConfig {
  double r = 3.0;
  double a = 0.8, b = 0.05;
  double x0 = 0.5;
  double e0 = 0.0;
  int steps = 200;
  double snr = 60.0;
  std::uint64_t seed = 1;
};

/// states = x_k, aux = k, targets = x_{k+1} + measurement noise.
Simulation simulate_logistic_ar(const LogisticConfig& config);

struct NfirConfig {
  double alpha = 0.0;
  int steps = 2000;
  int lags = 10;
  double noise_sd = 0.5;
  std::uint64_t seed = 1;
  /// Replaces the white Gaussian input when given (length = steps).
  std::optional<Eigen::VectorXd> input;
};

/// states = aux = (u_{t-1}, ..., u_{t-lags}) with zero initial conditions.
Simulation simulate_nfir(const NfirConfig& config);

/// Noise-free NFIR output for one lag vector.
double nfir_output(double alpha, const Eigen::Ref<const Eigen::VectorXd>& lags);

/// Nonzero NFIR coefficients keyed by monomial name over `lags` variables.
std::vector<std::pair<std::string, double>> nfir_coefficients(double alpha, int lags);

}  // namespace kbsindy

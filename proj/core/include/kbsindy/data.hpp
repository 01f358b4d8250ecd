#pragma once

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kbsindy {

/// Sampled time series for one regression target.
///
/// Rows are samples. `states` feeds the parametric library, `aux` holds the
/// variable the kernel component depends on (inputs, outputs, time index or a
/// state subset) and may have zero columns. `targets` is the vector y of noisy
/// derivatives or next-step values.
struct Dataset {
  Eigen::VectorXd times;
  Eigen::MatrixXd states;
  Eigen::MatrixXd aux;
  Eigen::VectorXd targets;

  std::string time_name = "t";
  std::vector<std::string> state_names;
  std::vector<std::string> aux_names;
  std::string target_name = "y";

  Eigen::Index size() const noexcept { return times.size(); }
  Eigen::Index state_dim() const noexcept { return states.cols(); }
  Eigen::Index aux_dim() const noexcept { return aux.cols(); }

  /// Throws ErrorKind::validation (or shape) when an invariant is broken:
  /// equal row counts m >= 1, strictly increasing times, finite entries.
  void validate() const;

  /// Contiguous block of rows [begin, begin + count).
  Dataset slice(Eigen::Index begin, Eigen::Index count) const;

  /// Fills empty name lists with x1.., z1..
  void assign_default_names();
};

/// Column-role map for load_csv.
struct CsvSchema {
  std::string time;
  std::vector<std::string> states;
  std::string target;
  std::vector<std::string> aux;
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Writes time, states, aux, target columns with 17 significant digits so
/// that load_csv(save_csv(d)) reproduces d bit for bit.
void save_csv(const std::filesystem::path& path, const Dataset& dataset);

CsvSchema schema_of(const Dataset& dataset);

struct Split {
  Dataset train;
  std::optional<Dataset> validation;
  std::optional<Dataset> test;
};

/// Contiguous train/validation/test blocks in time order. Block boundaries
/// sit at round(m * cumulative fraction), rounding halves up.
Split split_contiguous(const Dataset& dataset, const std::array<double, 3>& fractions);

/// 100 * (1 - ||y - y_hat|| / ||y||). Negative for predictions worse than zero.
double prediction_fit(const Eigen::Ref<const Eigen::VectorXd>& y_test,
                      const Eigen::Ref<const Eigen::VectorXd>& y_hat);

/// Shortest round-trip text for a double ("%.16e").
std::string format_double(double value);

}  // namespace kbsindy

#include "kbsindy/data.hpp"

#include "kbsindy/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace kbsindy {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  for (auto& f : fields) {
    const auto first = f.find_first_not_of(" \t");
    const auto last = f.find_last_not_of(" \t");
    f = first == std::string::npos ? std::string{} : f.substr(first, last - first + 1);
  }
  return fields;
}

double parse_cell(const std::string& text, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw Error(ErrorKind::parse, "non-numeric cell '" + text + "' in column '" + column +
                                      "' at data row " + std::to_string(row));
  }
  return value;
}

void check_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::validation, std::string("non-finite entry in ") + what);
  }
}

}  // namespace

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.16e", value);
  return buffer;
}

void Dataset::validate() const {
  const Eigen::Index m = times.size();
  if (m < 1) throw Error(ErrorKind::validation, "dataset is empty");
  if (states.rows() != m || targets.size() != m || (aux.cols() > 0 && aux.rows() != m)) {
    throw Error(ErrorKind::shape, "dataset row counts differ");
  }
  check_finite(times, "times");
  check_finite(states, "states");
  check_finite(aux, "aux");
  check_finite(targets, "targets");
  for (Eigen::Index i = 1; i < m; ++i) {
    if (!(times[i] > times[i - 1])) {
      throw Error(ErrorKind::validation,
                  "times not strictly increasing at row " + std::to_string(i));
    }
  }
}

Dataset Dataset::slice(Eigen::Index begin, Eigen::Index count) const {
  Dataset out;
  out.times = times.segment(begin, count);
  out.states = states.middleRows(begin, count);
  out.aux = aux.cols() > 0 ? Eigen::MatrixXd(aux.middleRows(begin, count))
                           : Eigen::MatrixXd(count, 0);
  out.targets = targets.segment(begin, count);
  out.time_name = time_name;
  out.state_names = state_names;
  out.aux_names = aux_names;
  out.target_name = target_name;
  return out;
}

void Dataset::assign_default_names() {
  if (state_names.empty()) {
    for (Eigen::Index k = 0; k < states.cols(); ++k) state_names.push_back("x" + std::to_string(k + 1));
  }
  if (aux_names.empty()) {
    for (Eigen::Index k = 0; k < aux.cols(); ++k) aux_names.push_back("z" + std::to_string(k + 1));
  }
}

CsvSchema schema_of(const Dataset& dataset) {
  Dataset named = dataset;
  named.assign_default_names();
  return {named.time_name, named.state_names, named.target_name, named.aux_names};
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  if (schema.time.empty() || schema.states.empty() || schema.target.empty()) {
    throw Error(ErrorKind::schema, "schema needs a time column, state columns and a target column");
  }

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::schema, "missing header line in " + path.string());
  const auto header = split_fields(line);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < header.size(); ++c) index.emplace(header[c], c);

  auto column = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw Error(ErrorKind::schema, "missing column '" + name + "'");
    return it->second;
  };
  const std::size_t time_col = column(schema.time);
  const std::size_t target_col = column(schema.target);
  std::vector<std::size_t> state_cols, aux_cols;
  for (const auto& s : schema.states) state_cols.push_back(column(s));
  for (const auto& a : schema.aux) aux_cols.push_back(column(a));

  std::vector<std::vector<double>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::parse, "data row " + std::to_string(row) + " has " +
                                        std::to_string(fields.size()) + " fields, expected " +
                                        std::to_string(header.size()));
    }
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) values[c] = parse_cell(fields[c], row, header[c]);
    rows.push_back(std::move(values));
  }

  const auto m = static_cast<Eigen::Index>(rows.size());
  Dataset d;
  d.times.resize(m);
  d.states.resize(m, static_cast<Eigen::Index>(state_cols.size()));
  d.aux.resize(m, static_cast<Eigen::Index>(aux_cols.size()));
  d.targets.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    d.times[i] = r[time_col];
    d.targets[i] = r[target_col];
    for (std::size_t k = 0; k < state_cols.size(); ++k) d.states(i, static_cast<Eigen::Index>(k)) = r[state_cols[k]];
    for (std::size_t k = 0; k < aux_cols.size(); ++k) d.aux(i, static_cast<Eigen::Index>(k)) = r[aux_cols[k]];
  }
  d.time_name = schema.time;
  d.state_names = schema.states;
  d.aux_names = schema.aux;
  d.target_name = schema.target;
  d.validate();
  return d;
}

void save_csv(const std::filesystem::path& path, const Dataset& dataset) {
  Dataset d = dataset;
  d.assign_default_names();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());

  out << d.time_name;
  for (const auto& s : d.state_names) out << ',' << s;
  for (const auto& a : d.aux_names) out << ',' << a;
  out << ',' << d.target_name << '\n';
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    out << format_double(d.times[i]);
    for (Eigen::Index k = 0; k < d.states.cols(); ++k) out << ',' << format_double(d.states(i, k));
    for (Eigen::Index k = 0; k < d.aux.cols(); ++k) out << ',' << format_double(d.aux(i, k));
    out << ',' << format_double(d.targets[i]) << '\n';
  }
}

Split split_contiguous(const Dataset& dataset, const std::array<double, 3>& fractions) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw Error(ErrorKind::config, "split fractions must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::config, "split fractions must sum to 1");

  const Eigen::Index m = dataset.size();
  const double md = static_cast<double>(m);
  const auto boundary = [&](double cumulative) {
    return std::min<Eigen::Index>(m, static_cast<Eigen::Index>(std::floor(md * cumulative + 0.5)));
  };
  const Eigen::Index b1 = boundary(fractions[0]);
  const Eigen::Index b2 = std::max(b1, boundary(fractions[0] + fractions[1]));
  const std::array<Eigen::Index, 3> sizes{b1, b2 - b1, m - b2};
  for (int k = 0; k < 3; ++k) {
    if (fractions[static_cast<std::size_t>(k)] > 0.0 && sizes[static_cast<std::size_t>(k)] == 0) {
      throw Error(ErrorKind::config, "split block " + std::to_string(k) + " would be empty");
    }
  }

  Split split;
  split.train = dataset.slice(0, sizes[0]);
  if (sizes[1] > 0) split.validation = dataset.slice(b1, sizes[1]);
  if (sizes[2] > 0) split.test = dataset.slice(b2, sizes[2]);
  return split;
}

double prediction_fit(const Eigen::Ref<const Eigen::VectorXd>& y_test,
                      const Eigen::Ref<const Eigen::VectorXd>& y_hat) {
  if (y_test.size() != y_hat.size() || y_test.size() < 1) {
    throw Error(ErrorKind::shape, "prediction_fit needs equal nonempty vectors");
  }
  const double norm = y_test.norm();
  if (norm == 0.0) throw Error(ErrorKind::undefined_metric, "prediction fit undefined for a zero test vector");
  return 100.0 * (1.0 - (y_test - y_hat).norm() / norm);
}

}  // namespace kbsindy

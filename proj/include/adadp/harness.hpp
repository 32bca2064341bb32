/*
 * Copyright 2026 The adadp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef ADADP_HARNESS_HPP_
#define ADADP_HARNESS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "Eigen/Core"
#include "adadp/glm_sc.hpp"
#include "adadp/mech_core.hpp"
#include "adadp/noisy_argmax.hpp"
#include "adadp/ops_linreg.hpp"
#include "adadp/pate_ptr.hpp"
#include "adadp/ptr_engine.hpp"
#include "adadp/random.hpp"

namespace adadp {

// Experiment harness: config handling, dataset ingestion, the four seeded
// experiment sweeps, and CSV/JSON emission. Everything downstream of a
// (config, seed) pair is deterministic, so rerunning a config reproduces the
// output byte for byte.

// Configuration and usage problems (exit code 2), as opposed to numerical
// failures inside an experiment (exit code 3).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string trim_copy(const std::string& s) {
  const char* ws = " \t\r\n";
  const std::size_t a = s.find_first_not_of(ws);
  if (a == std::string::npos) {
    return "";
  }
  const std::size_t b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

// Flat key-value config with sectioned blocks:
//   [vote]
//   eps = 10
// Keys before any section header land in [common]. '#' and ';' start
// comments when they open the line. Later duplicates win.
struct KeyValueConfig {
  std::map<std::string, std::string> entries;  // "section.key" -> value
};

inline KeyValueConfig parse_config_text(const std::string& text,
                                        const std::string& origin) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section = "common";
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim_copy(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') {
      continue;
    }
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": malformed section header");
      }
      section = trim_copy(t.substr(1, t.size() - 2));
      if (section.empty()) {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": empty section name");
      }
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key = value");
    }
    const std::string key = trim_copy(t.substr(0, eq));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    cfg.entries[section + "." + key] = trim_copy(t.substr(eq + 1));
  }
  return cfg;
}

inline KeyValueConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

// Resolved view of one experiment's parameters. Lookup order: command-line
// override, then [section], then [common], then the built-in default.
class Settings {
 public:
  Settings(std::string section, KeyValueConfig file,
           std::map<std::string, std::string> overrides)
      : section_(std::move(section)),
        file_(std::move(file)),
        overrides_(std::move(overrides)) {}

  std::optional<std::string> raw(const std::string& key) const {
    const auto ov = overrides_.find(key);
    if (ov != overrides_.end()) {
      return ov->second;
    }
    const auto sec = file_.entries.find(section_ + "." + key);
    if (sec != file_.entries.end()) {
      return sec->second;
    }
    const auto common = file_.entries.find("common." + key);
    if (common != file_.entries.end()) {
      return common->second;
    }
    return std::nullopt;
  }

  std::string get_string(const std::string& key,
                         const std::string& fallback) const {
    return raw(key).value_or(fallback);
  }

  double get_double(const std::string& key, double fallback) const {
    const auto v = raw(key);
    if (!v.has_value()) {
      return fallback;
    }
    return parse_double(key, *v);
  }

  int get_int(const std::string& key, int fallback) const {
    const double v = get_double(key, static_cast<double>(fallback));
    const int out = static_cast<int>(v);
    if (static_cast<double>(out) != v) {
      throw ConfigError("key '" + key + "': expected an integer");
    }
    return out;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto v = raw(key);
    if (!v.has_value()) {
      return fallback;
    }
    const std::string s = trim_copy(*v);
    char* end = nullptr;
    const unsigned long long out = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || s[0] == '-' || end != s.c_str() + s.size()) {
      throw ConfigError("key '" + key + "': expected a nonnegative integer, "
                        "got '" + *v + "'");
    }
    return out;
  }

  std::vector<double> get_list(const std::string& key,
                               std::vector<double> fallback) const {
    const auto v = raw(key);
    if (!v.has_value()) {
      return fallback;
    }
    std::vector<double> out;
    std::string item;
    std::istringstream in(*v);
    while (std::getline(in, item, ',')) {
      out.push_back(parse_double(key, item));
    }
    if (out.empty()) {
      throw ConfigError("key '" + key + "': empty list");
    }
    return out;
  }

  const std::string& section() const { return section_; }

 private:
  double parse_double(const std::string& key, const std::string& value) const {
    const std::string s = trim_copy(value);
    char* end = nullptr;
    const double out = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
      throw ConfigError("key '" + key + "': expected a number, got '" + value +
                        "'");
    }
    return out;
  }

  std::string section_;
  KeyValueConfig file_;
  std::map<std::string, std::string> overrides_;
};

// Result rows carry typed cells so CSV and JSON can render numbers
// identically (12 significant digits) while keeping strings quoted in JSON.
struct Cell {
  bool numeric = false;
  double number = 0.0;
  std::string text;
};

inline Cell num_cell(double v) {
  Cell c;
  c.numeric = true;
  c.number = v;
  return c;
}

inline Cell text_cell(std::string s) {
  Cell c;
  c.text = std::move(s);
  return c;
}

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

enum class OutputFormat { kCsv, kJson };

inline OutputFormat parse_format(const std::string& name) {
  if (name == "csv") {
    return OutputFormat::kCsv;
  }
  if (name == "json") {
    return OutputFormat::kJson;
  }
  throw ConfigError("unknown output format: " + name);
}

namespace internal {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  out += '"';
  return out;
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\r':
        out += "\\r";
        break;
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace internal

inline void emit_results(const ResultTable& table, std::ostream& os,
                         OutputFormat format) {
  if (format == OutputFormat::kCsv) {
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      os << (i == 0 ? "" : ",") << internal::csv_escape(table.columns[i]);
    }
    os << "\n";
    for (const std::vector<Cell>& row : table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        os << (i == 0 ? "" : ",");
        os << (row[i].numeric ? format_double(row[i].number)
                              : internal::csv_escape(row[i].text));
      }
      os << "\n";
    }
    return;
  }
  os << "[";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    os << (r == 0 ? "\n" : ",\n") << "  {";
    const std::vector<Cell>& row = table.rows[r];
    for (std::size_t i = 0; i < row.size() && i < table.columns.size(); ++i) {
      os << (i == 0 ? "" : ", ") << "\""
         << internal::json_escape(table.columns[i]) << "\": ";
      if (row[i].numeric) {
        os << format_double(row[i].number);
      } else {
        os << "\"" << internal::json_escape(row[i].text) << "\"";
      }
    }
    os << "}";
  }
  os << (table.rows.empty() ? "]\n" : "\n]\n");
}

inline void emit_results(const ResultTable& table, const std::string& path,
                         OutputFormat format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw ConfigError("cannot open output path: " + path);
  }
  emit_results(table, os, format);
}

// A normalized dataset plus its split. Features are column z-scored against
// the training split and globally scaled so the largest row norm is one;
// targets are scaled into [-1, 1]. Row order stays as loaded, the split
// index vectors pick rows out of it.
struct IngestedData {
  Eigen::MatrixXd features;
  Eigen::VectorXd target;
  std::vector<int> train_rows;
  std::vector<int> valid_rows;
  std::vector<int> test_rows;
  double x_bound = 1.0;
  double y_bound = 1.0;
  std::vector<std::string> feature_names;
};

namespace internal {

inline void split_indices(int n, RandomSource& rng, std::vector<int>* train,
                          std::vector<int>* valid, std::vector<int>* test) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(
        rng.integer_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(j)]);
  }
  const int n_train = 6 * n / 10;
  const int n_valid = n / 10;
  train->assign(order.begin(), order.begin() + n_train);
  valid->assign(order.begin() + n_train, order.begin() + n_train + n_valid);
  test->assign(order.begin() + n_train + n_valid, order.end());
}

// Normalization shared by file ingestion and the synthetic generators.
// Train-split statistics drive the z-scoring so the held-out rows never
// leak into it; the global scale then caps every row norm at one. Applied
// to already-normalized data the two steps cancel, which is what makes
// ingestion idempotent.
inline void normalize_in_place(IngestedData* data) {
  const Eigen::Index d = data->features.cols();
  const int n_train = static_cast<int>(data->train_rows.size());
  for (Eigen::Index c = 0; c < d; ++c) {
    double mean = 0.0;
    for (int r : data->train_rows) {
      mean += data->features(r, c);
    }
    mean /= n_train;
    double var = 0.0;
    for (int r : data->train_rows) {
      const double dev = data->features(r, c) - mean;
      var += dev * dev;
    }
    var /= n_train;
    const double sd = std::sqrt(var);
    const double scale = sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
    data->features.col(c) =
        (data->features.col(c).array() - mean) / scale;
  }
  double max_norm = 0.0;
  for (Eigen::Index r = 0; r < data->features.rows(); ++r) {
    max_norm = std::max(max_norm, data->features.row(r).norm());
  }
  if (max_norm > 0.0) {
    data->features /= max_norm;
  }
  data->x_bound = 1.0;
  const double max_y = data->target.cwiseAbs().maxCoeff();
  if (max_y > 0.0) {
    data->target /= max_y;
  }
  data->y_bound = 1.0;
}

}  // namespace internal

// Loads a headered CSV of numerics, pulls out target_column, normalizes, and
// splits 60/10/30 with a seeded shuffle. Parse problems report the file,
// 1-based row, and column.
inline IngestedData ingest_csv(const std::string& path,
                               const std::string& target_column,
                               RandomSource& rng) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read data file: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ConfigError(path + ": empty file");
  }
  std::vector<std::string> header;
  {
    std::istringstream hs(trim_copy(line));
    std::string cell;
    while (std::getline(hs, cell, ',')) {
      header.push_back(trim_copy(cell));
    }
  }
  int target_idx = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == target_column) {
      target_idx = static_cast<int>(i);
      break;
    }
  }
  if (target_idx < 0) {
    throw ConfigError(path + ":1: no column named '" + target_column + "'");
  }

  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim_copy(line);
    if (t.empty()) {
      continue;
    }
    std::vector<double> row;
    std::istringstream rs(t);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(rs, cell, ',')) {
      if (col >= header.size()) {
        break;
      }
      const std::string v = trim_copy(cell);
      char* end = nullptr;
      const double num = std::strtod(v.c_str(), &end);
      if (v.empty() || end != v.c_str() + v.size()) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": column '" +
                          header[col] + "' is not numeric: '" + v + "'");
      }
      row.push_back(num);
      ++col;
    }
    if (row.size() != header.size()) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " cells, got " +
                        std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  const int n = static_cast<int>(rows.size());
  if (n < 5) {
    throw ConfigError(path + ": need at least 5 data rows, got " +
                      std::to_string(n));
  }

  IngestedData data;
  const int d = static_cast<int>(header.size()) - 1;
  data.features.resize(n, d);
  data.target.resize(n);
  for (int r = 0; r < n; ++r) {
    int c_out = 0;
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
      if (c == target_idx) {
        data.target(r) = rows[static_cast<std::size_t>(r)]
                             [static_cast<std::size_t>(c)];
      } else {
        data.features(r, c_out++) =
            rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      }
    }
  }
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (c != target_idx) {
      data.feature_names.push_back(header[static_cast<std::size_t>(c)]);
    }
  }
  internal::split_indices(n, rng, &data.train_rows, &data.valid_rows,
                          &data.test_rows);
  internal::normalize_in_place(&data);
  return data;
}

namespace internal {

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m,
                                 const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  }
  return out;
}

inline Eigen::VectorXd take_rows(const Eigen::VectorXd& v,
                                 const std::vector<int>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  }
  return out;
}

inline double mean_squared_error(const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& theta) {
  if (y.size() == 0) {
    return 0.0;
  }
  return (x * theta - y).squaredNorm() / static_cast<double>(y.size());
}

// MSE of the zero predictor, the fallback score for refused releases.
inline double refusal_mse(const Eigen::VectorXd& y) {
  if (y.size() == 0) {
    return 0.0;
  }
  return y.squaredNorm() / static_cast<double>(y.size());
}

inline double misclassification_rate(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& theta) {
  if (y.size() == 0) {
    return 0.0;
  }
  int wrong = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pred = x.row(i).dot(theta) >= 0.0 ? 1.0 : -1.0;
    wrong += pred != y(i) ? 1 : 0;
  }
  return static_cast<double>(wrong) / static_cast<double>(y.size());
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) {
    return 0.0;
  }
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Synthetic regression rows: directions from Gaussians, norms at most 0.95,
// targets a noisy linear signal. Everything is then normalized exactly like
// file input.
inline IngestedData synthetic_regression(int n, int d, RandomSource& rng) {
  IngestedData data;
  data.features.resize(n, d);
  data.target.resize(n);
  Eigen::VectorXd theta(d);
  for (int j = 0; j < d; ++j) {
    theta(j) = rng.gaussian(1.0);
  }
  theta *= 0.8 / std::max(theta.norm(), 1e-12);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd row(d);
    for (int j = 0; j < d; ++j) {
      row(j) = rng.gaussian(1.0);
    }
    row *= 0.95 * rng.uniform() / std::max(row.norm(), 1e-12);
    data.features.row(i) = row;
    data.target(i) = row.dot(theta) + 0.05 * rng.gaussian(1.0);
  }
  for (int j = 0; j < d; ++j) {
    data.feature_names.push_back("x" + std::to_string(j));
  }
  split_indices(n, rng, &data.train_rows, &data.valid_rows, &data.test_rows);
  normalize_in_place(&data);
  return data;
}

inline IngestedData synthetic_classification(int n, int d, RandomSource& rng) {
  IngestedData data = synthetic_regression(n, d, rng);
  for (Eigen::Index i = 0; i < data.target.size(); ++i) {
    data.target(i) = data.target(i) > 0.0 ? 1.0 : -1.0;
  }
  return data;
}

inline void to_sign_labels(Eigen::VectorXd* y) {
  for (Eigen::Index i = 0; i < y->size(); ++i) {
    (*y)(i) = (*y)(i) > 0.0 ? 1.0 : -1.0;
  }
}

inline IngestedData load_dataset(const Settings& s, int default_n,
                                 int default_d, RandomSource& rng,
                                 bool classification) {
  const std::string source = s.get_string("data", "synthetic");
  if (source == "synthetic") {
    const int n = s.get_int("n", default_n);
    const int d = s.get_int("d", default_d);
    if (n < 10 || d < 1) {
      throw ConfigError("synthetic data needs n >= 10 and d >= 1");
    }
    return classification ? synthetic_classification(n, d, rng)
                          : synthetic_regression(n, d, rng);
  }
  IngestedData data = ingest_csv(source, s.get_string("target", "y"), rng);
  if (classification) {
    to_sign_labels(&data.target);
  }
  return data;
}

}  // namespace internal

// Binary voting sweep. For each gap the histogram is (base + gap, base); the
// analytic rows track the data-dependent loss of the eps-noisy argmax (pure,
// delta-approximate, and the data-independent Laplace bound) with the exact
// flip probability as the error. The two PTR pipelines are run trials times
// on their own substream; a refusal or a randomized fallback counts as error
// 1/2.
inline ResultTable run_vote_experiment(const Settings& s, std::uint64_t seed) {
  const double eps = s.get_double("eps", 10.0);
  const double delta = s.get_double("delta", 1e-6);
  const double eps_test = s.get_double("eps_test", 1.0);
  const double threshold = s.get_double("threshold", eps / 2.0);
  const double classic_eps = s.get_double("classic_eps", eps_test + threshold);
  const int base = s.get_int("base", 50);
  const int gap_max = s.get_int("gap_max", 200);
  const int trials = s.get_int("trials", 200);
  if (!(eps > 0.0) || !(delta >= 0.0 && delta < 1.0) || base < 1 ||
      gap_max < 0 || trials < 1) {
    throw ConfigError("vote: invalid parameters");
  }

  RandomSource root(seed);
  ResultTable table;
  table.columns = {"gap", "eps", "method", "privacy_cost", "error_rate"};
  std::uint64_t stream = 0;
  for (int gap = 0; gap <= gap_max; ++gap) {
    const long n0 = base + gap;
    const long n1 = base;
    // Probability the minority class wins the noisy vote.
    const double p_err = flip_prob(n1, n0, eps);
    table.rows.push_back({num_cell(gap), num_cell(eps),
                          text_cell("datadep_pure"),
                          num_cell(data_dep_eps(n0, n1, eps, 0.0)),
                          num_cell(p_err)});
    table.rows.push_back({num_cell(gap), num_cell(eps),
                          text_cell("datadep_delta"),
                          num_cell(data_dep_eps(n0, n1, eps, delta)),
                          num_cell(p_err)});
    table.rows.push_back({num_cell(gap), num_cell(eps),
                          text_cell("laplace_bound"), num_cell(eps),
                          num_cell(p_err)});
    {
      RandomSource rng = root.substream(stream++);
      int wrong = 0;
      int refused = 0;
      for (int t = 0; t < trials; ++t) {
        const VoteReleaseResult r =
            gen_ptr_vote(n0, n1, eps, eps_test, threshold, delta, rng);
        if (r.outcome.is_bottom()) {
          ++refused;
        } else if (r.outcome.value() != 0) {
          ++wrong;
        }
      }
      const double err = (wrong + 0.5 * refused) / trials;
      table.rows.push_back({num_cell(gap), num_cell(eps),
                            text_cell("gen_ptr"),
                            num_cell(eps_test + threshold), num_cell(err)});
    }
    {
      RandomSource rng = root.substream(stream++);
      int wrong = 0;
      for (int t = 0; t < trials; ++t) {
        wrong +=
            classic_ptr_vote(n0, n1, classic_eps, delta, rng).label != 0 ? 1
                                                                         : 0;
      }
      table.rows.push_back({num_cell(gap), num_cell(eps),
                            text_cell("classic_ptr"), num_cell(classic_eps),
                            num_cell(static_cast<double>(wrong) / trials)});
    }
  }
  return table;
}

namespace internal {

inline std::vector<double> default_lambda_grid() {
  // 30 points, log spaced from 2.5 up to 2.5^10.
  std::vector<double> grid;
  for (int i = 0; i < 30; ++i) {
    grid.push_back(std::pow(2.5, 1.0 + 9.0 * i / 29.0));
  }
  return grid;
}

}  // namespace internal

// Linear regression sweep. Per grid lambda: one posterior-sampling pipeline
// run and one output-perturbation baseline, scored by test MSE. An
// infeasible lambda (the calibration cannot reach the target) is a refusal,
// reported with the zero predictor's MSE. The last row privately tunes
// lambda over the same grid with the random-stopping selector; its eps is
// the tuner's composed budget.
inline ResultTable run_linreg_experiment(const Settings& s,
                                         std::uint64_t seed) {
  const double eps = s.get_double("eps", 2.0);
  const double delta = s.get_double("delta", 1e-6);
  const std::vector<double> lambdas =
      s.get_list("lambdas", internal::default_lambda_grid());
  if (!(eps > 0.0) || !(delta > 0.0 && delta < 0.25)) {
    throw ConfigError("linreg: need eps > 0 and delta in (0, 0.25)");
  }
  for (double lam : lambdas) {
    if (!(lam > 0.0)) {
      throw ConfigError("linreg: lambdas must be positive");
    }
  }

  RandomSource root(seed);
  RandomSource data_rng = root.substream(1u << 20);
  const IngestedData data =
      internal::load_dataset(s, 200, 5, data_rng, false);
  const Eigen::MatrixXd x_train =
      internal::take_rows(data.features, data.train_rows);
  const Eigen::VectorXd y_train =
      internal::take_rows(data.target, data.train_rows);
  const Eigen::MatrixXd x_valid =
      internal::take_rows(data.features, data.valid_rows);
  const Eigen::VectorXd y_valid =
      internal::take_rows(data.target, data.valid_rows);
  const Eigen::MatrixXd x_test =
      internal::take_rows(data.features, data.test_rows);
  const Eigen::VectorXd y_test =
      internal::take_rows(data.target, data.test_rows);

  ResultTable table;
  table.columns = {"lambda", "gamma", "eps", "mse", "method"};
  std::uint64_t stream = 0;
  for (double lam : lambdas) {
    RandomSource rng = root.substream(stream++);
    try {
      const OpsPtrResult r = ops_ptr_run(x_train, y_train, lam, eps, delta,
                                         data.x_bound, data.y_bound, rng);
      table.rows.push_back(
          {num_cell(lam), num_cell(r.gamma), num_cell(r.budget.epsilon),
           num_cell(internal::mean_squared_error(x_test, y_test, r.theta)),
           text_cell("ops_fixed")});
    } catch (const InfeasibleError&) {
      table.rows.push_back({num_cell(lam), num_cell(0.0), num_cell(eps),
                            num_cell(internal::refusal_mse(y_test)),
                            text_cell("ops_fixed")});
    } catch (const std::exception& e) {
      throw std::runtime_error("linreg lambda=" + format_double(lam) + ": " +
                               e.what());
    }
  }
  for (double lam : lambdas) {
    RandomSource rng = root.substream(stream++);
    try {
      const Eigen::VectorXd theta = output_perturbation_baseline(
          x_train, y_train, lam, eps, delta, data.x_bound, data.y_bound, rng);
      table.rows.push_back(
          {num_cell(lam), num_cell(0.0), num_cell(eps),
           num_cell(internal::mean_squared_error(x_test, y_test, theta)),
           text_cell("output_pert")});
    } catch (const std::exception& e) {
      throw std::runtime_error("linreg lambda=" + format_double(lam) + ": " +
                               e.what());
    }
  }

  // Private tuning: tau = 1/(10 k) over the k-point grid and a trial cutoff
  // of (1/tau) ln(1/delta2) at delta2 = delta / 2. The per-run delta_star is
  // then set so the tuner's composed failure probability lands exactly on
  // the configured delta: sqrt(2 delta_star) T = delta / 2.
  const double tau = 1.0 / (10.0 * static_cast<double>(lambdas.size()));
  const double delta2 = delta / 2.0;
  const int cutoff = static_cast<int>(
      std::ceil(std::log(1.0 / delta2) / tau));
  const double delta_star =
      0.5 * std::pow(delta / (2.0 * cutoff), 2.0);
  const PrivacyBudget per_run(eps, delta_star);
  RandomSource tuner_rng = root.substream(1u << 21);
  const auto runner = [&](const double& lam,
                          RandomSource& r) -> PtrOutcome<OpsPtrResult> {
    try {
      return PtrOutcome<OpsPtrResult>::released(
          ops_ptr_run(x_train, y_train, lam, eps, delta_star / 2.0,
                      data.x_bound, data.y_bound, r));
    } catch (const InfeasibleError&) {
      return PtrOutcome<OpsPtrResult>::bottom();
    }
  };
  const auto score = [&](const OpsPtrResult& r) {
    return -internal::mean_squared_error(x_valid, y_valid, r.theta);
  };
  const SelectionResult<OpsPtrResult, double> sel = select_hyperparameters(
      lambdas, per_run, cutoff, tau, score, runner, tuner_rng);
  const PrivacyBudget total = tuner_budget(eps, delta_star, cutoff, delta2);
  if (sel.best.is_released()) {
    const OpsPtrResult& r = sel.best.value();
    table.rows.push_back(
        {num_cell(sel.best_phi.value()), num_cell(r.gamma),
         num_cell(total.epsilon),
         num_cell(internal::mean_squared_error(x_test, y_test, r.theta)),
         text_cell("ops_tuned")});
  } else {
    table.rows.push_back({num_cell(0.0), num_cell(0.0),
                          num_cell(total.epsilon),
                          num_cell(internal::refusal_mse(y_test)),
                          text_cell("ops_tuned")});
  }
  return table;
}

// Logistic regression sweep over a lambda grid. Infeasible lambdas are
// refusals; a refused release scores like a coin flip.
inline ResultTable run_glm_experiment(const Settings& s, std::uint64_t seed) {
  const double eps = s.get_double("eps", 6.0);
  const double delta = s.get_double("delta", 1e-6);
  const double r_bound = s.get_double("r_bound", 1.0);
  std::vector<double> default_grid;
  for (double lam = 2.0; lam <= 1024.0; lam *= 2.0) {
    default_grid.push_back(lam);
  }
  const std::vector<double> lambdas = s.get_list("lambdas", default_grid);
  if (!(eps > 0.0) || !(delta > 0.0 && delta < 0.5) || !(r_bound > 0.0)) {
    throw ConfigError("glm: invalid parameters");
  }

  RandomSource root(seed);
  RandomSource data_rng = root.substream(1u << 20);
  const IngestedData data = internal::load_dataset(s, 300, 3, data_rng, true);
  const Eigen::MatrixXd x_train =
      internal::take_rows(data.features, data.train_rows);
  const Eigen::VectorXd y_train =
      internal::take_rows(data.target, data.train_rows);
  const Eigen::MatrixXd x_test =
      internal::take_rows(data.features, data.test_rows);
  const Eigen::VectorXd y_test =
      internal::take_rows(data.target, data.test_rows);

  ResultTable table;
  table.columns = {"lambda", "gamma", "eps", "error_rate"};
  std::uint64_t stream = 0;
  for (double lam : lambdas) {
    RandomSource rng = root.substream(stream++);
    try {
      const GlmPtrResult r =
          glm_ptr_run(x_train, y_train, lam, eps, delta, r_bound, rng);
      table.rows.push_back(
          {num_cell(lam), num_cell(r.gamma), num_cell(r.budget.epsilon),
           num_cell(
               internal::misclassification_rate(x_test, y_test, r.theta))});
    } catch (const InfeasibleError&) {
      table.rows.push_back(
          {num_cell(lam), num_cell(0.0), num_cell(eps), num_cell(0.5)});
    } catch (const std::exception& e) {
      throw std::runtime_error("glm lambda=" + format_double(lam) + ": " +
                               e.what());
    }
  }
  return table;
}

// PATE sweep over the vote noise sigma1. Each grid point runs the full
// pipeline trials times on simulated consensus histograms and reports the
// median private upper bound next to the data-independent Gaussian baseline
// and the declared PTR total.
inline ResultTable run_pate_experiment(const Settings& s, std::uint64_t seed) {
  const std::vector<double> sigma1s =
      s.get_list("sigma1s", {30.0, 60.0, 90.0, 120.0, 150.0});
  const double sigma_s = s.get_double("sigma_s", 15.0);
  const double delta = s.get_double("delta", 1e-5);
  const double eps_prime = s.get_double("eps_prime", 10.0);
  const std::string regime_name = s.get_string("regime", "high");
  const int teachers = s.get_int("teachers", 400);
  const int classes = s.get_int("classes", 3);
  const int queries = s.get_int("queries", 200);
  const int trials = s.get_int("trials", 5);
  if (trials < 1 || queries < 1) {
    throw ConfigError("pate: trials and queries must be positive");
  }
  if (regime_name != "high" && regime_name != "low") {
    throw ConfigError("pate: regime must be high or low");
  }
  const ConsensusRegime regime = regime_name == "high"
                                     ? ConsensusRegime::kHigh
                                     : ConsensusRegime::kLow;

  RandomSource root(seed);
  ResultTable table;
  table.columns = {"sigma1", "method", "eps_total", "regime"};
  std::uint64_t stream = 0;
  for (double sigma1 : sigma1s) {
    const PateConfig cfg =
        pate_config_from_sigma_s(sigma1, sigma_s, eps_prime, delta);
    std::vector<double> bounds;
    for (int t = 0; t < trials; ++t) {
      RandomSource rng = root.substream(stream++);
      const std::vector<VoteHistogram> hists =
          simulate_consensus(teachers, classes, queries, regime, rng);
      bounds.push_back(pate_ptr_run(hists, cfg, rng).eps_sigma1);
    }
    table.rows.push_back({num_cell(sigma1), text_cell("datadep_upper"),
                          num_cell(internal::median_of(bounds)),
                          text_cell(regime_name)});
    table.rows.push_back({num_cell(sigma1), text_cell("gaussian"),
                          num_cell(pate_gaussian_baseline(queries, cfg)),
                          text_cell(regime_name)});
    table.rows.push_back({num_cell(sigma1), text_cell("ptr_total"),
                          num_cell(eps_prime + cfg.eps_hat),
                          text_cell(regime_name)});
  }
  return table;
}

inline ResultTable run_experiment(const std::string& experiment,
                                  const Settings& s, std::uint64_t seed) {
  if (experiment == "vote") {
    return run_vote_experiment(s, seed);
  }
  if (experiment == "linreg") {
    return run_linreg_experiment(s, seed);
  }
  if (experiment == "glm") {
    return run_glm_experiment(s, seed);
  }
  if (experiment == "pate") {
    return run_pate_experiment(s, seed);
  }
  throw ConfigError("unknown experiment: " + experiment);
}

// Command-line front end. Returns the process exit code: 0 on success, 2 for
// configuration and usage problems, 3 for numerical failures inside an
// experiment. Any option other than --config is treated as an override of
// the config key with the same name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"adadp experiment harness"};
  app.require_subcommand(1);
  std::string config_path;
  for (const char* name : {"vote", "linreg", "glm", "pate"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->allow_extras();
    sub->add_option("--config", config_path, "key = value config file");
  }

  std::vector<const char*> argv;
  argv.push_back("adadp");
  for (const std::string& a : args) {
    argv.push_back(a.c_str());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    const std::string experiment = active->get_name();

    std::map<std::string, std::string> overrides;
    const std::vector<std::string> extras = active->remaining();
    for (std::size_t i = 0; i < extras.size(); ++i) {
      std::string token = extras[i];
      if (token.rfind("--", 0) != 0 || token.size() <= 2) {
        throw ConfigError("unexpected argument: " + token);
      }
      token = token.substr(2);
      const std::size_t eq = token.find('=');
      if (eq != std::string::npos) {
        overrides[token.substr(0, eq)] = token.substr(eq + 1);
      } else {
        if (i + 1 >= extras.size()) {
          throw ConfigError("missing value for --" + token);
        }
        overrides[token] = extras[++i];
      }
    }

    const KeyValueConfig file =
        config_path.empty() ? KeyValueConfig{} : parse_config_file(config_path);
    const Settings settings(experiment, file, overrides);
    const std::uint64_t seed = settings.get_u64("seed", 1);
    const OutputFormat format =
        parse_format(settings.get_string("format", "csv"));
    const std::string out_path = settings.get_string("out", "");

    const ResultTable table = run_experiment(experiment, settings, seed);
    if (out_path.empty()) {
      emit_results(table, out, format);
    } else {
      emit_results(table, out_path, format);
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace adadp

#endif  // ADADP_HARNESS_HPP_

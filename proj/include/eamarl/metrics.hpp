#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "eamarl/contract.hpp"

namespace eamarl {

// One row per episode, column set fixed by the scenario. Wall-clock figures
// live beside the table, never inside it: metrics.csv stays byte-identical
// across reruns of the same (config, seed).
struct RunMetrics {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  double wall_seconds = 0.0;
  double seconds_per_1000_episodes = 0.0;
  long total_steps = 0;
  long update_blocks = 0;
  long sample_calls = 0;
  std::vector<long> grad_passes;         // per agent
  double mean_full_life_revisits = -1.0;  // -1 when revisit tracking is off
  long full_life_entries = 0;

  int column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw ContractError("metrics: no column named " + name);
  }
};

struct ColumnStats {
  double mean = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

// Linear-interpolation quantile on a copy of the data.
inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), "quantile: empty data");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

// Mean and interquartile points of every column over the trailing window.
inline std::map<std::string, ColumnStats> evaluate(const RunMetrics& m, std::size_t window) {
  require(window >= 1 && window <= m.rows.size(), "evaluate: window exceeds recorded episodes");
  std::map<std::string, ColumnStats> out;
  const std::size_t start = m.rows.size() - window;
  for (std::size_t c = 0; c < m.columns.size(); ++c) {
    std::vector<double> vals;
    vals.reserve(window);
    double total = 0.0;
    for (std::size_t r = start; r < m.rows.size(); ++r) {
      vals.push_back(m.rows[r][c]);
      total += m.rows[r][c];
    }
    ColumnStats st;
    st.mean = total / static_cast<double>(window);
    st.q25 = quantile(vals, 0.25);
    st.q75 = quantile(vals, 0.75);
    out[m.columns[c]] = st;
  }
  return out;
}

namespace metricsdetail {

// shortest exact round-trip formatting for doubles
inline void print_double(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

}  // namespace metricsdetail

inline void write_metrics_csv(std::ostream& os, const RunMetrics& m) {
  for (std::size_t c = 0; c < m.columns.size(); ++c)
    os << m.columns[c] << (c + 1 == m.columns.size() ? "" : ",");
  os << "\n";
  for (const auto& row : m.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      metricsdetail::print_double(os, row[c]);
      if (c + 1 != row.size()) os << ",";
    }
    os << "\n";
  }
}

inline RunMetrics read_metrics_csv(std::istream& is) {
  RunMetrics m;
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "metrics: empty csv");
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) m.columns.push_back(cell);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(m.columns.size());
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    require(row.size() == m.columns.size(), "metrics: ragged csv row");
    m.rows.push_back(std::move(row));
  }
  return m;
}

inline RunMetrics read_metrics_csv_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "metrics: cannot open " + path);
  return read_metrics_csv(is);
}

// Flat key = value summary: run counters, timing, and the trailing-window
// stats of every column.
inline void write_summary(std::ostream& os, const RunMetrics& m, std::size_t window) {
  os << "episodes = " << m.rows.size() << "\n";
  os << "eval_window = " << window << "\n";
  os << "total_steps = " << m.total_steps << "\n";
  os << "update_blocks = " << m.update_blocks << "\n";
  os << "sample_calls = " << m.sample_calls << "\n";
  for (std::size_t i = 0; i < m.grad_passes.size(); ++i)
    os << "grad_passes_agent_" << i << " = " << m.grad_passes[i] << "\n";
  os << "wall_seconds = ";
  metricsdetail::print_double(os, m.wall_seconds);
  os << "\n";
  os << "seconds_per_1000_episodes = ";
  metricsdetail::print_double(os, m.seconds_per_1000_episodes);
  os << "\n";
  if (m.mean_full_life_revisits >= 0.0) {
    os << "mean_full_life_revisits = ";
    metricsdetail::print_double(os, m.mean_full_life_revisits);
    os << "\n";
    os << "full_life_entries = " << m.full_life_entries << "\n";
  }
  const auto stats = evaluate(m, std::min<std::size_t>(window, m.rows.size()));
  for (const auto& [name, st] : stats) {
    os << "final." << name << ".mean = ";
    metricsdetail::print_double(os, st.mean);
    os << "\n";
    os << "final." << name << ".q25 = ";
    metricsdetail::print_double(os, st.q25);
    os << "\n";
    os << "final." << name << ".q75 = ";
    metricsdetail::print_double(os, st.q75);
    os << "\n";
  }
}

inline std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open " + path);
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r\n");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r\n");
      return s.substr(a, b - a + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

// Writes metrics.csv and summary.txt under dir (which must exist).
inline void emit_metrics(const RunMetrics& m, const std::string& dir, std::size_t window) {
  {
    std::ofstream os(dir + "/metrics.csv");
    require(os.good(), "metrics: cannot write " + dir + "/metrics.csv");
    write_metrics_csv(os, m);
    require(os.good(), "metrics: write failed in " + dir);
  }
  {
    std::ofstream os(dir + "/summary.txt");
    require(os.good(), "metrics: cannot write " + dir + "/summary.txt");
    write_summary(os, m, window);
    require(os.good(), "metrics: write failed in " + dir);
  }
}

}  // namespace eamarl

#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "eamarl/mlp.hpp"

namespace eamarl {

// Versioned flat-text parameter file. Values are written as C99 hexfloats,
// so load(save(p)) reproduces every double bit for bit.
//
//   eamarl-params v1
//   nets <count>
//   net <name> <in> <hidden> <out> <tanh:0|1>
//   W1 <rows> <cols>
//   <row-major hexfloat values, one row per line>
//   b1 <n>
//   ...same for W2 b2 W3 b3
//
inline constexpr const char* kCheckpointMagic = "eamarl-params v1";

namespace detail {

inline void write_values(std::ostream& os, const double* v, std::size_t n) {
  char buf[40];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "%a", v[i]);
    os << buf << (i + 1 == n ? "" : " ");
  }
  os << "\n";
}

inline void write_matrix(std::ostream& os, const char* tag, const Matrix& m) {
  os << tag << " " << m.rows << " " << m.cols << "\n";
  for (std::size_t r = 0; r < m.rows; ++r) write_values(os, m.row(r), m.cols);
}

inline void write_vector(std::ostream& os, const char* tag, const std::vector<double>& v) {
  os << tag << " " << v.size() << "\n";
  write_values(os, v.data(), v.size());
}

inline void read_values(std::istream& is, double* v, std::size_t n) {
  std::string tok;
  for (std::size_t i = 0; i < n; ++i) {
    is >> tok;
    require(is.good() || is.eof(), "checkpoint: truncated value list");
    v[i] = std::strtod(tok.c_str(), nullptr);
  }
}

inline void read_matrix(std::istream& is, const char* tag, Matrix& m) {
  std::string t;
  std::size_t r = 0, c = 0;
  is >> t >> r >> c;
  require(t == tag, "checkpoint: expected tensor tag " + std::string(tag));
  m.resize(r, c);
  read_values(is, m.data.data(), m.size());
}

inline void read_vector(std::istream& is, const char* tag, std::vector<double>& v) {
  std::string t;
  std::size_t n = 0;
  is >> t >> n;
  require(t == tag, "checkpoint: expected vector tag " + std::string(tag));
  v.assign(n, 0.0);
  read_values(is, v.data(), n);
}

}  // namespace detail

inline void save_params(std::ostream& os,
                        const std::vector<std::pair<std::string, const MlpParams*>>& nets) {
  os << kCheckpointMagic << "\n";
  os << "nets " << nets.size() << "\n";
  for (const auto& [name, p] : nets) {
    os << "net " << name << " " << p->in_dim() << " " << p->hidden_dim() << " " << p->out_dim()
       << " " << (p->tanh_output ? 1 : 0) << "\n";
    detail::write_matrix(os, "W1", p->W1);
    detail::write_vector(os, "b1", p->b1);
    detail::write_matrix(os, "W2", p->W2);
    detail::write_vector(os, "b2", p->b2);
    detail::write_matrix(os, "W3", p->W3);
    detail::write_vector(os, "b3", p->b3);
  }
}

// Returns the nets in file order.
inline std::vector<std::pair<std::string, MlpParams>> load_params(std::istream& is) {
  std::string line;
  std::getline(is, line);
  require(line == kCheckpointMagic, "checkpoint: bad magic/version line");
  std::string tok;
  std::size_t count = 0;
  is >> tok >> count;
  require(tok == "nets", "checkpoint: expected nets count");
  std::vector<std::pair<std::string, MlpParams>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    std::size_t in = 0, hidden = 0, od = 0;
    int tanh_flag = 0;
    is >> tok >> name >> in >> hidden >> od >> tanh_flag;
    require(tok == "net", "checkpoint: expected net header");
    MlpParams p;
    p.tanh_output = tanh_flag != 0;
    detail::read_matrix(is, "W1", p.W1);
    detail::read_vector(is, "b1", p.b1);
    detail::read_matrix(is, "W2", p.W2);
    detail::read_vector(is, "b2", p.b2);
    detail::read_matrix(is, "W3", p.W3);
    detail::read_vector(is, "b3", p.b3);
    require(p.W1.rows == hidden && p.W1.cols == in && p.W3.rows == od,
            "checkpoint: header/tensor shape mismatch for " + name);
    out.emplace_back(std::move(name), std::move(p));
  }
  return out;
}

inline void save_params_file(const std::string& path,
                             const std::vector<std::pair<std::string, const MlpParams*>>& nets) {
  std::ofstream os(path);
  require(os.good(), "checkpoint: cannot open for write: " + path);
  save_params(os, nets);
  require(os.good(), "checkpoint: write failed: " + path);
}

inline std::vector<std::pair<std::string, MlpParams>> load_params_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "checkpoint: cannot open for read: " + path);
  return load_params(is);
}

}  // namespace eamarl

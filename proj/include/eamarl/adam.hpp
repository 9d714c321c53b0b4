#pragma once

#include <cmath>
#include <cstdint>

#include "eamarl/mlp.hpp"

namespace eamarl {

// Adam moments for one network. m/v mirror the parameter shapes.
struct AdamState {
  Gradients m, v;
  std::int64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline AdamState make_adam(const MlpParams& p, double lr) {
  AdamState s;
  s.m = zeros_like(p);
  s.v = zeros_like(p);
  s.lr = lr;
  return s;
}

namespace detail {

inline void adam_tensor(double* p, const double* g, double* m, double* v, std::size_t n,
                        const AdamState& s, double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace detail

// Standard Adam with bias correction. Refuses non-finite gradients so a
// blown-up update can never poison the parameters.
inline void adam_step(MlpParams& p, const Gradients& g, AdamState& s) {
  require(p.W1.same_shape(g.W1) && p.W2.same_shape(g.W2) && p.W3.same_shape(g.W3) &&
              p.b1.size() == g.b1.size() && p.b2.size() == g.b2.size() &&
              p.b3.size() == g.b3.size(),
          "adam_step: gradient shapes do not match params");
  require(all_finite(g), "adam_step: non-finite gradient entries");
  s.t += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  detail::adam_tensor(p.W1.data.data(), g.W1.data.data(), s.m.W1.data.data(),
                      s.v.W1.data.data(), p.W1.size(), s, bc1, bc2);
  detail::adam_tensor(p.b1.data(), g.b1.data(), s.m.b1.data(), s.v.b1.data(), p.b1.size(), s,
                      bc1, bc2);
  detail::adam_tensor(p.W2.data.data(), g.W2.data.data(), s.m.W2.data.data(),
                      s.v.W2.data.data(), p.W2.size(), s, bc1, bc2);
  detail::adam_tensor(p.b2.data(), g.b2.data(), s.m.b2.data(), s.v.b2.data(), p.b2.size(), s,
                      bc1, bc2);
  detail::adam_tensor(p.W3.data.data(), g.W3.data.data(), s.m.W3.data.data(),
                      s.v.W3.data.data(), p.W3.size(), s, bc1, bc2);
  detail::adam_tensor(p.b3.data(), g.b3.data(), s.m.b3.data(), s.v.b3.data(), p.b3.size(), s,
                      bc1, bc2);
}

inline double grad_global_norm(const Gradients& g) { return std::sqrt(sum_squares(g)); }

// Scales the whole gradient so its global L2 norm is at most max_norm.
inline void clip_global_norm(Gradients& g, double max_norm) {
  const double norm = grad_global_norm(g);
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  auto scale_mat = [scale](Matrix& m) {
    for (double& v : m.data) v *= scale;
  };
  auto scale_vec = [scale](std::vector<double>& v) {
    for (double& x : v) x *= scale;
  };
  scale_mat(g.W1);
  scale_mat(g.W2);
  scale_mat(g.W3);
  scale_vec(g.b1);
  scale_vec(g.b2);
  scale_vec(g.b3);
}

// target <- alpha * source + (1 - alpha) * target, elementwise.
inline void soft_update(MlpParams& target, const MlpParams& source, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, "soft_update: alpha outside [0,1]");
  require(target.W1.same_shape(source.W1) && target.W2.same_shape(source.W2) &&
              target.W3.same_shape(source.W3) && target.b1.size() == source.b1.size() &&
              target.b2.size() == source.b2.size() && target.b3.size() == source.b3.size(),
          "soft_update: shape mismatch");
  auto mix_mat = [alpha](Matrix& t, const Matrix& s) {
    for (std::size_t i = 0; i < t.size(); ++i)
      t.data[i] = alpha * s.data[i] + (1.0 - alpha) * t.data[i];
  };
  auto mix_vec = [alpha](std::vector<double>& t, const std::vector<double>& s) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = alpha * s[i] + (1.0 - alpha) * t[i];
  };
  mix_mat(target.W1, source.W1);
  mix_mat(target.W2, source.W2);
  mix_mat(target.W3, source.W3);
  mix_vec(target.b1, source.b1);
  mix_vec(target.b2, source.b2);
  mix_vec(target.b3, source.b3);
}

}  // namespace eamarl

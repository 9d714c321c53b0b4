#pragma once

#include <functional>
#include <vector>

#include "eamarl/mlp.hpp"

namespace eamarl {

// Test-support oracle: central finite differences of a scalar function of
// the parameters. Deliberately knows nothing about mlp_backward; it only
// evaluates f, so it stays an independent check of every analytic gradient.

namespace detail {

inline std::vector<double*> param_entries(MlpParams& p) {
  std::vector<double*> out;
  out.reserve(p.W1.size() + p.b1.size() + p.W2.size() + p.b2.size() + p.W3.size() + p.b3.size());
  for (double& v : p.W1.data) out.push_back(&v);
  for (double& v : p.b1) out.push_back(&v);
  for (double& v : p.W2.data) out.push_back(&v);
  for (double& v : p.b2) out.push_back(&v);
  for (double& v : p.W3.data) out.push_back(&v);
  for (double& v : p.b3) out.push_back(&v);
  return out;
}

inline std::vector<double*> grad_entries(Gradients& g) {
  std::vector<double*> out;
  for (double& v : g.W1.data) out.push_back(&v);
  for (double& v : g.b1) out.push_back(&v);
  for (double& v : g.W2.data) out.push_back(&v);
  for (double& v : g.b2) out.push_back(&v);
  for (double& v : g.W3.data) out.push_back(&v);
  for (double& v : g.b3) out.push_back(&v);
  return out;
}

}  // namespace detail

// (f(p + h e_k) - f(p - h e_k)) / 2h, entry by entry.
inline Gradients finite_diff_grad(const std::function<double(const MlpParams&)>& f,
                                  MlpParams params, double step) {
  require(step > 0.0, "finite_diff_grad: step must be positive");
  Gradients g = zeros_like(params);
  std::vector<double*> pv = detail::param_entries(params);
  std::vector<double*> gv = detail::grad_entries(g);
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double saved = *pv[i];
    *pv[i] = saved + step;
    const double hi = f(params);
    *pv[i] = saved - step;
    const double lo = f(params);
    *pv[i] = saved;
    *gv[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

}  // namespace eamarl

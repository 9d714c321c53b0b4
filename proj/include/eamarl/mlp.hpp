#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "eamarl/matrix.hpp"
#include "eamarl/rng.hpp"

namespace eamarl {

// Two-hidden-layer perceptron, ReLU activations, optional tanh squashing on
// the output row (actors squash, critics are linear scalar heads).
// Weights are stored [out x in] so every product in forward/backward walks
// rows contiguously.
struct MlpParams {
  Matrix W1, W2, W3;
  std::vector<double> b1, b2, b3;
  bool tanh_output = false;

  std::size_t in_dim() const { return W1.cols; }
  std::size_t hidden_dim() const { return W1.rows; }
  std::size_t out_dim() const { return W3.rows; }
};

// One gradient tensor per parameter tensor, same shapes as MlpParams.
struct Gradients {
  Matrix W1, W2, W3;
  std::vector<double> b1, b2, b3;
};

inline Gradients zeros_like(const MlpParams& p) {
  Gradients g;
  g.W1.resize(p.W1.rows, p.W1.cols);
  g.W2.resize(p.W2.rows, p.W2.cols);
  g.W3.resize(p.W3.rows, p.W3.cols);
  g.b1.assign(p.b1.size(), 0.0);
  g.b2.assign(p.b2.size(), 0.0);
  g.b3.assign(p.b3.size(), 0.0);
  return g;
}

inline void fill_uniform(Matrix& m, double lo, double hi, Rng& rng) {
  for (double& v : m.data) v = rng.uniform(lo, hi);
}

// Fan-in scaled uniform init, zero biases.
inline MlpParams init_mlp(std::size_t in_dim, std::size_t hidden, std::size_t out_dim,
                          bool tanh_output, Rng& rng) {
  MlpParams p;
  p.tanh_output = tanh_output;
  p.W1.resize(hidden, in_dim);
  p.W2.resize(hidden, hidden);
  p.W3.resize(out_dim, hidden);
  p.b1.assign(hidden, 0.0);
  p.b2.assign(hidden, 0.0);
  p.b3.assign(out_dim, 0.0);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  fill_uniform(p.W1, -s1, s1, rng);
  fill_uniform(p.W2, -s2, s2, rng);
  fill_uniform(p.W3, -s2, s2, rng);
  return p;
}

// Activation record kept for the backward pass: the input and the
// post-nonlinearity outputs of each layer.
struct ForwardCache {
  Matrix input;  // [batch x d_in]
  Matrix a1;     // relu(L1) [batch x h]
  Matrix a2;     // relu(L2) [batch x h]
  Matrix out;    // L3 output, tanh-squashed when the actor flag is set
};

inline const Matrix& mlp_forward(const MlpParams& p, const Matrix& input, ForwardCache& cache) {
  require(input.cols == p.in_dim(), "mlp_forward: input width != d_in");
  cache.input = input;
  mul_nt(input, p.W1, cache.a1, &p.b1);
  for (double& v : cache.a1.data) v = v > 0.0 ? v : 0.0;
  mul_nt(cache.a1, p.W2, cache.a2, &p.b2);
  for (double& v : cache.a2.data) v = v > 0.0 ? v : 0.0;
  mul_nt(cache.a2, p.W3, cache.out, &p.b3);
  if (p.tanh_output)
    for (double& v : cache.out.data) v = std::tanh(v);
  return cache.out;
}

inline Matrix mlp_forward(const MlpParams& p, const Matrix& input) {
  ForwardCache cache;
  mlp_forward(p, input, cache);
  return std::move(cache.out);
}

// Reverse accumulation through L3 ∘ relu ∘ L2 ∘ relu ∘ L1 (and the output
// tanh when present). Returns parameter gradients and the input cotangent.
inline Gradients mlp_backward(const MlpParams& p, const ForwardCache& cache,
                              const Matrix& output_grad, Matrix& input_grad) {
  require(cache.input.cols == p.in_dim() && cache.a1.cols == p.hidden_dim() &&
              cache.a2.cols == p.hidden_dim() && cache.out.cols == p.out_dim() &&
              cache.input.rows == cache.out.rows,
          "mlp_backward: cache does not match params");
  require(output_grad.rows == cache.out.rows && output_grad.cols == cache.out.cols,
          "mlp_backward: output_grad shape mismatch");

  Gradients g;
  Matrix dz3 = output_grad;
  if (p.tanh_output) {
    for (std::size_t i = 0; i < dz3.size(); ++i) {
      const double y = cache.out.data[i];
      dz3.data[i] *= (1.0 - y * y);
    }
  }
  mul_tn(dz3, cache.a2, g.W3);
  col_sums(dz3, g.b3);

  Matrix da2;
  mul_nn(dz3, p.W3, da2);
  for (std::size_t i = 0; i < da2.size(); ++i)
    if (cache.a2.data[i] <= 0.0) da2.data[i] = 0.0;
  mul_tn(da2, cache.a1, g.W2);
  col_sums(da2, g.b2);

  Matrix da1;
  mul_nn(da2, p.W2, da1);
  for (std::size_t i = 0; i < da1.size(); ++i)
    if (cache.a1.data[i] <= 0.0) da1.data[i] = 0.0;
  mul_tn(da1, cache.input, g.W1);
  col_sums(da1, g.b1);

  mul_nn(da1, p.W1, input_grad);
  return g;
}

inline bool all_finite(const Gradients& g) {
  return all_finite(g.W1) && all_finite(g.W2) && all_finite(g.W3) && all_finite(g.b1) &&
         all_finite(g.b2) && all_finite(g.b3);
}

inline double sum_squares(const Gradients& g) {
  return sum_squares(g.W1) + sum_squares(g.W2) + sum_squares(g.W3) + sum_squares(g.b1) +
         sum_squares(g.b2) + sum_squares(g.b3);
}

}  // namespace eamarl

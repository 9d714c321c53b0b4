#include <cmath>
#include <sstream>
#include <vector>

#include "catch_amalgamated.hpp"
#include "eamarl/adam.hpp"
#include "eamarl/checkpoint.hpp"
#include "eamarl/gradcheck.hpp"
#include "eamarl/matrix.hpp"
#include "eamarl/mlp.hpp"

using namespace eamarl;

namespace {

// Layer-by-layer scalar evaluation with plain index loops: the independent
// oracle the fast forward path is checked against.
std::vector<double> oracle_forward(const MlpParams& p, const std::vector<double>& x) {
  auto layer = [](const Matrix& w, const std::vector<double>& b, const std::vector<double>& in) {
    std::vector<double> out(w.rows, 0.0);
    for (std::size_t r = 0; r < w.rows; ++r) {
      double s = b[r];
      for (std::size_t c = 0; c < w.cols; ++c) s += w(r, c) * in[c];
      out[r] = s;
    }
    return out;
  };
  std::vector<double> h1 = layer(p.W1, p.b1, x);
  for (double& v : h1) v = v > 0.0 ? v : 0.0;
  std::vector<double> h2 = layer(p.W2, p.b2, h1);
  for (double& v : h2) v = v > 0.0 ? v : 0.0;
  std::vector<double> out = layer(p.W3, p.b3, h2);
  if (p.tanh_output)
    for (double& v : out) v = std::tanh(v);
  return out;
}

MlpParams tiny_net(std::size_t in, std::size_t hidden, std::size_t out, bool tanh_out, Rng& rng) {
  return init_mlp(in, hidden, out, tanh_out, rng);
}

// pre-activation margins, so finite differences never straddle a relu kink
bool near_relu_kink(const MlpParams& p, const Matrix& x, double margin) {
  for (std::size_t r = 0; r < x.rows; ++r) {
    std::vector<double> in(x.row(r), x.row(r) + x.cols);
    auto layer = [](const Matrix& w, const std::vector<double>& b,
                    const std::vector<double>& v) {
      std::vector<double> out(w.rows, 0.0);
      for (std::size_t i = 0; i < w.rows; ++i) {
        double s = b[i];
        for (std::size_t c = 0; c < w.cols; ++c) s += w(i, c) * v[c];
        out[i] = s;
      }
      return out;
    };
    std::vector<double> z1 = layer(p.W1, p.b1, in);
    for (double v : z1)
      if (std::abs(v) < margin) return true;
    for (double& v : z1) v = v > 0.0 ? v : 0.0;
    std::vector<double> z2 = layer(p.W2, p.b2, z1);
    for (double v : z2)
      if (std::abs(v) < margin) return true;
  }
  return false;
}

bool grad_close(double analytic, double numeric) {
  const double tol = std::max(1e-4 * std::max(std::abs(analytic), std::abs(numeric)), 1e-7);
  return std::abs(analytic - numeric) <= tol;
}

void check_grads_match(const Gradients& a, const Gradients& n) {
  auto check_mat = [](const Matrix& x, const Matrix& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      INFO("entry " << i << " analytic " << x.data[i] << " numeric " << y.data[i]);
      REQUIRE(grad_close(x.data[i], y.data[i]));
    }
  };
  auto check_vec = [](const std::vector<double>& x, const std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      INFO("entry " << i << " analytic " << x[i] << " numeric " << y[i]);
      REQUIRE(grad_close(x[i], y[i]));
    }
  };
  check_mat(a.W1, n.W1);
  check_vec(a.b1, n.b1);
  check_mat(a.W2, n.W2);
  check_vec(a.b2, n.b2);
  check_mat(a.W3, n.W3);
  check_vec(a.b3, n.b3);
}

}  // namespace

TEST_CASE("matrix kernels match naive index loops") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform_int(0, 6));
    const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_int(0, 20));
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(0, 6));
    Matrix a(m, k), bt(n, k), b(k, n), at(k, m);
    fill_uniform(a, -2.0, 2.0, rng);
    fill_uniform(bt, -2.0, 2.0, rng);
    fill_uniform(b, -2.0, 2.0, rng);
    fill_uniform(at, -2.0, 2.0, rng);

    Matrix nt;
    mul_nt(a, bt, nt);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < k; ++t) s += a(i, t) * bt(j, t);
        REQUIRE_THAT(nt(i, j), Catch::Matchers::WithinAbs(s, 1e-12));
      }

    Matrix nn;
    mul_nn(a, b, nn);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < k; ++t) s += a(i, t) * b(t, j);
        REQUIRE_THAT(nn(i, j), Catch::Matchers::WithinAbs(s, 1e-12));
      }

    Matrix tn;
    mul_tn(at, b, tn);  // [k x m]^T [k x n]
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < k; ++t) s += at(t, i) * b(t, j);
        REQUIRE_THAT(tn(i, j), Catch::Matchers::WithinAbs(s, 1e-12));
      }
  }
}

TEST_CASE("mlp_forward zero net maps anything to zero") {
  MlpParams p;
  p.W1.resize(4, 3);
  p.W2.resize(4, 4);
  p.W3.resize(2, 4);
  p.b1.assign(4, 0.0);
  p.b2.assign(4, 0.0);
  p.b3.assign(2, 0.0);
  Matrix x(5, 3);
  Rng rng(3);
  fill_uniform(x, -10.0, 10.0, rng);
  const Matrix y = mlp_forward(p, x);
  for (double v : y.data) REQUIRE(v == 0.0);
}

TEST_CASE("mlp_forward 1x1 identity chain passes positive input through") {
  MlpParams p;
  p.W1 = Matrix(1, 1, 1.0);
  p.W2 = Matrix(1, 1, 1.0);
  p.W3 = Matrix(1, 1, 1.0);
  p.b1.assign(1, 0.0);
  p.b2.assign(1, 0.0);
  p.b3.assign(1, 0.0);
  Matrix x(1, 1, 2.0);
  REQUIRE(mlp_forward(p, x)(0, 0) == 2.0);
}

TEST_CASE("mlp_forward matches the scalar oracle on random 4-unit nets") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const bool tanh_out = trial % 2 == 0;
    MlpParams p = tiny_net(3, 4, 2, tanh_out, rng);
    Matrix x(1, 3);
    fill_uniform(x, -1.5, 1.5, rng);
    const Matrix y = mlp_forward(p, x);
    const std::vector<double> want = oracle_forward(p, {x(0, 0), x(0, 1), x(0, 2)});
    REQUIRE(y.cols == want.size());
    for (std::size_t c = 0; c < want.size(); ++c)
      REQUIRE_THAT(y(0, c), Catch::Matchers::WithinAbs(want[c], 1e-12));
  }
}

TEST_CASE("mlp_forward rejects shape mismatch") {
  Rng rng(1);
  MlpParams p = tiny_net(3, 4, 2, false, rng);
  Matrix x(2, 5);
  REQUIRE_THROWS_AS(mlp_forward(p, x), ContractError);
}

TEST_CASE("mlp_forward with strictly positive relu inputs is affine") {
  // positive weights and biases keep every pre-activation in the open cone
  Rng rng(5);
  MlpParams p = tiny_net(3, 4, 2, false, rng);
  for (double& v : p.W1.data) v = std::abs(v) + 0.01;
  for (double& v : p.W2.data) v = std::abs(v) + 0.01;
  for (double& v : p.b1) v = 0.5;
  for (double& v : p.b2) v = 0.5;
  Matrix x1(1, 3), x2(1, 3);
  for (std::size_t c = 0; c < 3; ++c) {
    x1(0, c) = 0.2 + 0.1 * static_cast<double>(c);
    x2(0, c) = 0.7 - 0.15 * static_cast<double>(c);
  }
  const double alpha = 0.3;
  Matrix xm(1, 3);
  for (std::size_t c = 0; c < 3; ++c) xm(0, c) = alpha * x1(0, c) + (1 - alpha) * x2(0, c);
  const Matrix y1 = mlp_forward(p, x1);
  const Matrix y2 = mlp_forward(p, x2);
  const Matrix ym = mlp_forward(p, xm);
  for (std::size_t c = 0; c < 2; ++c)
    REQUIRE_THAT(ym(0, c),
                 Catch::Matchers::WithinAbs(alpha * y1(0, c) + (1 - alpha) * y2(0, c), 1e-12));
}

TEST_CASE("mlp_backward zero cotangent gives zero gradients") {
  Rng rng(17);
  MlpParams p = tiny_net(3, 4, 2, true, rng);
  Matrix x(4, 3);
  fill_uniform(x, -1.0, 1.0, rng);
  ForwardCache cache;
  mlp_forward(p, x, cache);
  Matrix dy(4, 2, 0.0);
  Matrix dx;
  const Gradients g = mlp_backward(p, cache, dy, dx);
  REQUIRE(sum_squares(g) == 0.0);
  REQUIRE(sum_squares(dx) == 0.0);
}

TEST_CASE("mlp_backward single linear unit recovers the product rule") {
  MlpParams p;
  p.W1 = Matrix(1, 1, 1.5);  // the weight under test
  p.W2 = Matrix(1, 1, 1.0);
  p.W3 = Matrix(1, 1, 1.0);
  p.b1.assign(1, 0.0);
  p.b2.assign(1, 0.0);
  p.b3.assign(1, 0.0);
  Matrix x(1, 1, 2.0);
  ForwardCache cache;
  mlp_forward(p, x, cache);
  Matrix dy(1, 1, 1.0);
  Matrix dx;
  const Gradients g = mlp_backward(p, cache, dy, dx);
  REQUIRE(g.W1(0, 0) == 2.0);  // dy/dw = x
  REQUIRE(dx(0, 0) == 1.5);    // dy/dx = w
}

TEST_CASE("mlp_backward rejects a cache from another net") {
  Rng rng(19);
  MlpParams p = tiny_net(3, 4, 2, false, rng);
  MlpParams other = tiny_net(5, 6, 2, false, rng);
  Matrix x(2, 5);
  fill_uniform(x, -1.0, 1.0, rng);
  ForwardCache cache;
  mlp_forward(other, x, cache);
  Matrix dy(2, 2, 1.0);
  Matrix dx;
  REQUIRE_THROWS_AS(mlp_backward(p, cache, dy, dx), ContractError);
}

TEST_CASE("gradient correctness: 100 random tiny nets vs central differences") {
  Rng rng(23);
  int done = 0;
  while (done < 100) {
    const std::size_t in = 1 + static_cast<std::size_t>(rng.uniform_int(0, 4));
    const std::size_t hidden = 2 + static_cast<std::size_t>(rng.uniform_int(0, 6));
    const std::size_t out = 1 + static_cast<std::size_t>(rng.uniform_int(0, 2));
    const bool tanh_out = rng.uniform_int(0, 1) == 1;
    MlpParams p = tiny_net(in, hidden, out, tanh_out, rng);
    Matrix x(3, in);
    fill_uniform(x, -1.5, 1.5, rng);
    if (near_relu_kink(p, x, 1e-3)) continue;  // keep the difference quotient valid
    Matrix target(3, out);
    fill_uniform(target, -1.0, 1.0, rng);

    // loss = mean squared error against a fixed target
    auto loss = [&](const MlpParams& q) {
      const Matrix y = mlp_forward(q, x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y.data[i] - target.data[i];
        s += d * d;
      }
      return s / static_cast<double>(y.rows);
    };

    ForwardCache cache;
    const Matrix& y = mlp_forward(p, x, cache);
    Matrix dy(y.rows, y.cols);
    for (std::size_t i = 0; i < y.size(); ++i)
      dy.data[i] = 2.0 * (y.data[i] - target.data[i]) / static_cast<double>(y.rows);
    Matrix dx;
    const Gradients analytic = mlp_backward(p, cache, dy, dx);
    const Gradients numeric = finite_diff_grad(loss, p, 1e-5);
    check_grads_match(analytic, numeric);
    ++done;
  }
  REQUIRE(done == 100);
}

TEST_CASE("finite_diff_grad knows the derivative of a square") {
  MlpParams p;
  p.W1 = Matrix(1, 1, 3.0);
  p.W2 = Matrix(1, 1, 0.0);
  p.W3 = Matrix(1, 1, 0.0);
  p.b1.assign(1, 0.0);
  p.b2.assign(1, 0.0);
  p.b3.assign(1, 0.0);
  auto f = [](const MlpParams& q) { return q.W1(0, 0) * q.W1(0, 0); };
  const Gradients g = finite_diff_grad(f, p, 1e-5);
  REQUIRE_THAT(g.W1(0, 0), Catch::Matchers::WithinAbs(6.0, 1e-8));

  auto constant = [](const MlpParams&) { return 4.2; };
  const Gradients gc = finite_diff_grad(constant, p, 1e-5);
  REQUIRE(sum_squares(gc) == 0.0);

  REQUIRE_THROWS_AS(finite_diff_grad(f, p, 0.0), ContractError);
}

TEST_CASE("adam_step zero gradient is a parameter no-op for all t") {
  Rng rng(29);
  MlpParams p = tiny_net(2, 3, 1, false, rng);
  const MlpParams before = p;
  AdamState s = make_adam(p, 1e-3);
  const Gradients zero = zeros_like(p);
  for (int t = 1; t <= 5; ++t) {
    adam_step(p, zero, s);
    REQUIRE(s.t == t);
    REQUIRE(p.W1.data == before.W1.data);
    REQUIRE(p.W2.data == before.W2.data);
    REQUIRE(p.W3.data == before.W3.data);
    REQUIRE(p.b1 == before.b1);
  }
}

TEST_CASE("adam_step single step from zero with unit gradient") {
  MlpParams p;
  p.W1 = Matrix(1, 1, 0.0);
  p.W2 = Matrix(1, 1, 0.0);
  p.W3 = Matrix(1, 1, 0.0);
  p.b1.assign(1, 0.0);
  p.b2.assign(1, 0.0);
  p.b3.assign(1, 0.0);
  AdamState s = make_adam(p, 1e-3);
  Gradients g = zeros_like(p);
  g.W1(0, 0) = 1.0;
  adam_step(p, g, s);
  // bias correction makes mhat = vhat = 1, so the step is -lr / (1 + eps)
  REQUIRE_THAT(p.W1(0, 0), Catch::Matchers::WithinAbs(-0.0009999999900000001, 1e-15));
  REQUIRE(s.t == 1);
}

TEST_CASE("adam_step rejects non-finite gradients and leaves params alone") {
  Rng rng(31);
  MlpParams p = tiny_net(2, 3, 1, false, rng);
  const MlpParams before = p;
  AdamState s = make_adam(p, 1e-3);
  Gradients g = zeros_like(p);
  g.W2(1, 1) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(adam_step(p, g, s), ContractError);
  REQUIRE(p.W2.data == before.W2.data);
  REQUIRE(s.t == 0);
}

TEST_CASE("adam runs are bit-identical under identical inputs") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    MlpParams p = tiny_net(3, 4, 2, false, rng);
    AdamState s = make_adam(p, 1e-3);
    for (int step = 0; step < 10; ++step) {
      Gradients g = zeros_like(p);
      Rng grng(seed + 100 + step);
      fill_uniform(g.W1, -1.0, 1.0, grng);
      fill_uniform(g.W2, -1.0, 1.0, grng);
      adam_step(p, g, s);
    }
    return p;
  };
  const MlpParams a = run(42), b = run(42);
  REQUIRE(a.W1.data == b.W1.data);
  REQUIRE(a.W2.data == b.W2.data);
  REQUIRE(a.W3.data == b.W3.data);
}

TEST_CASE("soft_update endpoints and contraction") {
  Rng rng(37);
  MlpParams source = tiny_net(2, 3, 1, false, rng);
  MlpParams target = tiny_net(2, 3, 1, false, rng);

  SECTION("alpha 1 copies the source") {
    soft_update(target, source, 1.0);
    REQUIRE(target.W1.data == source.W1.data);
    REQUIRE(target.W3.data == source.W3.data);
  }
  SECTION("alpha 0 leaves the target") {
    const MlpParams before = target;
    soft_update(target, source, 0.0);
    REQUIRE(target.W1.data == before.W1.data);
  }
  SECTION("alpha 0.01 convex combination") {
    MlpParams t;
    t = source;
    t.W1.fill(0.0);
    t.W2 = source.W2;
    t.W3 = source.W3;
    t.b1 = source.b1;
    t.b2 = source.b2;
    t.b3 = source.b3;
    MlpParams src = t;
    src.W1.fill(1.0);
    soft_update(t, src, 0.01);
    for (double v : t.W1.data) REQUIRE_THAT(v, Catch::Matchers::WithinAbs(0.01, 1e-15));
  }
  SECTION("elementwise contraction by 1 - alpha") {
    const double alpha = 0.25;
    MlpParams t0 = target;
    soft_update(target, source, alpha);
    for (std::size_t i = 0; i < target.W1.size(); ++i) {
      const double gap_before = t0.W1.data[i] - source.W1.data[i];
      const double gap_after = target.W1.data[i] - source.W1.data[i];
      REQUIRE_THAT(gap_after, Catch::Matchers::WithinAbs((1.0 - alpha) * gap_before, 1e-12));
    }
  }
  SECTION("alpha outside [0,1] is refused") {
    REQUIRE_THROWS_AS(soft_update(target, source, 1.5), ContractError);
  }
}

TEST_CASE("checkpoint round-trips bit for bit") {
  Rng rng(41);
  MlpParams actor = tiny_net(5, 8, 2, true, rng);
  MlpParams critic = tiny_net(9, 8, 1, false, rng);
  // exercise awkward values
  actor.W1(0, 0) = -0.0;
  actor.W1(0, 1) = 1e-308;
  actor.W1(0, 2) = 12345678.987654321;

  std::stringstream ss;
  save_params(ss, {{"a.actor", &actor}, {"a.critic", &critic}});
  auto loaded = load_params(ss);
  REQUIRE(loaded.size() == 2);
  REQUIRE(loaded[0].first == "a.actor");
  REQUIRE(loaded[0].second.tanh_output);
  REQUIRE(loaded[0].second.W1.data == actor.W1.data);
  REQUIRE(loaded[0].second.b3 == actor.b3);
  REQUIRE_FALSE(loaded[1].second.tanh_output);
  REQUIRE(loaded[1].second.W2.data == critic.W2.data);
}

TEST_CASE("init determinism: same seed, same bits") {
  Rng a(123), b(123);
  const MlpParams pa = init_mlp(7, 16, 2, true, a);
  const MlpParams pb = init_mlp(7, 16, 2, true, b);
  REQUIRE(pa.W1.data == pb.W1.data);
  REQUIRE(pa.W2.data == pb.W2.data);
  REQUIRE(pa.W3.data == pb.W3.data);
  Matrix x(4, 7);
  Rng c(9);
  fill_uniform(x, -1.0, 1.0, c);
  REQUIRE(mlp_forward(pa, x).data == mlp_forward(pb, x).data);
}

TEST_CASE("weight init stays in the fan-in bound with zero biases") {
  Rng rng(47);
  const MlpParams p = init_mlp(16, 8, 2, false, rng);
  const double bound1 = 1.0 / std::sqrt(16.0);
  for (double v : p.W1.data) REQUIRE(std::abs(v) <= bound1);
  for (double v : p.b1) REQUIRE(v == 0.0);
  for (double v : p.b3) REQUIRE(v == 0.0);
}

#pragma once

#include <cmath>
#include <cstdio>
#include <vector>

#include "eamarl/adam.hpp"
#include "eamarl/env.hpp"
#include "eamarl/mlp.hpp"
#include "eamarl/replay.hpp"

namespace eamarl {

enum class Algo { maddpg, ddpg };

// Online and target networks plus optimizer state for one agent.
struct AgentNets {
  MlpParams actor, critic, target_actor, target_critic;
  AdamState actor_opt, critic_opt;
};

struct AgentLearner {
  AgentNets nets;
  Algo algo = Algo::maddpg;
  bool ea_enabled = true;  // whether the extra permuted passes update this agent
};

struct LearnerConfig {
  double gamma = 0.95;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double soft_alpha = 0.01;
  double grad_clip = 0.5;  // global-norm bound per network per update; <=0 disables
  int ea_times = 3;
  bool exclude_identity = true;
  bool mask_on_done = true;  // mask the bootstrap term at episode truncation
};

// Critic input width: the joint (o, a) for MADDPG, own (o_i, a_i) for DDPG.
inline int critic_input_dim(const SlotLayout& lay, int i, Algo algo) {
  return algo == Algo::maddpg ? lay.obs_total + lay.act_total : lay.obs_dim[i] + lay.act_dim[i];
}

inline AgentLearner make_agent_learner(const SlotLayout& lay, int i, int hidden, Algo algo,
                                       const LearnerConfig& cfg, Rng& rng) {
  AgentLearner l;
  l.algo = algo;
  l.nets.actor = init_mlp(lay.obs_dim[i], hidden, lay.act_dim[i], /*tanh_output=*/true, rng);
  l.nets.critic = init_mlp(critic_input_dim(lay, i, algo), hidden, 1, /*tanh_output=*/false, rng);
  l.nets.target_actor = l.nets.actor;
  l.nets.target_critic = l.nets.critic;
  l.nets.actor_opt = make_adam(l.nets.actor, cfg.lr_actor);
  l.nets.critic_opt = make_adam(l.nets.critic, cfg.lr_critic);
  return l;
}

// a_i = clamp(actor(o_i) + N(0, noise^2), [-1,1]^2), drawn in slot order.
inline std::vector<Vec2> select_actions(const std::vector<AgentLearner>& learners,
                                        const JointObservation& obs, double noise_scale,
                                        Rng& rng) {
  require(learners.size() == obs.size(), "select_actions: observation count mismatch");
  std::vector<Vec2> actions(learners.size());
  Matrix row;
  for (std::size_t i = 0; i < learners.size(); ++i) {
    row.resize(1, obs[i].size());
    std::copy(obs[i].begin(), obs[i].end(), row.data.begin());
    const Matrix a = mlp_forward(learners[i].nets.actor, row);
    double ax = a(0, 0), ay = a(0, 1);
    if (noise_scale > 0.0) {
      ax += rng.normal(0.0, noise_scale);
      ay += rng.normal(0.0, noise_scale);
    }
    actions[i] = Vec2{std::clamp(ax, -1.0, 1.0), std::clamp(ay, -1.0, 1.0)};
  }
  return actions;
}

namespace learndetail {

// [o_1..o_N, a_1..a_N] stacked row-wise over the batch.
inline Matrix concat_slots(const std::vector<Matrix>& obs, const std::vector<Matrix>& acts) {
  const std::size_t rows = obs.empty() ? 0 : obs[0].rows;
  std::size_t total = 0;
  for (const auto& m : obs) total += m.cols;
  for (const auto& m : acts) total += m.cols;
  Matrix out(rows, total);
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.row(r);
    for (const auto& m : obs) {
      std::copy_n(m.row(r), m.cols, dst);
      dst += m.cols;
    }
    for (const auto& m : acts) {
      std::copy_n(m.row(r), m.cols, dst);
      dst += m.cols;
    }
  }
  return out;
}

inline Matrix concat_two(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, a.cols + b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    std::copy_n(a.row(r), a.cols, out.row(r));
    std::copy_n(b.row(r), b.cols, out.row(r) + a.cols);
  }
  return out;
}

// Column offset of agent i's action inside the critic input.
inline int action_column(const SlotLayout& lay, int i, Algo algo) {
  return algo == Algo::maddpg ? lay.obs_total + lay.act_offset[i] : lay.obs_dim[i];
}

}  // namespace learndetail

// mu'_k(o'_k) for every agent; shared across the per-agent updates of one
// batch because targets only move at the end of a block.
inline std::vector<Matrix> target_next_actions(const std::vector<AgentLearner>& learners,
                                               const Batch& batch) {
  std::vector<Matrix> acts(learners.size());
  for (std::size_t k = 0; k < learners.size(); ++k)
    acts[k] = mlp_forward(learners[k].nets.target_actor, batch.next_obs[k]);
  return acts;
}

// y_s = r_{i,s} + gamma * (1 - done_s) * Q'_i(o'_s, mu'(o'_s)).
inline std::vector<double> critic_target(const std::vector<AgentLearner>& learners,
                                         const Batch& batch, int i, double gamma,
                                         bool mask_on_done,
                                         const std::vector<Matrix>& next_actions) {
  const AgentLearner& li = learners[i];
  Matrix input;
  if (li.algo == Algo::maddpg) {
    input = learndetail::concat_slots(batch.next_obs, next_actions);
  } else {
    input = learndetail::concat_two(batch.next_obs[i], next_actions[i]);
  }
  const Matrix q = mlp_forward(li.nets.target_critic, input);
  std::vector<double> y(batch.batch_size);
  for (std::size_t s = 0; s < batch.batch_size; ++s) {
    const double cont = mask_on_done ? 1.0 - batch.done[s] : 1.0;
    y[s] = batch.rewards(s, i) + gamma * cont * q(s, 0);
  }
  return y;
}

inline std::vector<double> critic_target(const std::vector<AgentLearner>& learners,
                                         const Batch& batch, int i, double gamma,
                                         bool mask_on_done = true) {
  return critic_target(learners, batch, i, gamma, mask_on_done,
                       target_next_actions(learners, batch));
}

struct UpdateOutcome {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
  double critic_grad_norm = 0.0;
  double actor_grad_norm = 0.0;
  double q_mean = 0.0;
  bool skipped = false;
};

// Gradient of the mean squared Bellman error L = (1/S) sum (y - Q)^2 with
// respect to the critic parameters. Also reports L and Q's batch mean.
inline Gradients critic_loss_gradient(const AgentLearner& li, const Batch& batch,
                                      const std::vector<double>& y, int i, double* loss_out,
                                      double* q_mean_out = nullptr) {
  require(y.size() == batch.batch_size, "critic_loss_gradient: |y| != batch size");
  Matrix input = li.algo == Algo::maddpg
                     ? learndetail::concat_slots(batch.obs, batch.actions)
                     : learndetail::concat_two(batch.obs[i], batch.actions[i]);
  ForwardCache cache;
  const Matrix& q = mlp_forward(li.nets.critic, input, cache);
  const double inv_s = 1.0 / static_cast<double>(batch.batch_size);
  double loss = 0.0, q_mean = 0.0;
  Matrix dq(batch.batch_size, 1);
  for (std::size_t s = 0; s < batch.batch_size; ++s) {
    const double err = q(s, 0) - y[s];
    loss += err * err * inv_s;
    q_mean += q(s, 0) * inv_s;
    dq(s, 0) = 2.0 * err * inv_s;
  }
  if (loss_out) *loss_out = loss;
  if (q_mean_out) *q_mean_out = q_mean;
  if (!std::isfinite(loss)) return zeros_like(li.nets.critic);
  Matrix dinput;
  return mlp_backward(li.nets.critic, cache, dq, dinput);
}

// Gradient of J = (1/S) sum_s Q_i(o_s, a_1 .. mu_i(o_i) .. a_N) with respect
// to the actor parameters: the critic is forwarded with agent i's action
// replaced by its online policy and the critic's input cotangent is pulled
// back through the action slice into the actor. Ascent direction, not
// negated.
inline Gradients actor_objective_gradient(const std::vector<AgentLearner>& learners,
                                          const SlotLayout& lay, const Batch& batch, int i,
                                          double* objective_out) {
  const AgentLearner& li = learners[i];
  ForwardCache actor_cache;
  const Matrix& a_new = mlp_forward(li.nets.actor, batch.obs[i], actor_cache);

  Matrix input;
  if (li.algo == Algo::maddpg) {
    std::vector<Matrix> acts = batch.actions;
    acts[i] = a_new;
    input = learndetail::concat_slots(batch.obs, acts);
  } else {
    input = learndetail::concat_two(batch.obs[i], a_new);
  }
  ForwardCache critic_cache;
  const Matrix& q = mlp_forward(li.nets.critic, input, critic_cache);
  const double inv_s = 1.0 / static_cast<double>(batch.batch_size);
  double objective = 0.0;
  for (std::size_t s = 0; s < batch.batch_size; ++s) objective += q(s, 0) * inv_s;
  if (objective_out) *objective_out = objective;
  if (!std::isfinite(objective)) return zeros_like(li.nets.actor);

  Matrix dq(batch.batch_size, 1, inv_s);
  Matrix dinput;
  mlp_backward(li.nets.critic, critic_cache, dq, dinput);  // critic params untouched here

  const int col = learndetail::action_column(lay, i, li.algo);
  const int width = lay.act_dim[i];
  Matrix da(batch.batch_size, width);
  for (std::size_t s = 0; s < batch.batch_size; ++s)
    for (int c = 0; c < width; ++c) da(s, c) = dinput(s, col + c);

  Matrix dobs_unused;
  return mlp_backward(li.nets.actor, actor_cache, da, dobs_unused);
}

// One Adam step on the critic against the mean squared Bellman error.
// Returns the pre-step loss. A non-finite loss skips the step and surfaces
// through the outcome (and once on stderr) instead of poisoning the net.
inline double update_critic(AgentLearner& li, const Batch& batch, const std::vector<double>& y,
                            int i, const LearnerConfig& cfg, UpdateOutcome* outcome = nullptr) {
  double loss = 0.0;
  double q_mean = 0.0;
  Gradients g = critic_loss_gradient(li, batch, y, i, &loss, &q_mean);
  if (!std::isfinite(loss) || !all_finite(g)) {
    std::fprintf(stderr, "[eamarl] warning: non-finite critic loss for agent %d, update skipped\n",
                 i);
    if (outcome) outcome->skipped = true;
    return loss;
  }
  if (cfg.grad_clip > 0.0) clip_global_norm(g, cfg.grad_clip);
  if (outcome) {
    outcome->critic_loss = loss;
    outcome->critic_grad_norm = grad_global_norm(g);
    outcome->q_mean = q_mean;
  }
  adam_step(li.nets.critic, g, li.nets.critic_opt);
  return loss;
}

// Ascent step on J. Returns the pre-step objective value.
inline double update_actor(std::vector<AgentLearner>& learners, const SlotLayout& lay,
                           const Batch& batch, int i, const LearnerConfig& cfg,
                           UpdateOutcome* outcome = nullptr) {
  AgentLearner& li = learners[i];
  double objective = 0.0;
  Gradients g = actor_objective_gradient(learners, lay, batch, i, &objective);
  if (!std::isfinite(objective) || !all_finite(g)) {
    std::fprintf(stderr, "[eamarl] warning: non-finite actor objective for agent %d, skipped\n",
                 i);
    if (outcome) outcome->skipped = true;
    return objective;
  }
  // Adam minimizes; flip the ascent direction.
  auto negate_mat = [](Matrix& m) {
    for (double& v : m.data) v = -v;
  };
  auto negate_vec = [](std::vector<double>& v) {
    for (double& x : v) x = -x;
  };
  negate_mat(g.W1);
  negate_mat(g.W2);
  negate_mat(g.W3);
  negate_vec(g.b1);
  negate_vec(g.b2);
  negate_vec(g.b3);
  if (cfg.grad_clip > 0.0) clip_global_norm(g, cfg.grad_clip);
  if (outcome) {
    outcome->actor_objective = objective;
    outcome->actor_grad_norm = grad_global_norm(g);
  }
  adam_step(li.nets.actor, g, li.nets.actor_opt);
  return objective;
}

// How one update block is laid out. The named training modes are:
//   vanilla        n_batches=1 passes=1 ea_times=0
//   EA             n_batches=1 passes=1 ea_times=E
//   "1+1+1+1"      n_batches=4 passes=1 ea_times=0
//   "1x4"          n_batches=1 passes=4 ea_times=0
struct BlockSchedule {
  int n_batches = 1;
  int passes_per_batch = 1;
  int ea_times = 0;
  bool exclude_identity = true;
  std::size_t batch_size = 1024;
  std::size_t min_fill = 25600;
};

struct BlockDiagnostics {
  std::vector<double> critic_loss;  // last pass, per agent
  std::vector<double> actor_objective;
  std::vector<double> critic_grad_norm;
  std::vector<double> actor_grad_norm;
  std::vector<double> q_mean;
  std::vector<long> grad_passes;  // per agent, this block
  int sample_calls = 0;
  long skipped_updates = 0;
  bool ea_fallback = false;  // EA requested but the feasible set is {id}
  std::vector<std::uint64_t> sampled_serials;  // provenance of sampled rows
};

namespace learndetail {

// Critic-then-actor update for every agent in `targets` on one batch
// variant. Target-net outputs are computed once and shared: targets are
// frozen until the end of the block.
inline void update_agents_on_batch(std::vector<AgentLearner>& learners, const SlotLayout& lay,
                                   const Batch& batch, const std::vector<int>& targets,
                                   const LearnerConfig& cfg, int passes,
                                   BlockDiagnostics& diag) {
  const std::vector<Matrix> next_acts = target_next_actions(learners, batch);
  std::vector<std::vector<double>> ys(learners.size());
  for (int i : targets)
    ys[i] = critic_target(learners, batch, i, cfg.gamma, cfg.mask_on_done, next_acts);
  for (int pass = 0; pass < passes; ++pass) {
    for (int i : targets) {
      UpdateOutcome out;
      update_critic(learners[i], batch, ys[i], i, cfg, &out);
      update_actor(learners, lay, batch, i, cfg, &out);
      diag.critic_loss[i] = out.critic_loss;
      diag.actor_objective[i] = out.actor_objective;
      diag.critic_grad_norm[i] = out.critic_grad_norm;
      diag.actor_grad_norm[i] = out.actor_grad_norm;
      diag.q_mean[i] = out.q_mean;
      if (out.skipped) ++diag.skipped_updates;
      ++diag.grad_passes[i];
    }
  }
}

}  // namespace learndetail

// One full training block: n_batches sampled batches, each updated
// passes_per_batch times for every agent, then ea_times extra passes on
// group-shuffled copies of the same batch for the EA-enabled agents.
// Targets move once, at the very end.
inline BlockDiagnostics run_update_block(std::vector<AgentLearner>& learners,
                                         const ReplayBuffer& buffer, const SlotLayout& lay,
                                         const BlockSchedule& sched, const LearnerConfig& cfg,
                                         Rng& rng) {
  const int n = static_cast<int>(learners.size());
  BlockDiagnostics diag;
  diag.critic_loss.assign(n, 0.0);
  diag.actor_objective.assign(n, 0.0);
  diag.critic_grad_norm.assign(n, 0.0);
  diag.actor_grad_norm.assign(n, 0.0);
  diag.q_mean.assign(n, 0.0);
  diag.grad_passes.assign(n, 0);

  std::vector<int> all_agents(n);
  for (int i = 0; i < n; ++i) all_agents[i] = i;
  std::vector<int> ea_agents;
  for (int i = 0; i < n; ++i)
    if (learners[i].ea_enabled) ea_agents.push_back(i);

  const bool shuffle_possible = feasible_permutation_count(lay.groups) > 1;
  for (int b = 0; b < sched.n_batches; ++b) {
    const Batch batch = sample_batch(buffer, sched.batch_size, sched.min_fill, rng);
    ++diag.sample_calls;
    diag.sampled_serials.insert(diag.sampled_serials.end(), batch.serials.begin(),
                                batch.serials.end());
    learndetail::update_agents_on_batch(learners, lay, batch, all_agents, cfg,
                                        sched.passes_per_batch, diag);
    if (sched.ea_times > 0 && !ea_agents.empty()) {
      if (!shuffle_possible && sched.exclude_identity) {
        if (!diag.ea_fallback)
          std::fprintf(stderr,
                       "[eamarl] warning: all groups are singletons, EA passes skipped\n");
        diag.ea_fallback = true;
        continue;
      }
      for (int e = 0; e < sched.ea_times; ++e) {
        const GroupPermutation sigma =
            sample_permutation(lay.groups, rng, sched.exclude_identity);
        const Batch shuffled = apply_permutation(batch, sigma);
        learndetail::update_agents_on_batch(learners, lay, shuffled, ea_agents, cfg, 1, diag);
      }
    }
  }
  for (auto& l : learners) {
    soft_update(l.nets.target_actor, l.nets.actor, cfg.soft_alpha);
    soft_update(l.nets.target_critic, l.nets.critic, cfg.soft_alpha);
  }
  return diag;
}

// The plain MADDPG block: one batch, one pass per agent, targets mixed once.
inline BlockDiagnostics vanilla_update(std::vector<AgentLearner>& learners,
                                       const ReplayBuffer& buffer, const SlotLayout& lay,
                                       std::size_t batch_size, std::size_t min_fill,
                                       const LearnerConfig& cfg, Rng& rng) {
  BlockSchedule sched;
  sched.batch_size = batch_size;
  sched.min_fill = min_fill;
  sched.ea_times = 0;
  return run_update_block(learners, buffer, lay, sched, cfg, rng);
}

// Vanilla pass plus cfg.ea_times sequential passes on freshly shuffled
// copies of the same sampled batch.
inline BlockDiagnostics ea_update(std::vector<AgentLearner>& learners, const ReplayBuffer& buffer,
                                  const SlotLayout& lay, std::size_t batch_size,
                                  std::size_t min_fill, const LearnerConfig& cfg, Rng& rng) {
  BlockSchedule sched;
  sched.batch_size = batch_size;
  sched.min_fill = min_fill;
  sched.ea_times = cfg.ea_times;
  sched.exclude_identity = cfg.exclude_identity;
  return run_update_block(learners, buffer, lay, sched, cfg, rng);
}

// DDPG differs only in the critic wiring, which is fixed at construction;
// the block structure is identical.
inline BlockDiagnostics ddpg_update(std::vector<AgentLearner>& learners,
                                    const ReplayBuffer& buffer, const SlotLayout& lay,
                                    std::size_t batch_size, std::size_t min_fill,
                                    const LearnerConfig& cfg, Rng& rng) {
  for (const auto& l : learners)
    require(l.algo == Algo::ddpg, "ddpg_update: learner not constructed as DDPG");
  return vanilla_update(learners, buffer, lay, batch_size, min_fill, cfg, rng);
}

}  // namespace eamarl

#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "eamarl/checkpoint.hpp"
#include "eamarl/config.hpp"
#include "eamarl/env.hpp"
#include "eamarl/learners.hpp"
#include "eamarl/metrics.hpp"
#include "eamarl/replay.hpp"

namespace eamarl {

struct TrainResult {
  RunMetrics metrics;
  std::vector<AgentLearner> learners;
  SlotLayout layout;
  ScenarioSpec spec;
};

namespace traindetail {

// Linear decay over the first half of training, flat afterwards.
inline double noise_for_episode(const TrainConfig& c, long episode) {
  const double half = static_cast<double>(c.episodes) / 2.0;
  if (static_cast<double>(episode) >= half) return c.noise_end;
  const double frac = static_cast<double>(episode) / half;
  return c.noise_start + (c.noise_end - c.noise_start) * frac;
}

// The ablation modes pin the update budget to 4 passes per 100 steps.
inline void apply_ablation(const TrainConfig& c, int& tau, BlockSchedule& sched) {
  tau = c.tau;
  sched.n_batches = c.n;
  sched.passes_per_batch = 1;
  sched.ea_times = c.ea_times;
  if (c.ablation_mode == "t25") {
    tau = 25;
    sched.n_batches = 1;
    sched.ea_times = 0;
  } else if (c.ablation_mode == "oneplus4") {
    sched.n_batches = 4;
    sched.ea_times = 0;
  } else if (c.ablation_mode == "onex4") {
    sched.n_batches = 1;
    sched.passes_per_batch = 4;
    sched.ea_times = 0;
  }
}

inline bool agent_in_ea_team(const ScenarioSpec& spec, const TrainConfig& c, int i) {
  if (c.ea_team == "all") return true;
  if (c.ea_team == "none") return false;
  const bool is_prey = spec.agents[i].group_id == 2;
  return c.ea_team == "preys" ? is_prey : !is_prey;
}

inline Transition make_transition(const JointObservation& obs, const std::vector<Vec2>& actions,
                                  const std::vector<double>& rewards,
                                  const JointObservation& next_obs, bool done,
                                  const SlotLayout& lay) {
  Transition t;
  t.obs.reserve(lay.obs_total);
  t.next_obs.reserve(lay.obs_total);
  t.actions.reserve(lay.act_total);
  for (const auto& o : obs) t.obs.insert(t.obs.end(), o.begin(), o.end());
  for (const auto& o : next_obs) t.next_obs.insert(t.next_obs.end(), o.begin(), o.end());
  for (const auto& a : actions) {
    t.actions.push_back(a.x);
    t.actions.push_back(a.y);
  }
  t.rewards = rewards;
  t.done = done;
  return t;
}

}  // namespace traindetail

inline TrainResult train(const TrainConfig& cfg) {
  validate(cfg);
  TrainResult result;
  result.spec = make_scenario(cfg.scenario);
  ScenarioSpec& spec = result.spec;
  spec.max_episode_len = cfg.max_episode_len;
  if (spec.kind == ScenarioKind::world) spec.bound_coef = cfg.bound_coef;
  const int n = spec.n_agents();

  result.layout = make_layout(observation_dims(spec), spec.act_dim, spec.groups());
  const SlotLayout& lay = result.layout;

  Rng rng(cfg.seed);
  const Algo algo = cfg.algo == "maddpg" ? Algo::maddpg : Algo::ddpg;
  LearnerConfig lcfg;
  lcfg.gamma = cfg.gamma;
  lcfg.lr_actor = cfg.lr_actor;
  lcfg.lr_critic = cfg.lr_critic;
  lcfg.soft_alpha = cfg.soft_alpha;
  lcfg.grad_clip = cfg.grad_clip;
  lcfg.ea_times = cfg.ea_times;
  lcfg.exclude_identity = cfg.exclude_identity;
  lcfg.mask_on_done = cfg.mask_on_done;

  result.learners.reserve(n);
  for (int i = 0; i < n; ++i) {
    AgentLearner l = make_agent_learner(lay, i, cfg.hidden_units, algo, lcfg, rng);
    l.ea_enabled = traindetail::agent_in_ea_team(spec, cfg, i);
    result.learners.push_back(std::move(l));
  }
  bool any_ea = false;
  for (const auto& l : result.learners) any_ea = any_ea || l.ea_enabled;

  int tau = cfg.tau;
  BlockSchedule sched;
  traindetail::apply_ablation(cfg, tau, sched);
  if (!any_ea) sched.ea_times = 0;
  sched.exclude_identity = cfg.exclude_identity;
  sched.batch_size = static_cast<std::size_t>(cfg.batch_size);
  sched.min_fill = cfg.fill_threshold();

  ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity), lay);

  RunMetrics& metrics = result.metrics;
  metrics.columns.push_back("episode");
  for (int i = 0; i < n; ++i) metrics.columns.push_back("reward_" + std::to_string(i));
  metrics.columns.push_back("reward_mean");
  if (spec.kind == ScenarioKind::coop_nav) {
    metrics.columns.push_back("dist");
    metrics.columns.push_back("collisions");
  } else {
    metrics.columns.push_back("caught");
    metrics.columns.push_back("predator_reward");
    metrics.columns.push_back("prey_reward");
  }
  metrics.grad_passes.assign(n, 0);

  std::vector<std::uint64_t> revisit_counts;  // by push serial
  std::FILE* traj = nullptr;
  if (!cfg.dump_trajectory.empty()) {
    traj = std::fopen(cfg.dump_trajectory.c_str(), "w");
    require(traj != nullptr, "train: cannot open trajectory dump " + cfg.dump_trajectory);
  }
  std::FILE* diag_stream = nullptr;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    diag_stream = std::fopen((cfg.out_dir + "/diagnostics.csv").c_str(), "w");
    require(diag_stream != nullptr, "train: cannot open diagnostics stream");
    std::fprintf(diag_stream, "block,step");
    for (int i = 0; i < n; ++i)
      std::fprintf(diag_stream,
                   ",critic_loss_%d,actor_objective_%d,q_mean_%d,critic_grad_norm_%d,"
                   "actor_grad_norm_%d",
                   i, i, i, i, i);
    std::fprintf(diag_stream, "\n");
  }

  const auto t0 = std::chrono::steady_clock::now();
  long global_step = 0;
  for (long ep = 0; ep < cfg.episodes; ++ep) {
    WorldState state = reset_world(spec, rng);
    JointObservation obs = build_observations(state, spec);
    const double noise = traindetail::noise_for_episode(cfg, ep);

    std::vector<double> ep_reward(n, 0.0);
    double dist_sum = 0.0;
    double collisions = 0.0;
    double caught = 0.0;

    for (int t = 0; t < spec.max_episode_len; ++t) {
      const std::vector<Vec2> actions = select_actions(result.learners, obs, noise, rng);
      StepResult sr = step_world(state, spec, actions);
      buffer.push(traindetail::make_transition(obs, actions, sr.rewards, sr.next_obs, sr.done, lay));
      if (cfg.track_revisits) revisit_counts.push_back(0);

      for (int i = 0; i < n; ++i) ep_reward[i] += sr.rewards[i];
      if (spec.kind == ScenarioKind::coop_nav) {
        dist_sum += mean_landmark_distance(sr.next_state, spec);
        collisions += collision_pairs(sr.next_state, spec);
      } else {
        caught += caught_pairs(sr.next_state, spec);
      }
      if (traj) {
        std::fprintf(traj, "%ld %d", ep, t);
        for (const auto& a : sr.next_state.agents) std::fprintf(traj, " %.17g %.17g", a.pos.x, a.pos.y);
        for (const auto& a : actions) std::fprintf(traj, " %.17g %.17g", a.x, a.y);
        for (double r : sr.rewards) std::fprintf(traj, " %.17g", r);
        std::fprintf(traj, "\n");
      }

      state = std::move(sr.next_state);
      obs = std::move(sr.next_obs);
      ++global_step;

      if (global_step % tau == 0 && buffer.size() >= sched.min_fill) {
        const BlockDiagnostics diag = run_update_block(result.learners, buffer, lay, sched, lcfg, rng);
        ++metrics.update_blocks;
        metrics.sample_calls += diag.sample_calls;
        for (int i = 0; i < n; ++i) metrics.grad_passes[i] += diag.grad_passes[i];
        if (diag_stream) {
          std::fprintf(diag_stream, "%ld,%ld", metrics.update_blocks - 1, global_step);
          for (int i = 0; i < n; ++i)
            std::fprintf(diag_stream, ",%.17g,%.17g,%.17g,%.17g,%.17g", diag.critic_loss[i],
                         diag.actor_objective[i], diag.q_mean[i], diag.critic_grad_norm[i],
                         diag.actor_grad_norm[i]);
          std::fprintf(diag_stream, "\n");
        }
        if (cfg.track_revisits) {
          const long per_row =
              sched.passes_per_batch + (diag.ea_fallback ? 0 : sched.ea_times);
          for (std::uint64_t serial : diag.sampled_serials) revisit_counts[serial] += per_row;
        }
      }
    }

    std::vector<double> row;
    row.push_back(static_cast<double>(ep));
    double mean_r = 0.0;
    for (int i = 0; i < n; ++i) {
      row.push_back(ep_reward[i]);
      mean_r += ep_reward[i];
    }
    mean_r /= static_cast<double>(n);
    row.push_back(mean_r);
    if (spec.kind == ScenarioKind::coop_nav) {
      row.push_back(dist_sum / static_cast<double>(spec.max_episode_len));
      row.push_back(collisions);
    } else {
      row.push_back(caught);
      double pred = 0.0, prey = 0.0;
      int npred = 0, nprey = 0;
      for (int i = 0; i < n; ++i) {
        if (spec.agents[i].group_id == 2) {
          prey += ep_reward[i];
          ++nprey;
        } else {
          pred += ep_reward[i];
          ++npred;
        }
      }
      row.push_back(npred ? pred / npred : 0.0);
      row.push_back(nprey ? prey / nprey : 0.0);
    }
    metrics.rows.push_back(std::move(row));
  }
  const auto t1 = std::chrono::steady_clock::now();
  metrics.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  metrics.seconds_per_1000_episodes =
      metrics.wall_seconds * 1000.0 / static_cast<double>(cfg.episodes);
  metrics.total_steps = global_step;

  if (traj) std::fclose(traj);
  if (diag_stream) std::fclose(diag_stream);

  if (cfg.track_revisits) {
    // entries with a complete buffer lifetime: pushed after the buffer
    // first filled and already overwritten by the end of the run
    const std::uint64_t cap = buffer.capacity();
    double total = 0.0;
    long count = 0;
    if (buffer.total_pushed() > cap) {
      for (std::uint64_t serial = cap; serial + cap <= buffer.total_pushed(); ++serial) {
        total += static_cast<double>(revisit_counts[serial]);
        ++count;
      }
    }
    metrics.full_life_entries = count;
    metrics.mean_full_life_revisits = count ? total / static_cast<double>(count) : -1.0;
  }

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    emit_metrics(metrics, cfg.out_dir,
                 static_cast<std::size_t>(std::min<long>(cfg.eval_window, cfg.episodes)));
    {
      std::ofstream os(cfg.out_dir + "/config.used");
      write_config(os, cfg);
    }
    if (cfg.save_checkpoint) {
      std::vector<std::pair<std::string, const MlpParams*>> nets;
      for (int i = 0; i < n; ++i) {
        const std::string base = "agent" + std::to_string(i);
        nets.emplace_back(base + ".actor", &result.learners[i].nets.actor);
        nets.emplace_back(base + ".critic", &result.learners[i].nets.critic);
        nets.emplace_back(base + ".target_actor", &result.learners[i].nets.target_actor);
        nets.emplace_back(base + ".target_critic", &result.learners[i].nets.target_critic);
      }
      save_params_file(cfg.out_dir + "/checkpoint.txt", nets);
    }
  }

  if (!cfg.dump_buffer.empty()) {
    std::FILE* f = std::fopen(cfg.dump_buffer.c_str(), "w");
    require(f != nullptr, "train: cannot open buffer dump " + cfg.dump_buffer);
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      const Transition& t = buffer.at(i);
      std::fprintf(f, "%llu", static_cast<unsigned long long>(buffer.serial_at(i)));
      for (double v : t.obs) std::fprintf(f, " %.17g", v);
      for (double v : t.actions) std::fprintf(f, " %.17g", v);
      for (double v : t.rewards) std::fprintf(f, " %.17g", v);
      for (double v : t.next_obs) std::fprintf(f, " %.17g", v);
      std::fprintf(f, " %d\n", t.done ? 1 : 0);
    }
    std::fclose(f);
  }

  return result;
}

}  // namespace eamarl

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "eamarl/permutation.hpp"
#include "eamarl/rng.hpp"
#include "eamarl/scenario.hpp"

namespace eamarl {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct EntityState {
  Vec2 pos;
  Vec2 vel;
};

// Plain value; stepping is a pure function of (state, actions, spec).
struct WorldState {
  std::vector<EntityState> agents;  // slot order
  std::vector<Vec2> landmarks;
  int step_index = 0;
};

using JointObservation = std::vector<std::vector<double>>;

struct StepResult {
  WorldState next_state;
  JointObservation next_obs;
  std::vector<double> rewards;
  bool done = false;
};

namespace envdetail {

inline double dist2(const Vec2& a, const Vec2& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline bool overlap(const Vec2& a, double ra, const Vec2& b, double rb) {
  const double rmin = ra + rb;
  return dist2(a, b) < rmin * rmin;
}

// Shifted softplus spring: zero at contact and outside, ~k*penetration once
// the overlap exceeds a few margins.
inline double contact_magnitude(double dist, double rmin, double k, double margin) {
  const double u = rmin - dist;
  if (u <= 0.0) return 0.0;
  const double x = u / margin;
  const double softplus = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return k * margin * (softplus - std::log(2.0));
}

// One pushing force on an observer, keyed so contributions can be summed in
// an order independent of agent slot labels.
struct Push {
  double d2, dx, dy, other_radius;  // sort key
  double fx, fy;
  bool operator<(const Push& o) const {
    if (d2 != o.d2) return d2 < o.d2;
    if (dx != o.dx) return dx < o.dx;
    if (dy != o.dy) return dy < o.dy;
    return other_radius < o.other_radius;
  }
};

inline void add_push(std::vector<Push>& pushes, const Vec2& self, double self_r, const Vec2& other,
                     double other_r, double k, double margin) {
  const double dx = self.x - other.x, dy = self.y - other.y;
  const double d2 = dx * dx + dy * dy;
  const double rmin = self_r + other_r;
  if (d2 >= rmin * rmin) return;
  const double dist = std::sqrt(d2);
  if (dist < 1e-12) return;  // coincident centers push nowhere
  const double mag = contact_magnitude(dist, rmin, k, margin);
  pushes.push_back(Push{d2, dx, dy, other_r, mag * dx / dist, mag * dy / dist});
}

// Prey out-of-bounds curve, per coordinate magnitude.
inline double bound_penalty(double a) {
  if (a < 0.9) return 0.0;
  if (a < 1.0) return (a - 0.9) * 10.0;
  return std::min(std::exp(2.0 * a - 2.0), 10.0);
}

inline bool in_any_forest(const WorldState& s, const ScenarioSpec& spec, const Vec2& pos) {
  for (std::size_t l = 0; l < s.landmarks.size(); ++l) {
    if (!spec.is_forest(static_cast<int>(l))) continue;
    const double r = spec.landmarks[l].radius;
    if (dist2(pos, s.landmarks[l]) < r * r) return true;
  }
  return false;
}

}  // namespace envdetail

// Positions i.i.d. uniform in [-1,1]^2 (agents in slot order, then
// landmarks), velocities zero.
inline WorldState reset_world(const ScenarioSpec& spec, Rng& rng) {
  WorldState s;
  s.agents.resize(spec.agents.size());
  for (auto& a : s.agents) {
    a.pos.x = rng.uniform(-1.0, 1.0);
    a.pos.y = rng.uniform(-1.0, 1.0);
    a.vel = Vec2{0.0, 0.0};
  }
  s.landmarks.resize(spec.landmarks.size());
  for (auto& l : s.landmarks) {
    l.x = rng.uniform(-1.0, 1.0);
    l.y = rng.uniform(-1.0, 1.0);
  }
  return s;
}

// Shared coverage term (negative sum over landmarks of the distance to the
// nearest agent) plus collision_reward per overlapping other agent.
inline std::vector<double> reward_coop_nav(const WorldState& s, const ScenarioSpec& spec) {
  const int n = spec.n_agents();
  double shared = 0.0;
  for (const auto& lm : s.landmarks) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : s.agents) best = std::min(best, envdetail::dist2(lm, a.pos));
    shared -= std::sqrt(best);
  }
  std::vector<double> r(n, shared);
  for (int i = 0; i < n; ++i) {
    int overlaps = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (envdetail::overlap(s.agents[i].pos, spec.agents[i].radius, s.agents[j].pos,
                             spec.agents[j].radius))
        ++overlaps;
    }
    r[i] += spec.collision_reward * overlaps;
  }
  return r;
}

// Predators: +catch_reward per overlapped prey. Preys: caught_reward per
// overlapping predator, minus bound_coef * sum of the per-coordinate
// out-of-bounds curve.
inline std::vector<double> reward_world(const WorldState& s, const ScenarioSpec& spec) {
  const int n = spec.n_agents();
  std::vector<double> r(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const bool is_prey = spec.agents[i].group_id == 2;
    int overlaps = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const bool other_prey = spec.agents[j].group_id == 2;
      if (is_prey == other_prey) continue;  // only predator-prey contacts score
      if (envdetail::overlap(s.agents[i].pos, spec.agents[i].radius, s.agents[j].pos,
                             spec.agents[j].radius))
        ++overlaps;
    }
    if (is_prey) {
      r[i] = spec.caught_reward * overlaps;
      r[i] -= spec.bound_coef * (envdetail::bound_penalty(std::abs(s.agents[i].pos.x)) +
                                 envdetail::bound_penalty(std::abs(s.agents[i].pos.y)));
    } else {
      r[i] = spec.catch_reward * overlaps;
    }
  }
  return r;
}

inline std::vector<double> scenario_rewards(const WorldState& s, const ScenarioSpec& spec) {
  return spec.kind == ScenarioKind::coop_nav ? reward_coop_nav(s, spec) : reward_world(s, spec);
}

namespace envdetail {

// Canonical order for "other agents" inside an observation: distance, then
// bearing, then the raw relative offsets and the target's velocity. Sorting
// on the full target state keeps the layout a pure function of the *set* of
// same-group states, which is exactly what makes relabeling agents a no-op
// on each observation vector.
struct OtherRef {
  double d2, angle, dx, dy, tvx, tvy;
  int slot;
  bool operator<(const OtherRef& o) const {
    if (d2 != o.d2) return d2 < o.d2;
    if (angle != o.angle) return angle < o.angle;
    if (dx != o.dx) return dx < o.dx;
    if (dy != o.dy) return dy < o.dy;
    if (tvx != o.tvx) return tvx < o.tvx;
    return tvy < o.tvy;
  }
};

inline std::vector<OtherRef> sorted_others(const WorldState& s, const Vec2& from,
                                           const std::vector<int>& slots, int skip_slot) {
  std::vector<OtherRef> refs;
  refs.reserve(slots.size());
  for (int j : slots) {
    if (j == skip_slot) continue;
    const double dx = s.agents[j].pos.x - from.x;
    const double dy = s.agents[j].pos.y - from.y;
    refs.push_back(OtherRef{dx * dx + dy * dy, std::atan2(dy, dx), dx, dy, s.agents[j].vel.x,
                            s.agents[j].vel.y, j});
  }
  std::sort(refs.begin(), refs.end());
  return refs;
}

}  // namespace envdetail

// Per-agent observation layout (all offsets relative to the observer unless
// stated otherwise):
//
// coop_nav:
//   [own vel (2), own pos (2),
//    landmark offsets in fixed landmark order (2 per landmark),
//    other agents of the own group, canonically sorted (2 per agent)]
//
// world (groups: 0 = leader, 1 = predators, 2 = preys):
//   [own vel (2), own pos (2), obstacle offset (2), forest offset (2),
//    self-in-forest flag (1),
//    then per group in ascending id, self excluded, canonically sorted:
//      leader/predator target -> offset (2)
//      prey target            -> offset (2), velocity (2), hidden flag (1);
//                                offset+velocity zeroed for hidden preys
//                                unless the observer is the leader,
//    then, for non-leader predators only, the leader's prey feed: every
//    prey's offset from the *leader*, sorted by the leader's canonical key
//    (2 per prey, never zeroed)]
inline JointObservation build_observations(const WorldState& s, const ScenarioSpec& spec) {
  const int n = spec.n_agents();
  const std::vector<int> groups = spec.groups();
  int n_groups = 0;
  for (int g : groups) n_groups = std::max(n_groups, g + 1);
  std::vector<std::vector<int>> members(n_groups);
  for (int i = 0; i < n; ++i) members[groups[i]].push_back(i);

  JointObservation obs(n);
  for (int i = 0; i < n; ++i) {
    const auto& self = s.agents[i];
    std::vector<double>& o = obs[i];
    o.push_back(self.vel.x);
    o.push_back(self.vel.y);
    o.push_back(self.pos.x);
    o.push_back(self.pos.y);
    for (const auto& lm : s.landmarks) {
      o.push_back(lm.x - self.pos.x);
      o.push_back(lm.y - self.pos.y);
    }
    if (spec.kind == ScenarioKind::world)
      o.push_back(envdetail::in_any_forest(s, spec, self.pos) ? 1.0 : 0.0);

    for (int g = 0; g < n_groups; ++g) {
      const auto refs = envdetail::sorted_others(s, self.pos, members[g], i);
      for (const auto& ref : refs) {
        if (spec.kind == ScenarioKind::world && groups[ref.slot] == 2) {
          const bool hidden = envdetail::in_any_forest(s, spec, s.agents[ref.slot].pos);
          const bool masked = hidden && !spec.is_leader(i);
          o.push_back(masked ? 0.0 : ref.dx);
          o.push_back(masked ? 0.0 : ref.dy);
          o.push_back(masked ? 0.0 : ref.tvx);
          o.push_back(masked ? 0.0 : ref.tvy);
          o.push_back(hidden ? 1.0 : 0.0);
        } else {
          o.push_back(ref.dx);
          o.push_back(ref.dy);
        }
      }
    }

    if (spec.kind == ScenarioKind::world && groups[i] == 1 && !spec.is_leader(i)) {
      const Vec2 leader_pos = s.agents[spec.leader_slot].pos;
      const auto feed = envdetail::sorted_others(s, leader_pos, members[2], -1);
      for (const auto& ref : feed) {
        o.push_back(ref.dx);
        o.push_back(ref.dy);
      }
    }
  }
  return obs;
}

inline std::vector<int> observation_dims(const ScenarioSpec& spec) {
  WorldState dummy;
  dummy.agents.resize(spec.agents.size());
  for (std::size_t i = 0; i < dummy.agents.size(); ++i) {
    dummy.agents[i].pos = Vec2{0.01 * static_cast<double>(i + 1), -0.02 * static_cast<double>(i + 1)};
  }
  dummy.landmarks.assign(spec.landmarks.size(), Vec2{0.5, 0.5});
  const JointObservation obs = build_observations(dummy, spec);
  std::vector<int> dims;
  dims.reserve(obs.size());
  for (const auto& o : obs) dims.push_back(static_cast<int>(o.size()));
  return dims;
}

// Semi-implicit Euler with soft contact springs. Force contributions are
// accumulated in a canonical order so the step commutes bitwise with
// group-respecting slot relabelings.
inline StepResult step_world(const WorldState& s, const ScenarioSpec& spec,
                             const std::vector<Vec2>& actions) {
  const int n = spec.n_agents();
  require(static_cast<int>(actions.size()) == n, "step_world: one action per agent required");

  StepResult out;
  out.next_state = s;
  WorldState& ns = out.next_state;

  std::vector<envdetail::Push> pushes;
  for (int i = 0; i < n; ++i) {
    if (!spec.agents[i].movable) continue;
    const double ax = std::clamp(actions[i].x, -1.0, 1.0);
    const double ay = std::clamp(actions[i].y, -1.0, 1.0);

    pushes.clear();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      envdetail::add_push(pushes, s.agents[i].pos, spec.agents[i].radius, s.agents[j].pos,
                          spec.agents[j].radius, spec.contact_k, spec.contact_margin);
    }
    for (std::size_t l = 0; l < s.landmarks.size(); ++l) {
      if (!spec.landmarks[l].solid) continue;
      envdetail::add_push(pushes, s.agents[i].pos, spec.agents[i].radius, s.landmarks[l],
                          spec.landmarks[l].radius, spec.contact_k, spec.contact_margin);
    }
    std::sort(pushes.begin(), pushes.end());
    double fx = 0.0, fy = 0.0;
    for (const auto& p : pushes) {
      fx += p.fx;
      fy += p.fy;
    }

    EntityState& a = ns.agents[i];
    a.vel.x = (1.0 - spec.damping) * a.vel.x + (ax * spec.agents[i].accel + fx) * spec.dt;
    a.vel.y = (1.0 - spec.damping) * a.vel.y + (ay * spec.agents[i].accel + fy) * spec.dt;
    const double speed2 = a.vel.x * a.vel.x + a.vel.y * a.vel.y;
    const double vmax = spec.agents[i].max_speed;
    if (speed2 > vmax * vmax) {
      const double scale = vmax / std::sqrt(speed2);
      a.vel.x *= scale;
      a.vel.y *= scale;
    }
    a.pos.x += a.vel.x * spec.dt;
    a.pos.y += a.vel.y * spec.dt;
  }

  ns.step_index = s.step_index + 1;
  out.done = ns.step_index >= spec.max_episode_len;
  out.rewards = scenario_rewards(ns, spec);
  out.next_obs = build_observations(ns, spec);
  return out;
}

// Slot i of the result holds the physical state of slot sigma(i); landmarks
// and the step counter are untouched.
inline WorldState permute_world_state(const WorldState& s, const GroupPermutation& sigma,
                                      const ScenarioSpec& spec) {
  require(sigma.map.size() == s.agents.size(), "permute_world_state: size mismatch");
  require(sigma.groups == spec.groups(), "permute_world_state: permutation built for other groups");
  require(respects_groups(sigma.map, sigma.groups), "permute_world_state: crosses groups");
  WorldState out = s;
  for (std::size_t i = 0; i < s.agents.size(); ++i) out.agents[i] = s.agents[sigma.map[i]];
  return out;
}

// --- metric helpers ---

// Mean over landmarks of the distance to the nearest agent.
inline double mean_landmark_distance(const WorldState& s, const ScenarioSpec&) {
  if (s.landmarks.empty()) return 0.0;
  double total = 0.0;
  for (const auto& lm : s.landmarks) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : s.agents) best = std::min(best, envdetail::dist2(lm, a.pos));
    total += std::sqrt(best);
  }
  return total / static_cast<double>(s.landmarks.size());
}

// Unordered agent pairs currently overlapping.
inline int collision_pairs(const WorldState& s, const ScenarioSpec& spec) {
  int count = 0;
  const int n = spec.n_agents();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (envdetail::overlap(s.agents[i].pos, spec.agents[i].radius, s.agents[j].pos,
                             spec.agents[j].radius))
        ++count;
  return count;
}

// Predator-prey pairs currently overlapping.
inline int caught_pairs(const WorldState& s, const ScenarioSpec& spec) {
  int count = 0;
  const int n = spec.n_agents();
  for (int i = 0; i < n; ++i) {
    if (spec.agents[i].group_id == 2) continue;
    for (int j = 0; j < n; ++j) {
      if (spec.agents[j].group_id != 2) continue;
      if (envdetail::overlap(s.agents[i].pos, spec.agents[i].radius, s.agents[j].pos,
                             spec.agents[j].radius))
        ++count;
    }
  }
  return count;
}

}  // namespace eamarl

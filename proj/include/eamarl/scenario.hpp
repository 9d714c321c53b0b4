#pragma once

#include <string>
#include <vector>

#include "eamarl/contract.hpp"

namespace eamarl {

enum class ScenarioKind { coop_nav, world };

// Per-slot physical class. Every agent with the same group_id carries
// identical fields; the group partition is what the shuffle machinery
// is allowed to permute over.
struct AgentClass {
  int group_id = 0;
  double radius = 0.1;
  double max_speed = 1.0;
  double accel = 5.0;
  bool movable = true;
};

struct LandmarkClass {
  double radius = 0.05;
  bool solid = false;  // solid landmarks exert contact forces (obstacles)
};

struct ScenarioSpec {
  std::string name;
  ScenarioKind kind = ScenarioKind::coop_nav;
  std::vector<AgentClass> agents;        // slot order
  std::vector<LandmarkClass> landmarks;  // coop_nav: targets; world: obstacles then forests
  int n_forests = 0;                     // trailing landmarks are forests
  int leader_slot = -1;                  // world: the one predator that sees into forests

  // reward constants
  double collision_reward = 0.0;  // coop_nav, per overlapping other agent
  double catch_reward = 0.0;      // world, predator per overlapped prey
  double caught_reward = 0.0;     // world, prey per overlapping predator
  double bound_coef = 0.0;        // world, scale of the prey out-of-bounds penalty

  // physics
  int max_episode_len = 25;
  double dt = 0.1;
  double damping = 0.25;
  double contact_k = 100.0;
  double contact_margin = 1e-3;

  int act_dim = 2;

  int n_agents() const { return static_cast<int>(agents.size()); }

  std::vector<int> groups() const {
    std::vector<int> g;
    g.reserve(agents.size());
    for (const auto& a : agents) g.push_back(a.group_id);
    return g;
  }

  bool is_forest(int landmark_idx) const {
    return landmark_idx >= static_cast<int>(landmarks.size()) - n_forests;
  }

  bool is_leader(int agent_idx) const { return agent_idx == leader_slot; }
};

// N homogeneous agents must cover L landmarks; shared negative
// sum-of-distances term plus a -2 penalty per agent-agent overlap.
inline ScenarioSpec make_coop_nav(int n_agents = 3, int n_landmarks = 3) {
  require(n_agents >= 1 && n_landmarks >= 1, "make_coop_nav: bad sizes");
  ScenarioSpec s;
  s.name = "coop_nav";
  s.kind = ScenarioKind::coop_nav;
  s.agents.assign(n_agents, AgentClass{0, 0.15, 1.0, 5.0, true});
  s.landmarks.assign(n_landmarks, LandmarkClass{0.05, false});
  s.collision_reward = -2.0;
  return s;
}

// Predator-prey with an obstacle and a forest. Slot 0 is the leader
// (its own singleton group), slots 1..3 the chasing predators, slots 4..5
// the faster preys. Predators score +10 per prey overlap, preys -10 per
// predator overlap minus a bound penalty that keeps them in the arena.
inline ScenarioSpec make_world() {
  ScenarioSpec s;
  s.name = "world";
  s.kind = ScenarioKind::world;
  const AgentClass leader{0, 0.075, 1.0, 3.0, true};
  const AgentClass predator{1, 0.075, 1.0, 3.0, true};
  const AgentClass prey{2, 0.045, 1.3, 4.0, true};
  s.agents = {leader, predator, predator, predator, prey, prey};
  s.leader_slot = 0;
  s.landmarks = {LandmarkClass{0.2, true}, LandmarkClass{0.3, false}};  // obstacle, forest
  s.n_forests = 1;
  s.catch_reward = 10.0;
  s.caught_reward = -10.0;
  s.bound_coef = 2.0;
  return s;
}

inline ScenarioSpec make_scenario(const std::string& name) {
  if (name == "coop_nav") return make_coop_nav();
  if (name == "world") return make_world();
  throw ContractError("unknown scenario: " + name);
}

}  // namespace eamarl

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "eamarl/contract.hpp"

namespace eamarl {

// Everything a run needs. Every field maps 1:1 to a config-file key and a
// CLI flag of the same name; file first, flags override.
struct TrainConfig {
  std::string scenario = "coop_nav";  // coop_nav | world
  long episodes = 5000;
  int max_episode_len = 25;
  int tau = 100;       // environment steps between update blocks
  int n = 1;           // update blocks' batch count per trigger
  int ea_times = 3;    // E: extra shuffled passes per batch
  long batch_size = 1024;
  long buffer_capacity = 1000000;
  double gamma = 0.95;
  double lr_actor = 0.001;
  double lr_critic = 0.001;
  std::uint64_t seed = 1;
  std::string ablation_mode = "none";  // none | t25 | oneplus4 | onex4
  long eval_window = 1000;
  int hidden_units = 128;
  double soft_alpha = 0.01;
  double noise_start = 0.3;
  double noise_end = 0.05;
  double grad_clip = 0.5;
  bool exclude_identity = true;
  bool mask_on_done = true;
  std::string algo = "maddpg";  // maddpg | ddpg
  std::string ea_team = "all";  // all | none | predators | preys
  double bound_coef = 2.0;      // world: scale of the prey out-of-bounds penalty
  int fill_batches = 25;        // learning starts at fill_batches * batch_size stored steps
  std::string out_dir;
  std::string dump_trajectory;  // optional trajectory dump path
  std::string dump_buffer;      // optional buffer snapshot path
  bool save_checkpoint = true;
  bool track_revisits = false;  // per-experience sampling statistics

  std::size_t fill_threshold() const {
    return static_cast<std::size_t>(fill_batches) * static_cast<std::size_t>(batch_size);
  }
};

namespace cfgdetail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ContractError("config: bad boolean for " + key + ": " + v);
}

}  // namespace cfgdetail

// Applies one key=value pair; unknown keys are contract violations so a
// typo'd config never silently trains with defaults.
inline void apply_config_entry(TrainConfig& c, const std::string& key, const std::string& value) {
  using cfgdetail::parse_bool;
  if (key == "scenario") c.scenario = value;
  else if (key == "episodes") c.episodes = std::stol(value);
  else if (key == "max_episode_len") c.max_episode_len = std::stoi(value);
  else if (key == "tau") c.tau = std::stoi(value);
  else if (key == "n") c.n = std::stoi(value);
  else if (key == "ea_times") c.ea_times = std::stoi(value);
  else if (key == "batch_size") c.batch_size = std::stol(value);
  else if (key == "buffer_capacity") c.buffer_capacity = std::stol(value);
  else if (key == "gamma") c.gamma = std::stod(value);
  else if (key == "lr_actor") c.lr_actor = std::stod(value);
  else if (key == "lr_critic") c.lr_critic = std::stod(value);
  else if (key == "seed") c.seed = std::stoull(value);
  else if (key == "ablation_mode") c.ablation_mode = value;
  else if (key == "eval_window") c.eval_window = std::stol(value);
  else if (key == "hidden_units") c.hidden_units = std::stoi(value);
  else if (key == "soft_alpha") c.soft_alpha = std::stod(value);
  else if (key == "noise_start") c.noise_start = std::stod(value);
  else if (key == "noise_end") c.noise_end = std::stod(value);
  else if (key == "grad_clip") c.grad_clip = std::stod(value);
  else if (key == "exclude_identity") c.exclude_identity = parse_bool(value, key);
  else if (key == "mask_on_done") c.mask_on_done = parse_bool(value, key);
  else if (key == "algo") c.algo = value;
  else if (key == "ea_team") c.ea_team = value;
  else if (key == "bound_coef") c.bound_coef = std::stod(value);
  else if (key == "fill_batches") c.fill_batches = std::stoi(value);
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "dump_trajectory") c.dump_trajectory = value;
  else if (key == "dump_buffer") c.dump_buffer = value;
  else if (key == "save_checkpoint") c.save_checkpoint = parse_bool(value, key);
  else if (key == "track_revisits") c.track_revisits = parse_bool(value, key);
  else throw ContractError("config: unknown key: " + key);
}

// Flat `key = value` lines, '#' starts a comment, blank lines ignored.
inline void load_config_file(TrainConfig& c, const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "config: cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = cfgdetail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos,
            "config: line " + std::to_string(lineno) + " is not key = value");
    apply_config_entry(c, cfgdetail::trim(line.substr(0, eq)),
                       cfgdetail::trim(line.substr(eq + 1)));
  }
}

inline void validate(const TrainConfig& c) {
  require(c.scenario == "coop_nav" || c.scenario == "world", "config: unknown scenario");
  require(c.episodes >= 1, "config: episodes must be >= 1");
  require(c.max_episode_len >= 1, "config: max_episode_len must be >= 1");
  require(c.tau >= 1, "config: tau must be >= 1");
  require(c.n >= 1, "config: n must be >= 1");
  require(c.ea_times >= 0, "config: ea_times must be >= 0");
  require(c.batch_size >= 1, "config: batch_size must be >= 1");
  require(c.buffer_capacity >= c.batch_size, "config: buffer smaller than a batch");
  require(c.gamma > 0.0 && c.gamma < 1.0, "config: gamma outside (0,1)");
  require(c.ablation_mode == "none" || c.ablation_mode == "t25" ||
              c.ablation_mode == "oneplus4" || c.ablation_mode == "onex4",
          "config: unknown ablation_mode");
  require(c.algo == "maddpg" || c.algo == "ddpg", "config: unknown algo");
  require(c.ea_team == "all" || c.ea_team == "none" || c.ea_team == "predators" ||
              c.ea_team == "preys",
          "config: unknown ea_team");
  require(c.ea_team == "all" || c.ea_team == "none" || c.scenario == "world",
          "config: per-team EA needs the world scenario");
  require(c.bound_coef >= 0.0, "config: bound_coef must be >= 0");
  require(c.hidden_units >= 1, "config: hidden_units must be >= 1");
  require(c.fill_batches >= 1, "config: fill_batches must be >= 1");
  require(static_cast<long>(c.fill_threshold()) <= c.buffer_capacity,
          "config: fill threshold exceeds buffer capacity");
  require(c.soft_alpha >= 0.0 && c.soft_alpha <= 1.0, "config: soft_alpha outside [0,1]");
  require(c.eval_window >= 1, "config: eval_window must be >= 1");
}

inline void write_config(std::ostream& os, const TrainConfig& c) {
  os << "scenario = " << c.scenario << "\n";
  os << "episodes = " << c.episodes << "\n";
  os << "max_episode_len = " << c.max_episode_len << "\n";
  os << "tau = " << c.tau << "\n";
  os << "n = " << c.n << "\n";
  os << "ea_times = " << c.ea_times << "\n";
  os << "batch_size = " << c.batch_size << "\n";
  os << "buffer_capacity = " << c.buffer_capacity << "\n";
  os << "gamma = " << c.gamma << "\n";
  os << "lr_actor = " << c.lr_actor << "\n";
  os << "lr_critic = " << c.lr_critic << "\n";
  os << "seed = " << c.seed << "\n";
  os << "ablation_mode = " << c.ablation_mode << "\n";
  os << "eval_window = " << c.eval_window << "\n";
  os << "hidden_units = " << c.hidden_units << "\n";
  os << "soft_alpha = " << c.soft_alpha << "\n";
  os << "noise_start = " << c.noise_start << "\n";
  os << "noise_end = " << c.noise_end << "\n";
  os << "grad_clip = " << c.grad_clip << "\n";
  os << "exclude_identity = " << (c.exclude_identity ? "true" : "false") << "\n";
  os << "mask_on_done = " << (c.mask_on_done ? "true" : "false") << "\n";
  os << "algo = " << c.algo << "\n";
  os << "ea_team = " << c.ea_team << "\n";
  os << "bound_coef = " << c.bound_coef << "\n";
  os << "fill_batches = " << c.fill_batches << "\n";
  if (!c.out_dir.empty()) os << "out_dir = " << c.out_dir << "\n";
  if (!c.dump_trajectory.empty()) os << "dump_trajectory = " << c.dump_trajectory << "\n";
  if (!c.dump_buffer.empty()) os << "dump_buffer = " << c.dump_buffer << "\n";
  os << "save_checkpoint = " << (c.save_checkpoint ? "true" : "false") << "\n";
  os << "track_revisits = " << (c.track_revisits ? "true" : "false") << "\n";
}

inline void write_config_file(const std::string& path, const TrainConfig& c) {
  std::ofstream os(path);
  require(os.good(), "config: cannot write " + path);
  write_config(os, c);
}

}  // namespace eamarl

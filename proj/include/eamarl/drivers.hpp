#pragma once

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "eamarl/config.hpp"
#include "eamarl/contract.hpp"
#include "eamarl/metrics.hpp"

namespace eamarl {

// Sweep/ablation/cross-play drivers. Each training run is an independent
// child process of the CLI binary (one run = one process); the driver only
// plans configs, fans processes out over a small worker pool and merges the
// CSV/summary outputs afterwards.

struct PlannedRun {
  TrainConfig cfg;
  std::string label;  // variant name, e.g. "ea3" or "E0"
  std::string dir;
};

namespace driverdetail {

inline int spawn_run(const std::string& cli, const PlannedRun& run) {
  std::filesystem::create_directories(run.dir);
  const std::string cfg_path = run.dir + "/config.cfg";
  write_config_file(cfg_path, run.cfg);
  const std::string log_path = run.dir + "/log.txt";

  const pid_t pid = ::fork();
  if (pid < 0) return -1;
  if (pid == 0) {
    const int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      ::dup2(fd, 1);
      ::dup2(fd, 2);
      ::close(fd);
    }
    std::vector<std::string> args = {cli, "train", "--config", cfg_path};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    ::execv(cli.c_str(), argv.data());
    _exit(127);
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

}  // namespace driverdetail

// Runs every planned config to completion, at most `jobs` at a time.
// Returns the number of failed runs.
inline int execute_runs(const std::string& cli, const std::vector<PlannedRun>& runs, int jobs) {
  require(!cli.empty(), "execute_runs: CLI binary path required");
  if (jobs < 1) jobs = 1;
  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      const int rc = driverdetail::spawn_run(cli, runs[i]);
      if (rc != 0) {
        std::fprintf(stderr, "[eamarl] run %s failed with exit code %d (log: %s/log.txt)\n",
                     runs[i].label.c_str(), rc, runs[i].dir.c_str());
        failures.fetch_add(1);
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::min<int>(jobs, static_cast<int>(runs.size()));
  pool.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return failures.load();
}

// Final-window statistics of one variant, averaged over its seeds.
struct VariantReport {
  std::string label;
  int seeds = 0;
  std::map<std::string, double> mean_final;  // final.<col>.mean averaged over seeds
  std::vector<double> per_seed_reward_mean;
  double seconds_per_1000 = 0.0;
};

inline VariantReport collect_variant(const std::string& label,
                                     const std::vector<std::string>& run_dirs) {
  VariantReport rep;
  rep.label = label;
  for (const auto& dir : run_dirs) {
    const auto kv = read_kv_file(dir + "/summary.txt");
    ++rep.seeds;
    for (const auto& [k, v] : kv) {
      const std::string prefix = "final.";
      const std::string suffix = ".mean";
      if (k.rfind(prefix, 0) == 0 && k.size() > suffix.size() &&
          k.compare(k.size() - suffix.size(), suffix.size(), suffix) == 0) {
        const std::string col = k.substr(prefix.size(), k.size() - prefix.size() - suffix.size());
        rep.mean_final[col] += std::strtod(v.c_str(), nullptr);
      }
    }
    rep.per_seed_reward_mean.push_back(
        std::strtod(kv.at("final.reward_mean.mean").c_str(), nullptr));
    rep.seconds_per_1000 += std::strtod(kv.at("seconds_per_1000_episodes").c_str(), nullptr);
  }
  if (rep.seeds > 0) {
    for (auto& [k, v] : rep.mean_final) v /= rep.seeds;
    rep.seconds_per_1000 /= rep.seeds;
  }
  return rep;
}

// Seed-mean learning curve of one variant, smoothed with a trailing moving
// average. Returns one value per episode.
inline std::vector<double> seed_mean_curve(const std::vector<std::string>& run_dirs,
                                           const std::string& column, int smooth_window) {
  std::vector<double> mean;
  for (const auto& dir : run_dirs) {
    const RunMetrics m = read_metrics_csv_file(dir + "/metrics.csv");
    const int c = m.column_index(column);
    if (mean.empty()) mean.assign(m.rows.size(), 0.0);
    require(mean.size() == m.rows.size(), "seed_mean_curve: episode counts differ across seeds");
    for (std::size_t r = 0; r < m.rows.size(); ++r) mean[r] += m.rows[r][c];
  }
  for (double& v : mean) v /= static_cast<double>(run_dirs.size());
  if (smooth_window > 1) {
    std::vector<double> out(mean.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      acc += mean[i];
      if (i >= static_cast<std::size_t>(smooth_window)) acc -= mean[i - smooth_window];
      const double denom = std::min<std::size_t>(i + 1, smooth_window);
      out[i] = acc / static_cast<double>(denom);
    }
    return out;
  }
  return mean;
}

// First episode at which a smoothed curve reaches `level` (for curves that
// improve upwards). -1 when it never does.
inline long first_reach_episode(const std::vector<double>& curve, double level) {
  for (std::size_t i = 0; i < curve.size(); ++i)
    if (curve[i] >= level) return static_cast<long>(i);
  return -1;
}

struct DriverOptions {
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  int smooth_window = 200;
};

struct NamedRuns {
  std::string label;
  std::vector<std::string> dirs;
};

namespace driverdetail {

inline std::vector<std::string> dirs_for(const std::vector<PlannedRun>& runs,
                                         const std::string& label) {
  std::vector<std::string> out;
  for (const auto& r : runs)
    if (r.label == label) out.push_back(r.dir);
  return out;
}

inline void write_variant_table(std::ostream& os, const std::vector<VariantReport>& reports) {
  os << "variant seeds reward_mean";
  if (!reports.empty()) {
    for (const auto& [k, v] : reports.front().mean_final)
      if (k != "reward_mean") os << " " << k;
  }
  os << " s_per_1000_ep\n";
  for (const auto& rep : reports) {
    os << rep.label << " " << rep.seeds << " " << rep.mean_final.at("reward_mean");
    for (const auto& [k, v] : rep.mean_final)
      if (k != "reward_mean") os << " " << v;
    os << " " << rep.seconds_per_1000 << "\n";
  }
}

inline void write_curves_csv(const std::string& path, const std::vector<NamedRuns>& variants,
                             const std::string& column, int smooth_window) {
  std::vector<std::vector<double>> curves;
  std::size_t episodes = 0;
  for (const auto& v : variants) {
    curves.push_back(seed_mean_curve(v.dirs, column, smooth_window));
    episodes = curves.back().size();
  }
  std::ofstream os(path);
  os << "episode";
  for (const auto& v : variants) os << "," << v.label;
  os << "\n";
  for (std::size_t e = 0; e < episodes; ++e) {
    os << e;
    for (const auto& c : curves) os << "," << c[e];
    os << "\n";
  }
}

}  // namespace driverdetail

// Equal-budget comparison of EA(E=3) against the three shuffle-free ways of
// spending 4 passes per 100 steps. Writes report.txt plus aligned seed-mean
// curves, and returns the per-variant reports keyed ea3/t25/oneplus4/onex4.
inline std::vector<VariantReport> run_ablation_shuffle(const std::string& cli,
                                                       const TrainConfig& base,
                                                       const std::string& out_root,
                                                       const DriverOptions& opt) {
  std::vector<PlannedRun> runs;
  auto plan = [&](const std::string& label, const std::string& mode, int ea) {
    for (auto seed : opt.seeds) {
      TrainConfig c = base;
      c.ablation_mode = mode;
      c.ea_times = ea;
      c.seed = seed;
      c.out_dir = out_root + "/" + label + "/seed" + std::to_string(seed);
      runs.push_back(PlannedRun{c, label, c.out_dir});
    }
  };
  plan("ea3", "none", 3);
  plan("t25", "t25", 0);
  plan("oneplus4", "oneplus4", 0);
  plan("onex4", "onex4", 0);
  const int failures = execute_runs(cli, runs, opt.jobs);
  require(failures == 0, "run_ablation_shuffle: some runs failed");

  std::vector<VariantReport> reports;
  std::vector<NamedRuns> named;
  for (const std::string label : {"ea3", "t25", "oneplus4", "onex4"}) {
    const auto dirs = driverdetail::dirs_for(runs, label);
    reports.push_back(collect_variant(label, dirs));
    named.push_back(NamedRuns{label, dirs});
  }
  std::ofstream os(out_root + "/report.txt");
  driverdetail::write_variant_table(os, reports);
  driverdetail::write_curves_csv(out_root + "/curves.csv", named, "reward_mean",
                                 opt.smooth_window);
  return reports;
}

// One run per (E, seed); table of final-window metrics and wall time per
// 1000 episodes, one row per E.
inline std::vector<VariantReport> run_ea_sweep(const std::string& cli, const TrainConfig& base,
                                               const std::vector<int>& e_values,
                                               const std::string& out_root,
                                               const DriverOptions& opt) {
  std::vector<PlannedRun> runs;
  for (int e : e_values) {
    require(e >= 0, "run_ea_sweep: negative E");
    for (auto seed : opt.seeds) {
      TrainConfig c = base;
      c.ablation_mode = "none";
      c.ea_times = e;
      c.seed = seed;
      const std::string label = "E" + std::to_string(e);
      c.out_dir = out_root + "/" + label + "/seed" + std::to_string(seed);
      runs.push_back(PlannedRun{c, label, c.out_dir});
    }
  }
  const int failures = execute_runs(cli, runs, opt.jobs);
  require(failures == 0, "run_ea_sweep: some runs failed");

  std::vector<VariantReport> reports;
  std::vector<NamedRuns> named;
  for (int e : e_values) {
    const std::string label = "E" + std::to_string(e);
    const auto dirs = driverdetail::dirs_for(runs, label);
    reports.push_back(collect_variant(label, dirs));
    named.push_back(NamedRuns{label, dirs});
  }
  std::ofstream os(out_root + "/report.txt");
  driverdetail::write_variant_table(os, reports);
  driverdetail::write_curves_csv(out_root + "/curves.csv", named, "reward_mean",
                                 opt.smooth_window);
  return reports;
}

struct CrossplayOptions : DriverOptions {
  bool include_ea_predators = true;
};

// Cross-play in the heterogeneous world: a vanilla-vs-vanilla baseline plus
// runs where exactly one team trains with EA. Refuses single-group
// scenarios, where there is no opponent to pit against.
inline std::vector<VariantReport> run_crossplay(const std::string& cli, const TrainConfig& base,
                                                const std::string& out_root,
                                                const CrossplayOptions& opt) {
  require(base.scenario == "world", "run_crossplay: needs a scenario with >= 2 groups");
  require(base.ea_times >= 1, "run_crossplay: the EA side needs ea_times >= 1");
  std::vector<PlannedRun> runs;
  auto plan = [&](const std::string& label, const std::string& team) {
    for (auto seed : opt.seeds) {
      TrainConfig c = base;
      c.ablation_mode = "none";
      c.ea_team = team;
      c.seed = seed;
      c.out_dir = out_root + "/" + label + "/seed" + std::to_string(seed);
      runs.push_back(PlannedRun{c, label, c.out_dir});
    }
  };
  plan("baseline", "none");
  plan("ea_preys", "preys");
  if (opt.include_ea_predators) plan("ea_predators", "predators");
  const int failures = execute_runs(cli, runs, opt.jobs);
  require(failures == 0, "run_crossplay: some runs failed");

  std::vector<VariantReport> reports;
  std::vector<NamedRuns> named;
  std::vector<std::string> labels = {"baseline", "ea_preys"};
  if (opt.include_ea_predators) labels.push_back("ea_predators");
  for (const auto& label : labels) {
    const auto dirs = driverdetail::dirs_for(runs, label);
    reports.push_back(collect_variant(label, dirs));
    named.push_back(NamedRuns{label, dirs});
  }
  std::ofstream os(out_root + "/report.txt");
  driverdetail::write_variant_table(os, reports);
  driverdetail::write_curves_csv(out_root + "/curves.csv", named, "caught", opt.smooth_window);
  return reports;
}

}  // namespace eamarl

// Command-line front end: single-run training plus the sweep, ablation and
// cross-play drivers that fan runs out as child processes of this binary.

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eamarl/drivers.hpp"
#include "eamarl/train.hpp"

namespace {

std::string self_path() {
  char buf[4096];
  const ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (n <= 0) return "";
  buf[n] = '\0';
  return std::string(buf);
}

// Every TrainConfig field is a flag of the same name (kebab-case aliases for
// the multiword ones).
void add_config_flags(CLI::App* cmd, eamarl::TrainConfig& cfg, std::string& config_path) {
  cmd->add_option("--config", config_path, "flat key = value config file, applied before flags");
  cmd->add_option("--scenario", cfg.scenario, "coop_nav | world");
  cmd->add_option("--episodes", cfg.episodes);
  cmd->add_option("--max_episode_len,--max-episode-len", cfg.max_episode_len);
  cmd->add_option("--tau", cfg.tau, "environment steps between update blocks");
  cmd->add_option("--n", cfg.n, "batches per update block");
  cmd->add_option("--ea_times,--ea-times", cfg.ea_times, "extra shuffled passes per batch");
  cmd->add_option("--batch_size,--batch-size", cfg.batch_size);
  cmd->add_option("--buffer_capacity,--buffer-capacity", cfg.buffer_capacity);
  cmd->add_option("--gamma", cfg.gamma);
  cmd->add_option("--lr_actor,--lr-actor", cfg.lr_actor);
  cmd->add_option("--lr_critic,--lr-critic", cfg.lr_critic);
  cmd->add_option("--seed", cfg.seed);
  cmd->add_option("--ablation_mode,--ablation-mode", cfg.ablation_mode,
                  "none | t25 | oneplus4 | onex4");
  cmd->add_option("--eval_window,--eval-window", cfg.eval_window);
  cmd->add_option("--hidden_units,--hidden-units", cfg.hidden_units);
  cmd->add_option("--soft_alpha,--soft-alpha", cfg.soft_alpha);
  cmd->add_option("--noise_start,--noise-start", cfg.noise_start);
  cmd->add_option("--noise_end,--noise-end", cfg.noise_end);
  cmd->add_option("--grad_clip,--grad-clip", cfg.grad_clip);
  cmd->add_option("--exclude_identity,--exclude-identity", cfg.exclude_identity);
  cmd->add_option("--mask_on_done,--mask-on-done", cfg.mask_on_done);
  cmd->add_option("--algo", cfg.algo, "maddpg | ddpg");
  cmd->add_option("--ea_team,--ea-team", cfg.ea_team, "all | none | predators | preys");
  cmd->add_option("--bound_coef,--bound-coef", cfg.bound_coef,
                  "world: prey out-of-bounds penalty scale");
  cmd->add_option("--fill_batches,--fill-batches", cfg.fill_batches);
  cmd->add_option("--out_dir,--out-dir", cfg.out_dir);
  cmd->add_option("--dump_trajectory,--dump-trajectory", cfg.dump_trajectory);
  cmd->add_option("--dump_buffer,--dump-buffer", cfg.dump_buffer);
  cmd->add_option("--save_checkpoint,--save-checkpoint", cfg.save_checkpoint);
  cmd->add_option("--track_revisits,--track-revisits", cfg.track_revisits);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  std::string cur;
  for (char ch : s + ",") {
    if (ch == ',') {
      if (!cur.empty()) seeds.push_back(std::stoull(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  return seeds;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::string cur;
  for (char ch : s + ",") {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(std::stoi(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"experience-augmented multi-agent training harness"};
  app.require_subcommand(1);

  eamarl::TrainConfig cfg;
  std::string config_path;

  std::string seeds_arg = "1,2,3,4,5";
  std::string evalues_arg = "0,1,3";
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  int smooth_window = 200;
  bool skip_ea_predators = false;

  std::string eval_path;
  long eval_window = 1000;

  CLI::App* train_cmd = app.add_subcommand("train", "run one training job");
  add_config_flags(train_cmd, cfg, config_path);

  CLI::App* ablate_cmd =
      app.add_subcommand("ablate-shuffle", "equal-budget shuffle-necessity comparison");
  add_config_flags(ablate_cmd, cfg, config_path);
  ablate_cmd->add_option("--seeds", seeds_arg, "comma-separated seed list");
  ablate_cmd->add_option("--jobs", jobs, "parallel child processes");
  ablate_cmd->add_option("--smooth_window,--smooth-window", smooth_window);

  CLI::App* sweep_cmd = app.add_subcommand("sweep-ea", "sweep over EA-times values");
  add_config_flags(sweep_cmd, cfg, config_path);
  sweep_cmd->add_option("--seeds", seeds_arg, "comma-separated seed list");
  sweep_cmd->add_option("--e_values,--e-values", evalues_arg, "comma-separated E list");
  sweep_cmd->add_option("--jobs", jobs, "parallel child processes");
  sweep_cmd->add_option("--smooth_window,--smooth-window", smooth_window);

  CLI::App* cross_cmd = app.add_subcommand("crossplay", "EA team vs vanilla team in the world");
  add_config_flags(cross_cmd, cfg, config_path);
  cross_cmd->add_option("--seeds", seeds_arg, "comma-separated seed list");
  cross_cmd->add_option("--jobs", jobs, "parallel child processes");
  cross_cmd->add_option("--smooth_window,--smooth-window", smooth_window);
  cross_cmd->add_flag("--skip_ea_predators,--skip-ea-predators", skip_ea_predators,
                      "only run the baseline and EA-preys pairings");

  CLI::App* eval_cmd = app.add_subcommand("eval", "trailing-window stats of a metrics.csv");
  eval_cmd->add_option("path", eval_path, "metrics.csv or a run directory")->required();
  eval_cmd->add_option("--window", eval_window, "trailing episode count");

  CLI11_PARSE(app, argc, argv);

  try {
    // config file first, command-line flags override it
    if (!config_path.empty()) {
      eamarl::TrainConfig file_cfg;
      eamarl::load_config_file(file_cfg, config_path);
      // re-parse so explicit flags beat the file
      cfg = file_cfg;
      CLI::App reparse{""};
      reparse.allow_extras();
      std::string ignored;
      add_config_flags(&reparse, cfg, ignored);
      std::vector<std::string> args;
      for (int i = argc - 1; i >= 2; --i) args.push_back(argv[i]);
      reparse.parse(args);
    }

    if (app.got_subcommand(train_cmd)) {
      const eamarl::TrainResult res = eamarl::train(cfg);
      const auto stats = eamarl::evaluate(
          res.metrics, std::min<std::size_t>(static_cast<std::size_t>(cfg.eval_window),
                                             res.metrics.rows.size()));
      std::printf("episodes %zu  steps %ld  blocks %ld  s/1000ep %.3f\n", res.metrics.rows.size(),
                  res.metrics.total_steps, res.metrics.update_blocks,
                  res.metrics.seconds_per_1000_episodes);
      for (const auto& [name, st] : stats)
        std::printf("final %-16s mean %.6f  iqr [%.6f, %.6f]\n", name.c_str(), st.mean, st.q25,
                    st.q75);
      return 0;
    }

    if (app.got_subcommand(eval_cmd)) {
      std::string path = eval_path;
      if (std::filesystem::is_directory(path)) path += "/metrics.csv";
      const eamarl::RunMetrics m = eamarl::read_metrics_csv_file(path);
      const auto stats = eamarl::evaluate(
          m, std::min<std::size_t>(static_cast<std::size_t>(eval_window), m.rows.size()));
      for (const auto& [name, st] : stats)
        std::printf("final %-16s mean %.6f  iqr [%.6f, %.6f]\n", name.c_str(), st.mean, st.q25,
                    st.q75);
      return 0;
    }

    const std::string cli = self_path();
    eamarl::DriverOptions opt;
    opt.seeds = parse_seed_list(seeds_arg);
    opt.jobs = jobs;
    opt.smooth_window = smooth_window;
    eamarl::require(!cfg.out_dir.empty(), "drivers need --out-dir as the report root");
    const std::string root = cfg.out_dir;
    cfg.out_dir.clear();  // per-run dirs are planned under the root

    auto print_reports = [](const std::vector<eamarl::VariantReport>& reports) {
      for (const auto& rep : reports) {
        std::printf("%-12s seeds %d  reward_mean %.6f  s/1000ep %.3f", rep.label.c_str(),
                    rep.seeds, rep.mean_final.at("reward_mean"), rep.seconds_per_1000);
        for (const auto& [k, v] : rep.mean_final)
          if (k != "reward_mean" && k != "episode") std::printf("  %s %.6f", k.c_str(), v);
        std::printf("\n");
      }
    };

    if (app.got_subcommand(ablate_cmd)) {
      print_reports(eamarl::run_ablation_shuffle(cli, cfg, root, opt));
    } else if (app.got_subcommand(sweep_cmd)) {
      print_reports(eamarl::run_ea_sweep(cli, cfg, parse_int_list(evalues_arg), root, opt));
    } else if (app.got_subcommand(cross_cmd)) {
      eamarl::CrossplayOptions copt;
      static_cast<eamarl::DriverOptions&>(copt) = opt;
      copt.include_ea_predators = !skip_ea_predators;
      print_reports(eamarl::run_crossplay(cli, cfg, root, copt));
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

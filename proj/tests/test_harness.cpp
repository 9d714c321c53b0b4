#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "catch_amalgamated.hpp"
#include "eamarl/config.hpp"
#include "eamarl/drivers.hpp"
#include "eamarl/metrics.hpp"
#include "eamarl/train.hpp"

using namespace eamarl;

namespace {

// small, fast config: tiny nets, tiny batches, immediate warmup
TrainConfig small_config() {
  TrainConfig c;
  c.scenario = "coop_nav";
  c.episodes = 24;
  c.max_episode_len = 25;
  c.tau = 100;
  c.n = 1;
  c.ea_times = 0;
  c.batch_size = 32;
  c.buffer_capacity = 4000;
  c.hidden_units = 8;
  c.fill_batches = 1;
  c.eval_window = 8;
  c.seed = 7;
  c.save_checkpoint = false;
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& name) : path("/tmp/eamarl_test_" + name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("config file parsing, overrides and validation") {
  TempDir dir("cfg");
  {
    std::ofstream os(dir.path + "/run.cfg");
    os << "# comment line\n";
    os << "scenario = world\n";
    os << "episodes = 123\n";
    os << "ea_times = 5\n";
    os << "exclude_identity = false\n";
    os << "lr_actor = 0.01   # trailing comment\n";
    os << "\n";
  }
  TrainConfig c;
  load_config_file(c, dir.path + "/run.cfg");
  REQUIRE(c.scenario == "world");
  REQUIRE(c.episodes == 123);
  REQUIRE(c.ea_times == 5);
  REQUIRE_FALSE(c.exclude_identity);
  REQUIRE(c.lr_actor == 0.01);
  REQUIRE(c.tau == 100);  // untouched default

  apply_config_entry(c, "tau", "25");
  REQUIRE(c.tau == 25);
  REQUIRE_THROWS_AS(apply_config_entry(c, "no_such_key", "1"), ContractError);

  TrainConfig bad = small_config();
  bad.scenario = "uav";
  REQUIRE_THROWS_AS(validate(bad), ContractError);
  bad = small_config();
  bad.ablation_mode = "2x2";
  REQUIRE_THROWS_AS(validate(bad), ContractError);
  bad = small_config();
  bad.ea_team = "preys";  // needs the world scenario
  REQUIRE_THROWS_AS(validate(bad), ContractError);

  // round-trip through write_config
  TrainConfig out = small_config();
  out.ablation_mode = "onex4";
  write_config_file(dir.path + "/echo.cfg", out);
  TrainConfig in;
  load_config_file(in, dir.path + "/echo.cfg");
  REQUIRE(in.ablation_mode == "onex4");
  REQUIRE(in.episodes == out.episodes);
  REQUIRE(in.batch_size == out.batch_size);
}

TEST_CASE("evaluate: constants, global window, and the linear ramp") {
  RunMetrics m;
  m.columns = {"episode", "value"};
  SECTION("constant metric has zero IQR") {
    for (int e = 0; e < 50; ++e) m.rows.push_back({double(e), 3.25});
    const auto stats = evaluate(m, 20);
    REQUIRE(stats.at("value").mean == 3.25);
    REQUIRE(stats.at("value").q25 == 3.25);
    REQUIRE(stats.at("value").q75 == 3.25);
  }
  SECTION("window = all episodes is the global mean") {
    for (int e = 0; e < 10; ++e) m.rows.push_back({double(e), double(e)});
    const auto stats = evaluate(m, 10);
    REQUIRE_THAT(stats.at("value").mean, Catch::Matchers::WithinAbs(4.5, 1e-12));
  }
  SECTION("synthetic ramp over the trailing window averages to one half") {
    const int total = 300, window = 100;
    for (int e = 0; e < total - window; ++e) m.rows.push_back({double(e), -7.0});
    for (int k = 0; k < window; ++k)
      m.rows.push_back({double(total - window + k), double(k) / (window - 1)});
    const auto stats = evaluate(m, window);
    REQUIRE_THAT(stats.at("value").mean, Catch::Matchers::WithinAbs(0.5, 1e-9));
    REQUIRE(stats.at("value").q25 < stats.at("value").q75);
  }
  SECTION("oversized window is refused") {
    m.rows.push_back({0.0, 1.0});
    REQUIRE_THROWS_AS(evaluate(m, 5), ContractError);
  }
}

TEST_CASE("metrics csv round-trips every double exactly") {
  RunMetrics m;
  m.columns = {"episode", "reward", "weird"};
  Rng rng(3);
  for (int e = 0; e < 40; ++e)
    m.rows.push_back({double(e), rng.uniform(-5.0, 5.0), rng.uniform(-1e-9, 1e9)});
  m.rows.push_back({40.0, -0.0, 1e-300});
  std::stringstream ss;
  write_metrics_csv(ss, m);
  const RunMetrics back = read_metrics_csv(ss);
  REQUIRE(back.columns == m.columns);
  REQUIRE(back.rows.size() == m.rows.size());
  for (std::size_t r = 0; r < m.rows.size(); ++r)
    for (std::size_t c = 0; c < m.columns.size(); ++c) REQUIRE(back.rows[r][c] == m.rows[r][c]);
}

TEST_CASE("train: header schema, row count, and the update-block cadence") {
  TempDir dir("train");
  TrainConfig c = small_config();
  c.episodes = 12;
  c.out_dir = dir.path + "/run";
  c.batch_size = 100;  // warmup ends exactly at step 100
  const TrainResult res = train(c);
  REQUIRE(res.metrics.columns ==
          std::vector<std::string>{"episode", "reward_0", "reward_1", "reward_2", "reward_mean",
                                   "dist", "collisions"});
  REQUIRE(res.metrics.rows.size() == 12);
  REQUIRE(res.metrics.total_steps == 12 * 25);
  // tau=100, 25 steps per episode: one block every 4 episodes once filled
  REQUIRE(res.metrics.update_blocks == 3);
  REQUIRE(res.metrics.grad_passes == std::vector<long>{3, 3, 3});

  REQUIRE(std::filesystem::exists(c.out_dir + "/metrics.csv"));
  REQUIRE(std::filesystem::exists(c.out_dir + "/summary.txt"));
  REQUIRE(std::filesystem::exists(c.out_dir + "/diagnostics.csv"));
  const RunMetrics back = read_metrics_csv_file(c.out_dir + "/metrics.csv");
  REQUIRE(back.rows.size() == 12);
  const auto kv = read_kv_file(c.out_dir + "/summary.txt");
  REQUIRE(kv.count("final.reward_mean.mean") == 1);
  REQUIRE(kv.at("total_steps") == "300");
}

TEST_CASE("train: grad-pass ledger matches floor(steps/tau)*n*(1+E)") {
  for (const int e : {0, 1, 3}) {
    TrainConfig c = small_config();
    c.episodes = 20;          // 500 steps
    c.batch_size = 16;        // threshold 16 < tau, warmup before first block
    c.ea_times = e;
    const TrainResult res = train(c);
    const long expected = (20 * 25 / c.tau) * c.n * (1 + e);
    for (long passes : res.metrics.grad_passes) REQUIRE(passes == expected);
  }
}

TEST_CASE("train: ablation modes keep the 4-per-100 budget") {
  auto passes_of = [](const std::string& mode, int episodes) {
    TrainConfig c = small_config();
    c.episodes = episodes;
    c.batch_size = 16;
    c.ablation_mode = mode;
    c.ea_times = 3;
    const TrainResult res = train(c);
    return res.metrics.grad_passes[0];
  };
  const int episodes = 20;  // 500 steps
  const long ea = passes_of("none", episodes);      // 5 blocks * 4
  const long t25 = passes_of("t25", episodes);      // 20 blocks * 1
  const long plus = passes_of("oneplus4", episodes);
  const long x4 = passes_of("onex4", episodes);
  REQUIRE(ea == 20);
  REQUIRE(t25 == 20);
  REQUIRE(plus == 20);
  REQUIRE(x4 == 20);
}

TEST_CASE("train: byte-identical metrics.csv under a repeated (config, seed)") {
  TempDir dir("det");
  TrainConfig c = small_config();
  c.ea_times = 3;  // exercise the full path including permutation draws
  c.episodes = 16;
  c.out_dir = dir.path + "/a";
  train(c);
  c.out_dir = dir.path + "/b";
  train(c);
  const std::string a = slurp(dir.path + "/a/metrics.csv");
  const std::string b = slurp(dir.path + "/b/metrics.csv");
  REQUIRE(!a.empty());
  REQUIRE(a == b);
  REQUIRE(slurp(dir.path + "/a/diagnostics.csv") == slurp(dir.path + "/b/diagnostics.csv"));
}

TEST_CASE("train: disabling the EA team reproduces the E=0 stream bitwise") {
  TempDir dir("eazero");
  TrainConfig c = small_config();
  c.scenario = "world";
  c.episodes = 10;
  c.batch_size = 16;
  c.ea_times = 3;
  c.ea_team = "none";  // EA requested but nobody enrolled: must equal E=0
  c.out_dir = dir.path + "/team_none";
  train(c);
  TrainConfig c2 = c;
  c2.ea_times = 0;
  c2.ea_team = "all";
  c2.out_dir = dir.path + "/e0";
  train(c2);
  REQUIRE(slurp(c.out_dir + "/metrics.csv") == slurp(c2.out_dir + "/metrics.csv"));
}

TEST_CASE("train: world metrics carry caught counts and per-side rewards") {
  TrainConfig c = small_config();
  c.scenario = "world";
  c.episodes = 6;
  const TrainResult res = train(c);
  REQUIRE(res.metrics.columns ==
          std::vector<std::string>{"episode", "reward_0", "reward_1", "reward_2", "reward_3",
                                   "reward_4", "reward_5", "reward_mean", "caught",
                                   "predator_reward", "prey_reward"});
  // predator side mean is the mean of slots 0..3
  const int pred_col = res.metrics.column_index("predator_reward");
  for (const auto& row : res.metrics.rows) {
    const double mean_preds = (row[1] + row[2] + row[3] + row[4]) / 4.0;
    REQUIRE_THAT(row[pred_col], Catch::Matchers::WithinAbs(mean_preds, 1e-12));
  }
}

TEST_CASE("train: crossplay assignment gives extra passes only to the EA side") {
  TrainConfig c = small_config();
  c.scenario = "world";
  c.episodes = 10;
  c.batch_size = 16;
  c.ea_times = 3;
  c.ea_team = "preys";
  const TrainResult res = train(c);
  const long blocks = res.metrics.update_blocks;
  REQUIRE(blocks > 0);
  for (int i = 0; i < 4; ++i) REQUIRE(res.metrics.grad_passes[i] == blocks);
  for (int i = 4; i < 6; ++i) REQUIRE(res.metrics.grad_passes[i] == blocks * 4);
}

TEST_CASE("train: revisit statistics approach batch*n*(1+E)/tau per lifetime") {
  TrainConfig c = small_config();
  c.episodes = 480;  // 12000 steps
  c.buffer_capacity = 2000;
  c.batch_size = 64;
  c.tau = 20;
  c.ea_times = 3;
  c.hidden_units = 4;
  c.track_revisits = true;
  c.noise_start = 0.3;
  const TrainResult res = train(c);
  REQUIRE(res.metrics.full_life_entries > 5000);
  const double expected = 64.0 * 1.0 * 4.0 / 20.0;  // 12.8
  REQUIRE(std::abs(res.metrics.mean_full_life_revisits - expected) < 0.1 * expected);
}

TEST_CASE("train: trajectory and buffer dumps have the documented shape") {
  TempDir dir("dumps");
  TrainConfig c = small_config();
  c.episodes = 4;
  c.dump_trajectory = dir.path + "/traj.txt";
  c.dump_buffer = dir.path + "/buffer.txt";
  const TrainResult res = train(c);
  (void)res;
  std::ifstream traj(c.dump_trajectory);
  std::string line;
  int rows = 0;
  while (std::getline(traj, line)) {
    std::stringstream ss(line);
    double v;
    int cols = 0;
    while (ss >> v) ++cols;
    // episode step 3*(px py) 3*(ax ay) 3 rewards
    REQUIRE(cols == 2 + 6 + 6 + 3);
    ++rows;
  }
  REQUIRE(rows == 4 * 25);

  std::ifstream bufdump(c.dump_buffer);
  int brows = 0;
  while (std::getline(bufdump, line)) {
    std::stringstream ss(line);
    double v;
    int cols = 0;
    while (ss >> v) ++cols;
    // serial + obs(42) + act(6) + rewards(3) + next_obs(42) + done
    REQUIRE(cols == 1 + 42 + 6 + 3 + 42 + 1);
    ++brows;
  }
  REQUIRE(brows == 100);
}

TEST_CASE("train: checkpoint stores every net and reloads bitwise") {
  TempDir dir("ckpt");
  TrainConfig c = small_config();
  c.episodes = 8;
  c.out_dir = dir.path + "/run";
  c.save_checkpoint = true;
  const TrainResult res = train(c);
  const auto nets = load_params_file(c.out_dir + "/checkpoint.txt");
  REQUIRE(nets.size() == 3 * 4);
  REQUIRE(nets[0].first == "agent0.actor");
  REQUIRE(nets[0].second.W1.data == res.learners[0].nets.actor.W1.data);
  REQUIRE(nets[5].first == "agent1.critic");
  REQUIRE(nets[5].second.W3.data == res.learners[1].nets.critic.W3.data);
}

TEST_CASE("drivers: toy-scale sweep, ablation and crossplay end to end") {
  const char* cli = std::getenv("EAMARL_CLI");
  if (!cli || !std::filesystem::exists(cli)) {
    SKIP("EAMARL_CLI not set; driver test needs the CLI binary");
  }
  TempDir dir("drivers");
  TrainConfig base = small_config();
  base.episodes = 16;
  base.batch_size = 16;  // fill threshold under one t25 interval
  base.ea_times = 3;
  base.out_dir.clear();
  DriverOptions opt;
  opt.seeds = {1, 2};
  opt.jobs = 2;
  opt.smooth_window = 4;

  SECTION("sweep-ea") {
    const auto reports = run_ea_sweep(cli, base, {0, 1}, dir.path + "/sweep", opt);
    REQUIRE(reports.size() == 2);
    REQUIRE(reports[0].label == "E0");
    REQUIRE(reports[0].seeds == 2);
    REQUIRE(reports[1].mean_final.count("reward_mean") == 1);
    REQUIRE(std::filesystem::exists(dir.path + "/sweep/report.txt"));
    REQUIRE(std::filesystem::exists(dir.path + "/sweep/curves.csv"));
    REQUIRE(std::filesystem::exists(dir.path + "/sweep/E1/seed2/metrics.csv"));
    // wall time must grow with E (more gradient passes per block)
    REQUIRE(reports[1].seconds_per_1000 > reports[0].seconds_per_1000);
    const RunMetrics curves = read_metrics_csv_file(dir.path + "/sweep/curves.csv");
    REQUIRE(curves.columns == std::vector<std::string>{"episode", "E0", "E1"});
    REQUIRE(curves.rows.size() == 16);
  }
  SECTION("ablate-shuffle") {
    const auto reports = run_ablation_shuffle(cli, base, dir.path + "/abl", opt);
    REQUIRE(reports.size() == 4);
    REQUIRE(reports[0].label == "ea3");
    REQUIRE(reports[3].label == "onex4");
    // equal budget: every variant ran 4 passes per 100 steps
    for (const auto& rep : reports) REQUIRE(rep.seeds == 2);
    const auto kv =
        read_kv_file(dir.path + "/abl/t25/seed1/summary.txt");
    const auto kv_ea =
        read_kv_file(dir.path + "/abl/ea3/seed1/summary.txt");
    REQUIRE(kv.at("grad_passes_agent_0") == kv_ea.at("grad_passes_agent_0"));
  }
  SECTION("crossplay") {
    TrainConfig world = base;
    world.scenario = "world";
    world.episodes = 12;
    CrossplayOptions copt;
    static_cast<DriverOptions&>(copt) = opt;
    copt.include_ea_predators = true;
    const auto reports = run_crossplay(cli, world, dir.path + "/cross", copt);
    REQUIRE(reports.size() == 3);
    REQUIRE(reports[0].label == "baseline");
    REQUIRE(reports[1].label == "ea_preys");
    REQUIRE(reports[2].label == "ea_predators");
    REQUIRE(reports[0].mean_final.count("caught") == 1);
    // the baseline trains nobody with EA: every agent has the same pass count
    const auto kv = read_kv_file(dir.path + "/cross/baseline/seed1/summary.txt");
    REQUIRE(kv.at("grad_passes_agent_0") == kv.at("grad_passes_agent_5"));
    // EA preys get 4x the passes of their predators
    const auto kv2 = read_kv_file(dir.path + "/cross/ea_preys/seed1/summary.txt");
    const long pred = std::stol(kv2.at("grad_passes_agent_0"));
    const long prey = std::stol(kv2.at("grad_passes_agent_5"));
    REQUIRE(prey == 4 * pred);

    TrainConfig single = base;
    single.scenario = "coop_nav";
    REQUIRE_THROWS_AS(run_crossplay(cli, single, dir.path + "/bad", copt), ContractError);
  }
}

TEST_CASE("noise schedule decays linearly over the first half then holds") {
  TrainConfig c = small_config();
  c.episodes = 100;
  c.noise_start = 0.3;
  c.noise_end = 0.05;
  REQUIRE(traindetail::noise_for_episode(c, 0) == 0.3);
  REQUIRE(traindetail::noise_for_episode(c, 50) == 0.05);
  REQUIRE(traindetail::noise_for_episode(c, 99) == 0.05);
  const double early = traindetail::noise_for_episode(c, 10);
  const double later = traindetail::noise_for_episode(c, 40);
  REQUIRE(early > later);
  REQUIRE(later > 0.05);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mousse/harness.hpp"

using namespace mousse;
namespace fs = std::filesystem;

namespace {

const char* kBase = R"(
name = unit
seed = 3
total_steps = 60
log_every = 1
problem = kron_quadratic
problem.rows = 8
problem.cols = 6
problem.kappa = 100
problem.noise_sigma = 0.001
schedule.kind = cosine
schedule.peak_lr = 0.05
optimizer = mousse
)";

// Lines in `extra` replace base lines with the same key.
std::string merged(const std::string& extra) {
  std::vector<std::pair<std::string, std::string>> lines;
  for (const std::string& text : {std::string(kBase), extra}) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, line.find_last_not_of(' ', eq - 1) + 1);
      auto it = std::find_if(lines.begin(), lines.end(), [&](const auto& kv) { return kv.first == key; });
      if (it != lines.end()) it->second = line;
      else lines.emplace_back(key, line);
    }
  }
  std::string out;
  for (const auto& kv : lines) out += kv.second + "\n";
  return out;
}

RunConfig base_config(const std::string& extra = "") {
  return parse_run_config(KeyValueConfig::parse(merged(extra)));
}

std::string csv_of(const RunRecord& r) {
  std::ostringstream out;
  write_csv(r, out);
  return out.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mousse_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Config, ParsesKeysAndComments) {
  const auto kv = KeyValueConfig::parse("# comment\na = 1\n\nb = x y # trailing\nlist = 1, 2,3\n");
  EXPECT_EQ(kv.get_long("a", 0), 1);
  EXPECT_EQ(kv.get_string("b", ""), "x y");
  EXPECT_EQ(kv.get_double_list("list"), (std::vector<double>{1, 2, 3}));
  EXPECT_NO_THROW(kv.require_all_used());
}

TEST(Config, RejectsDuplicatesUnknownAndMalformed) {
  EXPECT_THROW(KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse("no equals sign\n"), ConfigError);
  EXPECT_THROW(base_config("optim.alhpa = 0.1\n"), ConfigError);
  EXPECT_THROW(base_config("optimizer = sgd\n"), ConfigError);
  EXPECT_THROW(parse_run_config(KeyValueConfig::parse("total_steps = ten\n")), ConfigError);
  EXPECT_THROW(base_config("log_every = 0\n"), ConfigError);
}

TEST(Config, LoadMissingFileIsIoError) {
  EXPECT_THROW(load_run_config("/nonexistent/run.cfg"), IoError);
}

TEST(Config, ShippedConfigParses) {
  const auto cfg = load_run_config(fs::path(MOUSSE_SOURCE_DIR) / "configs" / "kron_mousse.cfg");
  EXPECT_EQ(cfg.schedule.kind, ScheduleKind::wsd);
  EXPECT_EQ(cfg.optimizer.kind, OptimizerKind::mousse);
  EXPECT_EQ(cfg.lr_grid.size(), 5u);
  for (const auto& entry : fs::directory_iterator(fs::path(MOUSSE_SOURCE_DIR) / "configs")) {
    SCOPED_TRACE(entry.path().string());
    EXPECT_NO_THROW(load_run_config(entry.path()));
  }
}

TEST(Checkpoint, RoundTripAndErrors) {
  Checkpoint ck;
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  ck.put("m", m);
  ck.put_scalar("s", 2.5);
  const auto back = Checkpoint::deserialize(ck.serialize());
  EXPECT_EQ(back.get("m"), m);
  EXPECT_EQ(back.get_scalar("s"), 2.5);
  EXPECT_THROW(back.get("missing"), IoError);
  std::string bytes = ck.serialize();
  bytes[0] = 'X';
  EXPECT_THROW(Checkpoint::deserialize(bytes), IoError);
  EXPECT_THROW(Checkpoint::deserialize(ck.serialize().substr(0, 20)), IoError);
  EXPECT_THROW(Checkpoint::read("/nonexistent/x.ckpt"), IoError);
}

TEST(Harness, SameConfigTwiceIsBitIdentical) {
  const auto cfg = base_config();
  EXPECT_EQ(csv_of(run_experiment(cfg)), csv_of(run_experiment(cfg)));
}

TEST(Harness, ZeroLrKeepsLossConstant) {
  for (const char* opt : {"mousse", "muon", "shampoo", "soap", "adamw", "lion", "elementwise"}) {
    SCOPED_TRACE(opt);
    const auto r = run_experiment(base_config(
        std::string("schedule.kind = constant\nschedule.peak_lr = 0\nweight_decay = 0\noptimizer = ") + opt + "\n"));
    for (const auto& row : r.rows) EXPECT_EQ(row.eval_loss, r.rows.front().eval_loss);
  }
}

TEST(Harness, LoggingCadenceAndColumns) {
  const auto cfg = base_config("log_every = 7\n");
  const auto r = run_experiment(cfg);
  std::vector<long> steps;
  for (const auto& row : r.rows) steps.push_back(row.step);
  EXPECT_EQ(steps, (std::vector<long>{0, 7, 14, 21, 28, 35, 42, 49, 56, 60}));
  const auto cols = csv_columns(2);
  const std::vector<std::string> expected{"step",         "lr",          "train_loss",  "eval_loss",
                                          "P0_update_rms", "P0_gamma",    "P0_condL",    "P0_condR",
                                          "P0_rmsL",       "P0_rmsR",     "P1_update_rms", "P1_gamma",
                                          "P1_condL",      "P1_condR",    "P1_rmsL",     "P1_rmsR"};
  EXPECT_EQ(cols, expected);
  const std::string csv = csv_of(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "step,lr,train_loss,eval_loss,P0_update_rms,P0_gamma,P0_condL,P0_condR,P0_rmsL,P0_rmsR");
}

TEST(Harness, MetricsPresenceFollowsOptimizer) {
  const auto mousse = run_experiment(base_config("total_steps = 5\n"));
  const auto& m = mousse.rows.back().params.front();
  EXPECT_TRUE(m.gamma && m.cond_l && m.cond_r && m.rms_l && m.rms_r && m.update_rms);
  EXPECT_GE(*m.cond_l, 1.0);
  const auto adam = run_experiment(base_config("total_steps = 5\noptimizer = adamw\n"));
  const auto& a = adam.rows.back().params.front();
  EXPECT_TRUE(a.update_rms.has_value());
  EXPECT_FALSE(a.gamma || a.cond_l || a.rms_r);
}

TEST(Harness, MlpWithBiasUsesThreeParameters) {
  const auto cfg = parse_run_config(KeyValueConfig::parse(
      "total_steps = 10\nproblem = mlp\nproblem.d_in = 4\nproblem.hidden = 6\nproblem.d_out = 2\n"
      "problem.samples = 32\nproblem.batch_size = 8\nproblem.embedding = true\nschedule.peak_lr = 0.01\n"));
  const auto r = run_experiment(cfg);
  EXPECT_EQ(r.param_names.size(), 3u);
  EXPECT_EQ(r.rows.back().params.size(), 3u);
  EXPECT_FALSE(r.summary.diverged);
  EXPECT_TRUE(std::isfinite(r.summary.final_eval_loss));
}

TEST(Harness, DivergentLrIsFlaggedAndExcludedFromGrid) {
  auto cfg = base_config("optimizer = shampoo\nlr_grid = 0.01, 1e6\ndivergence_factor = 10\n");
  const auto grid = grid_search(cfg, 2);
  ASSERT_EQ(grid.records.size(), 2u);
  EXPECT_TRUE(grid.records[1].summary.diverged);
  ASSERT_TRUE(grid.best.has_value());
  EXPECT_EQ(*grid.best, 0u);
  EXPECT_EQ(grid.records[0].config.name, "unit_lr0.01");
}

TEST(Harness, GridOfOneMatchesSingleRun) {
  auto cfg = base_config("lr_grid = 0.05\n");
  const auto grid = grid_search(cfg);
  ASSERT_TRUE(grid.best.has_value());
  EXPECT_EQ(grid.records[0].summary.final_eval_loss, run_experiment(base_config()).summary.final_eval_loss);
}

TEST(Harness, ExcessiveLossContract) {
  EXPECT_THROW(excessive_loss(run_experiment(base_config())), ContractError);
  auto cfg = base_config("schedule.kind = wsd\nschedule.decay_frac = 0.2\n");
  cfg.schedule.total_steps = 60;
  auto partial = run_experiment(cfg);
  partial.rows.resize(10);
  EXPECT_THROW(excessive_loss(partial), ContractError);
}

TEST(Harness, ExcessiveLossOnPlateau) {
  const auto cfg = parse_run_config(KeyValueConfig::parse(
      "total_steps = 100\nlog_every = 1\nproblem.rows = 4\nproblem.cols = 3\nproblem.noise_sigma = 0\n"
      "schedule.kind = wsd\nschedule.decay_frac = 0.2\nschedule.peak_lr = 1e-9\nweight_decay = 0\n"));
  const auto r = run_experiment(cfg);
  const auto ex = excessive_loss(r);
  EXPECT_NEAR(ex.delta, 0.0, 1e-6 * ex.final_loss);
  EXPECT_FALSE(ex.anomaly);
  EXPECT_EQ(ex.final_loss, r.summary.final_eval_loss);
}

TEST(Harness, RecordRoundTripThroughFiles) {
  const fs::path dir = fresh_dir("record");
  const auto r = run_experiment(base_config("optimizer = muon\nthreshold = 1e9\n"));
  for (auto format : {OutputFormat::csv, OutputFormat::json}) {
    const fs::path path = write_record(r, dir, format);
    const auto back = read_record(path);
    EXPECT_EQ(csv_of(back), csv_of(r));
    EXPECT_EQ(back.summary.final_eval_loss, r.summary.final_eval_loss);
    EXPECT_EQ(back.summary.steps_to_threshold, r.summary.steps_to_threshold);
    EXPECT_EQ(to_json(back.config), to_json(r.config));
  }
  EXPECT_TRUE(fs::exists(dir / "unit.timing.json"));
  EXPECT_THROW(read_record(dir / "missing.json"), IoError);
}

TEST(Harness, CheckpointResumeReproducesTail) {
  const fs::path dir = fresh_dir("resume");
  RunOptions options;
  options.out_dir = dir;
  const auto full = run_experiment(base_config("checkpoint_at = 25\n"), options);
  const fs::path ck = dir / "unit.step25.ckpt";
  ASSERT_TRUE(fs::exists(ck));
  const auto resumed = run_experiment(base_config("resume = " + ck.string() + "\n"));
  ASSERT_EQ(resumed.rows.back().step, 60);
  for (const auto& row : resumed.rows) {
    if (row.step <= 25) continue;
    const auto& ref = full.rows[static_cast<std::size_t>(row.step)];
    ASSERT_EQ(ref.step, row.step);
    EXPECT_NEAR(row.eval_loss, ref.eval_loss, 1e-12 * std::abs(ref.eval_loss));
  }
  EXPECT_THROW(run_experiment(base_config("optimizer = muon\nresume = " + ck.string() + "\n")), IoError);
}

TEST(Harness, StepsToThreshold) {
  const auto r = run_experiment(base_config());
  EXPECT_EQ(steps_to_threshold(r, 1e12), 0);
  EXPECT_FALSE(steps_to_threshold(r, -1.0).has_value());
}

TEST(Report, BaselineAndColumns) {
  std::vector<RunRecord> runs{run_experiment(base_config("name = a\noptimizer = muon\n")),
                              run_experiment(base_config("name = b\n"))};
  const auto report = build_report(runs, {});
  EXPECT_EQ(report["baseline"], "a");
  EXPECT_EQ(report["runs"].size(), 2u);
  EXPECT_EQ(report["threshold"].get<double>(), runs[0].summary.final_eval_loss);
  EXPECT_EQ(report["runs"][0]["steps_to_threshold"].get<long>(),
            *steps_to_threshold(runs[0], runs[0].summary.final_eval_loss));
  EXPECT_NEAR(report["runs"][0]["step_time_vs_muon"].get<double>(), 1.0, 1e-12);
  std::ostringstream out;
  write_report_csv(report, out);
  EXPECT_EQ(out.str().substr(0, 30), "name,optimizer,schedule,peak_l");
  ReportOptions missing;
  missing.baseline = "zzz";
  EXPECT_THROW(build_report(runs, missing), ConfigError);
  EXPECT_THROW(build_report({}, {}), ConfigError);
}

TEST(Selftest, AllChecksPass) {
  std::ostringstream out;
  EXPECT_EQ(run_selftest(out), 0) << out.str();
}

TEST(Format, DoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mousse/config.hpp"
#include "mousse/testbed.hpp"

namespace mousse {

/// A differentiable objective over a list of parameter matrices.
class Problem {
 public:
  virtual ~Problem() = default;
  virtual std::vector<std::string> param_names() const = 0;
  virtual std::vector<Matrix> initial_params() const = 0;
  /// Stochastic loss at `step` (1-based) and its gradients.
  virtual double train(const std::vector<Matrix>& params, long step, std::vector<Matrix>& grads) const = 0;
  /// Deterministic evaluation loss.
  virtual double eval_loss(const std::vector<Matrix>& params) const = 0;
};

std::unique_ptr<Problem> make_problem(const ProblemSpec& spec, std::uint64_t seed);

/// Metrics for one parameter at one logged step; absent values are empty.
struct ParamMetrics {
  std::optional<double> update_rms;
  std::optional<double> gamma;
  std::optional<double> cond_l;
  std::optional<double> cond_r;
  std::optional<double> rms_l;
  std::optional<double> rms_r;
};

struct LogRow {
  long step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double eval_loss = 0.0;
  std::vector<ParamMetrics> params;
};

struct RunSummary {
  double final_eval_loss = 0.0;
  std::optional<long> steps_to_threshold;
  long steps_completed = 0;
  bool diverged = false;
  std::optional<long> diverged_at;
};

/// Host-dependent timing, kept apart from the deterministic record.
struct RunTiming {
  double wall_time_s = 0.0;
  double mean_step_ms = 0.0;
};

struct RunRecord {
  RunConfig config;
  std::vector<std::string> param_names;
  std::vector<LogRow> rows;
  RunSummary summary;
  RunTiming timing;
};

struct RunOptions {
  /// When set, checkpoints (checkpoint_at) are written here.
  std::optional<std::filesystem::path> out_dir;
};

/// Trains `cfg.optimizer` on `cfg.problem` under `cfg.schedule`.
///
/// Step 0 logs the initial state. Each step s in 1..total draws the training
/// gradient, steps every parameter with lr = lr_at(s), and logs when
/// s % log_every == 0 or s == total. Non-finite loss or loss above
/// divergence_factor * initial loss stops the run and marks it diverged.
RunRecord run_experiment(const RunConfig& cfg, const RunOptions& options = {});

struct GridResult {
  std::vector<double> lrs;
  std::vector<RunRecord> records;
  /// Index of the lowest final eval loss among non-diverged runs (ties go to
  /// the smaller lr); empty when every run diverged.
  std::optional<std::size_t> best;
};

/// Runs cfg once per entry of cfg.lr_grid with identical seeds.
GridResult grid_search(const RunConfig& cfg, int threads = 1, const RunOptions& options = {});

/// First logged step whose eval loss is <= threshold.
std::optional<long> steps_to_threshold(const RunRecord& record, double threshold);

struct ExcessiveLoss {
  double stable_loss = 0.0;
  double final_loss = 0.0;
  /// stable_loss - final_loss
  double delta = 0.0;
  /// delta below -1e-6
  bool anomaly = false;
};

/// L_stable - L_decay for a WSD run: mean eval loss over the last
/// `window_frac` of the stable phase minus the final eval loss.
ExcessiveLoss excessive_loss(const RunRecord& record, double window_frac = 0.05);

enum class OutputFormat { csv, json };

/// Header and rows with the fixed column order
/// step, lr, train_loss, eval_loss, P<i>_update_rms, P<i>_gamma, P<i>_condL,
/// P<i>_condR, P<i>_rmsL, P<i>_rmsR. Missing values are empty fields.
std::vector<std::string> csv_columns(std::size_t num_params);
void write_csv(const RunRecord& record, std::ostream& out);

/// Config, parameter names and summary; rows are embedded when requested.
nlohmann::ordered_json record_to_json(const RunRecord& record, bool include_rows);

/// Writes <dir>/<name>.json (+ <name>.csv for csv format) and
/// <name>.timing.json. Returns the path of the JSON record.
std::filesystem::path write_record(const RunRecord& record, const std::filesystem::path& dir,
                                   OutputFormat format);

/// Reads a record written by write_record (rows come from the sibling CSV
/// when the JSON does not embed them). Timing is loaded when present.
RunRecord read_record(const std::filesystem::path& json_path);

struct ReportOptions {
  std::optional<std::string> baseline;
  std::optional<double> threshold;
  double window_frac = 0.05;
};

/// Summary table over records: final loss, steps to the baseline's final
/// loss, excessive loss for WSD runs, and step-time ratio against Muon.
nlohmann::ordered_json build_report(const std::vector<RunRecord>& records, const ReportOptions& options);
void write_report_csv(const nlohmann::ordered_json& report, std::ostream& out);

/// Oracle checks runnable from the CLI. Returns the number of failures.
int run_selftest(std::ostream& out);

/// Shortest decimal form that reads back as the same double.
std::string format_double(double v);

}  // namespace mousse

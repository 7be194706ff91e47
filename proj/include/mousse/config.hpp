#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mousse/optim.hpp"
#include "mousse/sched.hpp"
#include "mousse/testbed.hpp"

namespace mousse {

/// Flat `key = value` text. `#` starts a comment; blank lines are ignored.
/// Every key must be read by the consumer, so typos surface as errors.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, const std::string& origin = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::optional<double> get_optional_double(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  /// Throws ConfigError naming every key nobody asked for.
  void require_all_used() const;

  const std::string& origin() const { return origin_; }

 private:
  const std::string* lookup(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::string origin_;
};

enum class ProblemKind { kron_quadratic, mlp };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::kron_quadratic;
  // kron_quadratic
  long rows = 32;
  long cols = 32;
  double kappa = 1e3;
  double noise_sigma = 1e-3;
  double target_scale = 1.0;
  TargetDist target = TargetDist::gaussian;
  // mlp
  long d_in = 16;
  long hidden = 32;
  long d_out = 8;
  long samples = 512;
  long batch_size = 64;
  double obs_noise = 1e-3;
  /// Adds a 1 x d_out bias row, stepped by Lion under matrix-wise optimizers.
  bool embedding = false;
  /// Multiplies the loss and therefore every gradient.
  double loss_scale = 1.0;
};

struct RunConfig {
  std::string name = "run";
  ProblemSpec problem{};
  OptimizerSettings optimizer{};
  ScheduleSpec schedule{};
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  long log_every = 10;
  std::vector<double> lr_grid;
  /// Eval-loss level for steps-to-threshold in the run summary.
  std::optional<double> threshold;
  /// Fraction of the WSD stable phase averaged for the excessive loss.
  double excess_window = 0.05;
  /// A run is diverged once its loss exceeds this multiple of the initial loss.
  double divergence_factor = 1e6;
  /// Write a checkpoint after this step (0 disables).
  long checkpoint_at = 0;
  /// Continue from this checkpoint instead of the initial state.
  std::string resume;

  long total_steps() const { return schedule.total_steps; }
  void validate() const;
};

RunConfig parse_run_config(const KeyValueConfig& kv);
RunConfig load_run_config(const std::filesystem::path& path);

/// JSON view of a config, with the same key names as the text format.
nlohmann::ordered_json to_json(const RunConfig& cfg);

}  // namespace mousse

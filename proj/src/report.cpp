#include <algorithm>
#include <cmath>
#include <ostream>

#include "mousse/harness.hpp"

namespace mousse {

namespace {

const RunRecord& pick_baseline(const std::vector<RunRecord>& records, const ReportOptions& options) {
  if (options.baseline) {
    for (const auto& r : records) {
      if (r.config.name == *options.baseline) return r;
    }
    throw ConfigError("report: baseline run '" + *options.baseline + "' not found");
  }
  for (const auto& r : records) {
    if (r.config.optimizer.kind == OptimizerKind::muon) return r;
  }
  return records.front();
}

const RunRecord* first_muon(const std::vector<RunRecord>& records) {
  for (const auto& r : records) {
    if (r.config.optimizer.kind == OptimizerKind::muon && r.timing.mean_step_ms > 0.0) return &r;
  }
  return nullptr;
}

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

std::string csv_cell(const nlohmann::ordered_json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return format_double(v.get<double>());
  return v.dump();
}

}  // namespace

nlohmann::ordered_json build_report(const std::vector<RunRecord>& records, const ReportOptions& options) {
  if (records.empty()) throw ConfigError("report: no runs");
  const RunRecord& baseline = pick_baseline(records, options);
  const double threshold = options.threshold.value_or(baseline.summary.final_eval_loss);
  const RunRecord* muon = first_muon(records);

  nlohmann::ordered_json report;
  report["baseline"] = baseline.config.name;
  report["threshold"] = number_or_null(threshold);
  auto runs = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json row;
    row["name"] = r.config.name;
    row["optimizer"] = to_string(r.config.optimizer.kind);
    row["schedule"] = to_string(r.config.schedule.kind);
    row["peak_lr"] = r.config.schedule.peak_lr;
    row["diverged"] = r.summary.diverged;
    row["final_eval_loss"] = number_or_null(r.summary.final_eval_loss);
    const auto reached = std::isfinite(threshold) ? steps_to_threshold(r, threshold) : std::nullopt;
    row["steps_to_threshold"] = nullptr;
    if (reached) row["steps_to_threshold"] = *reached;
    row["excessive_loss"] = nullptr;
    row["excessive_anomaly"] = nullptr;
    if (r.config.schedule.kind == ScheduleKind::wsd && !r.summary.diverged) {
      try {
        const auto ex = excessive_loss(r, options.window_frac);
        row["excessive_loss"] = ex.delta;
        row["excessive_anomaly"] = ex.anomaly;
      } catch (const ContractError&) {
        // too coarse a log or an incomplete run: leave the cells empty
      }
    }
    row["mean_step_ms"] = r.timing.mean_step_ms;
    row["step_time_vs_muon"] =
        muon ? number_or_null(r.timing.mean_step_ms / muon->timing.mean_step_ms) : nlohmann::ordered_json(nullptr);
    runs.push_back(std::move(row));
  }
  report["runs"] = std::move(runs);
  return report;
}

void write_report_csv(const nlohmann::ordered_json& report, std::ostream& out) {
  const auto& runs = report.at("runs");
  if (runs.empty()) return;
  bool first = true;
  for (const auto& [key, value] : runs.front().items()) {
    out << (first ? "" : ",") << key;
    first = false;
  }
  out << '\n';
  for (const auto& row : runs) {
    first = true;
    for (const auto& [key, value] : row.items()) {
      out << (first ? "" : ",") << csv_cell(value);
      first = false;
    }
    out << '\n';
  }
}

}  // namespace mousse

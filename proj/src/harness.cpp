#include "mousse/harness.hpp"

#include <algorithm>
#include <charconv>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "mousse/checkpoint.hpp"
#include "mousse/random.hpp"

namespace mousse {

namespace {

class KronProblem final : public Problem {
 public:
  KronProblem(const ProblemSpec& spec, std::uint64_t seed)
      : q_(make_kron_quadratic(spec.rows, spec.cols, spec.kappa, spec.noise_sigma, seed, spec.target_scale,
                               spec.target)),
        scale_(spec.loss_scale) {}

  std::vector<std::string> param_names() const override { return {"W"}; }
  std::vector<Matrix> initial_params() const override {
    return {Matrix::Zero(q_.w_star.rows(), q_.w_star.cols())};
  }
  double train(const std::vector<Matrix>& params, long step, std::vector<Matrix>& grads) const override {
    LossGrad lg = kron_quad_eval(q_, params[0], static_cast<std::uint64_t>(step));
    grads.assign(1, scale_ * lg.grad);
    return scale_ * lg.loss;
  }
  double eval_loss(const std::vector<Matrix>& params) const override {
    return scale_ * kron_quad_loss(q_, params[0]);
  }

 private:
  KronQuadratic q_;
  double scale_;
};

class MlpTask final : public Problem {
 public:
  MlpTask(const ProblemSpec& spec, std::uint64_t seed)
      : p_(make_mlp_problem(spec.d_in, spec.hidden, spec.d_out, spec.samples, spec.batch_size, seed,
                            spec.obs_noise)),
        spec_(spec),
        seed_(seed) {}

  std::vector<std::string> param_names() const override {
    if (spec_.embedding) return {"W1", "W2", "b"};
    return {"W1", "W2"};
  }
  std::vector<Matrix> initial_params() const override {
    std::vector<Matrix> out{spectral_init(spec_.d_in, spec_.hidden, mix_seed(seed_, 20)),
                            spectral_init(spec_.hidden, spec_.d_out, mix_seed(seed_, 21))};
    if (spec_.embedding) out.push_back(Matrix::Zero(1, spec_.d_out));
    return out;
  }
  double train(const std::vector<Matrix>& params, long step, std::vector<Matrix>& grads) const override {
    const Index batch = static_cast<Index>((step - 1) % p_.num_batches());
    MlpEval e = mlp_eval(p_, params[0], params[1], batch, bias(params));
    grads.clear();
    grads.push_back(spec_.loss_scale * e.grad_w1);
    grads.push_back(spec_.loss_scale * e.grad_w2);
    if (spec_.embedding) grads.push_back(spec_.loss_scale * e.grad_b);
    return spec_.loss_scale * e.loss;
  }
  double eval_loss(const std::vector<Matrix>& params) const override {
    return spec_.loss_scale * mlp_full_loss(p_, params[0], params[1], bias(params));
  }

 private:
  Matrix bias(const std::vector<Matrix>& params) const {
    return spec_.embedding ? params[2] : Matrix();
  }

  MlpProblem p_;
  ProblemSpec spec_;
  std::uint64_t seed_;
};

template <typename T>
nlohmann::ordered_json opt_json(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

bool is_vector_shaped(const Matrix& m) { return m.rows() == 1 || m.cols() == 1; }

ParamMetrics metrics_for(const UpdateReport<double>& report, const OptimizerState<double>& state) {
  ParamMetrics m;
  m.update_rms = report.rms;
  m.gamma = report.graft_gamma;
  if (const auto* stats = kronecker_stats(state)) {
    if (const auto& l = stats->left()) {
      m.rms_l = rms_norm(l->factor);
      if (stats->has_cache()) m.cond_l = l->diagnostics.condition;
    }
    if (const auto& r = stats->right()) {
      m.rms_r = rms_norm(r->factor);
      if (stats->has_cache()) m.cond_r = r->diagnostics.condition;
    }
  }
  return m;
}

std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw IoError("record: bad numeric field '" + s + "'");
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string run_name_for_lr(const std::string& base, double lr) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_lr%.6g", base.c_str(), lr);
  return buf;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, const RunConfig& cfg) {
  return dir / (cfg.name + ".step" + std::to_string(cfg.checkpoint_at) + ".ckpt");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::unique_ptr<Problem> make_problem(const ProblemSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case ProblemKind::kron_quadratic: return std::make_unique<KronProblem>(spec, seed);
    case ProblemKind::mlp: return std::make_unique<MlpTask>(spec, seed);
  }
  throw ConfigError("unhandled problem kind");
}

RunRecord run_experiment(const RunConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const auto problem = make_problem(cfg.problem, cfg.seed);

  RunRecord rec;
  rec.config = cfg;
  rec.param_names = problem->param_names();

  std::vector<Matrix> params = problem->initial_params();
  std::vector<OptimizerState<double>> states;
  states.reserve(params.size());
  for (const auto& p : params) {
    OptimizerKind kind = cfg.optimizer.kind;
    if (is_matrix_wise(kind) && is_vector_shaped(p) && p.size() > 1) kind = OptimizerKind::lion;
    states.push_back(make_state<double>(kind, cfg.optimizer, p.rows(), p.cols()));
  }

  const long total = cfg.total_steps();
  long start = 0;
  double initial_loss = problem->eval_loss(params);

  if (!cfg.resume.empty()) {
    const Checkpoint ck = Checkpoint::read(cfg.resume);
    start = static_cast<long>(ck.get_scalar("run.step"));
    if (start < 0 || start > total) throw IoError("checkpoint: step outside the configured schedule");
    initial_loss = ck.get_scalar("run.initial_loss");
    for (std::size_t i = 0; i < params.size(); ++i) {
      detail::get(ck, "param." + std::to_string(i), params[i]);
      load_state(states[i], ck, "state." + std::to_string(i) + ".");
    }
  }

  auto make_row = [&](long s, double lr, double train_loss, double eval_loss) {
    LogRow row;
    row.step = s;
    row.lr = lr;
    row.train_loss = train_loss;
    row.eval_loss = eval_loss;
    row.params.resize(params.size());
    return row;
  };

  if (start == 0) rec.rows.push_back(make_row(0, lr_at(cfg.schedule, 0), initial_loss, initial_loss));

  const auto diverging = [&](double loss) {
    if (!std::isfinite(loss)) return true;
    const double ref = initial_loss > 0.0 ? initial_loss : 1.0;
    return loss > cfg.divergence_factor * ref;
  };

  const auto t0 = std::chrono::steady_clock::now();
  long executed = 0;
  std::vector<Matrix> grads;
  std::vector<ParamMetrics> metrics(params.size());
  long s = start;
  rec.summary.steps_completed = start;
  while (s < total) {
    ++s;
    const double lr = lr_at(cfg.schedule, s);
    const double train_loss = problem->train(params, s, grads);
    bool diverged = diverging(train_loss);
    if (!diverged) {
      const StepContext ctx{lr, cfg.weight_decay, s};
      try {
        for (std::size_t i = 0; i < params.size(); ++i) {
          metrics[i] = metrics_for(step(states[i], params[i], grads[i], ctx), states[i]);
        }
      } catch (const NumericError&) {
        diverged = true;
      }
    }
    ++executed;
    if (diverged) {
      LogRow row = make_row(s, lr, train_loss, problem->eval_loss(params));
      rec.rows.push_back(std::move(row));
      rec.summary.diverged = true;
      rec.summary.diverged_at = s;
      break;
    }
    rec.summary.steps_completed = s;
    if (s % cfg.log_every == 0 || s == total) {
      LogRow row = make_row(s, lr, train_loss, problem->eval_loss(params));
      row.params = metrics;
      const double eval = row.eval_loss;
      rec.rows.push_back(std::move(row));
      if (diverging(eval)) {
        rec.summary.diverged = true;
        rec.summary.diverged_at = s;
        break;
      }
    }
    if (s == cfg.checkpoint_at && options.out_dir) {
      Checkpoint ck;
      ck.put_scalar("run.step", double(s));
      ck.put_scalar("run.initial_loss", initial_loss);
      for (std::size_t i = 0; i < params.size(); ++i) {
        ck.put("param." + std::to_string(i), params[i]);
        save_state(states[i], ck, "state." + std::to_string(i) + ".");
      }
      std::filesystem::create_directories(*options.out_dir);
      ck.write(checkpoint_path(*options.out_dir, cfg));
    }
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rec.timing.wall_time_s = elapsed;
  rec.timing.mean_step_ms = executed > 0 ? 1e3 * elapsed / double(executed) : 0.0;

  rec.summary.final_eval_loss = rec.rows.empty() ? problem->eval_loss(params) : rec.rows.back().eval_loss;
  if (cfg.threshold) rec.summary.steps_to_threshold = steps_to_threshold(rec, *cfg.threshold);
  return rec;
}

GridResult grid_search(const RunConfig& cfg, int threads, const RunOptions& options) {
  if (cfg.lr_grid.empty()) throw ConfigError("grid_search: lr_grid is empty");
  if (threads < 1) throw ParameterError("grid_search: threads must be >= 1");
  GridResult out;
  out.lrs = cfg.lr_grid;
  out.records.resize(cfg.lr_grid.size());

  std::vector<RunConfig> configs;
  for (double lr : cfg.lr_grid) {
    RunConfig c = cfg;
    c.schedule.peak_lr = lr;
    c.lr_grid.clear();
    c.name = run_name_for_lr(cfg.name, lr);
    c.validate();
    configs.push_back(std::move(c));
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(configs.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        out.records[i] = run_experiment(configs[i], options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::min<int>(threads, static_cast<int>(configs.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t i = 0; i < out.records.size(); ++i) {
    const RunRecord& r = out.records[i];
    if (r.summary.diverged || !std::isfinite(r.summary.final_eval_loss)) continue;
    if (!out.best) {
      out.best = i;
      continue;
    }
    const RunRecord& b = out.records[*out.best];
    const double lb = b.summary.final_eval_loss;
    const double lr = r.summary.final_eval_loss;
    if (lr < lb || (lr == lb && out.lrs[i] < out.lrs[*out.best])) out.best = i;
  }
  return out;
}

std::optional<long> steps_to_threshold(const RunRecord& record, double threshold) {
  for (const auto& row : record.rows) {
    if (row.eval_loss <= threshold) return row.step;
  }
  return std::nullopt;
}

ExcessiveLoss excessive_loss(const RunRecord& record, double window_frac) {
  const ScheduleSpec& sched = record.config.schedule;
  if (sched.kind != ScheduleKind::wsd) {
    throw ContractError("excessive_loss: run '" + record.config.name + "' has no WSD decay phase");
  }
  if (!(window_frac > 0.0 && window_frac <= 1.0)) {
    throw ParameterError("excessive_loss: window fraction must lie in (0, 1]");
  }
  if (record.summary.diverged || record.rows.empty() || record.rows.back().step != sched.total_steps) {
    throw ContractError("excessive_loss: run '" + record.config.name + "' did not complete");
  }
  const long stable_start = sched.warmup_steps();
  const long stable_end = sched.stable_end();
  const long window =
      std::max(1L, std::lround(window_frac * static_cast<double>(stable_end - stable_start)));
  double sum = 0.0;
  long count = 0;
  for (const auto& row : record.rows) {
    if (row.step > stable_end - window && row.step <= stable_end) {
      sum += row.eval_loss;
      ++count;
    }
  }
  if (count == 0) {
    throw ContractError("excessive_loss: no logged step in the last " + std::to_string(window) +
                        " steps of the stable phase; lower log_every");
  }
  ExcessiveLoss out;
  out.stable_loss = sum / double(count);
  out.final_loss = record.rows.back().eval_loss;
  out.delta = out.stable_loss - out.final_loss;
  out.anomaly = out.delta < -1e-6;
  return out;
}

std::vector<std::string> csv_columns(std::size_t num_params) {
  std::vector<std::string> cols{"step", "lr", "train_loss", "eval_loss"};
  for (std::size_t i = 0; i < num_params; ++i) {
    const std::string p = "P" + std::to_string(i) + "_";
    for (const char* suffix : {"update_rms", "gamma", "condL", "condR", "rmsL", "rmsR"}) {
      cols.push_back(p + suffix);
    }
  }
  return cols;
}

void write_csv(const RunRecord& record, std::ostream& out) {
  const auto cols = csv_columns(record.param_names.size());
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& row : record.rows) {
    out << row.step << ',' << format_double(row.lr) << ',' << format_double(row.train_loss) << ','
        << format_double(row.eval_loss);
    for (const auto& m : row.params) {
      out << ',' << opt_field(m.update_rms) << ',' << opt_field(m.gamma) << ',' << opt_field(m.cond_l)
          << ',' << opt_field(m.cond_r) << ',' << opt_field(m.rms_l) << ',' << opt_field(m.rms_r);
    }
    out << '\n';
  }
}

nlohmann::ordered_json record_to_json(const RunRecord& record, bool include_rows) {
  nlohmann::ordered_json j;
  j["name"] = record.config.name;
  j["config"] = to_json(record.config);
  j["params"] = record.param_names;
  auto& s = j["summary"];
  s["final_eval_loss"] = record.summary.final_eval_loss;
  s["steps_to_threshold"] = opt_json(record.summary.steps_to_threshold);
  s["steps_completed"] = record.summary.steps_completed;
  s["diverged"] = record.summary.diverged;
  s["diverged_at"] = opt_json(record.summary.diverged_at);
  if (include_rows) {
    j["columns"] = csv_columns(record.param_names.size());
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : record.rows) {
      auto r = nlohmann::ordered_json::array({row.step, row.lr, row.train_loss, row.eval_loss});
      for (const auto& m : row.params) {
        for (const auto& v : {m.update_rms, m.gamma, m.cond_l, m.cond_r, m.rms_l, m.rms_r}) r.push_back(opt_json(v));
      }
      rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
  }
  return j;
}

std::filesystem::path write_record(const RunRecord& record, const std::filesystem::path& dir,
                                   OutputFormat format) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const std::string& name = record.config.name;
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw IoError("cannot write " + p.string());
    return f;
  };
  const auto json_path = dir / (name + ".json");
  {
    auto f = open(json_path);
    f << record_to_json(record, format == OutputFormat::json).dump(2) << '\n';
  }
  if (format == OutputFormat::csv) {
    auto f = open(dir / (name + ".csv"));
    write_csv(record, f);
  }
  {
    auto f = open(dir / (name + ".timing.json"));
    nlohmann::ordered_json t;
    t["wall_time_s"] = record.timing.wall_time_s;
    t["mean_step_ms"] = record.timing.mean_step_ms;
    f << t.dump(2) << '\n';
  }
  if (!std::filesystem::exists(json_path)) throw IoError("failed to write " + json_path.string());
  return json_path;
}

namespace {

std::string json_scalar_text(const nlohmann::ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) out += (out.empty() ? "" : ",") + json_scalar_text(e);
    return out;
  }
  throw IoError("record: unsupported config value " + v.dump());
}

LogRow row_from_fields(const std::vector<std::optional<double>>& f, std::size_t num_params) {
  if (f.size() != 4 + 6 * num_params) throw IoError("record: row has the wrong number of fields");
  if (!f[0]) throw IoError("record: row without a step");
  const double nan = std::nan("");
  LogRow row;
  row.step = static_cast<long>(*f[0]);
  row.lr = f[1].value_or(nan);
  row.train_loss = f[2].value_or(nan);
  row.eval_loss = f[3].value_or(nan);
  row.params.resize(num_params);
  for (std::size_t p = 0; p < num_params; ++p) {
    const std::size_t b = 4 + 6 * p;
    row.params[p] = ParamMetrics{f[b], f[b + 1], f[b + 2], f[b + 3], f[b + 4], f[b + 5]};
  }
  return row;
}

double json_number(const nlohmann::ordered_json& v) {
  if (v.is_null()) return std::nan("");
  return v.get<double>();
}

}  // namespace

RunRecord read_record(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot read " + json_path.string());
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed record " + json_path.string() + ": " + e.what());
  }

  RunRecord rec;
  try {
    KeyValueConfig kv;
    for (const auto& [key, value] : j.at("config").items()) kv.set(key, json_scalar_text(value));
    rec.config = parse_run_config(kv);
    rec.param_names = j.at("params").get<std::vector<std::string>>();
    const auto& s = j.at("summary");
    rec.summary.final_eval_loss = json_number(s.at("final_eval_loss"));
    if (!s.at("steps_to_threshold").is_null()) rec.summary.steps_to_threshold = s["steps_to_threshold"].get<long>();
    rec.summary.steps_completed = s.at("steps_completed").get<long>();
    rec.summary.diverged = s.at("diverged").get<bool>();
    if (!s.at("diverged_at").is_null()) rec.summary.diverged_at = s["diverged_at"].get<long>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed record " + json_path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError("record " + json_path.string() + " has an invalid config: " + e.what());
  }

  const std::size_t np = rec.param_names.size();
  if (j.contains("rows")) {
    for (const auto& r : j["rows"]) {
      std::vector<std::optional<double>> f;
      for (const auto& v : r) f.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
      rec.rows.push_back(row_from_fields(f, np));
    }
  } else {
    auto csv_path = json_path;
    csv_path.replace_extension(".csv");
    std::ifstream csv(csv_path);
    if (!csv) throw IoError("record " + json_path.string() + " has no rows and no " + csv_path.string());
    std::string line;
    std::getline(csv, line);
    if (split_csv(line) != csv_columns(np)) throw IoError("unexpected CSV header in " + csv_path.string());
    while (std::getline(csv, line)) {
      if (line.empty()) continue;
      std::vector<std::optional<double>> f;
      for (const auto& field : split_csv(line)) f.push_back(parse_opt(field));
      rec.rows.push_back(row_from_fields(f, np));
    }
  }

  auto timing_path = json_path.parent_path() / (rec.config.name + ".timing.json");
  if (std::ifstream t{timing_path}) {
    try {
      nlohmann::json tj;
      t >> tj;
      rec.timing.wall_time_s = tj.at("wall_time_s").get<double>();
      rec.timing.mean_step_ms = tj.at("mean_step_ms").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed timing file " + timing_path.string() + ": " + e.what());
    }
  }
  return rec;
}

}  // namespace mousse

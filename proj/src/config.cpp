#include "mousse/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mousse {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
  }
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& text) {
  Int v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + text + "'");
  }
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!cfg.values_.emplace(key, value).second) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

const std::string* KeyValueConfig::lookup(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto* v = lookup(key);
  return v ? *v : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto* v = lookup(key);
  return v ? parse_double(key, *v) : fallback;
}

long KeyValueConfig::get_long(const std::string& key, long fallback) const {
  const auto* v = lookup(key);
  return v ? parse_int<long>(key, *v) : fallback;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto* v = lookup(key);
  return v ? parse_int<std::uint64_t>(key, *v) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto* v = lookup(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "on" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "off" || *v == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + *v + "'");
}

std::optional<double> KeyValueConfig::get_optional_double(const std::string& key) const {
  const auto* v = lookup(key);
  if (!v) return std::nullopt;
  return parse_double(key, *v);
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key) const {
  const auto* v = lookup(key);
  std::vector<double> out;
  if (!v) return out;
  std::istringstream in(*v);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) throw ConfigError("config key '" + key + "': empty list entry");
    out.push_back(parse_double(key, t));
  }
  return out;
}

void KeyValueConfig::require_all_used() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw ConfigError(origin_ + ": unknown or unused keys: " + unknown);
}

namespace {

PrecondMode parse_mode(const std::string& s) {
  if (s == "double_sided") return PrecondMode::double_sided;
  if (s == "left_only") return PrecondMode::left_only;
  if (s == "right_only") return PrecondMode::right_only;
  throw ConfigError("unknown preconditioner mode '" + s + "'");
}

NsConfig parse_ns(const KeyValueConfig& kv) {
  const std::string preset = kv.get_string("optim.ns", "ns5");
  NsConfig ns;
  if (preset == "ns5") {
    ns = NsConfig::ns5();
  } else if (preset == "convergent") {
    ns = NsConfig::convergent(static_cast<int>(kv.get_long("optim.ns_iterations", 15)));
  } else {
    throw ConfigError("unknown Newton-Schulz preset '" + preset + "'");
  }
  return ns;
}

PrecondConfig parse_precond(const KeyValueConfig& kv, double default_alpha) {
  PrecondConfig p;
  p.mode = parse_mode(kv.get_string("optim.mode", "double_sided"));
  p.refresh_interval = static_cast<int>(kv.get_long("optim.interval", p.refresh_interval));
  p.beta_pc = kv.get_double("optim.beta_pc", p.beta_pc);
  p.alpha = kv.get_double("optim.alpha", default_alpha);
  p.alpha_single = kv.get_optional_double("optim.alpha_single");
  p.eps = kv.get_double("optim.eps", p.eps);
  p.bias_correction = kv.get_bool("optim.bias_correction", false);
  return p;
}

AdamConfig parse_adam(const KeyValueConfig& kv, AdamConfig defaults) {
  defaults.beta1 = kv.get_double("optim.beta1", defaults.beta1);
  defaults.beta2 = kv.get_double("optim.beta2", defaults.beta2);
  defaults.eps = kv.get_double("optim.eps_adam", defaults.eps);
  return defaults;
}

ProblemSpec parse_problem(const KeyValueConfig& kv) {
  ProblemSpec p;
  const std::string kind = kv.get_string("problem", "kron_quadratic");
  if (kind == "kron_quadratic") {
    p.kind = ProblemKind::kron_quadratic;
    p.rows = kv.get_long("problem.rows", p.rows);
    p.cols = kv.get_long("problem.cols", p.cols);
    p.kappa = kv.get_double("problem.kappa", p.kappa);
    p.noise_sigma = kv.get_double("problem.noise_sigma", p.noise_sigma);
    p.target_scale = kv.get_double("problem.target_scale", p.target_scale);
    const std::string target = kv.get_string("problem.target", "gaussian");
    if (target == "gaussian") {
      p.target = TargetDist::gaussian;
    } else if (target == "balanced") {
      p.target = TargetDist::balanced;
    } else {
      throw ConfigError("unknown problem.target '" + target + "'");
    }
  } else if (kind == "mlp") {
    p.kind = ProblemKind::mlp;
    p.d_in = kv.get_long("problem.d_in", p.d_in);
    p.hidden = kv.get_long("problem.hidden", p.hidden);
    p.d_out = kv.get_long("problem.d_out", p.d_out);
    p.samples = kv.get_long("problem.samples", p.samples);
    p.batch_size = kv.get_long("problem.batch_size", p.batch_size);
    p.obs_noise = kv.get_double("problem.obs_noise", p.obs_noise);
    p.embedding = kv.get_bool("problem.embedding", p.embedding);
  } else {
    throw ConfigError("unknown problem '" + kind + "'");
  }
  p.loss_scale = kv.get_double("problem.loss_scale", p.loss_scale);
  return p;
}

}  // namespace

RunConfig parse_run_config(const KeyValueConfig& kv) {
  RunConfig cfg;
  cfg.name = kv.get_string("name", cfg.name);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.log_every = kv.get_long("log_every", cfg.log_every);
  cfg.weight_decay = kv.get_double("weight_decay", cfg.weight_decay);
  cfg.lr_grid = kv.get_double_list("lr_grid");
  cfg.threshold = kv.get_optional_double("threshold");
  cfg.excess_window = kv.get_double("excess_window", cfg.excess_window);
  cfg.divergence_factor = kv.get_double("divergence_factor", cfg.divergence_factor);
  cfg.checkpoint_at = kv.get_long("checkpoint_at", cfg.checkpoint_at);
  cfg.resume = kv.get_string("resume", "");
  cfg.problem = parse_problem(kv);

  auto& s = cfg.schedule;
  s.total_steps = kv.get_long("total_steps", s.total_steps);
  s.kind = parse_schedule_kind(kv.get_string("schedule.kind", to_string(s.kind)));
  s.warmup_frac = kv.get_double("schedule.warmup_frac", s.warmup_frac);
  if (s.kind == ScheduleKind::wsd) {
    s.decay_frac = kv.get_double("schedule.decay_frac", s.decay_frac);
    s.wsd_decay = parse_decay_shape(kv.get_string("schedule.decay_shape", "linear"));
  }
  s.peak_lr = kv.get_double("schedule.peak_lr", s.peak_lr);
  s.final_lr = kv.get_double("schedule.final_lr", s.final_lr);

  auto& o = cfg.optimizer;
  o.kind = parse_optimizer_kind(kv.get_string("optimizer", "mousse"));
  o.lion.beta1 = kv.get_double("lion.beta1", o.lion.beta1);
  o.lion.beta2 = kv.get_double("lion.beta2", o.lion.beta2);
  switch (o.kind) {
    case OptimizerKind::mousse:
      o.mousse.beta = kv.get_double("optim.beta", o.mousse.beta);
      o.mousse.precond = parse_precond(kv, o.mousse.precond.alpha);
      o.mousse.ns = parse_ns(kv);
      o.mousse.grafting = kv.get_bool("optim.grafting", o.mousse.grafting);
      o.mousse.nesterov = kv.get_bool("optim.nesterov", o.mousse.nesterov);
      break;
    case OptimizerKind::muon:
      o.muon.beta = kv.get_double("optim.beta", o.muon.beta);
      o.muon.ns = parse_ns(kv);
      o.muon.nesterov = kv.get_bool("optim.nesterov", o.muon.nesterov);
      break;
    case OptimizerKind::shampoo:
      o.shampoo.beta = kv.get_double("optim.beta", o.shampoo.beta);
      o.shampoo.precond = parse_precond(kv, o.shampoo.precond.alpha);
      break;
    case OptimizerKind::soap:
      o.soap.adam = parse_adam(kv, o.soap.adam);
      o.soap.precond = parse_precond(kv, o.soap.precond.alpha);
      break;
    case OptimizerKind::adamw:
      o.adamw = parse_adam(kv, o.adamw);
      break;
    case OptimizerKind::lion:
      break;
    case OptimizerKind::elementwise:
      o.elementwise.adam = parse_adam(kv, o.elementwise.adam);
      o.elementwise.ns = parse_ns(kv);
      break;
  }
  kv.require_all_used();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(KeyValueConfig::load(path));
}

void RunConfig::validate() const {
  try {
    schedule.validate();
    if (optimizer.kind == OptimizerKind::mousse) optimizer.mousse.precond.validate();
    if (optimizer.kind == OptimizerKind::shampoo) optimizer.shampoo.precond.validate();
    if (optimizer.kind == OptimizerKind::soap) {
      optimizer.soap.precond.validate();
      mousse::validate(optimizer.soap.adam);
    }
    if (optimizer.kind == OptimizerKind::adamw) mousse::validate(optimizer.adamw);
    if (optimizer.kind == OptimizerKind::elementwise) mousse::validate(optimizer.elementwise.adam);
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(excess_window > 0.0 && excess_window <= 1.0)) throw ConfigError("excess_window must lie in (0, 1]");
  if (!(divergence_factor > 1.0)) throw ConfigError("divergence_factor must exceed 1");
  if (checkpoint_at < 0 || checkpoint_at > schedule.total_steps) {
    throw ConfigError("checkpoint_at must lie in [0, total_steps]");
  }
  for (double lr : lr_grid) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr_grid entries must be finite and >= 0");
  }
  const auto& p = problem;
  if (p.kind == ProblemKind::kron_quadratic) {
    if (p.rows < 1 || p.cols < 1) throw ConfigError("problem.rows/cols must be >= 1");
    if (!(p.kappa >= 1.0)) throw ConfigError("problem.kappa must be >= 1");
    if (!(p.noise_sigma >= 0.0)) throw ConfigError("problem.noise_sigma must be >= 0");
  } else {
    if (p.d_in < 1 || p.hidden < 1 || p.d_out < 1) throw ConfigError("mlp layer sizes must be >= 1");
    if (p.batch_size < 1 || p.samples < p.batch_size) {
      throw ConfigError("mlp needs 1 <= problem.batch_size <= problem.samples");
    }
  }
  if (!(p.loss_scale > 0.0)) throw ConfigError("problem.loss_scale must be positive");
}

namespace {

nlohmann::ordered_json precond_json(const PrecondConfig& p) {
  nlohmann::ordered_json j;
  j["optim.mode"] = to_string(p.mode);
  j["optim.interval"] = p.refresh_interval;
  j["optim.beta_pc"] = p.beta_pc;
  j["optim.alpha"] = p.alpha;
  if (p.alpha_single) j["optim.alpha_single"] = *p.alpha_single;
  j["optim.eps"] = p.eps;
  j["optim.bias_correction"] = p.bias_correction;
  return j;
}

void put_ns(nlohmann::ordered_json& j, const NsConfig& ns) {
  const bool is_conv = ns.iterations() > 0 && ns.coefficients.front().a == 15.0 / 8.0;
  j["optim.ns"] = is_conv ? "convergent" : "ns5";
  if (is_conv) j["optim.ns_iterations"] = ns.iterations();
}

}  // namespace

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["name"] = cfg.name;
  j["seed"] = cfg.seed;
  j["total_steps"] = cfg.schedule.total_steps;
  j["log_every"] = cfg.log_every;
  j["weight_decay"] = cfg.weight_decay;
  if (!cfg.lr_grid.empty()) j["lr_grid"] = cfg.lr_grid;
  if (cfg.threshold) j["threshold"] = *cfg.threshold;
  j["excess_window"] = cfg.excess_window;
  j["divergence_factor"] = cfg.divergence_factor;

  const auto& p = cfg.problem;
  if (p.kind == ProblemKind::kron_quadratic) {
    j["problem"] = "kron_quadratic";
    j["problem.rows"] = p.rows;
    j["problem.cols"] = p.cols;
    j["problem.kappa"] = p.kappa;
    j["problem.noise_sigma"] = p.noise_sigma;
    j["problem.target_scale"] = p.target_scale;
    j["problem.target"] = to_string(p.target);
  } else {
    j["problem"] = "mlp";
    j["problem.d_in"] = p.d_in;
    j["problem.hidden"] = p.hidden;
    j["problem.d_out"] = p.d_out;
    j["problem.samples"] = p.samples;
    j["problem.batch_size"] = p.batch_size;
    j["problem.obs_noise"] = p.obs_noise;
    j["problem.embedding"] = p.embedding;
  }
  j["problem.loss_scale"] = p.loss_scale;

  const auto& s = cfg.schedule;
  j["schedule.kind"] = to_string(s.kind);
  j["schedule.warmup_frac"] = s.warmup_frac;
  if (s.kind == ScheduleKind::wsd) {
    j["schedule.decay_frac"] = s.decay_frac;
    j["schedule.decay_shape"] = to_string(s.wsd_decay);
  }
  j["schedule.peak_lr"] = s.peak_lr;
  j["schedule.final_lr"] = s.final_lr;

  const auto& o = cfg.optimizer;
  j["optimizer"] = to_string(o.kind);
  switch (o.kind) {
    case OptimizerKind::mousse:
      j["optim.beta"] = o.mousse.beta;
      j.update(precond_json(o.mousse.precond));
      put_ns(j, o.mousse.ns);
      j["optim.grafting"] = o.mousse.grafting;
      j["optim.nesterov"] = o.mousse.nesterov;
      break;
    case OptimizerKind::muon:
      j["optim.beta"] = o.muon.beta;
      put_ns(j, o.muon.ns);
      j["optim.nesterov"] = o.muon.nesterov;
      break;
    case OptimizerKind::shampoo:
      j["optim.beta"] = o.shampoo.beta;
      j.update(precond_json(o.shampoo.precond));
      break;
    case OptimizerKind::soap:
      j["optim.beta1"] = o.soap.adam.beta1;
      j["optim.beta2"] = o.soap.adam.beta2;
      j["optim.eps_adam"] = o.soap.adam.eps;
      j.update(precond_json(o.soap.precond));
      break;
    case OptimizerKind::adamw:
      j["optim.beta1"] = o.adamw.beta1;
      j["optim.beta2"] = o.adamw.beta2;
      j["optim.eps_adam"] = o.adamw.eps;
      break;
    case OptimizerKind::lion:
      break;
    case OptimizerKind::elementwise:
      j["optim.beta1"] = o.elementwise.adam.beta1;
      j["optim.beta2"] = o.elementwise.adam.beta2;
      j["optim.eps_adam"] = o.elementwise.adam.eps;
      put_ns(j, o.elementwise.ns);
      break;
  }
  j["lion.beta1"] = o.lion.beta1;
  j["lion.beta2"] = o.lion.beta2;
  return j;
}

}  // namespace mousse

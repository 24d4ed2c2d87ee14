#include "hyperagent/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "hyperagent/errors.hpp"
#include "hyperagent/hypermodel.hpp"
#include "hyperagent/plot.hpp"

namespace hyperagent {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class ObjectReader {
 public:
  ObjectReader(const json& node, std::string where) : node_(node), where_(std::move(where)) {
    if (!node_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  const json* raw(const std::string& key) {
    used_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() || it->is_null() ? nullptr : &*it;
  }

  std::optional<std::string> string(const std::string& key) {
    const json* v = raw(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) fail(key, "a string");
    return v->get<std::string>();
  }

  std::optional<double> number(const std::string& key) {
    const json* v = raw(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) fail(key, "a number");
    return v->get<double>();
  }

  std::optional<std::uint64_t> unsigned_int(const std::string& key) {
    const json* v = raw(key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer() || v->get<std::int64_t>() < 0) fail(key, "a non-negative integer");
    return v->get<std::uint64_t>();
  }

  std::optional<bool> boolean(const std::string& key) {
    const json* v = raw(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) fail(key, "a boolean");
    return v->get<bool>();
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!used_.count(key)) throw ConfigError("unknown key '" + key + "' in " + where_);
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& expected) const {
    throw ConfigError(where_ + "." + key + " must be " + expected);
  }

  const std::string& where() const { return where_; }

 private:
  const json& node_;
  std::string where_;
  std::set<std::string> used_;
};

DistributionKind read_kind(ObjectReader& r, const std::string& key, DistributionKind fallback) {
  const auto text = r.string(key);
  if (!text) return fallback;
  try {
    return parse_distribution_kind(*text);
  } catch (const ParameterError& e) {
    throw ConfigError(r.where() + "." + key + ": " + e.what());
  }
}

BetaMode read_beta(ObjectReader& r, BetaMode fallback) {
  const json* v = r.raw("beta");
  if (!v) return fallback;
  if (v->is_number()) return BetaMode::fixed(v->get<double>());
  ObjectReader inner(*v, r.where() + ".beta");
  const auto delta = inner.number("theoretical");
  inner.finish();
  if (!delta) throw ConfigError(r.where() + ".beta needs a number or {\"theoretical\": delta}");
  return BetaMode::theoretical(*delta);
}

void read_sgd_fields(ObjectReader& r, AgentConfig& cfg) {
  if (auto v = r.unsigned_int("update_steps")) cfg.update_steps = *v;
  if (auto v = r.unsigned_int("buffer_capacity")) cfg.buffer_capacity = *v;
  if (auto v = r.unsigned_int("xi_batch")) cfg.xi_batch = *v;
  if (auto v = r.boolean("exact_expectation")) cfg.exact_expectation = *v;
  if (auto v = r.unsigned_int("batch_size")) cfg.batch_size = *v;
  if (auto v = r.number("learning_rate")) cfg.learning_rate = *v;
  if (auto v = r.number("prior_scale")) cfg.prior_scale = *v;
  if (auto v = r.string("optimizer")) {
    if (*v == "sgd") {
      cfg.optimizer = OptimizerKind::kSgd;
    } else if (*v == "adam") {
      cfg.optimizer = OptimizerKind::kAdam;
    } else {
      throw ConfigError(r.where() + ".optimizer must be sgd or adam");
    }
  }
  if (const json* v = r.raw("hidden")) {
    if (!v->is_array()) r.fail("hidden", "an array of widths");
    cfg.hidden.clear();
    for (const auto& w : *v) {
      if (!w.is_number_integer() || w.get<std::int64_t>() < 1) r.fail("hidden", "an array of widths");
      cfg.hidden.push_back(static_cast<Eigen::Index>(w.get<std::uint64_t>()));
    }
  }
}

AgentSpec parse_agent(const json& node, std::size_t index) {
  ObjectReader r(node, "agents[" + std::to_string(index) + "]");
  AgentSpec spec;
  const auto type = r.string("type");
  if (!type) throw ConfigError(r.where() + ".type is required");
  auto& cfg = spec.config;
  if (auto v = r.number("lambda")) cfg.lambda = *v;
  const auto label = r.string("label");

  if (*type == "hyperagent") {
    cfg.reference_kind = read_kind(r, "reference", cfg.reference_kind);
    cfg.update_kind = read_kind(r, "update", cfg.update_kind);
    cfg.perturbation_kind = read_kind(r, "perturbation", cfg.perturbation_kind);
    if (auto v = r.unsigned_int("M")) cfg.M = static_cast<Eigen::Index>(*v);
    if (auto v = r.number("sigma")) cfg.sigma = *v;
    cfg.beta_mode = read_beta(r, cfg.beta_mode);
    const std::string mode = r.string("mode").value_or("closed_form");
    if (mode == "closed_form") {
      spec.type = AgentType::kHyperAgent;
    } else if (mode == "sgd") {
      spec.type = AgentType::kSgdHyperAgent;
      read_sgd_fields(r, cfg);
    } else {
      throw ConfigError(r.where() + ".mode must be closed_form or sgd");
    }
    spec.label = spec.type == AgentType::kSgdHyperAgent ? hyperagent_label(cfg) + ":sgd"
                                                         : hyperagent_label(cfg);
  } else if (*type == "ensemble+") {
    const auto M = r.unsigned_int("M");
    const double lambda = cfg.lambda;
    cfg = ensemble_plus_config(static_cast<Eigen::Index>(M.value_or(8)));
    cfg.lambda = lambda;
    cfg.beta_mode = read_beta(r, cfg.beta_mode);
    spec.type = AgentType::kEnsemblePlus;
    spec.label = ensemble_plus_label(cfg.M);
  } else if (*type == "ts") {
    if (auto v = r.number("variance_scale")) spec.variance_scale = *v;
    spec.type = AgentType::kThompson;
    spec.label = "ts";
  } else if (*type == "greedy") {
    spec.type = AgentType::kGreedy;
    spec.label = "greedy";
  } else {
    throw ConfigError(r.where() + ".type '" + *type +
                      "' is not one of hyperagent, ensemble+, ts, greedy");
  }
  if (label) spec.label = *label;
  r.finish();
  return spec;
}

EnvSpec parse_env(const json& node) {
  ObjectReader r(node, "env");
  EnvSpec spec;
  const auto kind = r.string("kind");
  if (!kind) throw ConfigError("env.kind is required");
  spec.kind = *kind;
  if (auto v = r.unsigned_int("d")) spec.d = static_cast<Eigen::Index>(*v);
  if (auto v = r.unsigned_int("n_actions")) spec.n_actions = static_cast<Eigen::Index>(*v);
  spec.noise_std = r.number("noise_std");
  if (auto v = r.number("prior_variance")) spec.prior_variance = *v;
  spec.theta_norm = r.number("theta_norm");
  if (auto v = r.string("embeddings")) spec.embeddings = *v;
  if (auto v = r.boolean("shuffle")) spec.shuffle = *v;
  if (auto v = r.boolean("reveal_blocked")) spec.reveal_blocked = *v;
  r.finish();
  return spec;
}

std::string slug(const std::string& label) {
  std::string out = label;
  for (char& c : out) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ||
                      c == '+' || c == '=';
    if (!keep) c = '_';
  }
  return out;
}

std::string run_file_name(const std::string& label, std::size_t seed_index) {
  return slug(label) + "_seed" + std::to_string(seed_index) + ".csv";
}

std::string actions_file_name(const std::string& label, std::size_t seed_index) {
  return slug(label) + "_seed" + std::to_string(seed_index) + "_actions.csv";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::string& where) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError(where + ": cannot parse number '" + text + "'");
  }
  return value;
}

std::uint64_t parse_uint(const std::string& text, const std::string& where) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError(where + ": cannot parse integer '" + text + "'");
  }
  return value;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

void expect_header(std::istream& in, const std::string& header, const fs::path& path) {
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw InputError(path.string() + ": expected header '" + header + "'");
  }
}

void write_file(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RegretTrace load_run(const fs::path& run_path, const fs::path& actions_path,
                     const std::string& label, std::size_t seed_index) {
  RegretTrace trace;
  trace.agent_label = label;
  trace.seed = seed_index;
  auto in = open_in(run_path);
  expect_header(in, "agent,seed,t,regret,cum_regret", run_path);
  std::string line;
  while (std::getline(in, line)) {
    const auto cells = split_csv(line);
    if (cells.size() != 5 || cells[0] != label) throw InputError(run_path.string() + ": bad row");
    trace.per_step_regret.push_back(parse_double(cells[3], run_path.string()));
    trace.cumulative.push_back(parse_double(cells[4], run_path.string()));
  }
  if (fs::exists(actions_path)) {
    auto ain = open_in(actions_path);
    expect_header(ain, "t,action", actions_path);
    while (std::getline(ain, line)) {
      const auto cells = split_csv(line);
      if (cells.size() != 2) throw InputError(actions_path.string() + ": bad row");
      trace.actions.push_back(static_cast<std::int64_t>(parse_uint(cells[1], actions_path.string())));
    }
  }
  return trace;
}

std::string actions_csv(const RegretTrace& trace) {
  std::string out = "t,action\n";
  for (std::size_t t = 0; t < trace.actions.size(); ++t) {
    out += std::to_string(t + 1) + "," + std::to_string(trace.actions[t]) + "\n";
  }
  return out;
}

using RunKey = std::pair<std::size_t, std::size_t>;  // (agent index, seed index)

std::map<RunKey, fs::path> read_manifest(const fs::path& path, const ExperimentConfig& cfg) {
  std::map<RunKey, fs::path> done;
  std::ifstream in(path);
  if (!in) return done;
  std::string line;
  if (!std::getline(in, line) || line != "agent,seed,file") return done;
  while (std::getline(in, line)) {
    const auto cells = split_csv(line);
    if (cells.size() != 3) continue;
    for (std::size_t a = 0; a < cfg.agents.size(); ++a) {
      if (cfg.agents[a].label != cells[0]) continue;
      std::uint64_t seed = 0;
      const auto [ptr, ec] = std::from_chars(cells[1].data(), cells[1].data() + cells[1].size(), seed);
      if (ec == std::errc{} && seed < cfg.n_seeds) done[{a, seed}] = cells[2];
    }
  }
  return done;
}

}  // namespace

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (horizon < 1) throw ConfigError("T must be >= 1");
  if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
  if (agents.empty()) throw ConfigError("at least one agent is required");
  static const std::set<std::string> kinds = {"finite_linear", "sphere_linear", "neural",
                                              "quadratic", "moderation"};
  if (!kinds.count(env.kind)) throw ConfigError("unknown env kind '" + env.kind + "'");
  if (env.kind == "moderation" && env.embeddings.empty()) {
    throw ConfigError("the moderation env needs an embeddings path");
  }
  if (env.kind != "moderation" && (env.d < 1 || env.n_actions < 1)) {
    throw ConfigError("env d and n_actions must be >= 1");
  }
  if (env.noise_std && !(*env.noise_std >= 0.0)) throw ConfigError("env.noise_std must be >= 0");
  std::set<std::string> labels;
  std::set<std::string> slugs;
  for (const auto& spec : agents) {
    if (spec.label.empty()) throw ConfigError("agent labels must be non-empty");
    if (spec.label.find_first_of(",\n\r\"") != std::string::npos) {
      throw ConfigError("agent label '" + spec.label + "' contains a CSV delimiter");
    }
    if (!labels.insert(spec.label).second || !slugs.insert(slug(spec.label)).second) {
      throw ConfigError("duplicate agent label '" + spec.label + "'");
    }
    try {
      spec.config.validate();
    } catch (const ParameterError& e) {
      throw ConfigError(spec.label + ": " + e.what());
    }
    if (spec.type == AgentType::kThompson && !(spec.variance_scale >= 0.0)) {
      throw ConfigError("ts variance_scale must be >= 0");
    }
    if (spec.type == AgentType::kSgdHyperAgent && env.kind == "sphere_linear") {
      throw ConfigError("the SGD HyperAgent needs a finite action set");
    }
  }
}

ExperimentConfig parse_experiment_config(const json& doc) {
  ObjectReader r(doc, "config");
  ExperimentConfig cfg;
  const json* env = r.raw("env");
  if (!env) throw ConfigError("config.env is required");
  cfg.env = parse_env(*env);
  const json* agents = r.raw("agents");
  if (!agents || !agents->is_array()) throw ConfigError("config.agents must be an array");
  for (std::size_t i = 0; i < agents->size(); ++i) cfg.agents.push_back(parse_agent((*agents)[i], i));
  if (auto v = r.unsigned_int("T")) cfg.horizon = *v;
  if (auto v = r.unsigned_int("n_seeds")) cfg.n_seeds = *v;
  if (auto v = r.unsigned_int("master_seed")) cfg.master_seed = *v;
  if (auto v = r.string("output_dir")) cfg.output_dir = *v;
  if (auto v = r.boolean("plot")) cfg.plot = *v;
  r.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment_config(doc);
}

json to_json(const ExperimentConfig& cfg) {
  json env = {{"kind", cfg.env.kind},
              {"d", cfg.env.d},
              {"n_actions", cfg.env.n_actions},
              {"prior_variance", cfg.env.prior_variance},
              {"shuffle", cfg.env.shuffle},
              {"reveal_blocked", cfg.env.reveal_blocked}};
  if (cfg.env.noise_std) env["noise_std"] = *cfg.env.noise_std;
  if (cfg.env.theta_norm) env["theta_norm"] = *cfg.env.theta_norm;
  if (!cfg.env.embeddings.empty()) env["embeddings"] = cfg.env.embeddings;

  json agents = json::array();
  for (const auto& spec : cfg.agents) {
    const auto& c = spec.config;
    json a = {{"label", spec.label}, {"lambda", c.lambda}};
    switch (spec.type) {
      case AgentType::kThompson:
        a["type"] = "ts";
        a["variance_scale"] = spec.variance_scale;
        break;
      case AgentType::kGreedy:
        a["type"] = "greedy";
        break;
      case AgentType::kEnsemblePlus:
      case AgentType::kHyperAgent:
      case AgentType::kSgdHyperAgent:
        a["type"] = spec.type == AgentType::kEnsemblePlus ? "ensemble+" : "hyperagent";
        a["M"] = c.M;
        if (c.beta_mode.kind == BetaMode::Kind::kFixed) {
          a["beta"] = c.beta_mode.value;
        } else {
          a["beta"] = {{"theoretical", c.beta_mode.value}};
        }
        if (spec.type == AgentType::kEnsemblePlus) break;
        a["reference"] = to_string(c.reference_kind);
        a["update"] = to_string(c.update_kind);
        a["perturbation"] = to_string(c.perturbation_kind);
        a["sigma"] = c.sigma;
        a["mode"] = spec.type == AgentType::kSgdHyperAgent ? "sgd" : "closed_form";
        if (spec.type == AgentType::kSgdHyperAgent) {
          a["update_steps"] = c.update_steps;
          a["buffer_capacity"] = c.buffer_capacity;
          a["xi_batch"] = c.xi_batch;
          a["exact_expectation"] = c.exact_expectation;
          a["batch_size"] = c.batch_size;
          a["learning_rate"] = c.learning_rate;
          a["prior_scale"] = c.prior_scale;
          a["optimizer"] = c.optimizer == OptimizerKind::kAdam ? "adam" : "sgd";
          a["hidden"] = c.hidden;
        }
        break;
    }
    agents.push_back(std::move(a));
  }
  return {{"env", env},
          {"agents", agents},
          {"T", cfg.horizon},
          {"n_seeds", cfg.n_seeds},
          {"master_seed", cfg.master_seed},
          {"output_dir", cfg.output_dir},
          {"plot", cfg.plot}};
}

// ---------------------------------------------------------------------------

std::uint64_t run_seed(std::uint64_t master_seed, std::size_t seed_index) {
  return derive_seed(master_seed, seed_index);
}

std::uint64_t agent_seed(std::uint64_t seed, const std::string& label) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return derive_seed(seed, h);
}

std::unique_ptr<BanditEnv> make_env(const EnvSpec& spec, std::uint64_t seed, Rng& env_rng,
                                    std::shared_ptr<const EmbeddingDataset> embeddings) {
  if (spec.kind == "finite_linear" || spec.kind == "sphere_linear") {
    LinearEnvOptions options;
    options.noise_std = spec.noise_std.value_or(1.0);
    options.prior_variance = spec.prior_variance;
    options.theta_norm = spec.theta_norm;
    if (spec.kind == "finite_linear") {
      return std::make_unique<FiniteLinearEnv>(spec.d, spec.n_actions, env_rng, options);
    }
    return std::make_unique<SphereLinearEnv>(spec.d, env_rng, options);
  }
  if (spec.kind == "neural" || spec.kind == "quadratic") {
    NonlinearEnvOptions options;
    options.d = spec.d;
    options.n_actions = spec.n_actions;
    options.noise_std = spec.noise_std.value_or(0.1);
    if (spec.kind == "neural") return std::make_unique<NeuralEnv>(env_rng, options);
    return std::make_unique<QuadraticEnv>(env_rng, options);
  }
  if (spec.kind == "moderation") {
    if (!embeddings) embeddings = std::make_shared<const EmbeddingDataset>(load_hbe1(spec.embeddings));
    ModerationOptions options;
    options.shuffle = spec.shuffle;
    options.shuffle_seed = seed;
    options.reveal_blocked = spec.reveal_blocked;
    return std::make_unique<ModerationEnv>(std::move(embeddings), options);
  }
  throw ConfigError("unknown env kind '" + spec.kind + "'");
}

std::unique_ptr<Agent> make_agent(const AgentSpec& spec, const BanditEnv& env, Rng& agent_rng) {
  const Eigen::Index d = env.feature_dim();
  const bool unit_ball = env.feature_norm_bound() <= 1.0 + 1e-9;
  AgentConfig cfg = spec.config;
  cfg.enforce_unit_ball = unit_ball;
  switch (spec.type) {
    case AgentType::kHyperAgent:
    case AgentType::kEnsemblePlus:
      return std::make_unique<LinearHyperAgent>(cfg, d, agent_rng, spec.label);
    case AgentType::kSgdHyperAgent: {
      if (const auto* mod = dynamic_cast<const ModerationEnv*>(&env)) {
        return std::make_unique<SgdHyperAgent>(cfg, static_cast<Eigen::Index>(mod->embedding_dim()),
                                               2, agent_rng, spec.label);
      }
      return std::make_unique<SgdHyperAgent>(cfg, d, 1, agent_rng, spec.label);
    }
    case AgentType::kThompson:
      return std::make_unique<ThompsonAgent>(cfg.lambda, spec.variance_scale, d, unit_ball,
                                             spec.label);
    case AgentType::kGreedy:
      return std::make_unique<GreedyAgent>(cfg.lambda, d, unit_ball, spec.label);
  }
  throw ConfigError("unknown agent type");
}

RegretTrace run_single(const ExperimentConfig& cfg, std::size_t agent_index, std::size_t seed_index,
                       std::shared_ptr<const EmbeddingDataset> embeddings) {
  const AgentSpec& spec = cfg.agents.at(agent_index);
  const std::uint64_t seed = run_seed(cfg.master_seed, seed_index);
  Rng env_rng(seed);
  auto env = make_env(cfg.env, seed, env_rng, std::move(embeddings));
  if (const auto cap = env->max_steps(); cap && cfg.horizon > *cap) {
    throw ConfigError("T = " + std::to_string(cfg.horizon) + " exceeds the " + std::to_string(*cap) +
                      " steps the env can serve");
  }
  Rng agent_rng(agent_seed(seed, spec.label));
  auto agent = make_agent(spec, *env, agent_rng);
  return run_episode(*agent, *env, cfg.horizon, env_rng, agent_rng, seed_index);
}

// ---------------------------------------------------------------------------

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

AggregateResult aggregate(const std::vector<RegretTrace>& traces) {
  if (traces.empty()) throw InputError("aggregate needs at least one trace");
  const std::size_t T = traces.front().horizon();
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RegretTrace*>> groups;
  for (const auto& trace : traces) {
    if (trace.horizon() != T || trace.cumulative.size() != T) {
      throw InputError("traces have mismatched horizons (" + std::to_string(T) + " vs " +
                       std::to_string(trace.horizon()) + ")");
    }
    auto& group = groups[trace.agent_label];
    if (group.empty()) order.push_back(trace.agent_label);
    group.push_back(&trace);
  }
  AggregateResult result;
  for (const auto& label : order) {
    const auto& group = groups[label];
    const double n = static_cast<double>(group.size());
    AggregateCurve curve;
    curve.agent = label;
    curve.mean_cum.resize(T);
    curve.se.resize(T);
    curve.p10.resize(T);
    curve.p90.resize(T);
    std::vector<double> column(group.size());
    for (std::size_t t = 0; t < T; ++t) {
      double sum = 0.0;
      for (std::size_t i = 0; i < group.size(); ++i) {
        column[i] = group[i]->cumulative[t];
        sum += column[i];
      }
      const double mean = sum / n;
      double ss = 0.0;
      for (const double v : column) ss += (v - mean) * (v - mean);
      curve.mean_cum[t] = mean;
      curve.se[t] = group.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
      curve.p10[t] = percentile(column, 0.1);
      curve.p90[t] = percentile(column, 0.9);
    }
    result.curves.push_back(std::move(curve));
  }
  return result;
}

namespace {

// Hate posts are exactly those where blocking is optimal: a block with zero
// regret or a publish costing the full 1.0.
bool is_hate(const RegretTrace& trace, std::size_t t) {
  const bool blocked = trace.actions[t] == kBlock;
  return blocked ? trace.per_step_regret[t] == 0.0
                 : trace.per_step_regret[t] == kBlockReward - kPublishHateReward;
}

}  // namespace

ModerationSummary moderation_summary(const RegretTrace& trace) {
  const std::size_t T = trace.horizon();
  if (T == 0 || trace.actions.size() != T) throw InputError("moderation trace needs actions");
  const std::size_t window = std::max<std::size_t>(1, T / 5);
  std::size_t hate = 0;
  std::size_t hate_blocked = 0;
  std::size_t published = 0;
  for (std::size_t t = T - window; t < T; ++t) {
    if (is_hate(trace, t)) {
      ++hate;
      if (trace.actions[t] == kBlock) ++hate_blocked;
    }
    if (trace.actions[t] == kPublish) ++published;
  }
  ModerationSummary s;
  s.agent = trace.agent_label;
  s.seed = trace.seed;
  s.accuracy = hate == 0 ? 1.0 : static_cast<double>(hate_blocked) / static_cast<double>(hate);
  s.effort = static_cast<double>(published) / static_cast<double>(window);
  return s;
}

std::vector<ModerationCurve> moderation_curves(const std::vector<RegretTrace>& traces) {
  std::vector<ModerationCurve> curves;
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> counts;
  for (const auto& trace : traces) {
    const std::size_t T = trace.horizon();
    if (trace.actions.size() != T) throw InputError("moderation trace needs actions");
    auto [it, inserted] = index.emplace(trace.agent_label, curves.size());
    if (inserted) {
      curves.push_back({trace.agent_label, std::vector<double>(T, 0.0), std::vector<double>(T, 0.0)});
      counts.push_back(0);
    }
    auto& curve = curves[it->second];
    if (curve.accuracy.size() != T) throw InputError("traces have mismatched horizons");
    ++counts[it->second];
    double hate = 0.0;
    double hate_blocked = 0.0;
    double published = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      if (is_hate(trace, t)) {
        hate += 1.0;
        if (trace.actions[t] == kBlock) hate_blocked += 1.0;
      }
      if (trace.actions[t] == kPublish) published += 1.0;
      curve.accuracy[t] += hate == 0.0 ? 1.0 : hate_blocked / hate;
      curve.effort[t] += published;
    }
  }
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const double n = static_cast<double>(counts[i]);
    for (auto& v : curves[i].accuracy) v /= n;
    for (auto& v : curves[i].effort) v /= n;
  }
  return curves;
}

// ---------------------------------------------------------------------------

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_run_csv(std::ostream& out, const RegretTrace& trace) {
  out << "agent,seed,t,regret,cum_regret\n";
  const std::string prefix = trace.agent_label + "," + std::to_string(trace.seed) + ",";
  for (std::size_t t = 0; t < trace.horizon(); ++t) {
    out << prefix << (t + 1) << ',' << format_double(trace.per_step_regret[t]) << ','
        << format_double(trace.cumulative[t]) << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const AggregateResult& result) {
  out << "agent,t,mean_cum,se,p10,p90\n";
  for (const auto& c : result.curves) {
    for (std::size_t t = 0; t < c.mean_cum.size(); ++t) {
      out << c.agent << ',' << (t + 1) << ',' << format_double(c.mean_cum[t]) << ','
          << format_double(c.se[t]) << ',' << format_double(c.p10[t]) << ','
          << format_double(c.p90[t]) << '\n';
    }
  }
}

void write_moderation_curves_csv(std::ostream& out, const std::vector<ModerationCurve>& curves) {
  out << "agent,t,accuracy,effort\n";
  for (const auto& c : curves) {
    for (std::size_t t = 0; t < c.accuracy.size(); ++t) {
      out << c.agent << ',' << (t + 1) << ',' << format_double(c.accuracy[t]) << ','
          << format_double(c.effort[t]) << '\n';
    }
  }
}

AggregateResult read_aggregate_csv(const fs::path& path) {
  auto in = open_in(path);
  expect_header(in, "agent,t,mean_cum,se,p10,p90", path);
  AggregateResult result;
  std::map<std::string, std::size_t> index;
  std::string line;
  while (std::getline(in, line)) {
    const auto cells = split_csv(line);
    if (cells.size() != 6) throw InputError(path.string() + ": bad row '" + line + "'");
    auto [it, inserted] = index.emplace(cells[0], result.curves.size());
    if (inserted) result.curves.push_back({cells[0], {}, {}, {}, {}});
    auto& c = result.curves[it->second];
    c.mean_cum.push_back(parse_double(cells[2], path.string()));
    c.se.push_back(parse_double(cells[3], path.string()));
    c.p10.push_back(parse_double(cells[4], path.string()));
    c.p90.push_back(parse_double(cells[5], path.string()));
  }
  return result;
}

std::vector<ModerationCurve> read_moderation_curves_csv(const fs::path& path) {
  auto in = open_in(path);
  expect_header(in, "agent,t,accuracy,effort", path);
  std::vector<ModerationCurve> curves;
  std::map<std::string, std::size_t> index;
  std::string line;
  while (std::getline(in, line)) {
    const auto cells = split_csv(line);
    if (cells.size() != 4) throw InputError(path.string() + ": bad row '" + line + "'");
    auto [it, inserted] = index.emplace(cells[0], curves.size());
    if (inserted) curves.push_back({cells[0], {}, {}});
    curves[it->second].accuracy.push_back(parse_double(cells[2], path.string()));
    curves[it->second].effort.push_back(parse_double(cells[3], path.string()));
  }
  return curves;
}

// ---------------------------------------------------------------------------

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const bool moderation = cfg.env.kind == "moderation";
  std::shared_ptr<const EmbeddingDataset> embeddings;
  if (moderation) {
    embeddings = std::make_shared<const EmbeddingDataset>(load_hbe1(cfg.env.embeddings));
    if (cfg.horizon > embeddings->size()) {
      throw ConfigError("T = " + std::to_string(cfg.horizon) + " exceeds the " +
                        std::to_string(embeddings->size()) + " posts in " + cfg.env.embeddings);
    }
  }

  const fs::path out_dir = cfg.output_dir;
  const fs::path runs_dir = out_dir / "runs";
  fs::create_directories(runs_dir);
  const fs::path config_path = out_dir / "experiment.json";
  const fs::path manifest_path = out_dir / "manifest.csv";
  const std::string config_text = to_json(cfg).dump(2) + "\n";

  std::map<RunKey, fs::path> done;
  if (options.resume && fs::exists(config_path) && read_file(config_path) == config_text) {
    done = read_manifest(manifest_path, cfg);
  }
  write_file(config_path, config_text);

  const std::size_t n_agents = cfg.agents.size();
  std::vector<RegretTrace> traces(n_agents * cfg.n_seeds);
  std::vector<bool> have(traces.size(), false);
  std::vector<RunKey> pending;
  for (std::size_t a = 0; a < n_agents; ++a) {
    for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
      const auto it = done.find({a, s});
      const fs::path run_path = runs_dir / run_file_name(cfg.agents[a].label, s);
      const fs::path actions_path = runs_dir / actions_file_name(cfg.agents[a].label, s);
      bool loaded = false;
      if (it != done.end() && fs::exists(run_path) && (!moderation || fs::exists(actions_path))) {
        try {
          traces[a * cfg.n_seeds + s] = load_run(run_path, actions_path, cfg.agents[a].label, s);
          loaded = traces[a * cfg.n_seeds + s].horizon() == cfg.horizon;
        } catch (const std::exception&) {
          loaded = false;
        }
      }
      if (loaded) {
        have[a * cfg.n_seeds + s] = true;
      } else {
        done.erase({a, s});
        pending.push_back({a, s});
      }
    }
  }

  std::mutex mutex;
  std::ofstream manifest;
  {
    std::string header = "agent,seed,file\n";
    for (const auto& [key, file] : done) {
      header += cfg.agents[key.first].label + "," + std::to_string(key.second) + "," +
                run_file_name(cfg.agents[key.first].label, key.second) + "\n";
    }
    write_file(manifest_path, header);
    manifest.open(manifest_path, std::ios::app);
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::string failure;
  auto worker = [&]() {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const auto [a, s] = pending[i];
      const std::string& label = cfg.agents[a].label;
      try {
        RegretTrace trace = run_single(cfg, a, s, embeddings);
        std::ostringstream csv;
        write_run_csv(csv, trace);
        write_file(runs_dir / run_file_name(label, s), csv.str());
        if (moderation) write_file(runs_dir / actions_file_name(label, s), actions_csv(trace));
        std::lock_guard<std::mutex> lock(mutex);
        manifest << label << ',' << s << ',' << run_file_name(label, s) << '\n';
        manifest.flush();
        traces[a * cfg.n_seeds + s] = std::move(trace);
        have[a * cfg.n_seeds + s] = true;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mutex);
        if (failure.empty()) failure = label + " seed " + std::to_string(s) + ": " + e.what();
        stop.store(true);
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs,
                                                        static_cast<unsigned>(pending.size())));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  manifest.close();

  std::string sorted = "agent,seed,file\n";
  std::size_t completed = 0;
  for (std::size_t a = 0; a < n_agents; ++a) {
    for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
      if (!have[a * cfg.n_seeds + s]) continue;
      ++completed;
      sorted += cfg.agents[a].label + "," + std::to_string(s) + "," +
                run_file_name(cfg.agents[a].label, s) + "\n";
    }
  }
  write_file(manifest_path, sorted);
  if (!failure.empty()) {
    throw RunFailure("run failed (" + std::to_string(completed) + " of " +
                     std::to_string(traces.size()) + " runs completed, see " +
                     manifest_path.string() + "): " + failure);
  }

  ExperimentResult result;
  result.traces = std::move(traces);
  result.aggregate = aggregate(result.traces);
  for (std::size_t a = 0; a < n_agents; ++a) {
    for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
      result.files.push_back(runs_dir / run_file_name(cfg.agents[a].label, s));
    }
  }
  {
    std::ostringstream csv;
    write_aggregate_csv(csv, result.aggregate);
    write_file(out_dir / "aggregate.csv", csv.str());
    result.files.push_back(out_dir / "aggregate.csv");
  }
  std::vector<ModerationCurve> curves;
  if (moderation) {
    std::ostringstream summary;
    summary << "agent,seed,accuracy,effort\n";
    for (const auto& trace : result.traces) {
      const auto s = moderation_summary(trace);
      summary << s.agent << ',' << s.seed << ',' << format_double(s.accuracy) << ','
              << format_double(s.effort) << '\n';
    }
    write_file(out_dir / "moderation.csv", summary.str());
    curves = moderation_curves(result.traces);
    std::ostringstream csv;
    write_moderation_curves_csv(csv, curves);
    write_file(out_dir / "moderation_curves.csv", csv.str());
    result.files.push_back(out_dir / "moderation.csv");
    result.files.push_back(out_dir / "moderation_curves.csv");
  }
  if (cfg.plot) {
    for (auto& p : render_plots(result.aggregate, curves, cfg.env.kind, out_dir)) {
      result.files.push_back(std::move(p));
    }
  }
  return result;
}

}  // namespace hyperagent

#pragma once

// Experiment configuration: line-oriented `key = value` text with dotted
// section prefixes, lossless round trip, strict key checking, and
// environment-variable overrides (ARIL_ + key upper-cased, '.' -> '_').

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "aril/errors.hpp"

namespace aril {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto t = trim(s);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

inline std::uint64_t parse_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto t = trim(s);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw std::invalid_argument("not a non-negative integer: '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& s) {
  const auto t = trim(s);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const std::function<T(const std::string&)>& one) {
  std::vector<T> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (trim(item).empty()) continue;
    out.push_back(one(item));
  }
  return out;
}

struct ExperimentConfig {
  // env
  std::string env_kind = "maze";  // maze | lifted_nav
  std::uint64_t maze_seed = 3;
  double maze_wall_density = 0.2;
  std::string maze_encoding = "onehot";  // onehot | coords
  std::uint64_t max_episode_steps = 0;   // 0: 200 for the maze, 100 for lifted_nav
  std::uint64_t lifted_obs_dim = 32;
  std::uint64_t lifted_seed = 11;

  // model
  std::uint64_t latent_dim = 8;
  std::vector<std::uint64_t> hidden{64, 64};
  std::string kernel = "rbf";  // rbf | rq
  double kernel_bandwidth = 0.0;  // <= 0: median heuristic
  double beta1 = 1.0;
  double beta = 1.0;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double lambda = 0.0;
  std::string disc_objective = "logistic";  // logistic | literal
  double wae_lr = 1e-3;
  double disc_lr = 1e-3;
  double policy_lr = 1e-3;
  double sr_lr = 1e-3;
  std::uint64_t batch_size = 32;
  double gamma = 0.95;
  double sr_gamma = 0.95;
  std::uint64_t sr_sync_period = 500;
  std::uint64_t q_sync_period = 200;
  std::uint64_t adversary_ratio = 1;

  // agent
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::uint64_t eps_decay_steps = 5000;
  std::uint64_t buffer_capacity = 50000;
  std::uint64_t learning_starts = 200;
  bool onpolicy_to_expert = true;
  bool reuse_labels = true;
  std::uint64_t onpolicy_min_interval = 0;
  std::uint64_t initial_demos = 1;
  bool halt_on_budget = false;

  // query
  std::string strategy = "coreset_sr";  // coreset_sr | random | uncertainty
  std::uint64_t n_k = 10;
  std::uint64_t t_off = 2000;
  double alpha = 0.05;
  std::uint64_t tau_window = 1000;
  std::uint64_t heads = 10;
  bool gate = true;
  std::uint64_t coreset_max_candidates = 2000;
  std::uint64_t coreset_max_iter = 100;

  // run
  std::uint64_t budget = 300;
  std::uint64_t total_steps = 20000;
  std::uint64_t eval_interval = 500;
  std::vector<std::uint64_t> seeds{1};
  std::string out_dir = "results";
  std::uint64_t workers = 1;

  bool operator==(const ExperimentConfig&) const = default;

  int episode_limit() const {
    if (max_episode_steps > 0) return static_cast<int>(max_episode_steps);
    return env_kind == "maze" ? 200 : 100;
  }
};

struct ConfigField {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

namespace detail {

template <typename T>
ConfigField field(std::string key, T ExperimentConfig::*member) {
  ConfigField f;
  f.key = std::move(key);
  if constexpr (std::is_same_v<T, std::string>) {
    f.get = [member](const ExperimentConfig& c) { return c.*member; };
    f.set = [member](ExperimentConfig& c, const std::string& v) { c.*member = trim(v); };
  } else if constexpr (std::is_same_v<T, bool>) {
    f.get = [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); };
    f.set = [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_bool(v); };
  } else if constexpr (std::is_same_v<T, double>) {
    f.get = [member](const ExperimentConfig& c) { return format_double(c.*member); };
    f.set = [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_double(v); };
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    f.get = [member](const ExperimentConfig& c) { return std::to_string(c.*member); };
    f.set = [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_uint(v); };
  } else {
    static_assert(std::is_same_v<T, std::vector<std::uint64_t>>);
    f.get = [member](const ExperimentConfig& c) {
      std::string s;
      for (std::size_t i = 0; i < (c.*member).size(); ++i) s += (i ? "," : "") + std::to_string((c.*member)[i]);
      return s;
    };
    f.set = [member](ExperimentConfig& c, const std::string& v) {
      c.*member = parse_list<std::uint64_t>(v, parse_uint);
    };
  }
  return f;
}

}  // namespace detail

inline const std::vector<ConfigField>& config_fields() {
  using C = ExperimentConfig;
  using detail::field;
  static const std::vector<ConfigField> fields{
      field("env.kind", &C::env_kind),
      field("env.maze_seed", &C::maze_seed),
      field("env.maze_wall_density", &C::maze_wall_density),
      field("env.maze_encoding", &C::maze_encoding),
      field("env.max_episode_steps", &C::max_episode_steps),
      field("env.lifted_obs_dim", &C::lifted_obs_dim),
      field("env.lifted_seed", &C::lifted_seed),
      field("model.latent_dim", &C::latent_dim),
      field("model.hidden", &C::hidden),
      field("model.kernel", &C::kernel),
      field("model.kernel_bandwidth", &C::kernel_bandwidth),
      field("model.beta1", &C::beta1),
      field("model.beta", &C::beta),
      field("model.alpha1", &C::alpha1),
      field("model.alpha2", &C::alpha2),
      field("model.lambda", &C::lambda),
      field("model.disc_objective", &C::disc_objective),
      field("model.wae_lr", &C::wae_lr),
      field("model.disc_lr", &C::disc_lr),
      field("model.policy_lr", &C::policy_lr),
      field("model.sr_lr", &C::sr_lr),
      field("model.batch_size", &C::batch_size),
      field("model.gamma", &C::gamma),
      field("model.sr_gamma", &C::sr_gamma),
      field("model.sr_sync_period", &C::sr_sync_period),
      field("model.q_sync_period", &C::q_sync_period),
      field("model.adversary_ratio", &C::adversary_ratio),
      field("agent.eps_start", &C::eps_start),
      field("agent.eps_end", &C::eps_end),
      field("agent.eps_decay_steps", &C::eps_decay_steps),
      field("agent.buffer_capacity", &C::buffer_capacity),
      field("agent.learning_starts", &C::learning_starts),
      field("agent.onpolicy_to_expert", &C::onpolicy_to_expert),
      field("agent.reuse_labels", &C::reuse_labels),
      field("agent.onpolicy_min_interval", &C::onpolicy_min_interval),
      field("agent.initial_demos", &C::initial_demos),
      field("agent.halt_on_budget", &C::halt_on_budget),
      field("query.strategy", &C::strategy),
      field("query.n_k", &C::n_k),
      field("query.t_off", &C::t_off),
      field("query.alpha", &C::alpha),
      field("query.tau_window", &C::tau_window),
      field("query.heads", &C::heads),
      field("query.gate", &C::gate),
      field("query.coreset_max_candidates", &C::coreset_max_candidates),
      field("query.coreset_max_iter", &C::coreset_max_iter),
      field("run.budget", &C::budget),
      field("run.total_steps", &C::total_steps),
      field("run.eval_interval", &C::eval_interval),
      field("run.seeds", &C::seeds),
      field("run.out_dir", &C::out_dir),
      field("run.workers", &C::workers),
  };
  return fields;
}

/// Throws ConfigError naming every offending key.
inline void validate(const ExperimentConfig& c) {
  std::vector<std::string> bad;
  auto check = [&](bool ok, const char* key) {
    if (!ok) bad.emplace_back(key);
  };
  check(c.env_kind == "maze" || c.env_kind == "lifted_nav", "env.kind");
  check(c.maze_wall_density >= 0.0 && c.maze_wall_density < 0.9, "env.maze_wall_density");
  check(c.maze_encoding == "onehot" || c.maze_encoding == "coords", "env.maze_encoding");
  check(c.lifted_obs_dim >= 2, "env.lifted_obs_dim");
  check(c.latent_dim >= 1, "model.latent_dim");
  check(c.kernel == "rbf" || c.kernel == "rq", "model.kernel");
  for (auto h : c.hidden) check(h >= 1, "model.hidden");
  check(c.beta1 >= 0.0 && std::isfinite(c.beta1), "model.beta1");
  check(c.beta >= 0.0 && std::isfinite(c.beta), "model.beta");
  check(c.alpha1 >= 0.0 && std::isfinite(c.alpha1), "model.alpha1");
  check(c.alpha2 >= 0.0 && std::isfinite(c.alpha2), "model.alpha2");
  check(c.lambda >= 0.0 && std::isfinite(c.lambda), "model.lambda");
  check(c.disc_objective == "logistic" || c.disc_objective == "literal", "model.disc_objective");
  check(c.wae_lr >= 0.0, "model.wae_lr");
  check(c.disc_lr >= 0.0, "model.disc_lr");
  check(c.policy_lr >= 0.0, "model.policy_lr");
  check(c.sr_lr >= 0.0, "model.sr_lr");
  check(c.batch_size >= 2, "model.batch_size");
  check(c.gamma >= 0.0 && c.gamma < 1.0, "model.gamma");
  check(c.sr_gamma >= 0.0 && c.sr_gamma < 1.0, "model.sr_gamma");
  check(c.eps_start >= 0.0 && c.eps_start <= 1.0, "agent.eps_start");
  check(c.eps_end >= 0.0 && c.eps_end <= 1.0, "agent.eps_end");
  check(c.buffer_capacity >= 1, "agent.buffer_capacity");
  check(c.strategy == "coreset_sr" || c.strategy == "random" || c.strategy == "uncertainty", "query.strategy");
  check(c.n_k >= 1, "query.n_k");
  check(c.t_off >= 1, "query.t_off");
  check(c.alpha > 0.0 && c.alpha < 1.0, "query.alpha");
  check(c.tau_window >= 1, "query.tau_window");
  check(c.heads >= 2 && c.heads <= 32, "query.heads");
  check(c.eval_interval >= 1, "run.eval_interval");
  check(!c.seeds.empty(), "run.seeds");
  check(c.workers >= 1, "run.workers");
  if (!bad.empty()) {
    std::string msg = "invalid config values:";
    for (const auto& k : bad) msg += " " + k;
    throw ConfigError(msg);
  }
}

inline std::string to_text(const ExperimentConfig& c) {
  std::string out;
  for (const auto& f : config_fields()) out += f.key + " = " + f.get(c) + "\n";
  return out;
}

inline const ConfigField* find_field(const std::string& key) {
  for (const auto& f : config_fields())
    if (f.key == key) return &f;
  return nullptr;
}

/// Parses `key = value` lines over the defaults. '#' starts a comment.
/// Unknown keys and unparsable values are collected and reported together.
inline ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {}) {
  std::vector<std::string> bad;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bad.push_back("line " + std::to_string(line_no) + " (missing '=')");
      continue;
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const ConfigField* f = find_field(key);
    if (!f) {
      bad.push_back(key + " (unknown key)");
      continue;
    }
    try {
      f->set(base, value);
    } catch (const std::invalid_argument&) {
      bad.push_back(key + " (bad value '" + value + "')");
    }
  }
  if (!bad.empty()) {
    std::string msg = "config errors:";
    for (const auto& b : bad) msg += " " + b + ";";
    throw ConfigError(msg);
  }
  return base;
}

inline std::string env_var_name(const std::string& key, const std::string& prefix = "ARIL_") {
  std::string name = prefix;
  for (char ch : key) name += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return name;
}

/// Applies overrides from environment variables, e.g. ARIL_QUERY_N_K=5.
inline ExperimentConfig apply_env_overrides(ExperimentConfig c, const std::string& prefix = "ARIL_") {
  std::vector<std::string> bad;
  for (const auto& f : config_fields()) {
    const char* v = std::getenv(env_var_name(f.key, prefix).c_str());
    if (!v) continue;
    try {
      f.set(c, v);
    } catch (const std::invalid_argument&) {
      bad.push_back(env_var_name(f.key, prefix));
    }
  }
  if (!bad.empty()) {
    std::string msg = "bad config override values:";
    for (const auto& b : bad) msg += " " + b;
    throw ConfigError(msg);
  }
  return c;
}

}  // namespace aril

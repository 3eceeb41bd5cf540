#pragma once

// Experiment runner, result files, checkpoints, strategy comparison and SVG
// plots.
//
// Output layout of one run directory:
//   config.txt          parsed configuration, one `key = value` per line
//   maze.txt            maze layout (maze tasks only)
//   metrics.csv         metrics rows of every seed, seeds ascending
//   seed_<n>/metrics.csv, seed_<n>/queries.csv, seed_<n>/checkpoint.txt

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "aril/agent.hpp"
#include "aril/config.hpp"
#include "aril/environments.hpp"
#include "aril/errors.hpp"

namespace aril::harness {

namespace fs = std::filesystem;

inline const std::vector<std::string> kMetricsColumns{
    "seed", "step", "episode", "greedy_return", "queries_onpolicy", "queries_offpolicy",
    "tau", "disc_loss", "wae_loss", "sr_loss", "policy_loss"};

inline const std::vector<std::string> kQueryColumns{"step", "kind", "state_id", "expert_action", "tau_at_query"};

// ==========================================================================
// Files

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

inline std::string join(const std::vector<std::string>& parts, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) s += sep;
    s += parts[i];
  }
  return s;
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// ==========================================================================
// CSV

inline std::string metrics_csv(const std::vector<agent::MetricsRow>& rows) {
  std::string s = join(kMetricsColumns) + "\n";
  for (const auto& r : rows) {
    s += join({std::to_string(r.seed), std::to_string(r.step), std::to_string(r.episode), format_double(r.greedy_return),
               std::to_string(r.queries_onpolicy), std::to_string(r.queries_offpolicy), format_double(r.tau),
               format_double(r.disc_loss), format_double(r.wae_loss), format_double(r.sr_loss),
               format_double(r.policy_loss)});
    s += "\n";
  }
  return s;
}

inline std::string query_log_csv(const QueryLog& log) {
  std::string s = join(kQueryColumns) + "\n";
  for (const auto& q : log)
    s += join({std::to_string(q.step), to_string(q.kind), q.state_id, std::to_string(q.expert_action),
               format_double(q.tau)}) +
         "\n";
  return s;
}

namespace detail {

// Rows of a CSV whose header must equal `columns` exactly.
inline std::vector<std::vector<std::string>> strict_rows(const std::string& text,
                                                         const std::vector<std::string>& columns,
                                                         const std::string& what) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split(line) != columns) throw ConfigError(what + ": unexpected CSV header");
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != columns.size())
      throw ConfigError(what + ": line " + std::to_string(line_no) + " has " + std::to_string(f.size()) + " fields");
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace detail

inline std::vector<agent::MetricsRow> parse_metrics_csv(const std::string& text) {
  std::vector<agent::MetricsRow> out;
  for (const auto& f : detail::strict_rows(text, kMetricsColumns, "metrics")) {
    agent::MetricsRow r;
    r.seed = parse_uint(f[0]);
    r.step = parse_uint(f[1]);
    r.episode = parse_uint(f[2]);
    r.greedy_return = parse_double(f[3]);
    r.queries_onpolicy = parse_uint(f[4]);
    r.queries_offpolicy = parse_uint(f[5]);
    r.tau = parse_double(f[6]);
    r.disc_loss = parse_double(f[7]);
    r.wae_loss = parse_double(f[8]);
    r.sr_loss = parse_double(f[9]);
    r.policy_loss = parse_double(f[10]);
    out.push_back(r);
  }
  return out;
}

inline QueryLog parse_query_log_csv(const std::string& text) {
  QueryLog out;
  for (const auto& f : detail::strict_rows(text, kQueryColumns, "query log")) {
    QueryRecord q;
    q.step = parse_uint(f[0]);
    if (f[1] == "onpolicy") q.kind = QueryKind::onpolicy;
    else if (f[1] == "offpolicy") q.kind = QueryKind::offpolicy;
    else if (f[1] == "baseline") q.kind = QueryKind::baseline;
    else throw ConfigError("query log: unknown kind '" + f[1] + "'");
    q.state_id = f[2];
    q.expert_action = static_cast<int>(parse_uint(f[3]));
    q.tau = parse_double(f[4]);
    out.push_back(q);
  }
  return out;
}

// ==========================================================================
// Checkpoints
//
// Whitespace-separated text:
//   aril-checkpoint 1
//   config <n>            followed by n config lines
//   layout <n>            followed by n maze rows (n = 0 for other tasks)
//   mlp <name> <hidden activation> <output activation> <L> <size_0> ... <size_L>
//     then per layer: weights row-major (out x in), then bias
//   ... one mlp record per network ...
//   end
// Doubles use the shortest representation that round-trips exactly.

struct Checkpoint {
  ExperimentConfig config;
  std::string layout;
  repr::WaeModel wae;
  adv::Discriminator disc;
  sr::SrModel sr;
  agent::PolicyModel policy;
};

namespace detail {

inline void write_mlp(std::string& out, const std::string& name, const nn::MlpParams& p) {
  out += "mlp " + name + " " + nn::to_string(p.spec.hidden) + " " + nn::to_string(p.spec.output) + " " +
         std::to_string(p.spec.num_layers());
  for (auto s : p.spec.layer_sizes) out += " " + std::to_string(s);
  out += "\n";
  for (const auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) out += (i ? " " : "") + format_double(l.weight.data()[i]);
    out += "\n";
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) out += (i ? " " : "") + format_double(l.bias.data()[i]);
    out += "\n";
  }
}

inline std::string next_token(std::istream& in) {
  std::string t;
  if (!(in >> t)) throw ConfigError("checkpoint: unexpected end of file");
  return t;
}

inline nn::MlpParams read_mlp(std::istream& in, const std::string& expect) {
  if (next_token(in) != "mlp") throw ConfigError("checkpoint: expected mlp record");
  const std::string name = next_token(in);
  if (name != expect) throw ConfigError("checkpoint: expected network " + expect + ", found " + name);
  nn::MlpSpec spec;
  spec.hidden = nn::activation_from_string(next_token(in));
  spec.output = nn::activation_from_string(next_token(in));
  const auto layers = parse_uint(next_token(in));
  for (std::uint64_t i = 0; i <= layers; ++i) spec.layer_sizes.push_back(parse_uint(next_token(in)));
  nn::MlpParams p = nn::zero_mlp(spec);
  p.for_each_scalar([&](double& x) { x = parse_double(next_token(in)); });
  return p;
}

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace detail

inline std::string checkpoint_text(const ExperimentConfig& config, const agent::RunResult& r) {
  std::string out = "aril-checkpoint 1\n";
  const auto cfg = detail::lines_of(to_text(config));
  out += "config " + std::to_string(cfg.size()) + "\n";
  for (const auto& l : cfg) out += l + "\n";
  const auto layout = detail::lines_of(r.maze_layout);
  out += "layout " + std::to_string(layout.size()) + "\n";
  for (const auto& l : layout) out += l + "\n";
  detail::write_mlp(out, "wae.encoder", r.wae.encoder);
  detail::write_mlp(out, "wae.decoder", r.wae.decoder);
  detail::write_mlp(out, "disc", r.disc.net);
  detail::write_mlp(out, "sr.psi", r.sr.psi);
  detail::write_mlp(out, "sr.target", r.sr.target);
  detail::write_mlp(out, "policy.q", r.policy.q);
  detail::write_mlp(out, "policy.target", r.policy.target);
  out += "end\n";
  return out;
}

inline Checkpoint parse_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "aril-checkpoint 1") throw ConfigError("checkpoint: bad header");
  auto count_line = [&](const std::string& tag) {
    if (!std::getline(in, line)) throw ConfigError("checkpoint: truncated");
    const auto parts = split(line, ' ');
    if (parts.size() != 2 || parts[0] != tag) throw ConfigError("checkpoint: expected " + tag + " record");
    return parse_uint(parts[1]);
  };
  Checkpoint c;
  std::string cfg;
  for (auto n = count_line("config"); n > 0; --n) {
    if (!std::getline(in, line)) throw ConfigError("checkpoint: truncated config");
    cfg += line + "\n";
  }
  c.config = parse_config(cfg);
  for (auto n = count_line("layout"); n > 0; --n) {
    if (!std::getline(in, line)) throw ConfigError("checkpoint: truncated layout");
    c.layout += line + "\n";
  }
  c.wae.encoder = detail::read_mlp(in, "wae.encoder");
  c.wae.decoder = detail::read_mlp(in, "wae.decoder");
  c.wae.kernel.kind = repr::kernel_from_string(c.config.kernel);
  c.wae.kernel.bandwidth = c.config.kernel_bandwidth;
  c.wae.beta1 = c.config.beta1;
  c.disc.net = detail::read_mlp(in, "disc");
  c.disc.latent_dim = c.config.latent_dim;
  c.disc.num_actions = c.disc.net.spec.input_size() - c.config.latent_dim;
  c.sr.psi = detail::read_mlp(in, "sr.psi");
  c.sr.target = detail::read_mlp(in, "sr.target");
  c.sr.gamma = c.config.sr_gamma;
  c.sr.sync_period = c.config.sr_sync_period;
  c.policy.q = detail::read_mlp(in, "policy.q");
  c.policy.target = detail::read_mlp(in, "policy.target");
  c.policy.gamma = c.config.gamma;
  c.policy.lambda = c.config.lambda;
  if (detail::next_token(in) != "end") throw ConfigError("checkpoint: missing end marker");
  return c;
}

/// SR vectors of every free maze cell under the checkpoint's encoder:
/// `cell,psi_0,...,psi_{k-1}` with cell = y * width + x.
inline std::string sr_dump(const Checkpoint& c) {
  if (c.layout.empty()) throw ConfigError("sr-dump: checkpoint has no maze layout");
  env::MazeSpec spec = env::parse_layout(c.layout);
  spec.encoding = c.config.maze_encoding == "coords" ? env::MazeEncoding::coordinates : env::MazeEncoding::one_hot;
  const std::size_t k = c.sr.feature_dim();
  std::string out = "cell";
  for (std::size_t i = 0; i < k; ++i) out += ",psi_" + std::to_string(i);
  out += "\n";
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const env::Cell cell{x, y};
      if (spec.is_wall(cell)) continue;
      const Vector psi = sr::sr_forward(c.sr, repr::encode(c.wae, env::maze_observe(spec, cell)));
      out += std::to_string(y * spec.width + x);
      for (Eigen::Index i = 0; i < psi.size(); ++i) out += "," + format_double(psi(i));
      out += "\n";
    }
  }
  return out;
}

// ==========================================================================
// Running

struct ExperimentOutput {
  fs::path directory;
  std::vector<agent::RunResult> runs;  // seeds ascending
};

/// Runs every seed of `config` (on `config.workers` threads) and writes the
/// run directory. The config echo is written before any training starts.
inline ExperimentOutput run_experiment(const ExperimentConfig& config) {
  validate(config);
  const fs::path dir = config.out_dir;
  fs::create_directories(dir);
  write_file(dir / "config.txt", to_text(config));

  std::vector<std::uint64_t> seeds(config.seeds.begin(), config.seeds.end());
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

  std::vector<std::optional<agent::RunResult>> results(seeds.size());
  std::vector<std::string> errors(seeds.size());
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= seeds.size()) return;
        i = next++;
      }
      try {
        agent::RunResult r = agent::run_training(config, seeds[i]);
        const fs::path sd = dir / ("seed_" + std::to_string(seeds[i]));
        write_file(sd / "metrics.csv", metrics_csv(r.metrics));
        write_file(sd / "queries.csv", query_log_csv(r.queries));
        write_file(sd / "checkpoint.txt", checkpoint_text(config, r));
        results[i] = std::move(r);
      } catch (const std::exception& e) {
        errors[i] = "seed " + std::to_string(seeds[i]) + ": " + e.what();
      }
    }
  };
  const std::size_t n_workers = std::min<std::size_t>(config.workers, seeds.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error("run failed: " + e);

  ExperimentOutput out;
  out.directory = dir;
  std::vector<agent::MetricsRow> merged;
  for (auto& r : results) {
    merged.insert(merged.end(), r->metrics.begin(), r->metrics.end());
    out.runs.push_back(std::move(*r));
  }
  if (!out.runs.empty() && !out.runs.front().maze_layout.empty()) write_file(dir / "maze.txt", out.runs.front().maze_layout);
  write_file(dir / "metrics.csv", metrics_csv(merged));
  return out;
}

// ==========================================================================
// Comparison

inline std::size_t total_queries(const agent::MetricsRow& r) { return r.queries_onpolicy + r.queries_offpolicy; }

/// Greedy return at the first row whose cumulative query count reached the
/// budget, or at the last row when the budget was never reached.
inline double return_at_budget(const std::vector<agent::MetricsRow>& rows, std::size_t budget) {
  if (rows.empty()) throw std::invalid_argument("return_at_budget: empty series");
  for (const auto& r : rows)
    if (total_queries(r) >= budget) return r.greedy_return;
  return rows.back().greedy_return;
}

/// Greedy return once `q` queries had been spent: the first row with at
/// least q queries, else the last row.
inline double return_at_queries(const std::vector<agent::MetricsRow>& rows, std::size_t q) {
  return return_at_budget(rows, q);
}

struct StrategyResult {
  std::string label;
  std::string env_signature;
  std::size_t budget = 0;
  std::map<std::uint64_t, std::vector<agent::MetricsRow>> series;  // by seed
};

struct StrategySummary {
  std::string label;
  std::size_t budget = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_returns;
  std::vector<double> budget_returns;
  std::vector<std::size_t> queries;
  double mean_final = 0.0, se_final = 0.0;
  double mean_budget = 0.0, se_budget = 0.0;
  std::vector<double> curve;  // mean return at each query grid point
};

struct PairwiseResult {
  std::string a, b;
  std::size_t wins_a = 0, wins_b = 0, ties = 0;  // on return-at-budget, per seed
  double mean_difference = 0.0;                  // mean of a - b
  double t_statistic = 0.0;                      // paired t; 0 when all differences are equal
  double p_value = 1.0;                          // two-sided
};

struct ComparisonReport {
  std::vector<std::size_t> query_grid;
  std::vector<StrategySummary> strategies;
  std::vector<PairwiseResult> pairs;

  const StrategySummary& strategy(const std::string& label) const {
    for (const auto& s : strategies)
      if (s.label == label) return s;
    throw std::out_of_range("no strategy " + label);
  }
  const PairwiseResult& pair(const std::string& a, const std::string& b) const {
    for (const auto& p : pairs)
      if (p.a == a && p.b == b) return p;
    throw std::out_of_range("no pair " + a + "/" + b);
  }
};

inline std::pair<double, double> mean_se(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()))};
}

inline PairwiseResult paired_compare(const std::string& la, const std::vector<double>& a, const std::string& lb,
                                     const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_compare: sizes differ");
  PairwiseResult p{la, lb};
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) ++p.wins_a;
    else if (b[i] > a[i]) ++p.wins_b;
    else ++p.ties;
    d.push_back(a[i] - b[i]);
  }
  const auto [m, se] = mean_se(d);
  p.mean_difference = m;
  if (d.size() >= 2 && se > 0.0) {
    p.t_statistic = m / se;
    boost::math::students_t dist(static_cast<double>(d.size() - 1));
    p.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(p.t_statistic)));
  } else {
    p.p_value = m == 0.0 ? 1.0 : 0.0;
  }
  return p;
}

/// Compares strategies that share environment, budget and seed list.
inline ComparisonReport compare(const std::vector<StrategyResult>& inputs, std::size_t grid_points = 10) {
  if (inputs.size() < 2) throw ConfigError("compare: need at least two result sets");
  const auto& ref = inputs.front();
  std::set<std::string> labels;
  for (const auto& s : inputs) {
    if (!labels.insert(s.label).second) throw ConfigError("compare: duplicate strategy label " + s.label);
    if (s.budget != ref.budget) throw ConfigError("compare: budgets differ (" + s.label + ")");
    if (s.env_signature != ref.env_signature) throw ConfigError("compare: environments differ (" + s.label + ")");
    if (s.series.empty()) throw ConfigError("compare: no seeds in " + s.label);
    std::vector<std::uint64_t> a, b;
    for (const auto& kv : s.series) a.push_back(kv.first);
    for (const auto& kv : ref.series) b.push_back(kv.first);
    if (a != b) throw ConfigError("compare: seed lists differ (" + s.label + ")");
  }
  ComparisonReport rep;
  for (std::size_t i = 0; i <= grid_points; ++i) rep.query_grid.push_back(ref.budget * i / std::max<std::size_t>(grid_points, 1));
  for (const auto& s : inputs) {
    StrategySummary sum;
    sum.label = s.label;
    sum.budget = s.budget;
    for (const auto& [seed, rows] : s.series) {
      if (rows.empty()) throw ConfigError("compare: empty series for seed " + std::to_string(seed) + " in " + s.label);
      sum.seeds.push_back(seed);
      sum.final_returns.push_back(rows.back().greedy_return);
      sum.budget_returns.push_back(return_at_budget(rows, s.budget));
      sum.queries.push_back(total_queries(rows.back()));
    }
    std::tie(sum.mean_final, sum.se_final) = mean_se(sum.final_returns);
    std::tie(sum.mean_budget, sum.se_budget) = mean_se(sum.budget_returns);
    for (auto q : rep.query_grid) {
      std::vector<double> v;
      for (const auto& kv : s.series) v.push_back(return_at_queries(kv.second, q));
      sum.curve.push_back(mean_se(v).first);
    }
    rep.strategies.push_back(std::move(sum));
  }
  for (std::size_t i = 0; i < rep.strategies.size(); ++i)
    for (std::size_t j = 0; j < rep.strategies.size(); ++j)
      if (i != j)
        rep.pairs.push_back(paired_compare(rep.strategies[i].label, rep.strategies[i].budget_returns,
                                           rep.strategies[j].label, rep.strategies[j].budget_returns));
  return rep;
}

inline std::string env_signature(const ExperimentConfig& c) {
  std::string s = c.env_kind;
  if (c.env_kind == "maze") s += ":" + std::to_string(c.maze_seed) + ":" + format_double(c.maze_wall_density);
  else s += ":" + std::to_string(c.lifted_obs_dim) + ":" + std::to_string(c.lifted_seed);
  return s + ":" + std::to_string(c.episode_limit());
}

/// Loads a run directory written by run_experiment.
inline StrategyResult load_result(const fs::path& dir) {
  const ExperimentConfig c = parse_config(read_file(dir / "config.txt"));
  StrategyResult s;
  s.label = c.strategy;
  s.budget = c.budget;
  s.env_signature = env_signature(c);
  for (auto& row : parse_metrics_csv(read_file(dir / "metrics.csv"))) s.series[row.seed].push_back(row);
  return s;
}

inline std::string report_text(const ComparisonReport& r) {
  std::string s = "strategy,seeds,budget,mean_final,se_final,mean_at_budget,se_at_budget\n";
  for (const auto& x : r.strategies)
    s += join({x.label, std::to_string(x.seeds.size()), std::to_string(x.budget), format_double(x.mean_final),
               format_double(x.se_final), format_double(x.mean_budget), format_double(x.se_budget)}) +
         "\n";
  s += "\nstrategy_a,strategy_b,wins_a,wins_b,ties,mean_difference,t,p_value\n";
  for (const auto& p : r.pairs)
    s += join({p.a, p.b, std::to_string(p.wins_a), std::to_string(p.wins_b), std::to_string(p.ties),
               format_double(p.mean_difference), format_double(p.t_statistic), format_double(p.p_value)}) +
         "\n";
  s += "\nqueries";
  for (const auto& x : r.strategies) s += "," + x.label;
  s += "\n";
  for (std::size_t i = 0; i < r.query_grid.size(); ++i) {
    s += std::to_string(r.query_grid[i]);
    for (const auto& x : r.strategies) s += "," + format_double(x.curve[i]);
    s += "\n";
  }
  return s;
}

// ==========================================================================
// Plots

namespace detail {

struct Range {
  double lo = 0.0, hi = 1.0;
};

inline Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

inline std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

struct Panel {
  double x0, y0, w, h;
  Range xr, yr;
  double px(double x) const { return x0 + (x - xr.lo) / (xr.hi - xr.lo) * w; }
  double py(double y) const { return y0 + h - (y - yr.lo) / (yr.hi - yr.lo) * h; }
};

inline std::string polyline(const Panel& p, const std::vector<std::pair<double, double>>& pts, const std::string& cls,
                            const std::string& style) {
  std::string s = "<polyline class=\"" + cls + "\" fill=\"none\" " + style + " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) s += (i ? " " : "") + num(p.px(pts[i].first)) + "," + num(p.py(pts[i].second));
  return s + "\"/>\n";
}

inline std::string axes(const Panel& p, const std::string& xlabel, const std::string& ylabel, const std::string& title) {
  std::string s;
  s += "<rect x=\"" + num(p.x0) + "\" y=\"" + num(p.y0) + "\" width=\"" + num(p.w) + "\" height=\"" + num(p.h) +
       "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = p.xr.lo + (p.xr.hi - p.xr.lo) * i / 4.0;
    const double fy = p.yr.lo + (p.yr.hi - p.yr.lo) * i / 4.0;
    s += "<text class=\"tick\" x=\"" + num(p.px(fx)) + "\" y=\"" + num(p.y0 + p.h + 16) +
         "\" font-size=\"10\" text-anchor=\"middle\">" + num(fx) + "</text>\n";
    s += "<text class=\"tick\" x=\"" + num(p.x0 - 6) + "\" y=\"" + num(p.py(fy) + 3) +
         "\" font-size=\"10\" text-anchor=\"end\">" + num(fy) + "</text>\n";
  }
  s += "<text class=\"xlabel\" x=\"" + num(p.x0 + p.w / 2) + "\" y=\"" + num(p.y0 + p.h + 34) +
       "\" font-size=\"12\" text-anchor=\"middle\">" + xlabel + "</text>\n";
  s += "<text class=\"ylabel\" x=\"" + num(p.x0 - 44) + "\" y=\"" + num(p.y0 + p.h / 2) +
       "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 " + num(p.x0 - 44) + " " +
       num(p.y0 + p.h / 2) + ")\">" + ylabel + "</text>\n";
  s += "<text class=\"title\" x=\"" + num(p.x0 + p.w / 2) + "\" y=\"" + num(p.y0 - 8) +
       "\" font-size=\"13\" text-anchor=\"middle\">" + title + "</text>\n";
  return s;
}

}  // namespace detail

/// Two-panel SVG: greedy return against environment step and against
/// cumulative queries. One faint trace per seed plus the across-seed mean.
inline std::string emit_plot(const std::vector<agent::MetricsRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("emit_plot: empty series");
  std::map<std::uint64_t, std::vector<agent::MetricsRow>> by_seed;
  for (const auto& r : rows) by_seed[r.seed].push_back(r);

  double smin = 1e300, smax = -1e300, qmin = 1e300, qmax = -1e300, rmin = 1e300, rmax = -1e300;
  for (const auto& r : rows) {
    smin = std::min(smin, static_cast<double>(r.step));
    smax = std::max(smax, static_cast<double>(r.step));
    qmin = std::min(qmin, static_cast<double>(total_queries(r)));
    qmax = std::max(qmax, static_cast<double>(total_queries(r)));
    rmin = std::min(rmin, r.greedy_return);
    rmax = std::max(rmax, r.greedy_return);
  }
  const detail::Range yr = detail::padded(rmin, rmax);
  const detail::Panel left{70, 40, 380, 260, detail::padded(smin, smax), yr};
  const detail::Panel right{560, 40, 380, 260, detail::padded(qmin, qmax), yr};

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"360\" viewBox=\"0 0 1000 360\">\n"
      "<rect width=\"1000\" height=\"360\" fill=\"white\"/>\n";
  svg += detail::axes(left, "environment step", "greedy return", "return vs step");
  svg += detail::axes(right, "cumulative queries", "greedy return", "return vs queries");

  const std::string faint = "stroke=\"#1f77b4\" stroke-opacity=\"0.3\" stroke-width=\"1\"";
  const std::string bold = "stroke=\"#d62728\" stroke-width=\"2.5\"";
  std::map<std::size_t, std::vector<double>> at_step;
  for (const auto& [seed, series] : by_seed) {
    std::vector<std::pair<double, double>> a, b;
    for (const auto& r : series) {
      a.emplace_back(static_cast<double>(r.step), r.greedy_return);
      b.emplace_back(static_cast<double>(total_queries(r)), r.greedy_return);
      at_step[r.step].push_back(r.greedy_return);
    }
    svg += detail::polyline(left, a, "seed", faint);
    svg += detail::polyline(right, b, "seed", faint);
  }
  std::vector<std::pair<double, double>> mean_step;
  for (const auto& [step, v] : at_step) mean_step.emplace_back(static_cast<double>(step), mean_se(v).first);
  svg += detail::polyline(left, mean_step, "mean", bold);

  // Query-aligned mean on an even grid over the observed query range.
  std::vector<std::pair<double, double>> mean_q;
  const int grid = 20;
  for (int i = 0; i <= grid; ++i) {
    const double q = qmin + (qmax - qmin) * i / grid;
    std::vector<double> v;
    for (const auto& kv : by_seed) v.push_back(return_at_queries(kv.second, static_cast<std::size_t>(std::ceil(q - 1e-9))));
    mean_q.emplace_back(q, mean_se(v).first);
    if (qmax == qmin) break;
  }
  svg += detail::polyline(right, mean_q, "mean", bold);
  svg += "</svg>\n";
  return svg;
}

}  // namespace aril::harness

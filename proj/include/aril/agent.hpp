#pragma once

// The learning policy and the full active imitation loop: act, gate the
// action through the discriminator, step, store, then update policy,
// adversary and successor models; every T_off steps run the off-policy query.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "aril/adversary.hpp"
#include "aril/config.hpp"
#include "aril/data.hpp"
#include "aril/environments.hpp"
#include "aril/numerics.hpp"
#include "aril/query.hpp"
#include "aril/representation.hpp"
#include "aril/successor.hpp"

namespace aril::agent {

// ==========================================================================
// Policy

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  std::size_t decay_steps = 5000;

  double at(std::size_t step) const {
    if (decay_steps == 0 || step >= decay_steps) return end;
    return start + (end - start) * static_cast<double>(step) / static_cast<double>(decay_steps);
  }
};

struct PolicyModel {
  nn::MlpParams q;       // latent -> per-action values
  nn::MlpParams target;  // synced every sync_period updates
  nn::AdamState opt;
  double gamma = 0.95;
  double lambda = 0.0;  // soft-Q temperature; 0 gives the hard max
  EpsilonSchedule epsilon;
  std::size_t sync_period = 200;
  std::size_t updates = 0;

  std::size_t num_actions() const { return q.spec.output_size(); }
};

inline PolicyModel make_policy(std::size_t latent_dim, std::size_t num_actions,
                               const std::vector<std::size_t>& hidden, double gamma, double lambda,
                               double learning_rate, Rng& rng) {
  PolicyModel p;
  p.q = nn::init_mlp(nn::make_spec(latent_dim, hidden, num_actions), rng);
  p.target = p.q;
  p.opt = nn::make_adam(p.q, {.learning_rate = learning_rate});
  p.gamma = gamma;
  p.lambda = lambda;
  return p;
}

/// First index of the maximum.
inline int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = static_cast<int>(i);
  return best;
}

inline int greedy_action(const PolicyModel& p, const Vector& z) {
  return argmax(nn::mlp_forward(p.q, z).transpose());
}

/// Epsilon-greedy: with probability eps a uniform action, else the greedy one.
inline int act(const PolicyModel& p, const Vector& z, double eps, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < eps) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(p.num_actions()) - 1);
    return pick(rng);
  }
  return greedy_action(p, z);
}

/// State value used in the bootstrap target: max_a Q, or
/// lambda * logsumexp(Q / lambda) when lambda > 0.
inline double bootstrap_value(const Eigen::Ref<const Eigen::RowVectorXd>& q, double lambda) {
  const double m = q.maxCoeff();
  if (lambda <= 0.0) return m;
  return m + lambda * std::log(((q.array() - m) / lambda).exp().sum());
}

struct TdBatch {
  Matrix latents;
  std::vector<int> actions;
  Vector rewards;
  Matrix next_latents;
  std::vector<bool> terminal;
};

/// Mean squared TD error of Q(z, a) against r + gamma * V_target(z').
inline double policy_td_loss(const PolicyModel& p, const TdBatch& b, nn::MlpParams* grad = nullptr) {
  const Eigen::Index n = b.latents.rows();
  require_shape(static_cast<std::size_t>(n) == b.actions.size() && b.rewards.size() == n &&
                    b.next_latents.rows() == n && static_cast<std::size_t>(n) == b.terminal.size(),
                "policy_td_loss: batch fields disagree in size");
  const Matrix next_q = nn::forward(p.target, b.next_latents);
  nn::Tape tape;
  const Matrix q = nn::forward(p.q, b.latents, grad ? &tape : nullptr);
  Matrix upstream = Matrix::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double y = b.rewards(i);
    if (!b.terminal[static_cast<std::size_t>(i)]) y += p.gamma * bootstrap_value(next_q.row(i), p.lambda);
    if (!std::isfinite(y)) throw DivergenceError("policy: non-finite TD target");
    const int a = b.actions[static_cast<std::size_t>(i)];
    const double err = q(i, a) - y;
    loss += err * err;
    upstream(i, a) = 2.0 * err / static_cast<double>(n);
  }
  if (grad) nn::backward(p.q, tape, upstream, *grad);
  return loss / static_cast<double>(n);
}

inline double policy_train_step(PolicyModel& p, const TdBatch& b) {
  nn::MlpParams g = nn::zeros_like(p.q);
  const double loss = policy_td_loss(p, b, &g);
  nn::adam_step(p.q, g, p.opt);
  if (p.sync_period > 0 && ++p.updates % p.sync_period == 0) p.target = p.q;
  return loss;
}

/// TD batch from replay transitions with rewards recomputed from the current
/// discriminator; stored environment rewards are ignored.
inline TdBatch imitation_batch(const std::vector<const env::Transition*>& ts, const adv::Discriminator& d,
                               const repr::WaeModel& wae) {
  TdBatch b;
  std::vector<Vector> s, sn;
  for (const auto* t : ts) {
    s.push_back(t->state);
    sn.push_back(t->next_state);
    b.actions.push_back(t->action);
    b.terminal.push_back(t->terminal());
  }
  b.latents = repr::encode_batch(wae, stack_rows(s));
  b.next_latents = repr::encode_batch(wae, stack_rows(sn));
  const Vector scores = adv::score_batch(d, b.latents, b.actions);
  b.rewards = scores.unaryExpr([](double x) { return adv::reward_from_score(x); });
  return b;
}

/// One Q-learning step on imitation rewards. Returns the TD loss.
inline double policy_update(PolicyModel& p, const std::vector<const env::Transition*>& ts,
                            const adv::Discriminator& d, const repr::WaeModel& wae) {
  return policy_train_step(p, imitation_batch(ts, d, wae));
}

/// Bootstrapped-ensemble TD loss: head k only sees transitions whose mask
/// bit k is set.
inline double ensemble_td_loss(const query::QEnsemble& e, const TdBatch& b, const std::vector<std::uint32_t>& masks,
                               double gamma, nn::MlpParams* grad = nullptr) {
  const Eigen::Index n = b.latents.rows();
  const auto A = static_cast<Eigen::Index>(e.num_actions);
  const Matrix next_q = nn::forward(e.target, b.next_latents);
  nn::Tape tape;
  const Matrix q = nn::forward(e.net, b.latents, grad ? &tape : nullptr);
  Matrix upstream = Matrix::Zero(q.rows(), q.cols());
  double loss = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t k = 0; k < e.heads; ++k)
      if (masks[static_cast<std::size_t>(i)] >> k & 1u) ++count;
  if (count == 0) return 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < e.heads; ++k) {
      if (!(masks[static_cast<std::size_t>(i)] >> k & 1u)) continue;
      const auto off = static_cast<Eigen::Index>(k) * A;
      double y = b.rewards(i);
      if (!b.terminal[static_cast<std::size_t>(i)]) y += gamma * next_q.row(i).segment(off, A).maxCoeff();
      const Eigen::Index col = off + b.actions[static_cast<std::size_t>(i)];
      const double err = q(i, col) - y;
      loss += err * err;
      upstream(i, col) = 2.0 * err / static_cast<double>(count);
    }
  }
  if (grad) nn::backward(e.net, tape, upstream, *grad);
  return loss / static_cast<double>(count);
}

// ==========================================================================
// Run bookkeeping

struct MetricsRow {
  std::uint64_t seed = 0;
  std::size_t step = 0;
  std::size_t episode = 0;
  double greedy_return = 0.0;
  std::size_t queries_onpolicy = 0;
  std::size_t queries_offpolicy = 0;
  double tau = 0.0;
  double disc_loss = 0.0;
  double wae_loss = 0.0;
  double sr_loss = 0.0;
  double policy_loss = 0.0;
};

struct GateAudit {
  std::size_t gated_steps = 0;              // score < tau while the gate was active
  std::size_t gated_policy_executed = 0;    // gated, budget left, yet policy action executed
  std::size_t cached_substitutions = 0;     // gated and answered from the expert dataset
  std::size_t oracle_substitutions = 0;     // gated and answered by a paid query
  std::size_t denied = 0;                   // gated with the budget exhausted
};

struct RunResult {
  std::uint64_t seed = 0;
  std::string strategy;
  std::vector<MetricsRow> metrics;
  QueryLog queries;
  GateAudit audit;
  std::size_t oracle_calls = 0;
  std::size_t budget_used = 0;
  double expert_mean_return = 0.0;
  double final_greedy_return = 0.0;
  std::string maze_layout;  // empty for non-maze tasks
  repr::WaeModel wae;
  adv::Discriminator disc;
  sr::SrModel sr;
  PolicyModel policy;
};

inline std::unique_ptr<env::Environment> make_environment(const ExperimentConfig& c) {
  if (c.env_kind == "maze") {
    env::MazeSpec spec = env::generate_maze(c.maze_seed, c.maze_wall_density);
    spec.encoding = c.maze_encoding == "coords" ? env::MazeEncoding::coordinates : env::MazeEncoding::one_hot;
    spec.max_episode_steps = c.episode_limit();
    return std::make_unique<env::MazeEnv>(std::move(spec));
  }
  env::LiftedNavSpec spec = env::make_lifted_nav(c.lifted_obs_dim, c.lifted_seed);
  spec.max_episode_steps = c.episode_limit();
  return std::make_unique<env::LiftedNavEnv>(std::move(spec));
}

/// Mean return of the greedy policy over the environment's evaluation starts.
/// Uses the true task reward; the learner never sees it.
inline double evaluate_greedy(env::Environment& e, const PolicyModel& p, const repr::WaeModel& wae) {
  std::unordered_map<std::string, int> cache;
  double total = 0.0;
  const std::size_t starts = e.num_evaluation_starts();
  for (std::size_t i = 0; i < starts; ++i) {
    Vector s = e.reset_to_evaluation_start(i);
    double ret = 0.0;
    for (int t = 0; t < e.max_episode_steps(); ++t) {
      const std::string key = observation_key(s);
      auto it = cache.find(key);
      if (it == cache.end()) it = cache.emplace(key, greedy_action(p, repr::encode(wae, s))).first;
      const env::StepResult r = e.step(it->second);
      ret += r.reward;
      s = r.observation;
      if (r.done) break;
    }
    total += ret;
  }
  return total / static_cast<double>(starts);
}

/// Mean return of the simulated expert over the evaluation starts.
inline double evaluate_expert(env::Environment& e) {
  if (auto* maze = dynamic_cast<env::MazeEnv*>(&e)) return maze->expert_mean_return();
  double total = 0.0;
  for (std::size_t i = 0; i < e.num_evaluation_starts(); ++i) {
    Vector s = e.reset_to_evaluation_start(i);
    for (int t = 0; t < e.max_episode_steps(); ++t) {
      const env::StepResult r = e.step(e.expert_action(s));
      total += r.reward;
      s = r.observation;
      if (r.done) break;
    }
  }
  return total / static_cast<double>(e.num_evaluation_starts());
}

/// Substitutes the expert's action for a gated policy action, paying one
/// query. With the budget exhausted the proposed action is returned and the
/// dataset is untouched.
inline int expert_substitute(const Vector& state, int proposed, env::ExpertOracle& oracle,
                             const env::Environment& e, QueryBudget& budget, ExpertDataset& expert,
                             bool add_to_expert, QueryLog& log, std::size_t step, double tau, bool* substituted) {
  if (!budget.try_consume()) {
    if (substituted) *substituted = false;
    return proposed;
  }
  const int a = oracle.query(state);
  if (add_to_expert) expert.add(state, a, LabelSource::onpolicy);
  log.push_back({step, QueryKind::onpolicy, e.state_id(state), a, tau});
  if (substituted) *substituted = true;
  return a;
}

// ==========================================================================
// Training loop

class Trainer {
 public:
  Trainer(const ExperimentConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), seed_(seed), rng_(seed), env_(make_environment(cfg)), eval_env_(env_->clone()),
        oracle_(*env_), buffer_(cfg.buffer_capacity), budget_{cfg.budget, 0} {
    validate(cfg);
    const std::vector<std::size_t> hidden(cfg.hidden.begin(), cfg.hidden.end());
    repr::WaeConfig wc;
    wc.observation_dim = env_->observation_dim();
    wc.latent_dim = cfg.latent_dim;
    wc.hidden = hidden;
    wc.kernel.kind = repr::kernel_from_string(cfg.kernel);
    wc.kernel.bandwidth = cfg.kernel_bandwidth;
    wc.beta1 = cfg.beta1;
    result_.wae = repr::make_wae(wc, rng_);
    result_.disc = adv::make_discriminator(cfg.latent_dim, env_->num_actions(), hidden, rng_);
    result_.sr = sr::make_sr(cfg.latent_dim, hidden, cfg.sr_gamma, cfg.sr_sync_period, rng_);
    result_.policy = make_policy(cfg.latent_dim, env_->num_actions(), hidden, cfg.gamma, cfg.lambda, cfg.policy_lr, rng_);
    result_.policy.epsilon = {cfg.eps_start, cfg.eps_end, cfg.eps_decay_steps};
    result_.policy.sync_period = cfg.q_sync_period;
    adv_opt_ = adv::make_optimizer(result_.disc, result_.wae, cfg.disc_lr, cfg.wae_lr);
    sr_opt_ = nn::make_adam(result_.sr.psi, {.learning_rate = cfg.sr_lr});
    hyper_ = {cfg.alpha1, cfg.alpha2, cfg.beta, cfg.lambda, cfg.disc_lr, cfg.batch_size,
              adv::objective_from_string(cfg.disc_objective)};
    if (cfg.strategy == "uncertainty") {
      ensemble_ = query::make_ensemble(cfg.latent_dim, env_->num_actions(), cfg.heads, hidden, rng_);
      ensemble_opt_ = nn::make_adam(ensemble_.net, {.learning_rate = cfg.policy_lr});
    }
    gate_.alpha = cfg.alpha;
    gate_.window = cfg.tau_window;
    gate_active_ = cfg.gate && cfg.strategy == "coreset_sr" && cfg.budget > 0;

    result_.seed = seed;
    result_.strategy = cfg.strategy;
    if (auto* maze = dynamic_cast<env::MazeEnv*>(env_.get())) result_.maze_layout = env::serialize_layout(maze->spec());
    result_.expert_mean_return = evaluate_expert(*eval_env_);

    // The initial demonstration is given, not queried.
    auto demo_env = env_->clone();
    for (const auto& t : env::rollout_expert(*demo_env, cfg.initial_demos, rng_))
      expert_.add(t.state, t.action, LabelSource::demo);
    state_ = env_->reset(rng_);
  }

  const ExpertDataset& expert() const { return expert_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const QueryBudget& budget() const { return budget_; }
  const query::SafetyGate& gate() const { return gate_; }
  const RunResult& result() const { return result_; }
  std::size_t step_count() const { return step_; }

  void run() {
    while (step_ < cfg_.total_steps) {
      const bool episode_ended = step();
      if (cfg_.halt_on_budget && budget_.exhausted() && episode_ended) break;
    }
    if (result_.metrics.empty() || result_.metrics.back().step != step_) record_metrics();
    finish();
  }

  /// Advances one environment step; returns true when an episode ended.
  bool step() {
    ++step_;
    auto& R = result_;
    const Vector z = repr::encode(R.wae, state_);
    int action = act(R.policy, z, R.policy.epsilon.at(step_), rng_);
    const double score = adv::score(R.disc, z, action);
    gate_.recent.push_back(score);

    bool intervened = false;
    if (gate_active_ && query::gate_decision(gate_, score) == query::GateDecision::query_expert) {
      ++R.audit.gated_steps;
      const auto cached = cfg_.reuse_labels ? expert_.label(state_) : std::nullopt;
      if (cached) {
        action = *cached;
        intervened = true;
        ++R.audit.cached_substitutions;
      } else if (budget_.exhausted()) {
        ++R.audit.denied;
      } else if (cfg_.onpolicy_min_interval > 0 && last_onpolicy_query_ > 0 &&
                 step_ - last_onpolicy_query_ < cfg_.onpolicy_min_interval) {
        ++R.audit.gated_policy_executed;
      } else {
        bool paid = false;
        action = expert_substitute(state_, action, oracle_, *env_, budget_, expert_, cfg_.onpolicy_to_expert, R.queries,
                                   step_, gate_.tau, &paid);
        intervened = paid;
        if (paid) {
          ++R.audit.oracle_substitutions;
          ++queries_onpolicy_;
          last_onpolicy_query_ = step_;
        }
      }
    }

    const env::StepResult r = env_->step(action);
    std::uint32_t mask = ~0u;
    if (cfg_.strategy == "uncertainty") {
      mask = 0;
      std::bernoulli_distribution coin(0.5);
      for (std::size_t k = 0; k < cfg_.heads; ++k)
        if (coin(rng_)) mask |= 1u << k;
    }
    buffer_.push({state_, action, r.observation, r.reward, r.done, r.truncated, intervened}, mask);
    if (r.done) {
      ++episode_;
      state_ = env_->reset(rng_);
    } else {
      state_ = r.observation;
    }

    if (step_ >= cfg_.learning_starts && buffer_.size() >= 2) learn();
    if (step_ % cfg_.t_off == 0) offpolicy_tick();
    if (step_ % cfg_.tau_window == 0) query::end_window(gate_);
    if (step_ % cfg_.eval_interval == 0) record_metrics();
    return r.done;
  }

 private:
  void learn() {
    auto& R = result_;
    const auto idx = buffer_.sample(cfg_.batch_size, rng_);
    std::vector<const env::Transition*> ts;
    std::vector<std::uint32_t> masks;
    for (auto i : idx) {
      ts.push_back(&buffer_.at(i));
      masks.push_back(buffer_.mask(i));
    }
    const TdBatch td = imitation_batch(ts, R.disc, R.wae);
    loss_acc_.policy += policy_train_step(R.policy, td);
    if (cfg_.strategy == "uncertainty") {
      nn::MlpParams g = nn::zeros_like(ensemble_.net);
      ensemble_td_loss(ensemble_, td, masks, cfg_.gamma, &g);
      nn::adam_step(ensemble_.net, g, ensemble_opt_);
      if (++ensemble_updates_ % cfg_.q_sync_period == 0) ensemble_.target = ensemble_.net;
    }

    adv::SampleBatch policy_batch;
    std::vector<Vector> ps;
    for (const auto* t : ts) {
      ps.push_back(t->state);
      policy_batch.actions.push_back(t->action);
    }
    policy_batch.states = stack_rows(ps);
    adv::SampleBatch expert_batch;
    if (!expert_.empty()) {
      std::vector<Vector> es;
      for (auto i : expert_.sample(cfg_.batch_size, rng_)) {
        es.push_back(expert_.at(i).state);
        expert_batch.actions.push_back(expert_.at(i).action);
      }
      expert_batch.states = stack_rows(es);
    }
    for (std::size_t k = 0; k < cfg_.adversary_ratio; ++k) {
      const auto t = adv::adversary_train_step(R.disc, R.wae, policy_batch, expert_batch, hyper_, adv_opt_, rng_);
      loss_acc_.disc += t.total / static_cast<double>(cfg_.adversary_ratio);
      loss_acc_.wae += t.wae_policy / static_cast<double>(cfg_.adversary_ratio);
    }

    std::vector<Vector> next;
    std::vector<bool> terminal;
    for (const auto* t : ts) {
      next.push_back(t->next_state);
      terminal.push_back(t->terminal());
    }
    const Matrix z = repr::encode_batch(R.wae, policy_batch.states);
    const Matrix zn = repr::encode_batch(R.wae, stack_rows(next));
    loss_acc_.sr += sr::sr_train_step(R.sr, z, zn, terminal, sr_opt_);
    ++loss_acc_.count;
  }

  // Unqueried buffer states, deduplicated; `newest` holds the newest buffer
  // index of each, `count` its multiplicity.
  struct Candidates {
    std::vector<Vector> states;
    std::vector<std::size_t> newest;
    std::vector<double> count;
  };

  Candidates unqueried_states() const {
    Candidates c;
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < buffer_.size(); ++i) {
      const Vector& s = buffer_.at(i).state;
      if (expert_.contains(s)) continue;
      auto [it, inserted] = seen.emplace(observation_key(s), c.states.size());
      if (inserted) {
        c.states.push_back(s);
        c.newest.push_back(i);
        c.count.push_back(1.0);
      } else {
        c.newest[it->second] = i;
        c.count[it->second] += 1.0;
      }
    }
    return c;
  }

  void offpolicy_tick() {
    if (budget_.exhausted()) return;
    auto& R = result_;
    std::vector<Vector> selected;
    QueryKind kind = QueryKind::baseline;
    if (cfg_.strategy == "coreset_sr") {
      kind = QueryKind::offpolicy;
      Candidates c = unqueried_states();
      if (c.states.empty()) return;
      if (c.states.size() > cfg_.coreset_max_candidates) {
        const auto keep = query::random_select(c.states.size(), cfg_.coreset_max_candidates, rng_);
        Candidates sub;
        for (auto i : keep) {
          sub.states.push_back(c.states[i]);
          sub.newest.push_back(c.newest[i]);
          sub.count.push_back(c.count[i]);
        }
        c = std::move(sub);
      }
      const Matrix sr_vectors = sr::sr_forward_batch(R.sr, repr::encode_batch(R.wae, stack_rows(c.states)));
      const auto medoids = query::coreset_select(sr_vectors, cfg_.n_k, rng_, c.count, cfg_.coreset_max_iter);
      for (auto m : medoids.indices) selected.push_back(c.states[m]);
    } else {
      std::vector<std::size_t> pool;
      for (std::size_t i = 0; i < buffer_.size(); ++i)
        if (!expert_.contains(buffer_.at(i).state)) pool.push_back(i);
      if (pool.empty()) return;
      std::vector<std::size_t> picks;
      if (cfg_.strategy == "random") {
        for (auto j : query::random_select(pool.size(), cfg_.n_k, rng_)) picks.push_back(pool[j]);
      } else {
        std::vector<Vector> s;
        std::vector<int> a;
        for (auto i : pool) {
          s.push_back(buffer_.at(i).state);
          a.push_back(buffer_.at(i).action);
        }
        const Matrix values = query::ensemble_action_values(ensemble_, repr::encode_batch(R.wae, stack_rows(s)), a);
        // Rank every pool item, then keep the first n distinct states.
        for (auto j : query::uncertainty_select(values, pool.size())) picks.push_back(pool[j]);
      }
      std::unordered_map<std::string, bool> taken;
      for (auto i : picks) {
        if (selected.size() >= cfg_.n_k) break;
        const Vector& s = buffer_.at(i).state;
        if (taken.emplace(observation_key(s), true).second) selected.push_back(s);
      }
    }
    const auto answered = query::offpolicy_query(selected, oracle_, *env_, budget_, expert_, R.queries, step_, kind, gate_.tau);
    queries_offpolicy_ += answered.size();
  }

  void record_metrics() {
    auto& R = result_;
    MetricsRow row;
    row.seed = seed_;
    row.step = step_;
    row.episode = episode_;
    row.greedy_return = evaluate_greedy(*eval_env_, R.policy, R.wae);
    row.queries_onpolicy = queries_onpolicy_;
    row.queries_offpolicy = queries_offpolicy_;
    row.tau = gate_.tau;
    if (loss_acc_.count > 0) {
      const double n = static_cast<double>(loss_acc_.count);
      row.disc_loss = loss_acc_.disc / n;
      row.wae_loss = loss_acc_.wae / n;
      row.sr_loss = loss_acc_.sr / n;
      row.policy_loss = loss_acc_.policy / n;
    }
    loss_acc_ = {};
    R.metrics.push_back(row);
  }

  void finish() {
    result_.oracle_calls = oracle_.calls();
    result_.budget_used = budget_.used;
    result_.final_greedy_return = result_.metrics.empty() ? 0.0 : result_.metrics.back().greedy_return;
  }

  struct LossAccumulator {
    double disc = 0.0, wae = 0.0, sr = 0.0, policy = 0.0;
    std::size_t count = 0;
  };

  ExperimentConfig cfg_;
  std::uint64_t seed_;
  Rng rng_;
  std::unique_ptr<env::Environment> env_;
  std::unique_ptr<env::Environment> eval_env_;
  env::ExpertOracle oracle_;
  ReplayBuffer buffer_;
  ExpertDataset expert_;
  QueryBudget budget_;
  query::SafetyGate gate_;
  bool gate_active_ = false;
  adv::AdversaryHyper hyper_;
  adv::AdversaryOptimizer adv_opt_;
  nn::AdamState sr_opt_;
  query::QEnsemble ensemble_;
  nn::AdamState ensemble_opt_;
  std::size_t ensemble_updates_ = 0;
  RunResult result_;
  Vector state_;
  std::size_t step_ = 0;
  std::size_t episode_ = 0;
  std::size_t queries_onpolicy_ = 0;
  std::size_t queries_offpolicy_ = 0;
  std::size_t last_onpolicy_query_ = 0;
  LossAccumulator loss_acc_;
};

/// Runs the full loop for one seed.
inline RunResult run_training(const ExperimentConfig& cfg, std::uint64_t seed) {
  Trainer t(cfg, seed);
  t.run();
  return t.result();
}

}  // namespace aril::agent

#pragma once

// Query selection: the discriminator-gated on-policy query, the off-policy
// core-set over successor representations, and the random and
// ensemble-uncertainty baselines.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aril/data.hpp"
#include "aril/environments.hpp"
#include "aril/numerics.hpp"

namespace aril::query {

// ==========================================================================
// On-policy safety gate

enum class GateDecision { follow_policy, query_expert };

struct SafetyGate {
  double tau = 0.0;
  double alpha = 0.05;
  std::size_t window = 1000;   // environment steps per threshold update
  std::vector<double> recent;  // scores of pairs proposed by the policy in the current window
};

/// Query iff score < tau; a score equal to tau follows the policy.
inline GateDecision gate_decision(const SafetyGate& gate, double score) {
  return score < gate.tau ? GateDecision::query_expert : GateDecision::follow_policy;
}

/// The ceil(alpha * N)-th smallest score. Empty input yields no threshold.
inline std::optional<double> update_threshold(std::span<const double> scores, double alpha) {
  if (scores.empty()) return std::nullopt;
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("update_threshold: alpha must lie in (0, 1)");
  const double n = static_cast<double>(scores.size());
  // Guard against alpha * N landing a hair above an integer through rounding.
  auto rank = static_cast<std::size_t>(std::ceil(alpha * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, scores.size());
  std::vector<double> sorted(scores.begin(), scores.end());
  auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(sorted.begin(), nth, sorted.end());
  return *nth;
}

/// Closes the current window: tau becomes the alpha-quantile of its scores.
inline void end_window(SafetyGate& gate) {
  if (auto t = update_threshold(gate.recent, gate.alpha)) gate.tau = *t;
  gate.recent.clear();
}

// ==========================================================================
// Core-set by k-medoids under L1

struct Medoids {
  std::vector<std::size_t> indices;     // one data index per medoid slot
  std::vector<std::size_t> assignment;  // data index -> medoid slot
  double cost = 0.0;                    // sum of weighted L1 distances to assigned medoids
  std::vector<double> cost_history;     // cost after every assignment step
};

namespace detail {

inline double l1(const Matrix& p, std::size_t i, std::size_t j) {
  return (p.row(static_cast<Eigen::Index>(i)) - p.row(static_cast<Eigen::Index>(j))).cwiseAbs().sum();
}

inline double assign(const Matrix& p, const std::vector<double>& w, Medoids& m) {
  const std::size_t n = static_cast<std::size_t>(p.rows());
  m.assignment.assign(n, 0);
  double cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m.indices.size(); ++k) {
      const double d = l1(p, i, m.indices[k]);
      if (d < best) {
        best = d;
        m.assignment[i] = k;
      }
    }
    cost += w[i] * best;
  }
  return cost;
}

}  // namespace detail

/// Selects `n_k` medoids among the rows of `points` (L1 distance, optional
/// per-point weights). Farthest-point seeding from a random first point,
/// then alternating assignment and medoid update until the medoids stop
/// changing or `max_iter` rounds. A medoid is only replaced by a strictly
/// cheaper member, so the cost never increases and the result is a fixed
/// point of one more round. With n_k >= number of points every point is
/// returned.
inline Medoids coreset_select(const Matrix& points, std::size_t n_k, Rng& rng,
                              std::span<const double> weights = {}, std::size_t max_iter = 100) {
  const std::size_t n = static_cast<std::size_t>(points.rows());
  if (n == 0 || n_k == 0) return {};
  std::vector<double> w(weights.begin(), weights.end());
  if (w.empty()) w.assign(n, 1.0);
  if (w.size() != n) throw ShapeError("coreset_select: weight count differs from point count");

  Medoids m;
  if (n_k >= n) {
    m.indices.resize(n);
    std::iota(m.indices.begin(), m.indices.end(), 0);
    m.cost = detail::assign(points, w, m);
    m.cost_history = {m.cost};
    return m;
  }

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  m.indices.push_back(pick(rng));
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  chosen[m.indices.front()] = true;
  while (m.indices.size() < n_k) {
    const std::size_t last = m.indices.back();
    std::size_t far = n;
    double far_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], detail::l1(points, i, last));
      if (!chosen[i] && nearest[i] > far_d) {
        far_d = nearest[i];
        far = i;
      }
    }
    chosen[far] = true;
    m.indices.push_back(far);
  }

  m.cost = detail::assign(points, w, m);
  m.cost_history.push_back(m.cost);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t k = 0; k < m.indices.size(); ++k) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i)
        if (m.assignment[i] == k) members.push_back(i);
      auto cluster_cost = [&](std::size_t c) {
        double s = 0.0;
        for (auto j : members) s += w[j] * detail::l1(points, j, c);
        return s;
      };
      double best = cluster_cost(m.indices[k]);
      std::size_t best_idx = m.indices[k];
      for (auto c : members) {
        if (c == m.indices[k]) continue;
        const double v = cluster_cost(c);
        if (v < best - 1e-12 * (1.0 + std::abs(best))) {
          best = v;
          best_idx = c;
        }
      }
      if (best_idx != m.indices[k]) {
        m.indices[k] = best_idx;
        changed = true;
      }
    }
    if (!changed) break;
    m.cost = detail::assign(points, w, m);
    m.cost_history.push_back(m.cost);
  }
  return m;
}

// ==========================================================================
// Baselines

/// `n` indices into a pool of `pool_size` items: uniform without replacement,
/// or with replacement when n exceeds the pool.
inline std::vector<std::size_t> random_select(std::size_t pool_size, std::size_t n, Rng& rng) {
  if (pool_size == 0) return {};
  std::vector<std::size_t> out;
  if (n <= pool_size) {
    std::vector<std::size_t> all(pool_size);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool_size - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    out.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, pool_size - 1);
    out.resize(n);
    for (auto& i : out) i = pick(rng);
  }
  return out;
}

inline double head_stddev(const Eigen::Ref<const Eigen::RowVectorXd>& q) {
  const double mean = q.mean();
  return std::sqrt((q.array() - mean).square().mean());
}

/// Indices of the `n` items with the largest spread of Q across heads.
/// `head_values` is items x heads with items ordered oldest first; ties go to
/// the newest item.
inline std::vector<std::size_t> uncertainty_select(const Matrix& head_values, std::size_t n) {
  const std::size_t items = static_cast<std::size_t>(head_values.rows());
  std::vector<double> spread(items);
  for (std::size_t i = 0; i < items; ++i) spread[i] = head_stddev(head_values.row(static_cast<Eigen::Index>(i)));
  std::vector<std::size_t> order(items);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (spread[a] != spread[b]) return spread[a] > spread[b];
    return a > b;
  });
  order.resize(std::min(n, items));
  return order;
}

/// Bootstrapped ensemble of Q heads sharing a torso: one network whose
/// output block [k * A, (k + 1) * A) holds head k's action values.
struct QEnsemble {
  nn::MlpParams net;
  nn::MlpParams target;
  std::size_t heads = 10;
  std::size_t num_actions = 4;
};

inline QEnsemble make_ensemble(std::size_t latent_dim, std::size_t num_actions, std::size_t heads,
                               const std::vector<std::size_t>& hidden, Rng& rng) {
  if (heads < 2) throw std::invalid_argument("ensemble needs at least two heads");
  QEnsemble e;
  e.heads = heads;
  e.num_actions = num_actions;
  e.net = nn::init_mlp(nn::make_spec(latent_dim, hidden, heads * num_actions), rng);
  e.target = e.net;
  return e;
}

/// items x heads matrix of Q_k(z_i, a_i).
inline Matrix ensemble_action_values(const QEnsemble& e, const Matrix& latents, const std::vector<int>& actions) {
  const Matrix out = nn::forward(e.net, latents);
  Matrix v(latents.rows(), static_cast<Eigen::Index>(e.heads));
  for (Eigen::Index i = 0; i < latents.rows(); ++i)
    for (std::size_t k = 0; k < e.heads; ++k)
      v(i, static_cast<Eigen::Index>(k)) =
          out(i, static_cast<Eigen::Index>(k * e.num_actions) + actions[static_cast<std::size_t>(i)]);
  return v;
}

// ==========================================================================
// Asking the expert

/// Asks the oracle at each state not yet labeled in `expert`, while budget
/// remains. Already-labeled states cost nothing and are skipped. Every answer
/// is stored in `expert` and logged.
inline std::vector<std::pair<Vector, int>> offpolicy_query(const std::vector<Vector>& states,
                                                           env::ExpertOracle& oracle, const env::Environment& env,
                                                           QueryBudget& budget, ExpertDataset& expert, QueryLog& log,
                                                           std::size_t step, QueryKind kind, double tau) {
  std::vector<std::pair<Vector, int>> answered;
  const LabelSource source = kind == QueryKind::onpolicy ? LabelSource::onpolicy : LabelSource::offpolicy;
  for (const auto& s : states) {
    if (expert.contains(s)) continue;
    if (!budget.try_consume()) break;
    const int a = oracle.query(s);
    expert.add(s, a, source);
    log.push_back({step, kind, env.state_id(s), a, tau});
    answered.emplace_back(s, a);
  }
  return answered;
}

}  // namespace aril::query

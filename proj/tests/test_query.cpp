#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "aril/query.hpp"

using namespace aril;
using namespace aril::query;

namespace {

std::vector<double> random_scores(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(n);
  for (auto& x : s) x = u(rng);
  return s;
}

double medoid_cost(const Matrix& p, const std::vector<std::size_t>& medoids) {
  double c = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double best = 1e300;
    for (auto m : medoids) best = std::min(best, (p.row(i) - p.row(static_cast<Eigen::Index>(m))).cwiseAbs().sum());
    c += best;
  }
  return c;
}

}  // namespace

TEST(Gate, QueriesStrictlyBelowThreshold) {
  SafetyGate g;
  g.tau = 0.3;
  EXPECT_EQ(gate_decision(g, 0.1), GateDecision::query_expert);
  EXPECT_EQ(gate_decision(g, 0.3), GateDecision::follow_policy);
  EXPECT_EQ(gate_decision(g, 0.9), GateDecision::follow_policy);
  g.tau = 0.0;
  EXPECT_EQ(gate_decision(g, 1e-7), GateDecision::follow_policy);
}

TEST(Threshold, HandExamples) {
  const std::vector<double> s{0.9, 0.1, 0.5, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6, 1.0};
  EXPECT_EQ(*update_threshold(s, 0.05), 0.1);
  EXPECT_EQ(*update_threshold(s, 0.1), 0.1);
  EXPECT_EQ(*update_threshold(s, 0.3), 0.3);
  EXPECT_EQ(*update_threshold(s, 0.31), 0.4);
  EXPECT_FALSE(update_threshold({}, 0.05).has_value());
  EXPECT_THROW(update_threshold(s, 0.0), std::invalid_argument);
  EXPECT_THROW(update_threshold(s, 1.0), std::invalid_argument);
}

TEST(Threshold, AllEqualScoresGiveThatScore) {
  const std::vector<double> s(37, 0.42);
  EXPECT_EQ(*update_threshold(s, 0.05), 0.42);
  SafetyGate g;
  g.tau = *update_threshold(s, 0.05);
  for (double x : s) EXPECT_EQ(gate_decision(g, x), GateDecision::follow_policy);
}

TEST(Threshold, MemberOfSetWithBoundedFractionBelow) {
  Rng rng(1);
  std::uniform_int_distribution<std::size_t> size(1, 500);
  for (int t = 0; t < 100; ++t) {
    const auto s = random_scores(rng, size(rng));
    const double alpha = 0.05;
    const double tau = *update_threshold(s, alpha);
    EXPECT_NE(std::find(s.begin(), s.end(), tau), s.end());
    const double below = static_cast<double>(std::count_if(s.begin(), s.end(), [&](double x) { return x < tau; }));
    const double n = static_cast<double>(s.size());
    EXPECT_LT(below / n, alpha + 1.0 / n);
  }
}

TEST(Threshold, EndWindowUpdatesAndClears) {
  SafetyGate g;
  g.alpha = 0.5;
  g.tau = 0.9;
  end_window(g);
  EXPECT_EQ(g.tau, 0.9);
  g.recent = {0.4, 0.1, 0.3, 0.2};
  end_window(g);
  EXPECT_EQ(g.tau, 0.2);
  EXPECT_TRUE(g.recent.empty());
}

TEST(Coreset, SingleMedoidOfThreePointsIsExhaustiveOptimum) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const Matrix p = gaussian_matrix(3, 2, rng);
    std::size_t best = 0;
    for (std::size_t c = 1; c < 3; ++c)
      if (medoid_cost(p, {c}) < medoid_cost(p, {best})) best = c;
    Rng r(static_cast<std::uint64_t>(t));
    const Medoids m = coreset_select(p, 1, r);
    ASSERT_EQ(m.indices.size(), 1u);
    EXPECT_NEAR(medoid_cost(p, m.indices), medoid_cost(p, {best}), 1e-12);
  }
}

TEST(Coreset, EnoughSlotsReturnEveryPointAtZeroCost) {
  Rng rng(3);
  const Matrix p = gaussian_matrix(7, 3, rng);
  for (std::size_t k : {7u, 12u}) {
    const Medoids m = coreset_select(p, k, rng);
    EXPECT_EQ(m.indices.size(), 7u);
    EXPECT_EQ(std::set<std::size_t>(m.indices.begin(), m.indices.end()).size(), 7u);
    EXPECT_EQ(m.cost, 0.0);
  }
  EXPECT_TRUE(coreset_select(Matrix(0, 3), 4, rng).indices.empty());
  EXPECT_TRUE(coreset_select(p, 0, rng).indices.empty());
}

TEST(Coreset, RecoversThreeSeparatedClusters) {
  int recovered = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const double centers[3][2] = {{0, 0}, {10, 0}, {0, 10}};
    Matrix p(60, 2);
    std::normal_distribution<double> n(0.0, 0.5);
    for (int i = 0; i < 60; ++i) p.row(i) << centers[i / 20][0] + n(rng), centers[i / 20][1] + n(rng);
    const Medoids m = coreset_select(p, 3, rng);
    std::set<std::size_t> clusters;
    for (auto idx : m.indices) clusters.insert(idx / 20);
    if (clusters.size() == 3) ++recovered;
  }
  EXPECT_GE(recovered, 19);
}

TEST(Coreset, CostNeverIncreasesAndResultIsFixedPoint) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const Matrix p = gaussian_matrix(40, 3, rng);
    const Medoids m = coreset_select(p, 5, rng);
    for (std::size_t i = 1; i < m.cost_history.size(); ++i) EXPECT_LE(m.cost_history[i], m.cost_history[i - 1]);
    EXPECT_NEAR(m.cost, medoid_cost(p, m.indices), 1e-9);
    EXPECT_EQ(std::set<std::size_t>(m.indices.begin(), m.indices.end()).size(), 5u);
    // No member of any cluster is a strictly cheaper medoid for it.
    for (std::size_t k = 0; k < m.indices.size(); ++k) {
      auto cluster_cost = [&](std::size_t c) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < p.rows(); ++i)
          if (m.assignment[static_cast<std::size_t>(i)] == k)
            s += (p.row(i) - p.row(static_cast<Eigen::Index>(c))).cwiseAbs().sum();
        return s;
      };
      const double current = cluster_cost(m.indices[k]);
      for (Eigen::Index i = 0; i < p.rows(); ++i)
        if (m.assignment[static_cast<std::size_t>(i)] == k) {
          EXPECT_GE(cluster_cost(static_cast<std::size_t>(i)), current - 1e-9);
        }
    }
  }
}

TEST(Coreset, WeightsPullMedoidTowardHeavyPoint) {
  Matrix p(3, 1);
  p << 0.0, 1.0, 10.0;
  const std::vector<double> w{1.0, 1.0, 100.0};
  Rng rng(1);
  const Medoids m = coreset_select(p, 1, rng, w);
  EXPECT_EQ(m.indices.front(), 2u);
  EXPECT_THROW(coreset_select(p, 1, rng, std::vector<double>{1.0}), ShapeError);
}

TEST(RandomSelect, FullDrawIsPermutation) {
  Rng rng(5);
  auto idx = random_select(10, 10, rng);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(idx[i], i);
  EXPECT_TRUE(random_select(0, 3, rng).empty());
  EXPECT_EQ(random_select(2, 5, rng).size(), 5u);
}

TEST(RandomSelect, ReproducibleUnderSeed) {
  Rng a(9), b(9);
  EXPECT_EQ(random_select(50, 7, a), random_select(50, 7, b));
}

TEST(RandomSelect, UniformFrequencies) {
  Rng rng(6);
  const std::size_t pool = 10, trials = 20000;
  std::vector<double> counts(pool, 0.0);
  for (std::size_t t = 0; t < trials; ++t)
    for (auto i : random_select(pool, 3, rng)) counts[i] += 1.0;
  // Chi-square with 9 degrees of freedom; 27.9 is the 0.999 quantile.
  const double expected = trials * 3.0 / pool;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 27.9);
}

TEST(Uncertainty, IdenticalHeadsTieToNewest) {
  const Matrix v = Matrix::Constant(5, 4, 0.7);
  EXPECT_EQ(uncertainty_select(v, 2), (std::vector<std::size_t>{4, 3}));
  EXPECT_EQ(uncertainty_select(v, 9).size(), 5u);
}

TEST(Uncertainty, HandBuiltTwoHeadEnsemble) {
  QEnsemble e;
  e.heads = 2;
  e.num_actions = 2;
  e.net = nn::zero_mlp(nn::make_spec(2, {}, 4));
  // head 0 outputs (z0, 0), head 1 outputs (-z0, z1).
  e.net.layers[0].weight << 1, 0, 0, 0, -1, 0, 0, 1;
  Matrix z(3, 2);
  z << 1.0, 0.0, 3.0, 0.0, 0.0, 2.0;
  const Matrix v = ensemble_action_values(e, z, {0, 0, 1});
  EXPECT_EQ(v(0, 0), 1.0);
  EXPECT_EQ(v(0, 1), -1.0);
  EXPECT_EQ(v(2, 0), 0.0);
  EXPECT_EQ(v(2, 1), 2.0);
  EXPECT_DOUBLE_EQ(head_stddev(v.row(1)), 3.0);
  // Rows 0 and 2 both have spread 1; the newer one ranks first.
  EXPECT_EQ(uncertainty_select(v, 3), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(Uncertainty, EnsembleNeedsTwoHeads) {
  Rng rng(1);
  EXPECT_THROW(make_ensemble(3, 4, 1, {8}, rng), std::invalid_argument);
  const QEnsemble e = make_ensemble(3, 4, 5, {8}, rng);
  EXPECT_EQ(nn::forward(e.net, Matrix::Zero(2, 3)).cols(), 20);
}

TEST(OffpolicyQuery, SkipsLabeledAndStopsAtBudget) {
  env::MazeEnv e(env::generate_maze(3));
  env::ExpertOracle oracle(e);
  const auto cells = env::maze_start_cells(e.spec());
  std::vector<Vector> states;
  for (int i = 0; i < 5; ++i) states.push_back(env::maze_observe(e.spec(), cells[static_cast<std::size_t>(i)]));
  ExpertDataset ds;
  ds.add(states[1], e.expert_action(states[1]), LabelSource::demo);
  QueryBudget budget{3, 0};
  QueryLog log;
  const auto answered = offpolicy_query(states, oracle, e, budget, ds, log, 42, QueryKind::offpolicy, 0.25);
  EXPECT_EQ(answered.size(), 3u);
  EXPECT_EQ(budget.used, 3u);
  EXPECT_EQ(oracle.calls(), 3u);
  EXPECT_EQ(log.size(), 3u);
  EXPECT_EQ(ds.size(), 4u);
  EXPECT_FALSE(ds.contains(states[4]));
  for (const auto& r : log) {
    EXPECT_EQ(r.step, 42u);
    EXPECT_EQ(r.kind, QueryKind::offpolicy);
    EXPECT_EQ(r.tau, 0.25);
  }
  EXPECT_EQ(log[1].state_id, e.state_id(states[2]));
  EXPECT_EQ(ds.at(1).source, LabelSource::offpolicy);
  EXPECT_TRUE(offpolicy_query(states, oracle, e, budget, ds, log, 43, QueryKind::offpolicy, 0.0).empty());
  EXPECT_EQ(oracle.calls(), 3u);
}

TEST(OffpolicyQuery, DuplicateStatesAreAskedOnce) {
  env::MazeEnv e(env::generate_maze(3));
  env::ExpertOracle oracle(e);
  const Vector s = env::maze_observe(e.spec(), env::maze_start_cells(e.spec()).front());
  ExpertDataset ds;
  QueryBudget budget{10, 0};
  QueryLog log;
  offpolicy_query({s, s, s}, oracle, e, budget, ds, log, 0, QueryKind::baseline, 0.0);
  EXPECT_EQ(budget.used, 1u);
  EXPECT_EQ(log.size(), 1u);
}

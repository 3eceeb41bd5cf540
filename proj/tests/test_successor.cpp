#include <gtest/gtest.h>

#include <cmath>

#include "aril/environments.hpp"
#include "aril/gradcheck.hpp"
#include "aril/successor.hpp"

using namespace aril;
using namespace aril::sr;

namespace {

Matrix cycle(std::size_t n) {
  Matrix p = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>((i + 1) % n)) = 1.0;
  return p;
}

double linf(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(TabularSolve, SelfLoopsGiveGeometricSeries) {
  const TabularSr sr = tabular_sr_solve(Matrix::Identity(4, 4), 0.9);
  EXPECT_LE(linf(sr.m, 10.0 * Matrix::Identity(4, 4)), 1e-12);
}

TEST(TabularSolve, TwoStateSwap) {
  Matrix p(2, 2);
  p << 0, 1, 1, 0;
  const TabularSr sr = tabular_sr_solve(p, 0.5);
  EXPECT_NEAR(sr.m(0, 0), 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(sr.m(1, 1), 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(sr.m(0, 1), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(sr.m(1, 0), 2.0 / 3.0, 1e-12);
}

TEST(TabularSolve, ZeroDiscountIsIdentity) {
  Rng rng(1);
  Matrix p = gaussian_matrix(5, 5, rng).cwiseAbs();
  for (Eigen::Index i = 0; i < 5; ++i) p.row(i) /= p.row(i).sum();
  EXPECT_LE(linf(tabular_sr_solve(p, 0.0).m, Matrix::Identity(5, 5)), 1e-15);
}

TEST(TabularSolve, SatisfiesBellmanIdentity) {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    Matrix p = gaussian_matrix(6, 6, rng).cwiseAbs();
    for (Eigen::Index i = 0; i < 6; ++i) p.row(i) /= p.row(i).sum();
    const double g = 0.1 * (t % 9 + 0.5);
    const Matrix m = tabular_sr_solve(p, g).m;
    EXPECT_LE(linf(m, Matrix::Identity(6, 6) + g * p * m), 1e-10);
  }
}

TEST(TabularSolve, RejectsBadInputs) {
  EXPECT_THROW(tabular_sr_solve(Matrix::Identity(2, 3), 0.5), ShapeError);
  EXPECT_THROW(tabular_sr_solve(Matrix::Identity(2, 2), 1.0), std::invalid_argument);
  EXPECT_THROW(tabular_sr_solve(2.0 * Matrix::Identity(2, 2), 0.5), std::invalid_argument);
  EXPECT_THROW(tabular_sr_solve(-Matrix::Identity(2, 2), 0.5), std::invalid_argument);
}

TEST(TabularTd, SingleUpdateFromZero) {
  const TabularSr sr = tabular_sr_td({{2, 0}}, 3, 0.9, 0.25, 1);
  Matrix want = Matrix::Zero(3, 3);
  want(2, 2) = 0.25;
  EXPECT_EQ(sr.m, want);
}

TEST(TabularTd, FiveCycleConvergesToClosedForm) {
  std::vector<std::size_t> ep;
  for (int i = 0; i <= 5; ++i) ep.push_back(static_cast<std::size_t>(i % 5));
  const TabularSr td = tabular_sr_td({ep}, 5, 0.8, 0.5, 5000, 0.001);
  EXPECT_LE(linf(td.m, tabular_sr_solve(cycle(5), 0.8).m), 1e-2);
}

TEST(TabularTd, ZeroDiscountConvergesToIdentity) {
  const TabularSr td = tabular_sr_td({{0, 1, 2, 3, 0}}, 4, 0.0, 0.5, 200);
  EXPECT_LE(linf(td.m, Matrix::Identity(4, 4)), 1e-9);
}

TEST(TabularTd, RejectsOutOfRangeStates) {
  EXPECT_THROW(tabular_sr_td({{0, 7}}, 3, 0.5, 0.1, 1), std::invalid_argument);
}

TEST(DeepSr, ForwardShapeAndValidation) {
  Rng rng(3);
  const SrModel m = make_sr(4, {8}, 0.95, 500, rng);
  EXPECT_EQ(sr_forward(m, Vector::Zero(4)).size(), 4);
  EXPECT_THROW(sr_forward(m, Vector::Zero(3)), ShapeError);
  EXPECT_THROW(make_sr(4, {8}, 1.0, 500, rng), std::invalid_argument);
}

TEST(DeepSr, TerminalTransitionsTargetFeaturesOnly) {
  Rng rng(4);
  SrModel m = make_sr(3, {5}, 0.9, 500, rng);
  const Matrix z = gaussian_matrix(4, 3, rng);
  const Matrix zn = gaussian_matrix(4, 3, rng);
  const std::vector<bool> term(4, true);
  const Matrix r = sr_forward_batch(m, z) - z;
  EXPECT_NEAR(sr_td_loss(m, z, zn, term), r.rowwise().squaredNorm().mean(), 1e-12);
}

TEST(DeepSr, LossGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) EXPECT_LE(gradcheck::check_sr(seed).max_relative_error, 1e-4);
}

TEST(DeepSr, ZeroDiscountReproducesFeatures) {
  Rng rng(5);
  SrModel m = make_sr(4, {32}, 0.0, 100, rng);
  const Matrix z = gaussian_matrix(16, 4, rng, 0.5);
  const Matrix zn = gaussian_matrix(16, 4, rng, 0.5);
  const std::vector<bool> term(16, false);
  nn::AdamState opt = nn::make_adam(m.psi, {.learning_rate = 1e-2});
  for (int i = 0; i < 3000; ++i) sr_train_step(m, z, zn, term, opt);
  EXPECT_LE((sr_forward_batch(m, z) - z).array().square().mean(), 1e-3);
}

TEST(DeepSr, TrainingLeavesEncoderBitIdentical) {
  Rng rng(6);
  repr::WaeConfig c;
  c.observation_dim = 6;
  c.latent_dim = 3;
  const repr::WaeModel wae = repr::make_wae(c, rng);
  const repr::WaeModel before = wae;
  SrModel m = make_sr(3, {8}, 0.9, 10, rng);
  nn::AdamState opt = nn::make_adam(m.psi);
  const Matrix s = gaussian_matrix(8, 6, rng);
  const Matrix sn = gaussian_matrix(8, 6, rng);
  const std::vector<bool> term(8, false);
  for (int i = 0; i < 50; ++i) {
    nn::MlpParams g = nn::zeros_like(m.psi);
    sr_td_loss(m, wae, s, sn, term, &g);
    sr_train_step(m, repr::encode_batch(wae, s), repr::encode_batch(wae, sn), term, opt);
  }
  for (std::size_t l = 0; l < wae.encoder.layers.size(); ++l) {
    EXPECT_EQ(wae.encoder.layers[l].weight, before.encoder.layers[l].weight);
    EXPECT_EQ(wae.encoder.layers[l].bias, before.encoder.layers[l].bias);
  }
}

TEST(DeepSr, TargetSyncsOnPeriod) {
  Rng rng(7);
  SrModel m = make_sr(3, {4}, 0.9, 3, rng);
  nn::AdamState opt = nn::make_adam(m.psi);
  const Matrix z = gaussian_matrix(4, 3, rng);
  const std::vector<bool> term(4, false);
  const nn::MlpParams initial = m.target;
  sr_train_step(m, z, z, term, opt);
  sr_train_step(m, z, z, term, opt);
  EXPECT_EQ(m.target.layers[0].weight, initial.layers[0].weight);
  EXPECT_NE(m.psi.layers[0].weight, initial.layers[0].weight);
  sr_train_step(m, z, z, term, opt);
  EXPECT_EQ(m.target.layers[0].weight, m.psi.layers[0].weight);
  EXPECT_EQ(m.steps_since_sync, 0u);
}

TEST(DeepSr, OneHotMazeMatchesTabularChainOfGreedyExpert) {
  const env::MazeSpec maze = env::generate_maze(3);
  env::MazeEnv e(maze);
  const auto n = static_cast<Eigen::Index>(maze.cell_count());
  Matrix p = Matrix::Zero(n, n);
  std::vector<Vector> zs, zns;
  std::vector<bool> term;
  std::vector<Eigen::Index> rows;
  for (const env::Cell c : env::maze_start_cells(maze)) {
    const Vector obs = env::maze_observe(maze, c);
    const env::MazeStep s = env::maze_step(maze, c, e.expert_action(obs));
    if (!s.done) p(maze.index(c), maze.index(s.next)) = 1.0;
    zs.push_back(obs);
    zns.push_back(env::maze_observe(maze, s.next));
    term.push_back(s.done);
    rows.push_back(maze.index(c));
  }
  const double gamma = 0.95;
  const Matrix want = tabular_sr_solve(p, gamma).m;
  Rng rng(8);
  SrModel m = make_sr(static_cast<std::size_t>(n), {}, gamma, 50, rng);
  nn::AdamState opt = nn::make_adam(m.psi, {.learning_rate = 1e-2});
  const Matrix z = stack_rows(zs), zn = stack_rows(zns);
  for (int i = 0; i < 4000; ++i) sr_train_step(m, z, zn, term, opt);
  const Matrix got = sr_forward_batch(m, z);
  double err = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    err = std::max(err, (got.row(static_cast<Eigen::Index>(i)) - want.row(rows[i])).cwiseAbs().maxCoeff());
  EXPECT_LE(err, 0.1);
}

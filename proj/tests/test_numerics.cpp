#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "aril/numerics.hpp"

using namespace aril;
using namespace aril::nn;

namespace {

MlpParams single_layer(std::size_t in, std::size_t out, Activation output) {
  return zero_mlp(make_spec(in, {}, out, Activation::tanh, output));
}

}  // namespace

TEST(Forward, IdentityLayerPassesInputThrough) {
  MlpParams p = single_layer(2, 2, Activation::identity);
  p.layers[0].weight = Matrix::Identity(2, 2);
  Vector x(2);
  x << 1.0, 2.0;
  const Vector y = mlp_forward(p, x);
  EXPECT_EQ(y(0), 1.0);
  EXPECT_EQ(y(1), 2.0);
}

TEST(Forward, ZeroSigmoidLayerGivesHalf) {
  const MlpParams p = single_layer(3, 2, Activation::sigmoid);
  Vector x(3);
  x << 5.0, -3.0, 100.0;
  const Vector y = mlp_forward(p, x);
  EXPECT_EQ(y(0), 0.5);
  EXPECT_EQ(y(1), 0.5);
}

TEST(Forward, MatchesHandEvaluatedTanhNet) {
  Rng rng(7);
  const MlpParams p = init_mlp(make_spec(2, {3}, 1), rng);
  Vector x(2);
  x << 0.3, -1.2;
  const auto& w1 = p.layers[0].weight;
  const auto& b1 = p.layers[0].bias;
  const auto& w2 = p.layers[1].weight;
  const auto& b2 = p.layers[1].bias;
  double out = b2(0);
  for (int j = 0; j < 3; ++j) {
    const double h = std::tanh(w1(j, 0) * 0.3 + w1(j, 1) * -1.2 + b1(j));
    out += w2(0, j) * h;
  }
  EXPECT_NEAR(mlp_forward(p, x)(0), out, 1e-15);
}

TEST(Forward, RejectsWrongInputLength) {
  const MlpParams p = single_layer(3, 1, Activation::identity);
  EXPECT_THROW(mlp_forward(p, Vector::Zero(2)), ShapeError);
  EXPECT_THROW(forward(p, Matrix::Zero(4, 5)), ShapeError);
}

TEST(Forward, IsPure) {
  Rng rng(3);
  const MlpParams p = init_mlp(make_spec(4, {5, 5}, 2), rng);
  const Matrix x = gaussian_matrix(6, 4, rng);
  const Matrix a = forward(p, x);
  const Matrix b = forward(p, x);
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())));
}

TEST(Forward, SigmoidOutputsStayClamped) {
  MlpParams p = single_layer(1, 1, Activation::sigmoid);
  p.layers[0].weight(0, 0) = 1.0;
  for (double v : {-1e6, -50.0, 0.0, 50.0, 1e6}) {
    Vector x(1);
    x << v;
    const double y = mlp_forward(p, x)(0);
    EXPECT_GE(y, kSigmoidClip);
    EXPECT_LE(y, 1.0 - kSigmoidClip);
  }
}

TEST(Spec, RejectsDegenerateShapes) {
  MlpSpec s;
  s.layer_sizes = {3};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.layer_sizes = {3, 0, 1};
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(1);
  const MlpParams p = init_mlp(make_spec(3, {4}, 2), rng);
  Tape tape;
  const Matrix x = gaussian_matrix(5, 3, rng);
  forward(p, x, &tape);
  MlpParams g = zeros_like(p);
  backward(p, tape, Matrix::Zero(5, 2), g);
  g.for_each_scalar([](double v) { EXPECT_EQ(v, 0.0); });
}

TEST(Backward, LinearSquaredLossClosedForm) {
  MlpParams p = single_layer(2, 1, Activation::identity);
  p.layers[0].weight << 0.5, -1.5;
  p.layers[0].bias << 0.25;
  Matrix x(1, 2);
  x << 2.0, 3.0;
  const double t = 1.0;
  Tape tape;
  const Matrix y = forward(p, x, &tape);
  Matrix up(1, 1);
  up << 2.0 * (y(0, 0) - t);
  MlpParams g = zeros_like(p);
  backward(p, tape, up, g);
  const double r = 0.5 * 2.0 - 1.5 * 3.0 + 0.25 - t;
  EXPECT_NEAR(g.layers[0].weight(0, 0), 2.0 * r * 2.0, 1e-14);
  EXPECT_NEAR(g.layers[0].weight(0, 1), 2.0 * r * 3.0, 1e-14);
  EXPECT_NEAR(g.layers[0].bias(0), 2.0 * r, 1e-14);
}

TEST(Backward, RandomNetMatchesFiniteDifferences) {
  Rng rng(11);
  MlpParams p = init_mlp(make_spec(3, {4}, 2), rng);
  const Matrix x = gaussian_matrix(6, 3, rng);
  const Matrix target = gaussian_matrix(6, 2, rng);
  LossFn loss = [&](std::vector<MlpParams>* g) {
    Tape tape;
    const Matrix y = forward(p, x, g ? &tape : nullptr);
    const Matrix r = y - target;
    if (g) backward(p, tape, 2.0 * r, (*g)[0]);
    return r.squaredNorm();
  };
  EXPECT_LE(finite_diff_check(loss, {&p}, 1e-5), 1e-4);
}

TEST(Backward, InputGradientMatchesFiniteDifferences) {
  Rng rng(12);
  const MlpParams p = init_mlp(make_spec(3, {4}, 1, Activation::tanh, Activation::sigmoid), rng);
  Matrix x = gaussian_matrix(1, 3, rng);
  Tape tape;
  forward(p, x, &tape);
  MlpParams g = zeros_like(p);
  const Matrix dx = backward(p, tape, Matrix::Ones(1, 1), g);
  const double h = 1e-6;
  for (int j = 0; j < 3; ++j) {
    Matrix a = x, b = x;
    a(0, j) += h;
    b(0, j) -= h;
    const double num = (forward(p, a)(0, 0) - forward(p, b)(0, 0)) / (2 * h);
    EXPECT_NEAR(dx(0, j), num, 1e-8);
  }
}

TEST(FiniteDiff, QuadraticLossIsNearlyExact) {
  Rng rng(5);
  MlpParams p = init_mlp(make_spec(4, {}, 1), rng);
  const Matrix x = gaussian_matrix(8, 4, rng);
  const Matrix t = gaussian_matrix(8, 1, rng);
  LossFn loss = [&](std::vector<MlpParams>* g) {
    Tape tape;
    const Matrix r = forward(p, x, g ? &tape : nullptr) - t;
    if (g) backward(p, tape, 2.0 * r, (*g)[0]);
    return r.squaredNorm();
  };
  EXPECT_LE(finite_diff_check(loss, {&p}, 1e-4), 1e-6);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Rng rng(2);
  MlpParams p = init_mlp(make_spec(3, {4}, 2), rng);
  const MlpParams before = p;
  AdamState s = make_adam(p);
  for (int i = 0; i < 5; ++i) adam_step(p, zeros_like(p), s);
  EXPECT_EQ(s.step, 5u);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    EXPECT_EQ(p.layers[l].weight, before.layers[l].weight);
    EXPECT_EQ(p.layers[l].bias, before.layers[l].bias);
  }
}

TEST(Adam, ConstantGradientMovesAgainstSign) {
  MlpParams p = single_layer(1, 1, Activation::identity);
  AdamState s = make_adam(p, {.learning_rate = 0.01});
  MlpParams g = zeros_like(p);
  g.layers[0].weight(0, 0) = 3.0;
  g.layers[0].bias(0) = -0.2;
  for (int i = 0; i < 50; ++i) adam_step(p, g, s);
  EXPECT_LT(p.layers[0].weight(0, 0), 0.0);
  EXPECT_GT(p.layers[0].bias(0), 0.0);
}

TEST(Adam, FirstStepHasLearningRateMagnitude) {
  MlpParams p = single_layer(1, 1, Activation::identity);
  AdamState s = make_adam(p, {.learning_rate = 1e-3});
  MlpParams g = zeros_like(p);
  g.layers[0].weight(0, 0) = 0.37;
  adam_step(p, g, s);
  // m_hat = g, v_hat = g^2: step = lr * g / (|g| + eps).
  EXPECT_NEAR(p.layers[0].weight(0, 0), -1e-3 * 0.37 / (0.37 + s.config.epsilon), 1e-15);
}

TEST(Adam, NonFiniteGradientThrows) {
  MlpParams p = single_layer(1, 1, Activation::identity);
  AdamState s = make_adam(p);
  MlpParams g = zeros_like(p);
  g.layers[0].bias(0) = std::nan("");
  EXPECT_THROW(adam_step(p, g, s), DivergenceError);
}

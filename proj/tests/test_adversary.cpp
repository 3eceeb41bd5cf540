#include <gtest/gtest.h>

#include <cmath>

#include "aril/adversary.hpp"
#include "aril/gradcheck.hpp"

using namespace aril;
using namespace aril::adv;

namespace {

struct ToyProblem {
  repr::WaeModel wae;
  Discriminator d;
  SampleBatch policy;
  SampleBatch expert;
};

// Expert takes action 1 ("right") everywhere, the policy action 0 ("left").
ToyProblem separable_toy(std::uint64_t seed, std::size_t n = 16) {
  Rng rng(seed);
  ToyProblem t;
  repr::WaeConfig c;
  c.observation_dim = 4;
  c.latent_dim = 3;
  c.hidden = {16};
  t.wae = repr::make_wae(c, rng);
  t.d = make_discriminator(3, 2, {16}, rng);
  t.policy = {gaussian_matrix(static_cast<Eigen::Index>(n), 4, rng), std::vector<int>(n, 0)};
  t.expert = {gaussian_matrix(static_cast<Eigen::Index>(n), 4, rng), std::vector<int>(n, 1)};
  return t;
}

double mean_score(const Discriminator& d, const repr::WaeModel& wae, const SampleBatch& b) {
  return score_batch(d, repr::encode_batch(wae, b.states), b.actions).mean();
}

}  // namespace

TEST(Score, ZeroNetGivesHalf) {
  Rng rng(1);
  Discriminator d = make_discriminator(3, 4, {5}, rng);
  d.net = nn::zeros_like(d.net);
  EXPECT_EQ(score(d, Vector::Constant(3, 2.0), 1), 0.5);
  EXPECT_EQ(reward(d, Vector::Zero(3), 3), 0.0);
}

TEST(Score, ClampedForHugeInputs) {
  Rng rng(2);
  const Discriminator d = make_discriminator(3, 4, {5}, rng, nn::Activation::relu);
  for (double v : {-1e8, 1e8}) {
    const double s = score(d, Vector::Constant(3, v), 0);
    EXPECT_GE(s, nn::kSigmoidClip);
    EXPECT_LE(s, 1.0 - nn::kSigmoidClip);
  }
}

TEST(Score, RejectsWrongLatentSize) {
  Rng rng(3);
  const Discriminator d = make_discriminator(3, 4, {5}, rng);
  EXPECT_THROW(score(d, Vector::Zero(2), 0), ShapeError);
}

TEST(Reward, InvertsSigmoid) {
  EXPECT_EQ(reward_from_score(0.5), 0.0);
  for (double x : {-4.0, -0.3, 0.0, 1.7, 6.0}) EXPECT_NEAR(reward_from_score(1.0 / (1.0 + std::exp(-x))), x, 1e-9);
}

TEST(Reward, StrictlyIncreasingInScore) {
  double prev = -1e300;
  for (int i = 1; i < 99; ++i) {
    const double r = reward_from_score(i / 100.0);
    EXPECT_GT(r, prev);
    prev = r;
  }
}

TEST(Reward, EqualsLogitOfNetworkPreActivation) {
  Rng rng(4);
  Discriminator d = make_discriminator(2, 2, {3}, rng);
  const Vector z = gaussian_matrix(2, 1, rng).col(0);
  // Logit via an identity-output copy of the same network.
  nn::MlpParams logit = d.net;
  logit.spec.output = nn::Activation::identity;
  Vector in(4);
  in << z, 1.0, 0.0;
  EXPECT_NEAR(reward(d, z, 0), nn::mlp_forward(logit, in)(0), 1e-9);
}

TEST(AdversaryLoss, UntrainedDiscriminatorClassificationTerms) {
  ToyProblem t = separable_toy(5, 6);
  t.d.net = nn::zeros_like(t.d.net);
  Rng rng(1);
  const auto in = draw_adversary_inputs(t.wae, t.policy, t.expert, rng);
  AdversaryHyper h;
  const auto terms = adversary_loss(t.d, t.wae, t.policy, t.expert, h, in);
  EXPECT_NEAR(terms.classification, 12.0 * std::log(0.5), 1e-12);
  h.objective = DiscObjective::logistic;
  EXPECT_NEAR(adversary_loss(t.d, t.wae, t.policy, t.expert, h, in).classification, -12.0 * std::log(0.5), 1e-12);
}

TEST(AdversaryLoss, ZeroWeightsLeaveClassificationOnly) {
  ToyProblem t = separable_toy(6, 6);
  Rng rng(1);
  const auto in = draw_adversary_inputs(t.wae, t.policy, t.expert, rng);
  AdversaryHyper h;
  h.alpha1 = h.alpha2 = h.beta = 0.0;
  const auto terms = adversary_loss(t.d, t.wae, t.policy, t.expert, h, in);
  EXPECT_EQ(terms.total, terms.classification);
  EXPECT_EQ(terms.wae_policy, 0.0);
  EXPECT_EQ(terms.latent_mmd, 0.0);
}

TEST(AdversaryLoss, TotalIsWeightedSumOfTerms) {
  ToyProblem t = separable_toy(7, 6);
  Rng rng(1);
  const auto in = draw_adversary_inputs(t.wae, t.policy, t.expert, rng);
  AdversaryHyper h;
  h.alpha1 = 0.3;
  h.alpha2 = 0.6;
  h.beta = 2.0;
  const auto x = adversary_loss(t.d, t.wae, t.policy, t.expert, h, in);
  EXPECT_NEAR(x.total, x.classification + 0.3 * x.wae_policy + 0.6 * x.wae_expert + 2.0 * x.latent_mmd, 1e-12);
  EXPECT_NEAR(x.wae_policy, repr::wae_loss(t.wae, t.policy.states, in.policy), 1e-12);
  EXPECT_NEAR(x.latent_mmd,
              repr::mmd(repr::encode_batch(t.wae, t.policy.states), repr::encode_batch(t.wae, t.expert.states), in.cross),
              1e-12);
}

TEST(AdversaryLoss, EmptyExpertBatchDropsExpertTerms) {
  ToyProblem t = separable_toy(8, 6);
  Rng rng(1);
  const SampleBatch none{Matrix(0, 4), {}};
  const auto in = draw_adversary_inputs(t.wae, t.policy, none, rng);
  const auto x = adversary_loss(t.d, t.wae, t.policy, none, AdversaryHyper{}, in);
  EXPECT_EQ(x.wae_expert, 0.0);
  EXPECT_EQ(x.latent_mmd, 0.0);
  EXPECT_NEAR(x.classification, score_batch(t.d, repr::encode_batch(t.wae, t.policy.states), t.policy.actions)
                                    .array().log().sum(), 1e-12);
}

TEST(AdversaryLoss, RejectsUnequalBatches) {
  ToyProblem t = separable_toy(9, 6);
  SampleBatch small{t.expert.states.topRows(3), {1, 1, 1}};
  Rng rng(1);
  const auto in = draw_adversary_inputs(t.wae, t.policy, t.policy, rng);
  EXPECT_THROW(adversary_loss(t.d, t.wae, t.policy, small, AdversaryHyper{}, in), ShapeError);
}

TEST(AdversaryLoss, PermutationInvariantWithinBatch) {
  ToyProblem t = separable_toy(10, 6);
  t.policy.actions = {0, 1, 0, 1, 1, 0};
  Rng rng(1);
  const auto in = draw_adversary_inputs(t.wae, t.policy, t.expert, rng);
  AdversaryHyper h;
  h.alpha1 = h.alpha2 = 0.0;  // the prior sample pairing is order-dependent only through the batch
  const double a = adversary_loss(t.d, t.wae, t.policy, t.expert, h, in).total;
  SampleBatch p = t.policy;
  p.states.row(0).swap(p.states.row(5));
  std::swap(p.actions[0], p.actions[5]);
  p.states.row(1).swap(p.states.row(3));
  std::swap(p.actions[1], p.actions[3]);
  EXPECT_NEAR(adversary_loss(t.d, t.wae, p, t.expert, h, in).total, a, 1e-10);
}

TEST(AdversaryLoss, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EXPECT_LE(gradcheck::check_adversary(seed, DiscObjective::literal).max_relative_error, 1e-4);
    EXPECT_LE(gradcheck::check_adversary(seed, DiscObjective::logistic).max_relative_error, 1e-4);
  }
}

TEST(AdversaryTrain, ZeroLearningRateLeavesModelsUnchanged) {
  ToyProblem t = separable_toy(11);
  const auto before_d = t.d.net;
  const auto before_e = t.wae.encoder;
  AdversaryOptimizer opt = make_optimizer(t.d, t.wae, 0.0, 0.0);
  Rng rng(2);
  adversary_train_step(t.d, t.wae, t.policy, t.expert, AdversaryHyper{}, opt, rng);
  for (std::size_t l = 0; l < before_d.layers.size(); ++l) EXPECT_EQ(t.d.net.layers[l].weight, before_d.layers[l].weight);
  for (std::size_t l = 0; l < before_e.layers.size(); ++l)
    EXPECT_EQ(t.wae.encoder.layers[l].weight, before_e.layers[l].weight);
}

TEST(AdversaryTrain, SingleStepRarelyIncreasesLoss) {
  for (auto objective : {DiscObjective::literal, DiscObjective::logistic}) {
    int not_increased = 0;
    const int trials = 40;
    for (int s = 0; s < trials; ++s) {
      ToyProblem t = separable_toy(100 + static_cast<std::uint64_t>(s));
      AdversaryHyper h;
      h.objective = objective;
      Rng rng(s);
      const auto in = draw_adversary_inputs(t.wae, t.policy, t.expert, rng);
      const double before = adversary_loss(t.d, t.wae, t.policy, t.expert, h, in).total;
      AdversaryGrads g = zero_grads(t.d, t.wae);
      adversary_loss(t.d, t.wae, t.policy, t.expert, h, in, &g);
      AdversaryOptimizer opt = make_optimizer(t.d, t.wae, 1e-3, 1e-3);
      nn::adam_step(t.d.net, g.disc, opt.disc);
      nn::adam_step(t.wae.encoder, g.wae.encoder, opt.encoder);
      nn::adam_step(t.wae.decoder, g.wae.decoder, opt.decoder);
      if (adversary_loss(t.d, t.wae, t.policy, t.expert, h, in).total <= before) ++not_increased;
    }
    EXPECT_GE(not_increased, 38) << to_string(objective);
  }
}

TEST(AdversaryTrain, HundredStepsOnFixedBatchLowerTheLoss) {
  for (auto objective : {DiscObjective::literal, DiscObjective::logistic}) {
    ToyProblem t = separable_toy(12);
    AdversaryHyper h;
    h.objective = objective;
    Rng rng(3);
    const auto in = draw_adversary_inputs(t.wae, t.policy, t.expert, rng);
    const double start = adversary_loss(t.d, t.wae, t.policy, t.expert, h, in).total;
    AdversaryOptimizer opt = make_optimizer(t.d, t.wae, 1e-3, 1e-3);
    for (int i = 0; i < 100; ++i) {
      AdversaryGrads g = zero_grads(t.d, t.wae);
      adversary_loss(t.d, t.wae, t.policy, t.expert, h, in, &g);
      nn::adam_step(t.d.net, g.disc, opt.disc);
      nn::adam_step(t.wae.encoder, g.wae.encoder, opt.encoder);
      nn::adam_step(t.wae.decoder, g.wae.decoder, opt.decoder);
    }
    EXPECT_LT(adversary_loss(t.d, t.wae, t.policy, t.expert, h, in).total, start) << to_string(objective);
  }
}

TEST(AdversaryTrain, SeparableToyRanksExpertAboveLeft) {
  for (auto objective : {DiscObjective::literal, DiscObjective::logistic}) {
    ToyProblem t = separable_toy(13);
    AdversaryHyper h;
    h.objective = objective;
    AdversaryOptimizer opt = make_optimizer(t.d, t.wae, 1e-3, 1e-3);
    Rng rng(4);
    for (int i = 0; i < 300; ++i) {
      // Fresh states each step; labels fixed by action.
      const SampleBatch p{gaussian_matrix(16, 4, rng), std::vector<int>(16, 0)};
      const SampleBatch e{gaussian_matrix(16, 4, rng), std::vector<int>(16, 1)};
      adversary_train_step(t.d, t.wae, p, e, h, opt, rng);
    }
    const SampleBatch held_right{gaussian_matrix(32, 4, rng), std::vector<int>(32, 1)};
    SampleBatch held_left = held_right;
    held_left.actions.assign(32, 0);
    EXPECT_GT(mean_score(t.d, t.wae, held_right), mean_score(t.d, t.wae, held_left)) << to_string(objective);
    const Matrix z = repr::encode_batch(t.wae, held_right.states);
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      EXPECT_GT(score(t.d, z.row(i).transpose(), 1), score(t.d, z.row(i).transpose(), 0)) << to_string(objective);
  }
}

TEST(Objective, ParsesNames) {
  EXPECT_EQ(objective_from_string("literal"), DiscObjective::literal);
  EXPECT_EQ(objective_from_string("logistic"), DiscObjective::logistic);
  EXPECT_THROW(objective_from_string("hinge"), std::invalid_argument);
}

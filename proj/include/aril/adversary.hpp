#pragma once

// Discriminator over (latent, action) pairs and the joint adversarial
// objective over encoder, decoder and discriminator.
//
// Label convention: minimizing the objective drives D toward 0 on policy
// pairs and toward 1 on expert pairs, so high scores mean expert-like and the
// imitation reward log D - log(1 - D) is large for expert-like pairs.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "aril/errors.hpp"
#include "aril/numerics.hpp"
#include "aril/representation.hpp"

namespace aril::adv {

struct SampleBatch {
  Matrix states;  // rows are observations
  std::vector<int> actions;

  std::size_t size() const { return actions.size(); }
  bool empty() const { return actions.empty(); }
};

struct Discriminator {
  nn::MlpParams net;  // (latent ++ one-hot action) -> sigmoid
  std::size_t latent_dim = 0;
  std::size_t num_actions = 0;
};

inline Discriminator make_discriminator(std::size_t latent_dim, std::size_t num_actions,
                                        const std::vector<std::size_t>& hidden, Rng& rng,
                                        nn::Activation activation = nn::Activation::tanh) {
  Discriminator d;
  d.latent_dim = latent_dim;
  d.num_actions = num_actions;
  d.net = nn::init_mlp(
      nn::make_spec(latent_dim + num_actions, hidden, 1, activation, nn::Activation::sigmoid), rng);
  return d;
}

inline Matrix discriminator_input(const Discriminator& d, const Matrix& latents, const std::vector<int>& actions) {
  require_shape(static_cast<std::size_t>(latents.cols()) == d.latent_dim, "discriminator: latent dimension mismatch");
  require_shape(static_cast<std::size_t>(latents.rows()) == actions.size(), "discriminator: batch size mismatch");
  Matrix in = Matrix::Zero(latents.rows(), static_cast<Eigen::Index>(d.latent_dim + d.num_actions));
  in.leftCols(latents.cols()) = latents;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const int a = actions[i];
    if (a < 0 || static_cast<std::size_t>(a) >= d.num_actions)
      throw ShapeError("discriminator: action index out of range");
    in(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d.latent_dim) + a) = 1.0;
  }
  return in;
}

inline Vector score_batch(const Discriminator& d, const Matrix& latents, const std::vector<int>& actions) {
  return nn::forward(d.net, discriminator_input(d, latents, actions)).col(0);
}

/// Clamped sigmoid output in [1e-7, 1 - 1e-7].
inline double score(const Discriminator& d, const Vector& z, int action) {
  Matrix row = z.transpose();
  return score_batch(d, row, {action})(0);
}

inline double reward_from_score(double s) { return std::log(s) - std::log(1.0 - s); }

/// Imitation reward log D - log(1 - D).
inline double reward(const Discriminator& d, const Vector& z, int action) {
  return reward_from_score(score(d, z, action));
}

/// literal: minimize sum_policy log D + sum_expert log(1 - D).
/// logistic: minimize -sum_expert log D - sum_policy log(1 - D); same labels,
/// bounded below, with an interior optimum D = n_E / (n_E + n_P) per pair.
enum class DiscObjective { literal, logistic };

inline std::string to_string(DiscObjective o) { return o == DiscObjective::literal ? "literal" : "logistic"; }

inline DiscObjective objective_from_string(const std::string& s) {
  if (s == "literal") return DiscObjective::literal;
  if (s == "logistic") return DiscObjective::logistic;
  throw std::invalid_argument("unknown discriminator objective: " + s);
}

struct AdversaryHyper {
  double alpha1 = 1.0;  // WAE loss on policy states
  double alpha2 = 1.0;  // WAE loss on expert states
  double beta = 1.0;    // MMD between encoded policy and expert states
  double lambda = 0.0;  // policy entropy weight, used by the agent
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  DiscObjective objective = DiscObjective::literal;
};

struct AdversaryLossTerms {
  double total = 0.0;
  double classification = 0.0;
  double wae_policy = 0.0;
  double wae_expert = 0.0;
  double latent_mmd = 0.0;
};

/// Prior samples and resolved kernels for one evaluation of the objective.
struct AdversaryLossInputs {
  repr::WaeLossInputs policy;
  repr::WaeLossInputs expert;
  repr::ResolvedKernel cross;
};

inline AdversaryLossInputs draw_adversary_inputs(const repr::WaeModel& wae, const SampleBatch& policy,
                                                 const SampleBatch& expert, Rng& rng) {
  AdversaryLossInputs in;
  in.policy = repr::draw_wae_inputs(wae, policy.states, rng);
  if (!expert.empty()) {
    in.expert = repr::draw_wae_inputs(wae, expert.states, rng);
    in.cross = repr::resolve_kernel(wae.kernel, repr::encode_batch(wae, policy.states),
                                    repr::encode_batch(wae, expert.states));
  }
  return in;
}

struct AdversaryGrads {
  repr::WaeGrads wae;
  nn::MlpParams disc;
};

inline AdversaryGrads zero_grads(const Discriminator& d, const repr::WaeModel& wae) {
  return {repr::zero_grads(wae), nn::zeros_like(d.net)};
}

namespace detail {

// Classification half for one batch.
inline double classification_terms(const Discriminator& d, const Matrix& z, const std::vector<int>& actions,
                                   bool policy_half, DiscObjective objective, Matrix* grad_z,
                                   nn::MlpParams* grad_disc) {
  nn::Tape tape;
  const Matrix in = discriminator_input(d, z, actions);
  const Matrix out = nn::forward(d.net, in, grad_disc ? &tape : nullptr);
  double loss = 0.0;
  Matrix upstream(out.rows(), 1);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double s = out(i, 0);
    if (objective == DiscObjective::literal) {
      if (policy_half) {
        loss += std::log(s);
        upstream(i, 0) = 1.0 / s;
      } else {
        loss += std::log(1.0 - s);
        upstream(i, 0) = -1.0 / (1.0 - s);
      }
    } else if (policy_half) {
      loss -= std::log(1.0 - s);
      upstream(i, 0) = 1.0 / (1.0 - s);
    } else {
      loss -= std::log(s);
      upstream(i, 0) = -1.0 / s;
    }
  }
  if (grad_disc) {
    const Matrix din = nn::backward(d.net, tape, upstream, *grad_disc);
    if (grad_z) *grad_z += din.leftCols(static_cast<Eigen::Index>(d.latent_dim));
  }
  return loss;
}

}  // namespace detail

/// Joint objective
///   sum_policy log D(phi(s), a) + sum_expert log(1 - D(phi(s), a))
///   + alpha1 L_WAE(policy states) + alpha2 L_WAE(expert states)
///   + beta MMD(phi(policy states), phi(expert states)).
/// An empty expert batch drops every expert-dependent term.
inline AdversaryLossTerms adversary_loss(const Discriminator& d, const repr::WaeModel& wae,
                                         const SampleBatch& policy, const SampleBatch& expert,
                                         const AdversaryHyper& h, const AdversaryLossInputs& in,
                                         AdversaryGrads* grads = nullptr) {
  if (policy.empty()) throw ShapeError("adversary_loss: policy batch is empty");
  require_shape(static_cast<std::size_t>(policy.states.rows()) == policy.size(), "adversary_loss: policy batch malformed");
  require_shape(static_cast<std::size_t>(expert.states.rows()) == expert.size(), "adversary_loss: expert batch malformed");
  const bool with_expert = !expert.empty();
  if (with_expert && expert.size() != policy.size())
    throw ShapeError("adversary_loss: policy and expert batches must have the same size");

  AdversaryLossTerms t;
  nn::Tape tape_p, tape_e;
  const Matrix zp = nn::forward(wae.encoder, policy.states, grads ? &tape_p : nullptr);
  Matrix gzp = Matrix::Zero(zp.rows(), zp.cols());
  Matrix* gzp_ptr = grads ? &gzp : nullptr;
  nn::MlpParams* gdisc = grads ? &grads->disc : nullptr;
  nn::MlpParams* gdec = grads ? &grads->wae.decoder : nullptr;

  t.classification = detail::classification_terms(d, zp, policy.actions, true, h.objective, gzp_ptr, gdisc);
  if (h.alpha1 != 0.0)
    t.wae_policy = repr::wae_terms(wae, policy.states, zp, in.policy.prior, in.policy.kernel, h.alpha1, gzp_ptr, gdec);

  Matrix ze, gze;
  if (with_expert) {
    ze = nn::forward(wae.encoder, expert.states, grads ? &tape_e : nullptr);
    gze = Matrix::Zero(ze.rows(), ze.cols());
    Matrix* gze_ptr = grads ? &gze : nullptr;
    t.classification += detail::classification_terms(d, ze, expert.actions, false, h.objective, gze_ptr, gdisc);
    if (h.alpha2 != 0.0)
      t.wae_expert = repr::wae_terms(wae, expert.states, ze, in.expert.prior, in.expert.kernel, h.alpha2, gze_ptr, gdec);
    if (h.beta != 0.0) t.latent_mmd = repr::mmd(zp, ze, in.cross, h.beta, gzp_ptr, gze_ptr);
  }
  if (grads) {
    nn::backward(wae.encoder, tape_p, gzp, grads->wae.encoder);
    if (with_expert) nn::backward(wae.encoder, tape_e, gze, grads->wae.encoder);
  }
  t.total = t.classification + h.alpha1 * t.wae_policy + h.alpha2 * t.wae_expert + h.beta * t.latent_mmd;
  return t;
}

struct AdversaryOptimizer {
  nn::AdamState encoder;
  nn::AdamState decoder;
  nn::AdamState disc;
};

inline AdversaryOptimizer make_optimizer(const Discriminator& d, const repr::WaeModel& wae, double disc_lr,
                                         double wae_lr) {
  return {nn::make_adam(wae.encoder, {.learning_rate = wae_lr}), nn::make_adam(wae.decoder, {.learning_rate = wae_lr}),
          nn::make_adam(d.net, {.learning_rate = disc_lr})};
}

/// One Adam step on the joint objective for encoder, decoder and
/// discriminator. Returns the loss evaluated before the step.
inline AdversaryLossTerms adversary_train_step(Discriminator& d, repr::WaeModel& wae, const SampleBatch& policy,
                                               const SampleBatch& expert, const AdversaryHyper& h,
                                               AdversaryOptimizer& opt, Rng& rng) {
  const AdversaryLossInputs in = draw_adversary_inputs(wae, policy, expert, rng);
  AdversaryGrads g = zero_grads(d, wae);
  const AdversaryLossTerms t = adversary_loss(d, wae, policy, expert, h, in, &g);
  if (!std::isfinite(t.total)) throw DivergenceError("adversary: non-finite loss");
  nn::adam_step(d.net, g.disc, opt.disc);
  nn::adam_step(wae.encoder, g.wae.encoder, opt.encoder);
  nn::adam_step(wae.decoder, g.wae.decoder, opt.decoder);
  return t;
}

}  // namespace aril::adv

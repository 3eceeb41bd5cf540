#pragma once

// Finite-difference suite over every trained loss: WAE, the joint adversarial
// objective (both discriminator objectives), the SR TD loss and the policy TD
// loss, on small random networks and batches.

#include <string>
#include <vector>

#include "aril/adversary.hpp"
#include "aril/agent.hpp"
#include "aril/numerics.hpp"
#include "aril/representation.hpp"
#include "aril/successor.hpp"

namespace aril::gradcheck {

struct Sizes {
  std::size_t obs = 5;
  std::size_t latent = 3;
  std::size_t actions = 3;
  std::size_t batch = 4;
  std::vector<std::size_t> hidden{4};
};

struct LossReport {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

inline repr::WaeModel small_wae(const Sizes& sz, Rng& rng, repr::KernelKind kind) {
  repr::WaeConfig c;
  c.observation_dim = sz.obs;
  c.latent_dim = sz.latent;
  c.hidden = sz.hidden;
  c.kernel.kind = kind;
  c.beta1 = 0.7;
  return repr::make_wae(c, rng);
}

inline std::vector<int> random_actions(std::size_t n, std::size_t num_actions, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(num_actions) - 1);
  std::vector<int> a(n);
  for (auto& x : a) x = pick(rng);
  return a;
}

inline LossReport check_wae(std::uint64_t seed, double h = 1e-5, const Sizes& sz = {}) {
  Rng rng(seed);
  repr::WaeModel m = small_wae(sz, rng, seed % 2 ? repr::KernelKind::rbf : repr::KernelKind::rq);
  const Matrix states = gaussian_matrix(static_cast<Eigen::Index>(sz.batch), static_cast<Eigen::Index>(sz.obs), rng);
  const repr::WaeLossInputs in = repr::draw_wae_inputs(m, states, rng);
  nn::LossFn loss = [&](std::vector<nn::MlpParams>* g) {
    if (!g) return repr::wae_loss(m, states, in);
    repr::WaeGrads wg{std::move((*g)[0]), std::move((*g)[1])};
    const double v = repr::wae_loss(m, states, in, &wg);
    (*g)[0] = std::move(wg.encoder);
    (*g)[1] = std::move(wg.decoder);
    return v;
  };
  const auto r = nn::finite_diff_report(loss, {&m.encoder, &m.decoder}, h);
  return {"wae", r.max_relative_error, r.checked};
}

inline LossReport check_adversary(std::uint64_t seed, adv::DiscObjective objective, double h = 1e-5,
                                  const Sizes& sz = {}) {
  Rng rng(seed);
  repr::WaeModel m = small_wae(sz, rng, seed % 2 ? repr::KernelKind::rq : repr::KernelKind::rbf);
  adv::Discriminator d = adv::make_discriminator(sz.latent, sz.actions, sz.hidden, rng);
  const auto rows = static_cast<Eigen::Index>(sz.batch);
  const auto cols = static_cast<Eigen::Index>(sz.obs);
  adv::SampleBatch p{gaussian_matrix(rows, cols, rng), random_actions(sz.batch, sz.actions, rng)};
  adv::SampleBatch e{gaussian_matrix(rows, cols, rng, 0.5), random_actions(sz.batch, sz.actions, rng)};
  adv::AdversaryHyper hyper;
  hyper.alpha1 = 0.6;
  hyper.alpha2 = 0.4;
  hyper.beta = 1.3;
  hyper.objective = objective;
  const adv::AdversaryLossInputs in = adv::draw_adversary_inputs(m, p, e, rng);
  nn::LossFn loss = [&](std::vector<nn::MlpParams>* g) {
    if (!g) return adv::adversary_loss(d, m, p, e, hyper, in).total;
    adv::AdversaryGrads ag{{std::move((*g)[0]), std::move((*g)[1])}, std::move((*g)[2])};
    const double v = adv::adversary_loss(d, m, p, e, hyper, in, &ag).total;
    (*g)[0] = std::move(ag.wae.encoder);
    (*g)[1] = std::move(ag.wae.decoder);
    (*g)[2] = std::move(ag.disc);
    return v;
  };
  const auto r = nn::finite_diff_report(loss, {&m.encoder, &m.decoder, &d.net}, h);
  return {"adversary_" + adv::to_string(objective), r.max_relative_error, r.checked};
}

inline LossReport check_sr(std::uint64_t seed, double h = 1e-5, const Sizes& sz = {}) {
  Rng rng(seed);
  sr::SrModel m = sr::make_sr(sz.latent, sz.hidden, 0.9, 10, rng);
  // A target that differs from psi, as it does between syncs.
  m.target = nn::init_mlp(m.psi.spec, rng);
  const auto rows = static_cast<Eigen::Index>(sz.batch);
  const auto cols = static_cast<Eigen::Index>(sz.latent);
  const Matrix z = gaussian_matrix(rows, cols, rng);
  const Matrix zn = gaussian_matrix(rows, cols, rng);
  std::vector<bool> terminal(sz.batch, false);
  terminal.back() = true;
  nn::LossFn loss = [&](std::vector<nn::MlpParams>* g) {
    return sr::sr_td_loss(m, z, zn, terminal, g ? &(*g)[0] : nullptr);
  };
  const auto r = nn::finite_diff_report(loss, {&m.psi}, h);
  return {"sr", r.max_relative_error, r.checked};
}

inline LossReport check_policy(std::uint64_t seed, double h = 1e-5, const Sizes& sz = {}) {
  Rng rng(seed);
  agent::PolicyModel p = agent::make_policy(sz.latent, sz.actions, sz.hidden, 0.9, seed % 2 ? 0.0 : 0.3, 1e-3, rng);
  p.target = nn::init_mlp(p.q.spec, rng);
  const auto rows = static_cast<Eigen::Index>(sz.batch);
  const auto cols = static_cast<Eigen::Index>(sz.latent);
  agent::TdBatch b;
  b.latents = gaussian_matrix(rows, cols, rng);
  b.next_latents = gaussian_matrix(rows, cols, rng);
  b.actions = random_actions(sz.batch, sz.actions, rng);
  b.rewards = gaussian_matrix(rows, 1, rng).col(0);
  b.terminal.assign(sz.batch, false);
  b.terminal.front() = true;
  nn::LossFn loss = [&](std::vector<nn::MlpParams>* g) {
    return agent::policy_td_loss(p, b, g ? &(*g)[0] : nullptr);
  };
  const auto r = nn::finite_diff_report(loss, {&p.q}, h);
  return {"policy", r.max_relative_error, r.checked};
}

/// Every loss on every seed; one report per (loss, seed).
inline std::vector<LossReport> run_suite(const std::vector<std::uint64_t>& seeds, double h = 1e-5) {
  std::vector<LossReport> out;
  for (auto s : seeds) {
    out.push_back(check_wae(s, h));
    out.push_back(check_adversary(s, adv::DiscObjective::literal, h));
    out.push_back(check_adversary(s, adv::DiscObjective::logistic, h));
    out.push_back(check_sr(s, h));
    out.push_back(check_policy(s, h));
  }
  return out;
}

}  // namespace aril::gradcheck

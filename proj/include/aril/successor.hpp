#pragma once

// Successor representation over encoder latents, trained by TD against a
// periodically synced target copy, plus exact and TD tabular references.

#include <cmath>
#include <vector>

#include "aril/errors.hpp"
#include "aril/numerics.hpp"
#include "aril/representation.hpp"

namespace aril::sr {

struct SrModel {
  nn::MlpParams psi;
  nn::MlpParams target;
  double gamma = 0.95;
  std::size_t sync_period = 500;
  std::size_t steps_since_sync = 0;

  std::size_t feature_dim() const { return psi.spec.input_size(); }
};

inline SrModel make_sr(std::size_t feature_dim, const std::vector<std::size_t>& hidden, double gamma,
                       std::size_t sync_period, Rng& rng, nn::Activation activation = nn::Activation::tanh) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("SR discount must lie in [0, 1)");
  SrModel m;
  m.psi = nn::init_mlp(nn::make_spec(feature_dim, hidden, feature_dim, activation), rng);
  m.target = m.psi;
  m.gamma = gamma;
  m.sync_period = sync_period;
  return m;
}

inline Vector sr_forward(const SrModel& m, const Vector& z) {
  require_shape(static_cast<std::size_t>(z.size()) == m.feature_dim(), "sr_forward: latent dimension mismatch");
  return nn::mlp_forward(m.psi, z);
}

inline Matrix sr_forward_batch(const SrModel& m, const Matrix& z) { return nn::forward(m.psi, z); }

inline void sync_target(SrModel& m) {
  m.target = m.psi;
  m.steps_since_sync = 0;
}

/// Mean over the batch of ||psi(z) - (z + gamma * psi'(z'))||^2, where the
/// successor term is dropped for terminal transitions. Latents are treated as
/// constants, and so is the target network; only psi receives gradients.
inline double sr_td_loss(const SrModel& m, const Matrix& z, const Matrix& z_next,
                         const std::vector<bool>& terminal, nn::MlpParams* grad_psi = nullptr) {
  require_shape(z.rows() == z_next.rows() && static_cast<std::size_t>(z.rows()) == terminal.size(),
                "sr_td_loss: batch sizes differ");
  require_shape(static_cast<std::size_t>(z.cols()) == m.feature_dim(), "sr_td_loss: latent dimension mismatch");
  Matrix target = z;
  const Matrix next = nn::forward(m.target, z_next);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    if (!terminal[static_cast<std::size_t>(i)]) target.row(i) += m.gamma * next.row(i);
  nn::Tape tape;
  const Matrix pred = nn::forward(m.psi, z, grad_psi ? &tape : nullptr);
  const Matrix residual = pred - target;
  const double n = static_cast<double>(z.rows());
  if (grad_psi) nn::backward(m.psi, tape, (2.0 / n) * residual, *grad_psi);
  return residual.rowwise().squaredNorm().sum() / n;
}

/// Same loss computed from observations through the encoder (no gradient
/// reaches the encoder).
inline double sr_td_loss(const SrModel& m, const repr::WaeModel& wae, const Matrix& states,
                         const Matrix& next_states, const std::vector<bool>& terminal,
                         nn::MlpParams* grad_psi = nullptr) {
  return sr_td_loss(m, repr::encode_batch(wae, states), repr::encode_batch(wae, next_states), terminal, grad_psi);
}

/// One Adam step on psi; syncs the target every `sync_period` steps.
inline double sr_train_step(SrModel& m, const Matrix& z, const Matrix& z_next, const std::vector<bool>& terminal,
                            nn::AdamState& opt) {
  nn::MlpParams g = nn::zeros_like(m.psi);
  const double loss = sr_td_loss(m, z, z_next, terminal, &g);
  if (!std::isfinite(loss)) throw DivergenceError("sr: non-finite loss");
  nn::adam_step(m.psi, g, opt);
  if (m.sync_period > 0 && ++m.steps_since_sync >= m.sync_period) sync_target(m);
  return loss;
}

// ==========================================================================
// Tabular references

struct TabularSr {
  Matrix m;  // n x n discounted expected occupancies

  std::size_t states() const { return static_cast<std::size_t>(m.rows()); }
};

/// Closed form M = (I - gamma P)^-1. Rows of P must be nonnegative with sums
/// at most 1; a row summing to 0 marks a state after which the episode ends.
inline TabularSr tabular_sr_solve(const Matrix& p, double gamma) {
  if (p.rows() != p.cols()) throw ShapeError("tabular_sr_solve: transition matrix must be square");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("tabular_sr_solve: gamma must lie in [0, 1)");
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (p.row(i).minCoeff() < 0.0 || p.row(i).sum() > 1.0 + 1e-9)
      throw std::invalid_argument("tabular_sr_solve: rows must be (sub)stochastic");
  }
  const Matrix a = Matrix::Identity(p.rows(), p.cols()) - gamma * p;
  Eigen::PartialPivLU<Matrix> lu(a);
  if (!(std::abs(lu.determinant()) > 1e-300)) throw std::runtime_error("tabular_sr_solve: singular system");
  TabularSr out{lu.solve(Matrix::Identity(p.rows(), p.cols()))};
  if (!out.m.allFinite()) throw std::runtime_error("tabular_sr_solve: non-finite solution");
  return out;
}

/// Tabular TD over state-index episodes:
///   M[s_t] += step * (1_{s_t} + gamma M[s_{t+1}] - M[s_t]).
/// The last state of each episode has no known successor and is not updated.
/// The step size for sweep k is alpha / (1 + decay * k).
inline TabularSr tabular_sr_td(const std::vector<std::vector<std::size_t>>& episodes, std::size_t n_states,
                               double gamma, double alpha, std::size_t sweeps, double decay = 0.0) {
  TabularSr sr{Matrix::Zero(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_states))};
  for (const auto& ep : episodes)
    for (auto s : ep)
      if (s >= n_states) throw std::invalid_argument("tabular_sr_td: state index out of range");
  for (std::size_t k = 0; k < sweeps; ++k) {
    const double step = alpha / (1.0 + decay * static_cast<double>(k));
    for (const auto& ep : episodes) {
      for (std::size_t t = 0; t + 1 < ep.size(); ++t) {
        const auto s = static_cast<Eigen::Index>(ep[t]);
        const auto next = static_cast<Eigen::Index>(ep[t + 1]);
        Vector target = gamma * sr.m.row(next).transpose();
        target(s) += 1.0;
        sr.m.row(s) += step * (target.transpose() - sr.m.row(s));
      }
    }
  }
  return sr;
}

}  // namespace aril::sr

#pragma once

// Deterministic-encoder Wasserstein autoencoder with an MMD latent penalty.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "aril/errors.hpp"
#include "aril/numerics.hpp"

namespace aril::repr {

enum class KernelKind { rbf, rq };

inline std::string to_string(KernelKind k) { return k == KernelKind::rbf ? "rbf" : "rq"; }
inline KernelKind kernel_from_string(const std::string& s) {
  if (s == "rbf") return KernelKind::rbf;
  if (s == "rq") return KernelKind::rq;
  throw std::invalid_argument("unknown kernel '" + s + "'");
}

/// Kernel configuration. A non-positive `bandwidth` selects the median
/// heuristic: the median pairwise distance of the two sample sets combined.
/// For RQ, the kernel is the mean over `rq_alphas` of
/// (1 + r^2 / (2 a l^2))^(-a) with l = bandwidth.
struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  double bandwidth = 0.0;
  std::vector<double> rq_alphas{0.2, 0.5, 1.0, 2.0, 5.0};
};

/// A kernel with concrete scale, held fixed while a loss and its gradient are
/// evaluated.
struct ResolvedKernel {
  KernelKind kind = KernelKind::rbf;
  double scale = 1.0;
  std::vector<double> rq_alphas{1.0};

  double value(double r2) const {
    if (kind == KernelKind::rbf) return std::exp(-r2 / (2.0 * scale * scale));
    double acc = 0.0;
    for (double a : rq_alphas) acc += std::pow(1.0 + r2 / (2.0 * a * scale * scale), -a);
    return acc / static_cast<double>(rq_alphas.size());
  }

  /// d value / d r^2
  double derivative(double r2) const {
    const double l2 = scale * scale;
    if (kind == KernelKind::rbf) return -std::exp(-r2 / (2.0 * l2)) / (2.0 * l2);
    double acc = 0.0;
    for (double a : rq_alphas) acc += -std::pow(1.0 + r2 / (2.0 * a * l2), -a - 1.0) / (2.0 * l2);
    return acc / static_cast<double>(rq_alphas.size());
  }
};

inline double median_pairwise_distance(const Matrix& x, const Matrix& y) {
  Matrix all(x.rows() + y.rows(), x.cols());
  all << x, y;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(all.rows() * (all.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < all.rows(); ++i)
    for (Eigen::Index j = i + 1; j < all.rows(); ++j) d.push_back((all.row(i) - all.row(j)).norm());
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 1e-12 ? *mid : 1.0;
}

inline ResolvedKernel resolve_kernel(const KernelSpec& spec, const Matrix& x, const Matrix& y) {
  ResolvedKernel k;
  k.kind = spec.kind;
  k.rq_alphas = spec.rq_alphas;
  if (k.rq_alphas.empty()) k.rq_alphas = {1.0};
  k.scale = spec.bandwidth > 0.0 ? spec.bandwidth : median_pairwise_distance(x, y);
  return k;
}

namespace detail {

inline bool lexicographically_less(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a.data()[i] != b.data()[i]) return a.data()[i] < b.data()[i];
  return false;
}

// Mean kernel value over all pairs (a_i, b_j); optionally accumulates
// scale * d/da and scale * d/db.
inline double mean_kernel(const Matrix& a, const Matrix& b, const ResolvedKernel& k, double scale,
                          Matrix* grad_a, Matrix* grad_b) {
  const double norm = 1.0 / static_cast<double>(a.rows() * b.rows());
  const Eigen::Index dim = a.cols();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double* ai = a.data() + i * dim;
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double* bj = b.data() + j * dim;
      double r2 = 0.0;
      for (Eigen::Index c = 0; c < dim; ++c) r2 += (ai[c] - bj[c]) * (ai[c] - bj[c]);
      sum += k.value(r2);
      if (grad_a || grad_b) {
        const double coef = scale * norm * 2.0 * k.derivative(r2);
        double* ga = grad_a ? grad_a->data() + i * dim : nullptr;
        double* gb = grad_b ? grad_b->data() + j * dim : nullptr;
        for (Eigen::Index c = 0; c < dim; ++c) {
          const double g = coef * (ai[c] - bj[c]);
          if (ga) ga[c] += g;
          if (gb) gb[c] -= g;
        }
      }
    }
  }
  return sum * norm;
}

inline double mmd_ordered(const Matrix& x, const Matrix& y, const ResolvedKernel& k, double weight,
                          Matrix* gx, Matrix* gy) {
  // Self terms pass the same accumulator as both arguments, which counts the
  // symmetric contribution twice as required.
  const double kxx = mean_kernel(x, x, k, weight, gx, gx);
  const double kyy = mean_kernel(y, y, k, weight, gy, gy);
  const double kxy = mean_kernel(x, y, k, -2.0 * weight, gx, gy);
  return std::max(0.0, kxx + kyy - 2.0 * kxy);
}

}  // namespace detail

/// Biased (V-statistic) squared MMD between two equal-size sample sets whose
/// rows are samples. When gradient holders are given (pre-sized like x and y),
/// weight * d MMD / dx and weight * d MMD / dy are added into them.
inline double mmd(const Matrix& x, const Matrix& y, const ResolvedKernel& k, double weight = 1.0,
                  Matrix* grad_x = nullptr, Matrix* grad_y = nullptr) {
  if (x.rows() != y.rows()) throw ShapeError("mmd: sample sets must have the same size");
  if (x.rows() < 2) throw ShapeError("mmd: need at least two samples per set");
  if (x.cols() != y.cols()) throw ShapeError("mmd: sample dimensions differ");
  // Canonical argument order makes mmd(x, y) and mmd(y, x) bit-identical.
  if (detail::lexicographically_less(y, x)) return detail::mmd_ordered(y, x, k, weight, grad_y, grad_x);
  return detail::mmd_ordered(x, y, k, weight, grad_x, grad_y);
}

inline double mmd(const Matrix& x, const Matrix& y, const KernelSpec& spec) {
  if (x.rows() != y.rows()) throw ShapeError("mmd: sample sets must have the same size");
  return mmd(x, y, resolve_kernel(spec, x, y));
}

// ==========================================================================
// WAE

struct WaeConfig {
  std::size_t observation_dim = 100;
  std::size_t latent_dim = 8;
  std::vector<std::size_t> hidden{64, 64};
  nn::Activation activation = nn::Activation::tanh;
  KernelSpec kernel;
  double beta1 = 1.0;  // prior-matching weight
};

struct WaeModel {
  nn::MlpParams encoder;
  nn::MlpParams decoder;
  KernelSpec kernel;
  double beta1 = 1.0;

  std::size_t observation_dim() const { return encoder.spec.input_size(); }
  std::size_t latent_dim() const { return encoder.spec.output_size(); }
};

inline WaeModel make_wae(const WaeConfig& c, Rng& rng) {
  WaeModel m;
  m.encoder = nn::init_mlp(nn::make_spec(c.observation_dim, c.hidden, c.latent_dim, c.activation), rng);
  m.decoder = nn::init_mlp(nn::make_spec(c.latent_dim, c.hidden, c.observation_dim, c.activation), rng);
  m.kernel = c.kernel;
  m.beta1 = c.beta1;
  return m;
}

struct WaeGrads {
  nn::MlpParams encoder;
  nn::MlpParams decoder;
};

inline WaeGrads zero_grads(const WaeModel& m) { return {nn::zeros_like(m.encoder), nn::zeros_like(m.decoder)}; }

inline Vector encode(const WaeModel& m, const Vector& s) {
  require_shape(static_cast<std::size_t>(s.size()) == m.observation_dim(), "encode: observation dimension mismatch");
  return nn::mlp_forward(m.encoder, s);
}

inline Matrix encode_batch(const WaeModel& m, const Matrix& states) {
  require_shape(static_cast<std::size_t>(states.cols()) == m.observation_dim(),
                "encode: observation dimension mismatch");
  return nn::forward(m.encoder, states);
}

inline Vector decode(const WaeModel& m, const Vector& z) {
  require_shape(static_cast<std::size_t>(z.size()) == m.latent_dim(), "decode: latent dimension mismatch");
  return nn::mlp_forward(m.decoder, z);
}

inline Matrix sample_prior(std::size_t n, std::size_t latent_dim, Rng& rng) {
  return gaussian_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(latent_dim), rng);
}

/// Reconstruction + prior-matching terms computed from already-encoded
/// latents. Adds weight * dL/dZ into `grad_z` and decoder gradients into
/// `grad_decoder` when those are non-null.
/// L = mean_i ||s_i - G(z_i)||^2 + beta1 * MMD(Z, prior).
inline double wae_terms(const WaeModel& m, const Matrix& states, const Matrix& latents, const Matrix& prior,
                        const ResolvedKernel& kernel, double weight, Matrix* grad_z,
                        nn::MlpParams* grad_decoder) {
  require_shape(prior.rows() == latents.rows(), "wae loss: prior sample must match batch size");
  const double n = static_cast<double>(states.rows());
  nn::Tape tape;
  const Matrix recon = nn::forward(m.decoder, latents, grad_decoder ? &tape : nullptr);
  const Matrix residual = recon - states;
  const double reconstruction = residual.rowwise().squaredNorm().sum() / n;
  double loss = reconstruction;
  if (grad_decoder) {
    const Matrix upstream = (2.0 * weight / n) * residual;
    const Matrix dz = nn::backward(m.decoder, tape, upstream, *grad_decoder);
    if (grad_z) *grad_z += dz;
  }
  if (m.beta1 != 0.0) {
    loss += m.beta1 * mmd(latents, prior, kernel, weight * m.beta1, grad_z, nullptr);
  }
  return loss;
}

/// Fixed stochastic inputs of one WAE loss evaluation.
struct WaeLossInputs {
  Matrix prior;
  ResolvedKernel kernel;
};

inline WaeLossInputs draw_wae_inputs(const WaeModel& m, const Matrix& states, Rng& rng) {
  WaeLossInputs in;
  in.prior = sample_prior(static_cast<std::size_t>(states.rows()), m.latent_dim(), rng);
  in.kernel = resolve_kernel(m.kernel, encode_batch(m, states), in.prior);
  return in;
}

/// Mean squared reconstruction error plus beta1 * MMD(phi(states), prior).
/// Gradients for encoder and decoder are added into `grads` when non-null.
inline double wae_loss(const WaeModel& m, const Matrix& states, const WaeLossInputs& in,
                       WaeGrads* grads = nullptr) {
  if (states.rows() < 2) throw ShapeError("wae_loss: batch needs at least two states");
  nn::Tape tape;
  const Matrix z = nn::forward(m.encoder, states, grads ? &tape : nullptr);
  if (!grads) return wae_terms(m, states, z, in.prior, in.kernel, 1.0, nullptr, nullptr);
  Matrix gz = Matrix::Zero(z.rows(), z.cols());
  const double loss = wae_terms(m, states, z, in.prior, in.kernel, 1.0, &gz, &grads->decoder);
  nn::backward(m.encoder, tape, gz, grads->encoder);
  return loss;
}

inline double wae_loss(const WaeModel& m, const Matrix& states, Rng& rng) {
  return wae_loss(m, states, draw_wae_inputs(m, states, rng));
}

inline double reconstruction_error(const WaeModel& m, const Matrix& states) {
  const Matrix recon = nn::forward(m.decoder, encode_batch(m, states));
  return (recon - states).rowwise().squaredNorm().mean();
}

/// MMD between encoded policy states and encoded expert states. Returns 0
/// when either pool is empty. Encoder gradients are added into `grads`.
inline double adversarial_reg(const WaeModel& m, const Matrix& policy_states, const Matrix& expert_states,
                              const ResolvedKernel& kernel, WaeGrads* grads = nullptr) {
  if (policy_states.rows() == 0 || expert_states.rows() == 0) return 0.0;
  nn::Tape tp, te;
  const Matrix zp = nn::forward(m.encoder, policy_states, grads ? &tp : nullptr);
  const Matrix ze = nn::forward(m.encoder, expert_states, grads ? &te : nullptr);
  if (!grads) return mmd(zp, ze, kernel);
  Matrix gp = Matrix::Zero(zp.rows(), zp.cols());
  Matrix ge = Matrix::Zero(ze.rows(), ze.cols());
  const double v = mmd(zp, ze, kernel, 1.0, &gp, &ge);
  nn::backward(m.encoder, tp, gp, grads->encoder);
  nn::backward(m.encoder, te, ge, grads->encoder);
  return v;
}

inline double adversarial_reg(const WaeModel& m, const Matrix& policy_states, const Matrix& expert_states) {
  if (policy_states.rows() == 0 || expert_states.rows() == 0) return 0.0;
  const Matrix zp = encode_batch(m, policy_states);
  const Matrix ze = encode_batch(m, expert_states);
  return mmd(zp, ze, resolve_kernel(m.kernel, zp, ze));
}

}  // namespace aril::repr

#pragma once

// Small dense multilayer perceptrons with explicit layer-wise backprop,
// Adam, and a central-difference gradient checker.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "aril/errors.hpp"

namespace aril {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

namespace nn {

/// Clamp applied to every sigmoid output so that log(D) and log(1 - D) stay finite.
inline constexpr double kSigmoidClip = 1e-7;

enum class Activation { identity, tanh, relu, sigmoid };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

struct MlpSpec {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., output
  Activation hidden = Activation::tanh;
  Activation output = Activation::identity;

  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }

  void validate() const {
    if (layer_sizes.size() < 2) throw std::invalid_argument("MlpSpec needs at least 2 layer sizes");
    for (auto s : layer_sizes)
      if (s == 0) throw std::invalid_argument("MlpSpec layer sizes must be >= 1");
    if (hidden != Activation::tanh && hidden != Activation::relu && hidden != Activation::identity)
      throw std::invalid_argument("hidden activation must be tanh, relu or identity");
    if (output != Activation::identity && output != Activation::sigmoid)
      throw std::invalid_argument("output activation must be identity or sigmoid");
  }

  bool operator==(const MlpSpec&) const = default;
};

/// Builds a spec from input size, hidden widths and output size.
inline MlpSpec make_spec(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                         Activation hidden_act = Activation::tanh,
                         Activation output_act = Activation::identity) {
  MlpSpec spec;
  spec.layer_sizes.push_back(in);
  spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
  spec.layer_sizes.push_back(out);
  spec.hidden = hidden_act;
  spec.output = output_act;
  spec.validate();
  return spec;
}

struct Dense {
  Matrix weight;  // out x in
  Vector bias;    // out
};

struct MlpParams {
  MlpSpec spec;
  std::vector<Dense> layers;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  /// Visits every scalar parameter in a fixed order (layer, weights row-major, then bias).
  template <typename F>
  void for_each_scalar(F&& f) {
    for (auto& l : layers) {
      for (Eigen::Index i = 0; i < l.weight.size(); ++i) f(l.weight.data()[i]);
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) f(l.bias.data()[i]);
    }
  }
  template <typename F>
  void for_each_scalar(F&& f) const {
    for (const auto& l : layers) {
      for (Eigen::Index i = 0; i < l.weight.size(); ++i) f(l.weight.data()[i]);
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) f(l.bias.data()[i]);
    }
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }
};

inline MlpParams zeros_like(const MlpParams& p) {
  MlpParams z;
  z.spec = p.spec;
  z.layers.reserve(p.layers.size());
  for (const auto& l : p.layers)
    z.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  return z;
}

inline MlpParams zero_mlp(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  p.spec = spec;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto in = static_cast<Eigen::Index>(spec.layer_sizes[l]);
    const auto out = static_cast<Eigen::Index>(spec.layer_sizes[l + 1]);
    p.layers.push_back({Matrix::Zero(out, in), Vector::Zero(out)});
  }
  return p;
}

// Glorot-uniform weights, zero biases.
inline MlpParams init_mlp(const MlpSpec& spec, Rng& rng) {
  MlpParams p = zero_mlp(spec);
  for (auto& l : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = u(rng);
  }
  return p;
}

inline void scale_into(MlpParams& acc, const MlpParams& g, double s) {
  for (std::size_t l = 0; l < acc.layers.size(); ++l) {
    acc.layers[l].weight += s * g.layers[l].weight;
    acc.layers[l].bias += s * g.layers[l].bias;
  }
}

/// Activations recorded during a batched forward pass: activations[0] is the
/// input batch, activations[l + 1] the output of layer l.
struct Tape {
  std::vector<Matrix> activations;
};

namespace detail {

inline void apply_activation(Matrix& m, Activation a) {
  switch (a) {
    case Activation::identity: break;
    case Activation::tanh: m = m.array().tanh().matrix(); break;
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::sigmoid:
      m = m.unaryExpr([](double x) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return std::clamp(s, kSigmoidClip, 1.0 - kSigmoidClip);
      });
      break;
  }
}

// Derivative expressed through the activation output y.
inline Matrix activation_derivative(const Matrix& y, Activation a) {
  switch (a) {
    case Activation::identity: return Matrix::Ones(y.rows(), y.cols());
    case Activation::tanh: return (1.0 - y.array().square()).matrix();
    case Activation::relu: return y.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::sigmoid:
      return y.unaryExpr([](double s) {
        if (s <= kSigmoidClip || s >= 1.0 - kSigmoidClip) return 0.0;
        return s * (1.0 - s);
      });
  }
  return Matrix::Ones(y.rows(), y.cols());
}

}  // namespace detail

/// Batched forward pass; rows of `x` are samples.
inline Matrix forward(const MlpParams& p, const Matrix& x, Tape* tape = nullptr) {
  require_shape(static_cast<std::size_t>(x.cols()) == p.spec.input_size(),
                "mlp input has " + std::to_string(x.cols()) + " columns, expected " +
                    std::to_string(p.spec.input_size()));
  if (tape) {
    tape->activations.clear();
    tape->activations.reserve(p.layers.size() + 1);
    tape->activations.push_back(x);
  }
  Matrix h = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    Matrix next = h * layer.weight.transpose();
    next.rowwise() += layer.bias.transpose();
    const bool last = l + 1 == p.layers.size();
    detail::apply_activation(next, last ? p.spec.output : p.spec.hidden);
    h = std::move(next);
    if (tape) tape->activations.push_back(h);
  }
  return h;
}

inline Vector mlp_forward(const MlpParams& p, const Vector& x) {
  require_shape(static_cast<std::size_t>(x.size()) == p.spec.input_size(),
                "mlp input has length " + std::to_string(x.size()) + ", expected " +
                    std::to_string(p.spec.input_size()));
  Matrix row = x.transpose();
  return forward(p, row).row(0).transpose();
}

/// Backpropagates `upstream` (dLoss/dOutput, batch x out) through the recorded
/// pass. Parameter gradients are ADDED into `grads`; returns dLoss/dInput.
inline Matrix backward(const MlpParams& p, const Tape& tape, const Matrix& upstream, MlpParams& grads) {
  require_shape(tape.activations.size() == p.layers.size() + 1, "tape does not match network depth");
  require_shape(upstream.rows() == tape.activations.back().rows() &&
                    upstream.cols() == tape.activations.back().cols(),
                "upstream gradient shape does not match network output");
  require_shape(grads.layers.size() == p.layers.size(), "gradient holder does not match network");
  Matrix delta = upstream;
  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const bool last = li + 1 == p.layers.size();
    const Matrix& out = tape.activations[li + 1];
    const Matrix& in = tape.activations[li];
    delta = delta.cwiseProduct(detail::activation_derivative(out, last ? p.spec.output : p.spec.hidden));
    grads.layers[li].weight.noalias() += delta.transpose() * in;
    grads.layers[li].bias += delta.colwise().sum().transpose();
    delta = delta * p.layers[li].weight;
  }
  return delta;
}

// --------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Dense> m;
  std::vector<Dense> v;
  std::uint64_t step = 0;
};

inline AdamState make_adam(const MlpParams& p, AdamConfig config = {}) {
  AdamState s;
  s.config = config;
  const MlpParams z = zeros_like(p);
  s.m = z.layers;
  s.v = z.layers;
  return s;
}

/// One Adam update in place. Throws DivergenceError on a non-finite gradient.
inline void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state) {
  require_shape(grads.layers.size() == params.layers.size() && state.m.size() == params.layers.size(),
                "adam: gradient/state shapes do not match parameters");
  if (!grads.all_finite()) throw DivergenceError("adam: non-finite gradient");
  state.step += 1;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    param.array() -= c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight, grads.layers[l].weight, state.m[l].weight, state.v[l].weight);
    update(params.layers[l].bias, grads.layers[l].bias, state.m[l].bias, state.v[l].bias);
  }
}

// --------------------------------------------------------------------------
// Finite differences

/// A loss over a set of networks. When `grads` is non-null it must be filled
/// with analytic gradients, one entry per network, in the same order.
using LossFn = std::function<double(std::vector<MlpParams>* grads)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_network = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares analytic gradients against central differences for every scalar
/// of every network in `params` (perturbed in place, restored afterwards).
/// Relative error uses the denominator max(|analytic|, |numeric|, 1e-8).
inline GradCheckReport finite_diff_report(const LossFn& loss, const std::vector<MlpParams*>& params,
                                          double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: h must be positive");
  std::vector<MlpParams> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(zeros_like(*p));
  loss(&analytic);
  require_shape(analytic.size() == params.size(), "finite_diff_check: loss returned wrong gradient count");

  GradCheckReport report;
  for (std::size_t n = 0; n < params.size(); ++n) {
    std::vector<double*> scalars;
    params[n]->for_each_scalar([&](double& x) { scalars.push_back(&x); });
    std::vector<double> grads;
    analytic[n].for_each_scalar([&](double g) { grads.push_back(g); });
    for (std::size_t i = 0; i < scalars.size(); ++i) {
      double& x = *scalars[i];
      const double saved = x;
      x = saved + h;
      const double plus = loss(nullptr);
      x = saved - h;
      const double minus = loss(nullptr);
      x = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = grads[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_relative_error || !std::isfinite(rel)) {
        report.max_relative_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
        report.worst_network = n;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

inline double finite_diff_check(const LossFn& loss, const std::vector<MlpParams*>& params, double h) {
  return finite_diff_report(loss, params, h).max_relative_error;
}

}  // namespace nn

// --------------------------------------------------------------------------
// Small helpers shared across modules.

inline Vector one_hot(std::size_t n, std::size_t index) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
  v(static_cast<Eigen::Index>(index)) = 1.0;
  return v;
}

inline Matrix stack_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double mean = 0.0,
                              double stddev = 1.0) {
  std::normal_distribution<double> n(mean, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace aril

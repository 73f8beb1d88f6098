#pragma once

// Dense maps, activations and reverse-mode gradients for the small
// networks used throughout the library. Everything is double precision.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pealloc/common.hpp"

namespace pealloc::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Activation { leaky_relu, softplus, identity };

inline constexpr double kLeakySlope = 0.01;

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// ln(1 + e^x), evaluated without overflow. Floored at the smallest
/// denormal so the result stays strictly positive for very negative x.
inline double softplus(double x) {
  const double v = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  return std::max(v, std::numeric_limits<double>::denorm_min());
}

/// Inverse of softplus for y > 0.
inline double softplus_inverse(double y) {
  if (y > 30.0) return y + std::log1p(-std::exp(-y));
  return std::log(std::expm1(y));
}

inline double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::leaky_relu: return x >= 0.0 ? x : kLeakySlope * x;
    case Activation::softplus: return softplus(x);
    case Activation::identity: return x;
  }
  return x;
}

/// Derivative with respect to the pre-activation value.
inline double activate_derivative(Activation kind, double x) {
  switch (kind) {
    case Activation::leaky_relu: return x >= 0.0 ? 1.0 : kLeakySlope;
    case Activation::softplus: return sigmoid(x);
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

template <typename Derived>
Mat activation(Activation kind, const Eigen::MatrixBase<Derived>& x) {
  return x.unaryExpr([kind](double v) { return activate(kind, v); });
}

inline std::string to_string(Activation kind) {
  switch (kind) {
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::softplus: return "softplus";
    case Activation::identity: return "identity";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "softplus") return Activation::softplus;
  if (s == "identity") return Activation::identity;
  throw InputError("unknown activation '" + s + "'");
}

/// Affine map x -> weight * x + bias.
struct DenseParam {
  Mat weight;
  Vec bias;

  DenseParam() = default;
  DenseParam(Mat w, Vec b) : weight(std::move(w)), bias(std::move(b)) {
    if (weight.rows() != bias.size())
      throw ContractViolation("DenseParam: bias length does not match weight rows");
  }

  std::size_t in_width() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_width() const { return static_cast<std::size_t>(weight.rows()); }

  bool all_finite() const { return weight.allFinite() && bias.allFinite(); }

  static DenseParam zeros(std::size_t out, std::size_t in) {
    return {Mat::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
            Vec::Zero(static_cast<Eigen::Index>(out))};
  }

  /// Entries uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static DenseParam uniform_init(std::size_t out, std::size_t in, Rng& rng) {
    DenseParam p = zeros(out, in);
    const double r = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(in, 1)));
    for (Eigen::Index i = 0; i < p.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < p.weight.cols(); ++j) p.weight(i, j) = uniform(rng, -r, r);
    for (Eigen::Index i = 0; i < p.bias.size(); ++i) p.bias(i) = uniform(rng, -r, r);
    return p;
  }
};

inline Vec dense_forward(const DenseParam& p, const Vec& x) {
  if (static_cast<std::size_t>(x.size()) != p.in_width())
    throw ContractViolation("dense_forward: input length " + std::to_string(x.size()) +
                            " != in-width " + std::to_string(p.in_width()));
  return p.weight * x + p.bias;
}

/// Gradient arrays mirroring a parameter list entry by entry.
using GradientBundle = std::vector<DenseParam>;

inline GradientBundle zeros_like(std::span<const DenseParam> params) {
  GradientBundle g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back(DenseParam::zeros(p.out_width(), p.in_width()));
  return g;
}

inline void check_same_shape(std::span<const DenseParam> a, std::span<const DenseParam> b) {
  if (a.size() != b.size()) throw ContractViolation("gradient bundle length mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].weight.rows() != b[i].weight.rows() || a[i].weight.cols() != b[i].weight.cols() ||
        a[i].bias.size() != b[i].bias.size())
      throw ContractViolation("gradient bundle shape mismatch at entry " + std::to_string(i));
  }
}

/// into += scale * g
inline void accumulate(GradientBundle& into, std::span<const DenseParam> g, double scale = 1.0) {
  check_same_shape(into, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    into[i].weight += scale * g[i].weight;
    into[i].bias += scale * g[i].bias;
  }
}

inline bool all_finite(std::span<const DenseParam> g) {
  for (const auto& p : g)
    if (!p.all_finite()) return false;
  return true;
}

/// delta_t = base / (1 + decay * t)
struct LrSchedule {
  double base = 0.01;
  double decay = 0.01;

  double rate(std::size_t t) const { return base / (1.0 + decay * static_cast<double>(t)); }
};

enum class Direction { descend, ascend };

/// params <- params -/+ delta_t * grads
inline void sgd_step(std::span<DenseParam> params, std::span<const DenseParam> grads,
                     const LrSchedule& schedule, std::size_t t, Direction direction) {
  check_same_shape(params, grads);
  const double step = schedule.rate(t) * (direction == Direction::descend ? -1.0 : 1.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].weight += step * grads[i].weight;
    params[i].bias += step * grads[i].bias;
  }
}

/// Fully connected network. Hidden layers share one activation; the last
/// layer has its own (softplus for positive outputs, identity for logits).
class Mlp {
 public:
  /// Recorded forward pass over a batch (columns are samples). A trace
  /// may be consumed by exactly one backward call.
  struct Trace {
    std::vector<Mat> inputs;       // input of each layer
    std::vector<Mat> pre;          // pre-activation of each layer
    Mat output;
    bool consumed = false;
  };

  struct Gradients {
    Mat input;
    GradientBundle params;
  };

  Mlp() = default;

  Mlp(const std::vector<std::size_t>& widths, Activation hidden, Activation output, Rng& rng)
      : hidden_(hidden), output_(output) {
    if (widths.size() < 2) throw ContractViolation("Mlp needs at least input and output widths");
    for (std::size_t l = 1; l < widths.size(); ++l)
      layers_.push_back(DenseParam::uniform_init(widths[l], widths[l - 1], rng));
  }

  Mlp(std::vector<DenseParam> layers, Activation hidden, Activation output)
      : layers_(std::move(layers)), hidden_(hidden), output_(output) {
    for (std::size_t l = 1; l < layers_.size(); ++l)
      if (layers_[l].in_width() != layers_[l - 1].out_width())
        throw ContractViolation("Mlp: layer widths do not chain");
  }

  std::size_t in_width() const { return layers_.empty() ? 0 : layers_.front().in_width(); }
  std::size_t out_width() const { return layers_.empty() ? 0 : layers_.back().out_width(); }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }

  std::vector<DenseParam>& params() { return layers_; }
  const std::vector<DenseParam>& params() const { return layers_; }

  Activation activation_of(std::size_t layer) const {
    return layer + 1 == layers_.size() ? output_ : hidden_;
  }

  Mat forward(const Mat& x) const {
    check_input(x);
    Mat h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Mat z = layers_[l].weight * h;
      z.colwise() += layers_[l].bias;
      h = activation(activation_of(l), z);
    }
    return h;
  }

  Vec forward(const Vec& x) const { return forward(Mat(x)).col(0); }

  Trace forward_trace(const Mat& x) const {
    check_input(x);
    Trace tr;
    Mat h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      tr.inputs.push_back(h);
      Mat z = layers_[l].weight * h;
      z.colwise() += layers_[l].bias;
      h = activation(activation_of(l), z);
      tr.pre.push_back(std::move(z));
    }
    tr.output = h;
    return tr;
  }

  /// Gradient of sum_columns <upstream, output> w.r.t. input and parameters.
  Gradients backward(Trace& tr, const Mat& upstream) const {
    if (tr.consumed) throw ContractViolation("Mlp::backward: trace already consumed");
    if (tr.pre.size() != layers_.size() || upstream.rows() != tr.output.rows() ||
        upstream.cols() != tr.output.cols())
      throw ContractViolation("Mlp::backward: upstream shape does not match trace");
    tr.consumed = true;
    Gradients g;
    g.params.resize(layers_.size());
    Mat delta = upstream;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const Activation act = activation_of(l);
      delta.array() *=
          tr.pre[l].unaryExpr([act](double v) { return activate_derivative(act, v); }).array();
      g.params[l].weight = delta * tr.inputs[l].transpose();
      g.params[l].bias = delta.rowwise().sum();
      delta = layers_[l].weight.transpose() * delta;
    }
    g.input = std::move(delta);
    return g;
  }

 private:
  void check_input(const Mat& x) const {
    if (static_cast<std::size_t>(x.rows()) != in_width())
      throw ContractViolation("Mlp: input width " + std::to_string(x.rows()) + " != " +
                              std::to_string(in_width()));
  }

  std::vector<DenseParam> layers_;
  Activation hidden_ = Activation::leaky_relu;
  Activation output_ = Activation::identity;
};

}  // namespace pealloc::nn

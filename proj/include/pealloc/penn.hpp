#pragma once

// Permutation-equivariant networks with weight sharing across objects.
//
// A stack of K per-object vectors is held as a (width x K) matrix whose
// column k is object k. One layer computes
//
//   h_k' = act(U h_k + V agg_{j != k}(h_j) + c)
//
// where agg is sum/K (mean), sum, or elementwise max over the other
// objects. With K = 1 the aggregation term is the zero vector.

#include <optional>
#include <string>
#include <vector>

#include "pealloc/nn_core.hpp"

namespace pealloc::penn {

using nn::Activation;
using nn::DenseParam;
using nn::Mat;
using nn::Vec;

enum class Aggregator { mean, sum, max };

inline std::string to_string(Aggregator a) {
  switch (a) {
    case Aggregator::mean: return "mean";
    case Aggregator::sum: return "sum";
    case Aggregator::max: return "max";
  }
  return "?";
}

inline Aggregator aggregator_from_string(const std::string& s) {
  if (s == "mean") return Aggregator::mean;
  if (s == "sum") return Aggregator::sum;
  if (s == "max") return Aggregator::max;
  throw InputError("unknown aggregator '" + s + "'");
}

/// Output heads. softmax: P_max * softmax(raw). softplus: softplus(raw).
/// softplus_scaled: softplus(raw) * scale_k with a caller-supplied scale.
enum class Head { softmax, softplus, softplus_scaled };

inline std::string to_string(Head h) {
  switch (h) {
    case Head::softmax: return "softmax";
    case Head::softplus: return "softplus";
    case Head::softplus_scaled: return "softplus_scaled";
  }
  return "?";
}

inline Head head_from_string(const std::string& s) {
  if (s == "softmax") return Head::softmax;
  if (s == "softplus") return Head::softplus;
  if (s == "softplus_scaled") return Head::softplus_scaled;
  throw InputError("unknown head '" + s + "'");
}

struct EmptyInputError : ContractViolation {
  using ContractViolation::ContractViolation;
};

/// Cross-object aggregate of every column. For max, `argmax` (if non-null)
/// receives the winning column index per (row, k); -1 when K = 1.
inline Mat aggregate(const Mat& h, Aggregator agg, Eigen::MatrixXi* argmax = nullptr) {
  const Eigen::Index rows = h.rows();
  const Eigen::Index k_count = h.cols();
  Mat out = Mat::Zero(rows, k_count);
  if (k_count <= 1) {
    if (argmax) *argmax = Eigen::MatrixXi::Constant(rows, k_count, -1);
    return out;
  }
  switch (agg) {
    case Aggregator::mean:
    case Aggregator::sum: {
      const double norm = agg == Aggregator::mean ? 1.0 / static_cast<double>(k_count) : 1.0;
      const Vec total = h.rowwise().sum();
      for (Eigen::Index k = 0; k < k_count; ++k) out.col(k) = (total - h.col(k)) * norm;
      break;
    }
    case Aggregator::max: {
      if (argmax) argmax->resize(rows, k_count);
      for (Eigen::Index r = 0; r < rows; ++r) {
        // top two entries give max over j != k for every k
        Eigen::Index best = 0;
        Eigen::Index second = -1;
        for (Eigen::Index j = 1; j < k_count; ++j) {
          if (h(r, j) > h(r, best)) {
            second = best;
            best = j;
          } else if (second < 0 || h(r, j) > h(r, second)) {
            second = j;
          }
        }
        for (Eigen::Index k = 0; k < k_count; ++k) {
          const Eigen::Index win = k == best ? second : best;
          out(r, k) = h(r, win);
          if (argmax) (*argmax)(r, k) = static_cast<int>(win);
        }
      }
      break;
    }
  }
  return out;
}

/// Adjoint of aggregate(): maps d(out) to d(h).
inline Mat aggregate_backward(const Mat& d_out, Aggregator agg, const Eigen::MatrixXi& argmax) {
  const Eigen::Index rows = d_out.rows();
  const Eigen::Index k_count = d_out.cols();
  Mat dh = Mat::Zero(rows, k_count);
  if (k_count <= 1) return dh;
  switch (agg) {
    case Aggregator::mean:
    case Aggregator::sum: {
      const double norm = agg == Aggregator::mean ? 1.0 / static_cast<double>(k_count) : 1.0;
      const Vec total = d_out.rowwise().sum();
      for (Eigen::Index j = 0; j < k_count; ++j) dh.col(j) = (total - d_out.col(j)) * norm;
      break;
    }
    case Aggregator::max:
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index k = 0; k < k_count; ++k) dh(r, argmax(r, k)) += d_out(r, k);
      break;
  }
  return dh;
}

/// One weight-shared layer. Parameters are stored as two dense maps so the
/// generic SGD applies: self_map = (U, c) and cross_map = (V, 0). The
/// cross map's bias is never used and its gradient is always zero.
struct PennLayer {
  DenseParam self_map;
  DenseParam cross_map;
  Activation act = Activation::identity;
  Aggregator agg = Aggregator::mean;

  const Mat& U() const { return self_map.weight; }
  const Mat& V() const { return cross_map.weight; }
  const Vec& c() const { return self_map.bias; }
  std::size_t in_width() const { return self_map.in_width(); }
  std::size_t out_width() const { return self_map.out_width(); }

  static PennLayer make(Mat u, Mat v, Vec c, Activation act, Aggregator agg) {
    if (u.rows() != v.rows() || u.cols() != v.cols())
      throw ContractViolation("PennLayer: U and V must have the same shape");
    const Eigen::Index rows = u.rows();
    return PennLayer{DenseParam(std::move(u), std::move(c)), DenseParam(std::move(v), Vec::Zero(rows)),
                     act, agg};
  }

  static PennLayer random(std::size_t out, std::size_t in, Activation act, Aggregator agg, Rng& rng) {
    PennLayer layer{DenseParam::uniform_init(out, in, rng), DenseParam::uniform_init(out, in, rng), act,
                    agg};
    layer.cross_map.bias.setZero();
    return layer;
  }
};

struct LayerTrace {
  Mat input;
  Mat agg;
  Mat pre;
  Eigen::MatrixXi argmax;
};

inline Mat penn_layer_forward(const PennLayer& layer, const Mat& h, LayerTrace* trace = nullptr) {
  if (h.cols() == 0) throw EmptyInputError("penn_layer_forward: K = 0");
  if (static_cast<std::size_t>(h.rows()) != layer.in_width())
    throw ContractViolation("penn_layer_forward: per-object width " + std::to_string(h.rows()) +
                            " != layer input width " + std::to_string(layer.in_width()));
  Eigen::MatrixXi argmax;
  Mat a = aggregate(h, layer.agg, layer.agg == Aggregator::max ? &argmax : nullptr);
  Mat z = layer.U() * h + layer.V() * a;
  z.colwise() += layer.c();
  Mat out = nn::activation(layer.act, z);
  if (trace) *trace = LayerTrace{h, std::move(a), std::move(z), std::move(argmax)};
  return out;
}

/// P_max * softmax(raw), stabilized by subtracting max(raw).
inline Vec softmax_power_head(const Vec& raw, double p_max) {
  if (raw.size() == 0) throw EmptyInputError("softmax_power_head: K = 0");
  const Vec e = (raw.array() - raw.maxCoeff()).exp();
  return p_max * e / e.sum();
}

/// Stack of PennLayers followed by an output head. The last layer emits the
/// raw per-object scalar (width 1, identity activation by convention).
class PennModel {
 public:
  struct Trace {
    std::vector<LayerTrace> layers;
    Vec raw;
    Vec output;
    Vec scale;
    bool consumed = false;
  };

  struct Gradients {
    Mat input;                ///< d/d features, same shape as the input stack
    nn::GradientBundle params;  ///< mirrors params()
  };

  PennModel() = default;

  PennModel(std::vector<PennLayer> layers, Head head, double p_max = 1.0)
      : head_(head), p_max_(p_max) {
    if (layers.empty()) throw ContractViolation("PennModel needs at least one layer");
    if (layers.back().out_width() != 1) throw ContractViolation("PennModel: last layer must have width 1");
    for (std::size_t l = 1; l < layers.size(); ++l)
      if (layers[l].in_width() != layers[l - 1].out_width())
        throw ContractViolation("PennModel: layer widths do not chain");
    for (auto& layer : layers) {
      params_.push_back(std::move(layer.self_map));
      params_.push_back(std::move(layer.cross_map));
      acts_.push_back(layer.act);
      aggs_.push_back(layer.agg);
    }
  }

  /// widths = {I_0, I_1, ..., 1}; hidden layers use `hidden`, the last layer identity.
  static PennModel random(const std::vector<std::size_t>& widths, Activation hidden, Aggregator agg,
                          Head head, double p_max, Rng& rng) {
    if (widths.size() < 2) throw ContractViolation("PennModel::random needs >= 2 widths");
    std::vector<PennLayer> layers;
    for (std::size_t l = 1; l < widths.size(); ++l) {
      const Activation act = l + 1 == widths.size() ? Activation::identity : hidden;
      layers.push_back(PennLayer::random(widths[l], widths[l - 1], act, agg, rng));
    }
    return PennModel(std::move(layers), head, p_max);
  }

  std::size_t num_layers() const { return acts_.size(); }
  std::size_t in_width() const { return params_.front().in_width(); }
  Head head() const { return head_; }
  double p_max() const { return p_max_; }

  PennLayer layer(std::size_t l) const { return PennLayer{params_[2 * l], params_[2 * l + 1], acts_[l], aggs_[l]}; }
  std::vector<PennLayer> layers() const {
    std::vector<PennLayer> out;
    for (std::size_t l = 0; l < num_layers(); ++l) out.push_back(layer(l));
    return out;
  }

  std::vector<DenseParam>& params() { return params_; }
  const std::vector<DenseParam>& params() const { return params_; }

  /// Replaces every layer's aggregator; shares all parameters.
  PennModel with_aggregator(Aggregator agg) const {
    PennModel m = *this;
    for (auto& a : m.aggs_) a = agg;
    return m;
  }

  /// Raw last-layer output for a (width x K) feature stack.
  Vec raw(const Mat& x, std::vector<LayerTrace>* traces = nullptr) const {
    Mat h = x;
    if (traces) traces->resize(num_layers());
    for (std::size_t l = 0; l < num_layers(); ++l)
      h = penn_layer_forward(layer(l), h, traces ? &(*traces)[l] : nullptr);
    return h.row(0).transpose();
  }

  Vec forward(const Mat& x, const Vec* scale = nullptr) const { return apply_head(raw(x), scale); }

  Trace forward_trace(const Mat& x, const Vec* scale = nullptr) const {
    Trace tr;
    tr.raw = raw(x, &tr.layers);
    tr.output = apply_head(tr.raw, scale);
    if (scale) tr.scale = *scale;
    return tr;
  }

  /// Gradient of <upstream, output>. The scale of softplus_scaled is a
  /// constant here; its contribution enters as a multiplicative factor.
  Gradients backward(Trace& tr, const Vec& upstream) const {
    if (tr.consumed) throw ContractViolation("PennModel::backward: trace already consumed");
    if (upstream.size() != tr.output.size())
      throw ContractViolation("PennModel::backward: upstream length mismatch");
    tr.consumed = true;
    Vec d_raw = head_backward(tr, upstream);
    Gradients g;
    g.params.resize(params_.size());
    Mat delta = d_raw.transpose();
    for (std::size_t l = num_layers(); l-- > 0;) {
      const LayerTrace& lt = tr.layers[l];
      const Activation act = acts_[l];
      delta.array() *= lt.pre.unaryExpr([act](double v) { return nn::activate_derivative(act, v); }).array();
      const Mat& u = params_[2 * l].weight;
      const Mat& v = params_[2 * l + 1].weight;
      g.params[2 * l] = DenseParam(delta * lt.input.transpose(), delta.rowwise().sum());
      g.params[2 * l + 1] = DenseParam(delta * lt.agg.transpose(), Vec::Zero(v.rows()));
      Mat d_agg = v.transpose() * delta;
      delta = u.transpose() * delta + aggregate_backward(d_agg, aggs_[l], lt.argmax);
    }
    g.input = std::move(delta);
    return g;
  }

 private:
  Vec apply_head(const Vec& raw, const Vec* scale) const {
    switch (head_) {
      case Head::softmax:
        if (scale) throw ContractViolation("softmax head takes no scale");
        return softmax_power_head(raw, p_max_);
      case Head::softplus:
        if (scale) throw ContractViolation("softplus head takes no scale");
        return raw.unaryExpr([](double v) { return nn::softplus(v); });
      case Head::softplus_scaled: {
        if (!scale) throw ContractViolation("softplus_scaled head requires a scale vector");
        if (scale->size() != raw.size())
          throw ContractViolation("scale length " + std::to_string(scale->size()) + " != K " +
                                  std::to_string(raw.size()));
        if (!((scale->array() > 0.0).all() && scale->allFinite()))
          throw ContractViolation("scale entries must be finite and positive");
        return raw.unaryExpr([](double v) { return nn::softplus(v); }).cwiseProduct(*scale);
      }
    }
    return raw;
  }

  Vec head_backward(const Trace& tr, const Vec& up) const {
    switch (head_) {
      case Head::softmax: {
        // y = P s, dy_k/draw_j = P s_k (delta_kj - s_j)
        const Vec s = tr.output / p_max_;
        const double inner = s.dot(up);
        return p_max_ * s.cwiseProduct((up.array() - inner).matrix());
      }
      case Head::softplus:
        return up.cwiseProduct(tr.raw.unaryExpr([](double v) { return nn::sigmoid(v); }));
      case Head::softplus_scaled:
        return up.cwiseProduct(tr.raw.unaryExpr([](double v) { return nn::sigmoid(v); }))
            .cwiseProduct(tr.scale);
    }
    return up;
  }

  std::vector<DenseParam> params_;
  std::vector<Activation> acts_;
  std::vector<Aggregator> aggs_;
  Head head_ = Head::softplus;
  double p_max_ = 1.0;
};

/// Row-vector feature stack from K scalar features.
inline Mat as_stack(const Vec& x) { return x.transpose(); }

/// Evaluates a width-1-input model on K scalar features; `scale` is
/// required exactly when the head is softplus_scaled.
inline Vec forward_policy(const PennModel& model, const Vec& x,
                          const std::optional<Vec>& scale = std::nullopt) {
  if (model.in_width() != 1) throw ContractViolation("forward_policy expects scalar features");
  return model.forward(as_stack(x), scale ? &*scale : nullptr);
}

}  // namespace pealloc::penn

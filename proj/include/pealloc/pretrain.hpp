#pragma once

// The bandwidth scaling function B^v(alpha, K): the per-user bandwidth that
// meets the QoS target under equal power P_max/K. Labels come from
// bisection on C^E(B) = S^E over a fixed common-random-number fading set;
// a fully connected network is then fitted to the labels and used, frozen,
// to scale the bandwidth PENN.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <sstream>
#include <vector>

#include "pealloc/common.hpp"
#include "pealloc/nn_core.hpp"
#include "pealloc/urllc.hpp"

namespace pealloc::pretrain {

using nn::Mat;
using nn::Vec;

struct LabelOptions {
  std::size_t crn_draws = 2000;
  std::uint64_t crn_seed = 0x5eed;
  double tol_fraction = 1e-3;  ///< |C^E - S^E| <= tol_fraction * S^E
  double start_hz = 1e4;
  int growth_cap = 60;
  int bisection_cap = 200;
};

struct BvSample {
  double alpha = 0.0;
  std::size_t k = 0;
  double label_hz = 0.0;
};

/// Bisection labeller holding the common fading set.
class BvLabeler {
 public:
  BvLabeler(const urllc::UrllcConfig& cfg, LabelOptions opt = {})
      : cfg_(cfg),
        opt_(opt),
        q_(urllc::qos_params(cfg.eps_train, cfg)),
        draws_(urllc::fading_draws(urllc::FadingSpec::rayleigh(cfg.n_antennas), opt.crn_draws, opt.crn_seed)) {}

  const urllc::QosParams& qos() const { return q_; }
  const std::vector<double>& draws() const { return draws_; }
  const urllc::UrllcConfig& config() const { return cfg_; }
  double tolerance() const { return opt_.tol_fraction * q_.s_e; }

  /// C^E(alpha, P_max/K, B) - S^E over the common draws.
  double residual(double alpha, std::size_t k, double bandwidth_hz) const {
    const double p = cfg_.p_max_w() / static_cast<double>(k);
    return urllc::effective_capacity(alpha, p, bandwidth_hz, q_, draws_, cfg_) - q_.s_e;
  }

  double label(double alpha, std::size_t k) const {
    if (!(alpha > 0.0) || k < 1) throw DomainError("bv_label: need alpha > 0 and K >= 1");
    const double tol = tolerance();
    double lo = 0.0;
    double hi = opt_.start_hz;
    int grow = 0;
    while (residual(alpha, k, hi) < 0.0) {
      lo = hi;
      hi *= 2.0;
      if (++grow > opt_.growth_cap) {
        std::ostringstream os;
        os << "bv_label: no bandwidth meets the QoS target for alpha=" << alpha << " K=" << k;
        throw InfeasibleError(os.str());
      }
    }
    for (int it = 0; it < opt_.bisection_cap; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double r = residual(alpha, k, mid);
      if (std::abs(r) <= tol) return mid;
      if (r < 0.0)
        lo = mid;
      else
        hi = mid;
    }
    throw InfeasibleError("bv_label: bisection cap reached");
  }

 private:
  urllc::UrllcConfig cfg_;
  LabelOptions opt_;
  urllc::QosParams q_;
  std::vector<double> draws_;
};

/// Labels for random (alpha, K): distances uniform in the cell, K uniform on [1, k_max].
inline std::vector<BvSample> generate_labels(const BvLabeler& labeler, std::size_t n, std::size_t k_max,
                                             std::uint64_t seed) {
  std::vector<BvSample> out(n);
  {
    Rng rng = make_rng(seed, 0xb1ab);
    const auto& cfg = labeler.config();
    for (auto& s : out) {
      s.alpha = urllc::large_scale_gain(uniform(rng, cfg.d_min_m, cfg.cell_radius_m), cfg);
      s.k = 1 + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k_max));
      s.k = std::min(s.k, k_max);
    }
  }
  parallel_for(n, [&](std::size_t i) { out[i].label_hz = labeler.label(out[i].alpha, out[i].k); });
  return out;
}

/// Fully connected B^v network: inputs (ln alpha + 30, ln K / ln K_max),
/// softplus output in units of `unit_hz`. The label varies with ln(P_max/K),
/// so a log input resolves small K much better than K/K_max.
class BvNet {
 public:
  BvNet() = default;
  BvNet(nn::Mlp mlp, std::size_t k_max, double unit_hz) : mlp_(std::move(mlp)), k_max_(k_max), unit_hz_(unit_hz) {}

  static BvNet random(std::size_t k_max, double unit_hz, Rng& rng,
                      const std::vector<std::size_t>& hidden = {200, 100, 100, 50}) {
    std::vector<std::size_t> widths{2};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(1);
    return BvNet(nn::Mlp(widths, nn::Activation::leaky_relu, nn::Activation::softplus, rng), k_max, unit_hz);
  }

  std::size_t k_max() const { return k_max_; }
  double unit_hz() const { return unit_hz_; }
  nn::Mlp& mlp() { return mlp_; }
  const nn::Mlp& mlp() const { return mlp_; }

  static double alpha_feature(double alpha) { return std::log(alpha) + 30.0; }
  double k_feature(std::size_t k) const {
    return k_max_ > 1 ? std::log(static_cast<double>(k)) / std::log(static_cast<double>(k_max_)) : 0.0;
  }

  Vec features(double alpha, std::size_t k) const {
    Vec x(2);
    x << alpha_feature(alpha), k_feature(k);
    return x;
  }

  Mat features(std::span<const BvSample> batch) const {
    Mat x(2, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = features(batch[i].alpha, batch[i].k);
    return x;
  }

  /// Prediction in network units.
  double predict(double alpha, std::size_t k) const { return mlp_.forward(features(alpha, k))(0); }
  double predict_hz(double alpha, std::size_t k) const { return predict(alpha, k) * unit_hz_; }

  /// Per-user scale for a K-user sample.
  Vec predict_units(const Vec& alpha) const {
    const std::size_t k = static_cast<std::size_t>(alpha.size());
    Mat x(2, alpha.size());
    for (Eigen::Index i = 0; i < alpha.size(); ++i) x.col(i) = features(alpha(i), k);
    return mlp_.forward(x).row(0).transpose();
  }

 private:
  nn::Mlp mlp_;
  std::size_t k_max_ = 50;
  double unit_hz_ = 1e5;
};

struct PretrainOptions {
  std::size_t epochs = 2500;
  std::size_t batch = 100;
  nn::LrSchedule lr{0.01, 0.001};
  std::uint64_t seed = 7;
  double validation_fraction = 0.1;
};

struct PretrainResult {
  BvNet net;
  double validation_mse = 0.0;    ///< in network units squared
  double label_variance = 0.0;    ///< validation labels, network units squared
  double within_10pct = 0.0;      ///< fraction of validation points with rel. error <= 10%
  std::vector<double> epoch_loss;  ///< mean training MSE per epoch
  std::size_t steps = 0;
};

inline double relative_error(const BvNet& net, const BvSample& s) {
  return std::abs(net.predict_hz(s.alpha, s.k) - s.label_hz) / s.label_hz;
}

/// Supervised fit of (B_hat - label)^2 with minibatch SGD; the last
/// `validation_fraction` of the (seed-shuffled) data is held out.
inline PretrainResult pretrain_bv(std::vector<BvSample> data, BvNet net, const PretrainOptions& opt) {
  if (data.empty()) throw ContractViolation("pretrain_bv: empty dataset");
  Rng rng = make_rng(opt.seed, 0x9e7a);
  std::shuffle(data.begin(), data.end(), rng);
  std::size_t n_val = static_cast<std::size_t>(std::floor(opt.validation_fraction * static_cast<double>(data.size())));
  if (data.size() > 1) n_val = std::clamp<std::size_t>(n_val, 1, data.size() - 1);
  else n_val = 0;
  const std::span<const BvSample> train(data.data(), data.size() - n_val);
  const std::span<const BvSample> val(data.data() + train.size(), n_val);
  const std::size_t batch = std::min(opt.batch, train.size());

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  PretrainResult res;
  std::size_t t = 0;
  std::vector<BvSample> mb;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    for (std::size_t start = 0; start + batch <= order.size(); start += batch) {
      mb.clear();
      for (std::size_t i = start; i < start + batch; ++i) mb.push_back(train[order[i]]);
      const Mat x = net.features(mb);
      Mat y(1, static_cast<Eigen::Index>(batch));
      for (std::size_t i = 0; i < batch; ++i) y(0, static_cast<Eigen::Index>(i)) = mb[i].label_hz / net.unit_hz();
      auto trace = net.mlp().forward_trace(x);
      const Mat err = trace.output - y;
      loss_sum += err.squaredNorm();
      loss_n += batch;
      const Mat upstream = 2.0 * err / static_cast<double>(batch);
      auto grads = net.mlp().backward(trace, upstream);
      if (!nn::all_finite(grads.params))
        throw TrainingError("pretrain_bv: non-finite gradient at step " + std::to_string(t));
      nn::sgd_step(net.mlp().params(), grads.params, opt.lr, t, nn::Direction::descend);
      ++t;
    }
    const double epoch_mse = loss_sum / static_cast<double>(std::max<std::size_t>(loss_n, 1));
    if (!std::isfinite(epoch_mse)) throw TrainingError("pretrain_bv: loss diverged in epoch " + std::to_string(epoch));
    res.epoch_loss.push_back(epoch_mse);
  }
  res.steps = t;

  const std::span<const BvSample> eval = val.empty() ? train : val;
  double mse = 0.0;
  double mean = 0.0;
  std::size_t ok = 0;
  for (const auto& s : eval) mean += s.label_hz / net.unit_hz();
  mean /= static_cast<double>(eval.size());
  double var = 0.0;
  for (const auto& s : eval) {
    const double y = s.label_hz / net.unit_hz();
    const double e = net.predict(s.alpha, s.k) - y;
    mse += e * e;
    var += (y - mean) * (y - mean);
    if (relative_error(net, s) <= 0.10) ++ok;
  }
  res.validation_mse = mse / static_cast<double>(eval.size());
  res.label_variance = var / static_cast<double>(eval.size());
  res.within_10pct = static_cast<double>(ok) / static_cast<double>(eval.size());
  res.net = std::move(net);
  return res;
}

/// Any map (alpha, K) -> bandwidth in Hz.
using BandwidthPredictor = std::function<double(double alpha, std::size_t k)>;

/// Mean over the batch of (S^E + (1/theta) ln E{exp(-theta s(g, alpha, P_max/K, B))})^2,
/// i.e. the squared QoS residual at equal power.
inline double unsupervised_bv_loss(const BandwidthPredictor& predictor,
                                   std::span<const std::pair<double, std::size_t>> batch,
                                   const urllc::UrllcConfig& cfg, std::size_t n_mc, std::uint64_t seed) {
  if (n_mc < 1) throw ContractViolation("unsupervised_bv_loss: n_mc must be >= 1");
  if (batch.empty()) return 0.0;
  const urllc::QosParams q = urllc::qos_params(cfg.eps_train, cfg);
  const auto draws = urllc::fading_draws(urllc::FadingSpec::rayleigh(cfg.n_antennas), n_mc, seed);
  double total = 0.0;
  for (const auto& [alpha, k] : batch) {
    const double p = cfg.p_max_w() / static_cast<double>(k);
    const double ce = urllc::effective_capacity(alpha, p, predictor(alpha, k), q, draws, cfg);
    const double r = q.s_e - ce;
    total += r * r;
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace pealloc::pretrain

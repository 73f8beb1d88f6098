#pragma once

// Primal-dual unsupervised training of the URLLC power/bandwidth policies.
//
// Three networks map the users' large-scale gains to powers (softmax head,
// so sum P = P_max), bandwidths (softplus head, optionally scaled by the
// frozen B^v network) and QoS multipliers (softplus head). Each step
// descends the batch-mean Lagrangian
//
//   L = sum_k [ B_k + lambda_k (exp(-theta s_k) - exp(-theta S^E)) ]
//
// in the power/bandwidth parameters and ascends it in the multiplier
// parameters, with s_k evaluated at the sample's own fading draw.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pealloc/common.hpp"
#include "pealloc/nn_core.hpp"
#include "pealloc/penn.hpp"
#include "pealloc/pretrain.hpp"
#include "pealloc/urllc.hpp"

namespace pealloc::trainer {

using nn::Mat;
using nn::Vec;
using urllc::ChannelSample;

/// What t counts in the decay 0.01/(1 + 0.01 t).
enum class LrIndex { epoch, iteration };

inline std::string to_string(LrIndex i) { return i == LrIndex::epoch ? "epoch" : "iteration"; }
inline LrIndex lr_index_from_string(const std::string& s) {
  if (s == "epoch") return LrIndex::epoch;
  if (s == "iteration") return LrIndex::iteration;
  throw InputError("unknown lr index '" + s + "' (expected epoch or iteration)");
}

struct TrainConfig {
  std::size_t epochs = 5000;
  std::size_t batch = 10;
  nn::LrSchedule lr{0.01, 0.01};
  LrIndex lr_index = LrIndex::epoch;
  std::uint64_t seed = 1;
  std::size_t hidden_width = 4;
  double bandwidth_unit_hz = 1e5;  ///< unit of B inside the networks and the Lagrangian
  std::size_t n_mc_validation = 2000;
  std::size_t validation_checks = 10;  ///< availability checks spread over the run
  bool bandwidth_prior = true;  ///< start the bandwidth head at B' = 1
  bool zero_cross_init = true;  ///< start every cross-object weight V at 0
};

/// (K, count) pairs per split.
struct DatasetSpec {
  std::vector<std::pair<std::size_t, std::size_t>> train{{10, 300}};
  std::vector<std::pair<std::size_t, std::size_t>> validation{{10, 20}};
  std::vector<std::pair<std::size_t, std::size_t>> test{{1, 100}, {2, 100}, {5, 100}, {10, 100}, {50, 100}};
};

struct Dataset {
  std::vector<ChannelSample> train;
  std::vector<ChannelSample> validation;
  std::vector<ChannelSample> test;
};

inline std::vector<ChannelSample> generate_split(const std::vector<std::pair<std::size_t, std::size_t>>& spec,
                                                 const urllc::UrllcConfig& cfg, std::uint64_t seed,
                                                 std::uint64_t split_tag) {
  std::vector<ChannelSample> out;
  for (const auto& [k, count] : spec) {
    if (k < 1 || count < 1) throw ContractViolation("generate_dataset: K and counts must be >= 1");
    Rng rng = make_rng(seed, split_tag, k);
    for (std::size_t i = 0; i < count; ++i) out.push_back(urllc::generate_channels(k, cfg, rng));
  }
  return out;
}

/// Independent i.i.d. splits, each from its own seed stream.
inline Dataset generate_dataset(const DatasetSpec& spec, const urllc::UrllcConfig& cfg, std::uint64_t seed) {
  return {generate_split(spec.train, cfg, seed, 0x7a1), generate_split(spec.validation, cfg, seed, 0x7a2),
          generate_split(spec.test, cfg, seed, 0x7a3)};
}

/// Channel sample plus the per-user network input and bandwidth scale.
struct PreparedSample {
  ChannelSample channel;
  Vec feature;  ///< ln(alpha) + 30
  Vec scale;    ///< B^v prediction in bandwidth units, or ones
};

inline Vec alpha_features(const Vec& alpha) {
  return alpha.unaryExpr([](double a) { return pretrain::BvNet::alpha_feature(a); });
}

/// `unit_hz` is the trainer's bandwidth unit; the B^v output is converted to it.
inline std::vector<PreparedSample> prepare(const std::vector<ChannelSample>& samples, const pretrain::BvNet* bv,
                                           double unit_hz) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    PreparedSample p{s, alpha_features(s.alpha), Vec::Ones(s.alpha.size())};
    if (bv) p.scale = bv->predict_units(s.alpha) * (bv->unit_hz() / unit_hz);
    out.push_back(std::move(p));
  }
  return out;
}

struct Allocation {
  Vec power;       ///< W
  Vec bandwidth;   ///< bandwidth units
  Vec multiplier;
};

struct PolicyGrads {
  nn::GradientBundle power;
  nn::GradientBundle bandwidth;
  nn::GradientBundle multiplier;
};

inline bool all_finite(const PolicyGrads& g) {
  return nn::all_finite(g.power) && nn::all_finite(g.bandwidth) && nn::all_finite(g.multiplier);
}

/// What the primal-dual loop needs from a policy.
template <typename P>
concept TrainablePolicy = requires(const P& cp, P& p, const PreparedSample& s, typename P::Pass& pass,
                                   const Vec& v, PolicyGrads& g, const nn::LrSchedule& lr, std::size_t t) {
  { cp.allocate(s) } -> std::same_as<Allocation>;
  { cp.forward(s) } -> std::same_as<typename P::Pass>;
  { pass.alloc } -> std::convertible_to<Allocation>;
  { cp.zero_grads() } -> std::same_as<PolicyGrads>;
  cp.backward(pass, v, v, v, g);
  p.apply(g, lr, t);
};

/// The three PENNs. With `scaled` the bandwidth head multiplies by the
/// sample's B^v scale (proposed method); without it B = B' (M-PENN).
class PennPolicy {
 public:
  struct Pass {
    penn::PennModel::Trace power;
    penn::PennModel::Trace bandwidth;
    penn::PennModel::Trace multiplier;
    Allocation alloc;
  };

  PennPolicy() = default;

  PennPolicy(double p_max_w, bool scaled, std::size_t hidden_width, Rng& rng, bool bandwidth_prior = false,
             bool zero_cross = false)
      : scaled_(scaled) {
    const std::vector<std::size_t> widths{1, hidden_width, 1};
    const auto act = nn::Activation::leaky_relu;
    power_ = penn::PennModel::random(widths, act, penn::Aggregator::mean, penn::Head::softmax, p_max_w, rng);
    bandwidth_ = penn::PennModel::random(widths, act, penn::Aggregator::mean,
                                         scaled ? penn::Head::softplus_scaled : penn::Head::softplus, 1.0, rng);
    multiplier_ = penn::PennModel::random(widths, act, penn::Aggregator::mean, penn::Head::softplus, 1.0, rng);
    // Trained at a single K, a constant offset can be learned either by the
    // bias or by V times the (nearly constant) aggregate, and only the bias
    // survives at K = 1. Starting V at 0 and B' at 1 keeps the offset in c.
    if (zero_cross)
      for (auto* m : {&power_, &bandwidth_, &multiplier_})
        for (std::size_t i = 1; i < m->params().size(); i += 2) m->params()[i].weight.setZero();
    if (bandwidth_prior) {
      auto& last = bandwidth_.params()[bandwidth_.params().size() - 2];
      last.bias.setConstant(nn::softplus_inverse(1.0));
    }
  }

  PennPolicy(penn::PennModel power, penn::PennModel bandwidth, penn::PennModel multiplier)
      : power_(std::move(power)), bandwidth_(std::move(bandwidth)), multiplier_(std::move(multiplier)) {
    scaled_ = bandwidth_.head() == penn::Head::softplus_scaled;
  }

  bool scaled() const { return scaled_; }
  const penn::PennModel& power_net() const { return power_; }
  const penn::PennModel& bandwidth_net() const { return bandwidth_; }
  const penn::PennModel& multiplier_net() const { return multiplier_; }
  penn::PennModel& power_net() { return power_; }
  penn::PennModel& bandwidth_net() { return bandwidth_; }
  penn::PennModel& multiplier_net() { return multiplier_; }

  Allocation allocate(const PreparedSample& s) const {
    const Mat x = penn::as_stack(s.feature);
    return {power_.forward(x), bandwidth_.forward(x, scaled_ ? &s.scale : nullptr), multiplier_.forward(x)};
  }

  Pass forward(const PreparedSample& s) const {
    const Mat x = penn::as_stack(s.feature);
    Pass pass{power_.forward_trace(x), bandwidth_.forward_trace(x, scaled_ ? &s.scale : nullptr),
              multiplier_.forward_trace(x), {}};
    pass.alloc = {pass.power.output, pass.bandwidth.output, pass.multiplier.output};
    return pass;
  }

  PolicyGrads zero_grads() const {
    return {nn::zeros_like(power_.params()), nn::zeros_like(bandwidth_.params()),
            nn::zeros_like(multiplier_.params())};
  }

  void backward(Pass& pass, const Vec& d_power, const Vec& d_bandwidth, const Vec& d_multiplier,
                PolicyGrads& into) const {
    nn::accumulate(into.power, power_.backward(pass.power, d_power).params);
    nn::accumulate(into.bandwidth, bandwidth_.backward(pass.bandwidth, d_bandwidth).params);
    nn::accumulate(into.multiplier, multiplier_.backward(pass.multiplier, d_multiplier).params);
  }

  void apply(const PolicyGrads& g, const nn::LrSchedule& lr, std::size_t t) {
    nn::sgd_step(power_.params(), g.power, lr, t, nn::Direction::descend);
    nn::sgd_step(bandwidth_.params(), g.bandwidth, lr, t, nn::Direction::descend);
    nn::sgd_step(multiplier_.params(), g.multiplier, lr, t, nn::Direction::ascend);
  }

 private:
  penn::PennModel power_;
  penn::PennModel bandwidth_;
  penn::PennModel multiplier_;
  bool scaled_ = true;
};

/// Fully connected baseline of fixed width K_max. Users are sorted by
/// descending feature, the input is zero-padded to K_max, and the first K
/// outputs are mapped back to the users.
class PaddedFnnPolicy {
 public:
  struct Pass {
    nn::Mlp::Trace power;
    nn::Mlp::Trace bandwidth;
    nn::Mlp::Trace multiplier;
    std::vector<Eigen::Index> order;  // order[i] = user at sorted position i
    Allocation alloc;
  };

  PaddedFnnPolicy() = default;

  PaddedFnnPolicy(std::size_t k_max, double p_max_w, std::size_t hidden, Rng& rng) : k_max_(k_max), p_max_(p_max_w) {
    const std::vector<std::size_t> widths{k_max, hidden, k_max};
    const auto act = nn::Activation::leaky_relu;
    power_ = nn::Mlp(widths, act, nn::Activation::identity, rng);
    bandwidth_ = nn::Mlp(widths, act, nn::Activation::identity, rng);
    multiplier_ = nn::Mlp(widths, act, nn::Activation::identity, rng);
  }

  PaddedFnnPolicy(nn::Mlp power, nn::Mlp bandwidth, nn::Mlp multiplier, double p_max_w)
      : power_(std::move(power)), bandwidth_(std::move(bandwidth)), multiplier_(std::move(multiplier)),
        k_max_(power_.in_width()), p_max_(p_max_w) {
    for (const nn::Mlp* m : {&power_, &bandwidth_, &multiplier_})
      if (m->in_width() != k_max_ || m->out_width() != k_max_)
        throw ContractViolation("padded FNN: all three nets must map K_max -> K_max");
  }

  std::size_t k_max() const { return k_max_; }
  double p_max() const { return p_max_; }
  const nn::Mlp& power_net() const { return power_; }
  const nn::Mlp& bandwidth_net() const { return bandwidth_; }
  const nn::Mlp& multiplier_net() const { return multiplier_; }
  nn::Mlp& power_net() { return power_; }
  nn::Mlp& bandwidth_net() { return bandwidth_; }
  nn::Mlp& multiplier_net() { return multiplier_; }

  /// Descending sort permutation and the padded input vector.
  std::pair<std::vector<Eigen::Index>, Vec> sorted_input(const Vec& feature) const {
    const auto k = feature.size();
    if (static_cast<std::size_t>(k) > k_max_)
      throw ContractViolation("padded FNN: K = " + std::to_string(k) + " exceeds K_max = " + std::to_string(k_max_));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return feature(a) > feature(b); });
    Vec x = Vec::Zero(static_cast<Eigen::Index>(k_max_));
    for (Eigen::Index i = 0; i < k; ++i) x(i) = feature(order[static_cast<std::size_t>(i)]);
    return {std::move(order), std::move(x)};
  }

  Allocation allocate(const PreparedSample& s) const {
    auto [order, x] = sorted_input(s.feature);
    return heads(order, power_.forward(x), bandwidth_.forward(x), multiplier_.forward(x));
  }

  Pass forward(const PreparedSample& s) const {
    auto [order, x] = sorted_input(s.feature);
    const Mat xm = x;
    Pass pass{power_.forward_trace(xm), bandwidth_.forward_trace(xm), multiplier_.forward_trace(xm), order, {}};
    pass.alloc = heads(order, pass.power.output.col(0), pass.bandwidth.output.col(0), pass.multiplier.output.col(0));
    return pass;
  }

  PolicyGrads zero_grads() const {
    return {nn::zeros_like(power_.params()), nn::zeros_like(bandwidth_.params()),
            nn::zeros_like(multiplier_.params())};
  }

  void backward(Pass& pass, const Vec& d_power, const Vec& d_bandwidth, const Vec& d_multiplier,
                PolicyGrads& into) const {
    const auto k = static_cast<Eigen::Index>(pass.order.size());
    const auto km = static_cast<Eigen::Index>(k_max_);
    // softmax over the first K raw outputs
    Mat up_p = Mat::Zero(km, 1);
    Mat up_b = Mat::Zero(km, 1);
    Mat up_l = Mat::Zero(km, 1);
    double inner = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto u = pass.order[static_cast<std::size_t>(i)];
      inner += pass.alloc.power(u) / p_max_ * d_power(u);
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto u = pass.order[static_cast<std::size_t>(i)];
      up_p(i, 0) = pass.alloc.power(u) * (d_power(u) - inner);
      up_b(i, 0) = d_bandwidth(u) * nn::sigmoid(pass.bandwidth.output(i, 0));
      up_l(i, 0) = d_multiplier(u) * nn::sigmoid(pass.multiplier.output(i, 0));
    }
    nn::accumulate(into.power, power_.backward(pass.power, up_p).params);
    nn::accumulate(into.bandwidth, bandwidth_.backward(pass.bandwidth, up_b).params);
    nn::accumulate(into.multiplier, multiplier_.backward(pass.multiplier, up_l).params);
  }

  void apply(const PolicyGrads& g, const nn::LrSchedule& lr, std::size_t t) {
    nn::sgd_step(power_.params(), g.power, lr, t, nn::Direction::descend);
    nn::sgd_step(bandwidth_.params(), g.bandwidth, lr, t, nn::Direction::descend);
    nn::sgd_step(multiplier_.params(), g.multiplier, lr, t, nn::Direction::ascend);
  }

 private:
  Allocation heads(const std::vector<Eigen::Index>& order, const Vec& raw_p, const Vec& raw_b, const Vec& raw_l) const {
    const auto k = static_cast<Eigen::Index>(order.size());
    Vec raw_sorted = raw_p.head(k);
    const Vec p_sorted = penn::softmax_power_head(raw_sorted, p_max_);
    Allocation a{Vec(k), Vec(k), Vec(k)};
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto u = order[static_cast<std::size_t>(i)];
      a.power(u) = p_sorted(i);
      a.bandwidth(u) = nn::softplus(raw_b(i));
      a.multiplier(u) = nn::softplus(raw_l(i));
    }
    return a;
  }

  nn::Mlp power_;
  nn::Mlp bandwidth_;
  nn::Mlp multiplier_;
  std::size_t k_max_ = 50;
  double p_max_ = 1.0;
};

static_assert(TrainablePolicy<PennPolicy>);
static_assert(TrainablePolicy<PaddedFnnPolicy>);

/// One entry of a batch with its allocation (bandwidth in network units).
struct AllocEntry {
  ChannelSample channel;
  Vec power;
  Vec bandwidth;
  Vec multiplier;
};
using AllocBatch = std::vector<AllocEntry>;

/// Per-sample Lagrangian and its partial derivatives.
struct LagrangianTerms {
  double value = 0.0;
  Vec d_power;
  Vec d_bandwidth;
  Vec d_multiplier;
};

inline LagrangianTerms lagrangian_terms(const ChannelSample& ch, const Vec& power, const Vec& bandwidth,
                                        const Vec& multiplier, const urllc::QosParams& q,
                                        const urllc::UrllcConfig& cfg, double unit_hz) {
  const auto k = static_cast<Eigen::Index>(ch.size());
  LagrangianTerms t{0.0, Vec(k), Vec(k), Vec(k)};
  const double target = std::exp(-q.theta * q.s_e);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto r = urllc::achievable_rate_grad(ch.g(i), ch.alpha(i), power(i), bandwidth(i) * unit_hz, q, cfg);
    const double e = std::exp(-q.theta * r.s);
    const double de_ds = -q.theta * e;
    t.value += bandwidth(i) + multiplier(i) * (e - target);
    t.d_power(i) = multiplier(i) * de_ds * r.ds_dp;
    t.d_bandwidth(i) = 1.0 + multiplier(i) * de_ds * r.ds_db * unit_hz;
    t.d_multiplier(i) = e - target;
  }
  return t;
}

/// Batch mean of the per-sample Lagrangian.
inline double lagrangian(const AllocBatch& batch, const urllc::QosParams& q, const urllc::UrllcConfig& cfg,
                         double unit_hz) {
  if (batch.empty()) throw ContractViolation("lagrangian: empty batch");
  double total = 0.0;
  for (const auto& e : batch)
    total += lagrangian_terms(e.channel, e.power, e.bandwidth, e.multiplier, q, cfg, unit_hz).value;
  return total / static_cast<double>(batch.size());
}

template <TrainablePolicy Policy>
struct TrainState {
  Policy policy;
  std::size_t iteration = 0;
  std::size_t epoch = 0;

  std::size_t lr_step(LrIndex index) const { return index == LrIndex::epoch ? epoch : iteration; }
};

/// One primal-dual update on a batch; returns the batch-mean Lagrangian.
template <TrainablePolicy Policy>
double primal_dual_step(TrainState<Policy>& state, std::span<const PreparedSample* const> batch,
                        const urllc::QosParams& q, const urllc::UrllcConfig& cfg, const TrainConfig& tc) {
  if (batch.empty()) throw ContractViolation("primal_dual_step: empty batch");
  PolicyGrads grads = state.policy.zero_grads();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const PreparedSample* s : batch) {
    auto pass = state.policy.forward(*s);
    auto terms = lagrangian_terms(s->channel, pass.alloc.power, pass.alloc.bandwidth, pass.alloc.multiplier, q, cfg,
                                  tc.bandwidth_unit_hz);
    total += terms.value;
    state.policy.backward(pass, terms.d_power * inv_n, terms.d_bandwidth * inv_n, terms.d_multiplier * inv_n, grads);
  }
  if (!all_finite(grads) || !std::isfinite(total))
    throw TrainingError("primal_dual_step: non-finite gradient at iteration " + std::to_string(state.iteration));
  state.policy.apply(grads, tc.lr, state.lr_step(tc.lr_index));
  ++state.iteration;
  return total * inv_n;
}

/// Evaluation-side allocation in physical units.
template <TrainablePolicy Policy>
urllc::AllocatedSample allocate_physical(const Policy& policy, const PreparedSample& s, double unit_hz) {
  const Allocation a = policy.allocate(s);
  return {s.channel, a.power, a.bandwidth * unit_hz};
}

/// Metrics per distinct K, in order of first appearance.
template <TrainablePolicy Policy>
std::vector<urllc::MetricsRow> evaluate(const Policy& policy, const std::vector<PreparedSample>& test,
                                        const urllc::UrllcConfig& cfg, double unit_hz, std::span<const double> draws) {
  std::vector<std::size_t> ks;
  std::map<std::size_t, std::vector<urllc::AllocatedSample>> groups;
  for (const auto& s : test) {
    const std::size_t k = s.channel.size();
    if (!groups.count(k)) ks.push_back(k);
    groups[k].push_back(allocate_physical(policy, s, unit_hz));
  }
  std::vector<urllc::MetricsRow> rows;
  for (std::size_t k : ks) rows.push_back(urllc::metrics(groups[k], draws, cfg));
  return rows;
}

struct TraceRow {
  std::size_t epoch = 0;
  std::size_t iteration = 0;
  double lagrangian = 0.0;  ///< mean over the epoch's steps
  std::optional<double> validation_availability;
};

template <TrainablePolicy Policy>
struct TrainResult {
  TrainState<Policy> state;
  std::vector<TraceRow> trace;
};

/// Overall availability on a prepared set (all K pooled).
template <TrainablePolicy Policy>
double pooled_availability(const Policy& policy, const std::vector<PreparedSample>& set,
                           const urllc::UrllcConfig& cfg, double unit_hz, std::span<const double> draws) {
  if (set.empty()) return 0.0;
  double users = 0.0;
  double sat = 0.0;
  for (const auto& row : evaluate(policy, set, cfg, unit_hz, draws)) {
    const double n = static_cast<double>(row.k * row.n_samples);
    users += n;
    sat += row.availability * n;
  }
  return sat / users;
}

/// Runs epochs x (train / batch) primal-dual steps from `initial`.
template <TrainablePolicy Policy>
TrainResult<Policy> train(Policy initial, const std::vector<PreparedSample>& train_set,
                          const std::vector<PreparedSample>& validation_set, const urllc::UrllcConfig& cfg,
                          const TrainConfig& tc) {
  if (train_set.empty()) throw ContractViolation("train: empty training set");
  if (tc.batch < 1 || tc.batch > train_set.size()) throw ContractViolation("train: batch must be in [1, |train|]");
  const urllc::QosParams q = urllc::qos_params(cfg.eps_train, cfg);
  const auto val_draws = urllc::fading_draws(urllc::FadingSpec::rayleigh(cfg.n_antennas), tc.n_mc_validation,
                                             stream_seed(tc.seed, 0x7a1d));
  TrainResult<Policy> res{{std::move(initial), 0, 0}, {}};
  Rng rng = make_rng(tc.seed, 0x5b0f);
  std::vector<const PreparedSample*> order;
  for (const auto& s : train_set) order.push_back(&s);
  const std::size_t steps_per_epoch = train_set.size() / tc.batch;
  const std::size_t check_every =
      tc.validation_checks == 0 ? 0 : std::max<std::size_t>(1, tc.epochs / tc.validation_checks);
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    res.state.epoch = epoch;
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const std::span<const PreparedSample* const> batch(order.data() + b * tc.batch, tc.batch);
      try {
        sum += primal_dual_step(res.state, batch, q, cfg, tc);
      } catch (const TrainingError& e) {
        std::string msg = e.what();
        msg += " (epoch " + std::to_string(epoch) + "; last trace entries:";
        for (std::size_t i = res.trace.size() > 5 ? res.trace.size() - 5 : 0; i < res.trace.size(); ++i)
          msg += " " + std::to_string(res.trace[i].lagrangian);
        throw TrainingError(msg + ")");
      }
    }
    TraceRow row{epoch, res.state.iteration, sum / static_cast<double>(std::max<std::size_t>(steps_per_epoch, 1)),
                 std::nullopt};
    const bool check = check_every > 0 && ((epoch + 1) % check_every == 0 || epoch + 1 == tc.epochs);
    if (check && !validation_set.empty())
      row.validation_availability =
          pooled_availability(res.state.policy, validation_set, cfg, tc.bandwidth_unit_hz, val_draws);
    res.trace.push_back(row);
  }
  return res;
}

enum class BaselineKind { m_penn, padded_fnn };

/// Untrained baseline models; the M-PENN uses the same architecture as the
/// proposed policy with B = B'.
inline PennPolicy build_m_penn(const urllc::UrllcConfig& cfg, const TrainConfig& tc) {
  Rng rng = make_rng(tc.seed, 0x1417);
  return PennPolicy(cfg.p_max_w(), false, tc.hidden_width, rng, tc.bandwidth_prior, tc.zero_cross_init);
}

inline PennPolicy build_proposed(const urllc::UrllcConfig& cfg, const TrainConfig& tc) {
  Rng rng = make_rng(tc.seed, 0x1417);
  return PennPolicy(cfg.p_max_w(), true, tc.hidden_width, rng, tc.bandwidth_prior, tc.zero_cross_init);
}

inline PaddedFnnPolicy build_padded_fnn(const urllc::UrllcConfig& cfg, const TrainConfig& tc, std::size_t k_max,
                                        std::size_t hidden = 300) {
  Rng rng = make_rng(tc.seed, 0xf441);
  return PaddedFnnPolicy(k_max, cfg.p_max_w(), hidden, rng);
}

}  // namespace pealloc::trainer

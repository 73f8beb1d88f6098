#pragma once

// Monte-Carlo checks of the size-behaviour of equivariant models:
//  * mean aggregation makes a deep PENN's per-object output a function of
//    (x_k, distribution of x) that stops depending on K once K is large;
//  * sum and max aggregation drift with K;
//  * simple equivariant policies concentrate to a deterministic function of
//    (x_k, K) as K grows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "pealloc/common.hpp"
#include "pealloc/nn_core.hpp"
#include "pealloc/penn.hpp"

namespace pealloc::theory {

using nn::Mat;
using nn::Vec;

using Sampler = std::function<double(Rng&)>;

inline Sampler uniform_features() {
  return [](Rng& r) { return uniform01(r); };
}
inline Sampler exponential_features() {
  return [](Rng& r) { return unit_exponential(r); };
}

struct InvarianceOptions {
  std::vector<double> probes{0.1, 0.3, 0.5, 0.7, 0.9};
  std::size_t k1 = 1024;
  std::size_t k2 = 4096;
  std::size_t trials = 2000;
  std::uint64_t seed = 1;
};

struct DeviationResult {
  std::vector<double> avg_k1;  ///< per probe
  std::vector<double> avg_k2;
  double max_deviation = 0.0;  ///< max over probes of |avg_k1 - avg_k2|
  double output_range = 0.0;   ///< max - min of the probe averages at k1
  double relative() const { return output_range > 0.0 ? max_deviation / output_range : max_deviation; }
};

/// Average output of object 0 (feature x*) among K-1 i.i.d. companions.
/// Trial t uses the same RNG stream at every K, so the smaller set's
/// companions are a prefix of the larger one's.
inline double probe_average(const penn::PennModel& model, const Sampler& features, double probe, std::size_t k,
                            std::size_t trials, std::uint64_t seed) {
  if (k < 1 || trials < 1) throw ContractViolation("probe_average: need K >= 1 and trials >= 1");
  if (model.in_width() != 1) throw ContractViolation("probe_average: model must take one feature per object");
  std::vector<double> out(trials);
  parallel_for(trials, [&](std::size_t t) {
    Rng rng = make_rng(seed, 0x9e0b, t);
    Mat x(1, static_cast<Eigen::Index>(k));
    x(0, 0) = probe;
    for (Eigen::Index j = 1; j < x.cols(); ++j) x(0, j) = features(rng);
    // only the raw output is needed; heads are monotone per object
    out[t] = model.raw(x)(0);
  });
  double s = 0.0;
  for (double v : out) s += v;
  return s / static_cast<double>(trials);
}

inline DeviationResult size_deviation(const penn::PennModel& model, const Sampler& features,
                                      const InvarianceOptions& opt) {
  if (opt.probes.empty()) throw ContractViolation("size_deviation: no probes");
  DeviationResult r;
  for (std::size_t i = 0; i < opt.probes.size(); ++i) {
    r.avg_k1.push_back(probe_average(model, features, opt.probes[i], opt.k1, opt.trials, opt.seed + i));
    r.avg_k2.push_back(probe_average(model, features, opt.probes[i], opt.k2, opt.trials, opt.seed + i));
    r.max_deviation = std::max(r.max_deviation, std::abs(r.avg_k1.back() - r.avg_k2.back()));
  }
  const auto [lo, hi] = std::minmax_element(r.avg_k1.begin(), r.avg_k1.end());
  r.output_range = *hi - *lo;
  return r;
}

/// Deviation of the model with every aggregator forced to mean.
inline DeviationResult check_mean_invariance(const penn::PennModel& model, const Sampler& features,
                                             const InvarianceOptions& opt) {
  if (opt.k1 < 64 || opt.k2 < 64) throw ContractViolation("check_mean_invariance: K1, K2 must be >= 64");
  return size_deviation(model.with_aggregator(penn::Aggregator::mean), features, opt);
}

/// Same harness with a sum or max aggregator.
inline DeviationResult check_aggregator_drift(const penn::PennModel& model, penn::Aggregator agg,
                                              const Sampler& features, const InvarianceOptions& opt) {
  if (agg == penn::Aggregator::mean) throw ContractViolation("check_aggregator_drift: use sum or max");
  if (opt.k1 < 64 || opt.k2 < 64) throw ContractViolation("check_aggregator_drift: K1, K2 must be >= 64");
  return size_deviation(model.with_aggregator(agg), features, opt);
}

/// Mean over trials of agg_{j != 0}(x_j) for raw scalar features.
inline double mean_aggregate(penn::Aggregator agg, const Sampler& features, std::size_t k, std::size_t trials,
                             std::uint64_t seed) {
  if (k < 1 || trials < 1) throw ContractViolation("mean_aggregate: need K >= 1 and trials >= 1");
  std::vector<double> out(trials);
  parallel_for(trials, [&](std::size_t t) {
    Rng rng = make_rng(seed, 0xa66e, t);
    Mat x(1, static_cast<Eigen::Index>(k));
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(0, j) = features(rng);
    out[t] = penn::aggregate(x, agg)(0, 0);
  });
  double s = 0.0;
  for (double v : out) s += v;
  return s / static_cast<double>(trials);
}

/// Equivariant policy on a gain vector.
using Policy = std::function<Vec(const Vec&)>;

struct DecompositionRow {
  std::size_t k = 0;
  double mean = 0.0;     ///< of y_0
  double std = 0.0;
  double mean_k = 0.0;   ///< of K * y_0
  double std_k = 0.0;
  double cv() const { return mean_k != 0.0 ? std_k / std::abs(mean_k) : 0.0; }
};

/// Output statistics for the object with gain g* among K-1 i.i.d. gains.
inline std::vector<DecompositionRow> check_policy_decomposition(const Policy& policy, const std::vector<std::size_t>& ks,
                                                                double g_star, const Sampler& gains,
                                                                std::size_t trials, std::uint64_t seed) {
  if (trials < 2) throw ContractViolation("check_policy_decomposition: need >= 2 trials");
  std::vector<DecompositionRow> rows;
  for (std::size_t k : ks) {
    if (k < 1) throw ContractViolation("check_policy_decomposition: K must be >= 1");
    std::vector<double> y(trials);
    parallel_for(trials, [&](std::size_t t) {
      Rng rng = make_rng(seed, 0xdec0 + k, t);
      Vec g(static_cast<Eigen::Index>(k));
      g(0) = g_star;
      for (Eigen::Index j = 1; j < g.size(); ++j) g(j) = gains(rng);
      y[t] = policy(g)(0);
    });
    double m = 0.0;
    for (double v : y) m += v;
    m /= static_cast<double>(trials);
    double var = 0.0;
    for (double v : y) var += (v - m) * (v - m);
    var /= static_cast<double>(trials - 1);
    const double kd = static_cast<double>(k);
    rows.push_back({k, m, std::sqrt(var), kd * m, kd * std::sqrt(var)});
  }
  return rows;
}

/// Gamma(n, 1) gains: squared norm of n unit complex Gaussians, times `scale`.
inline Sampler gamma_gains(int n, double scale = 1.0) {
  return [n, scale](Rng& r) {
    double g = 0.0;
    for (int i = 0; i < n; ++i) g += unit_exponential(r);
    return scale * g;
  };
}

/// Monte-Carlo E[1/g].
inline double mean_inverse(const Sampler& gains, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x1a7e);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += 1.0 / gains(rng);
  return s / static_cast<double>(n);
}

}  // namespace pealloc::theory

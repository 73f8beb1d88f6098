#pragma once

// Downlink URLLC model: path loss and multi-antenna fading, the QoS
// exponent / effective bandwidth of Poisson arrivals, the finite-blocklength
// rate, Monte-Carlo effective capacity and the availability/bandwidth
// metrics.

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pealloc/common.hpp"
#include "pealloc/nn_core.hpp"

namespace pealloc::urllc {

using nn::Vec;

/// Which delay bound enters the QoS exponent.
enum class ThetaDelay { d_max, d_queue };

struct UrllcConfig {
  double cell_radius_m = 250.0;
  double d_min_m = 50.0;
  double pathloss_a0_db = 35.3;
  double pathloss_slope = 37.6;
  double p_max_dbm = 43.0;
  int n_antennas = 8;
  double n0_dbm_per_hz = -173.0;
  double eps_max = 1e-5;
  double eps_train = 6e-6;  // stricter target used while training
  double d_max_ms = 1.0;
  double d_queue_ms = 0.8;
  double tau_ms = 0.05;
  double frame_ms = 0.1;
  double packet_bits = 160.0;
  double arrival_rate = 0.2;  // packets per frame
  ThetaDelay theta_delay = ThetaDelay::d_max;

  double p_max_w() const { return std::pow(10.0, (p_max_dbm - 30.0) / 10.0); }
  double n0_w_per_hz() const { return std::pow(10.0, (n0_dbm_per_hz - 30.0) / 10.0); }
  double tau_s() const { return tau_ms * 1e-3; }
  double delay_frames() const {
    return (theta_delay == ThetaDelay::d_max ? d_max_ms : d_queue_ms) / frame_ms;
  }

  void validate() const {
    auto pos = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string("config: ") + name + " must be positive");
    };
    pos(cell_radius_m, "cell_radius_m");
    pos(d_min_m, "d_min_m");
    pos(pathloss_slope, "pathloss_slope");
    pos(d_max_ms, "d_max_ms");
    pos(d_queue_ms, "d_queue_ms");
    pos(tau_ms, "tau_ms");
    pos(frame_ms, "frame_ms");
    pos(packet_bits, "packet_bits");
    pos(arrival_rate, "arrival_rate");
    pos(eps_max, "eps_max");
    pos(eps_train, "eps_train");
    if (n_antennas < 1) throw InputError("config: n_antennas must be >= 1");
    if (!(d_min_m < cell_radius_m)) throw InputError("config: d_min_m must be below cell_radius_m");
    if (!(tau_ms <= frame_ms)) throw InputError("config: tau_ms must not exceed frame_ms");
    if (!(eps_train <= eps_max)) throw InputError("config: eps_train must not exceed eps_max");
    if (!(eps_max < 1.0)) throw InputError("config: eps_max must be below 1");
  }
};

struct QosParams {
  double theta = 0.0;
  double s_e = 0.0;    ///< effective bandwidth, packets/frame
  double eps_c = 0.0;  ///< decoding error probability
  double q_inv = 0.0;  ///< Q^{-1}(eps_c)
};

/// z with Q(z) = p, Q the standard normal tail.
inline double inverse_q(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("inverse_q: p must lie in (0, 1)");
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

inline double q_function(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

/// theta = ln[1 - ln(eps/2) / (a D/T_f)], S^E = (a/theta)(e^theta - 1), eps_c = eps/2.
inline QosParams qos_params(double eps, const UrllcConfig& cfg) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("qos_params: eps must lie in (0, 1)");
  const double half = eps / 2.0;
  QosParams q;
  q.theta = std::log(1.0 - std::log(half) / (cfg.arrival_rate * cfg.delay_frames()));
  q.s_e = cfg.arrival_rate / q.theta * std::expm1(q.theta);
  q.eps_c = half;
  q.q_inv = inverse_q(half);
  return q;
}

/// Finite-blocklength rate in packets/frame (clamped at 0):
///   s = tau B / (mu ln2) [ ln(1 + alpha P g / (N0 B)) - Q^{-1}(eps_c) / sqrt(tau B) ]
inline double achievable_rate(double g, double alpha, double power, double bandwidth_hz, const QosParams& q,
                              const UrllcConfig& cfg) {
  if (!(bandwidth_hz > 0.0) || !(power > 0.0)) return 0.0;
  const double tb = cfg.tau_s() * bandwidth_hz;
  const double snr = alpha * power * g / (cfg.n0_w_per_hz() * bandwidth_hz);
  const double bracket = std::log1p(snr) - q.q_inv / std::sqrt(tb);
  if (bracket <= 0.0) return 0.0;
  return tb / (cfg.packet_bits * std::numbers::ln2) * bracket;
}

struct RateGrad {
  double s = 0.0;
  double ds_dp = 0.0;
  double ds_db = 0.0;  ///< per Hz
};

/// achievable_rate with its partial derivatives; zero gradient in the clamped region.
inline RateGrad achievable_rate_grad(double g, double alpha, double power, double bandwidth_hz, const QosParams& q,
                                     const UrllcConfig& cfg) {
  RateGrad r;
  if (!(bandwidth_hz > 0.0) || !(power > 0.0)) return r;
  const double kappa = cfg.tau_s() / (cfg.packet_bits * std::numbers::ln2);
  const double tb = cfg.tau_s() * bandwidth_hz;
  const double c = alpha * g / cfg.n0_w_per_hz();
  const double x = c * power / bandwidth_hz;
  const double lx = std::log1p(x);
  const double penalty = q.q_inv / std::sqrt(tb);
  if (lx - penalty <= 0.0) return r;
  r.s = kappa * bandwidth_hz * (lx - penalty);
  r.ds_dp = kappa * c * bandwidth_hz / (bandwidth_hz + c * power);
  r.ds_db = kappa * (lx - x / (1.0 + x) - 0.5 * penalty);
  return r;
}

/// Small-scale fading law: a single atom, or the squared norm of an
/// N-antenna vector of unit complex Gaussians (Gamma(N, 1)).
struct FadingSpec {
  enum class Kind { atom, multi_antenna } kind = Kind::multi_antenna;
  double atom = 1.0;
  int antennas = 8;

  static FadingSpec degenerate(double g0) { return {Kind::atom, g0, 1}; }
  static FadingSpec rayleigh(int n) { return {Kind::multi_antenna, 1.0, n}; }
};

inline double draw_fading(const FadingSpec& spec, Rng& rng) {
  if (spec.kind == FadingSpec::Kind::atom) return spec.atom;
  double g = 0.0;
  for (int i = 0; i < spec.antennas; ++i) {
    const double re = standard_normal(rng);
    const double im = standard_normal(rng);
    g += 0.5 * (re * re + im * im);
  }
  return g;
}

inline std::vector<double> fading_draws(const FadingSpec& spec, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xfad1);
  std::vector<double> out(n);
  for (auto& g : out) g = draw_fading(spec, rng);
  return out;
}

/// -(1/theta) ln( (1/n) sum_i exp(-theta s(g_i)) ) over the supplied draws.
inline double effective_capacity(double alpha, double power, double bandwidth_hz, const QosParams& q,
                                 std::span<const double> draws, const UrllcConfig& cfg) {
  if (draws.empty()) throw ContractViolation("effective_capacity: need at least one fading draw");
  // log-sum-exp with the largest exponent factored out
  std::vector<double> expo(draws.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < draws.size(); ++i) {
    expo[i] = -q.theta * achievable_rate(draws[i], alpha, power, bandwidth_hz, q, cfg);
    top = std::max(top, expo[i]);
  }
  double acc = 0.0;
  for (double e : expo) acc += std::exp(e - top);
  const double log_mean = top + std::log(acc / static_cast<double>(draws.size()));
  return -log_mean / q.theta;
}

inline double effective_capacity(double alpha, double power, double bandwidth_hz, const QosParams& q,
                                 const FadingSpec& fading, std::size_t n_mc, std::uint64_t seed,
                                 const UrllcConfig& cfg) {
  if (n_mc < 1) throw ContractViolation("effective_capacity: n_mc must be >= 1");
  const auto draws = fading_draws(fading, n_mc, seed);
  return effective_capacity(alpha, power, bandwidth_hz, q, draws, cfg);
}

struct ChannelSample {
  Vec alpha;     ///< large-scale gains (linear)
  Vec g;         ///< one small-scale realization per user
  Vec distance;  ///< metres

  std::size_t size() const { return static_cast<std::size_t>(alpha.size()); }
};

inline double pathloss_db(double distance_m, const UrllcConfig& cfg) {
  return cfg.pathloss_a0_db + cfg.pathloss_slope * std::log10(distance_m);
}

inline double large_scale_gain(double distance_m, const UrllcConfig& cfg) {
  return std::pow(10.0, -pathloss_db(distance_m, cfg) / 10.0);
}

/// Distances uniform on [d_min, R]; g_k the squared antenna-vector norm.
inline ChannelSample generate_channels(std::size_t k, const UrllcConfig& cfg, Rng& rng) {
  if (k < 1) throw ContractViolation("generate_channels: K must be >= 1");
  const auto n = static_cast<Eigen::Index>(k);
  ChannelSample s{Vec(n), Vec(n), Vec(n)};
  const FadingSpec fading = FadingSpec::rayleigh(cfg.n_antennas);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.distance(i) = uniform(rng, cfg.d_min_m, cfg.cell_radius_m);
    s.alpha(i) = large_scale_gain(s.distance(i), cfg);
    s.g(i) = draw_fading(fading, rng);
  }
  return s;
}

inline ChannelSample generate_channels(std::size_t k, const UrllcConfig& cfg, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xc4a1);
  return generate_channels(k, cfg, rng);
}

/// C^E >= S^E for the given user allocation at reliability target eps.
inline bool qos_satisfied(double alpha, double power, double bandwidth_hz, double eps, std::span<const double> draws,
                          const UrllcConfig& cfg) {
  const QosParams q = qos_params(eps, cfg);
  return effective_capacity(alpha, power, bandwidth_hz, q, draws, cfg) >= q.s_e;
}

struct AllocatedSample {
  ChannelSample channel;
  Vec power;         ///< W
  Vec bandwidth_hz;  ///< Hz
};

struct MetricsRow {
  std::size_t k = 0;
  double availability = 0.0;  ///< fraction of users with C^E >= S^E at eps_max
  double bandwidth_mhz = 0.0;  ///< mean total bandwidth per sample
  std::size_t n_samples = 0;
};

/// Availability and mean total bandwidth over samples that share one K.
inline MetricsRow metrics(std::span<const AllocatedSample> samples, std::span<const double> draws,
                          const UrllcConfig& cfg) {
  if (samples.empty()) throw ContractViolation("metrics: empty test subset");
  const QosParams q = qos_params(cfg.eps_max, cfg);
  const std::size_t k = samples.front().channel.size();
  std::vector<std::size_t> satisfied(samples.size(), 0);
  std::vector<double> total_hz(samples.size(), 0.0);
  parallel_for(samples.size(), [&](std::size_t i) {
    const auto& s = samples[i];
    if (s.channel.size() != k || static_cast<std::size_t>(s.power.size()) != k ||
        static_cast<std::size_t>(s.bandwidth_hz.size()) != k)
      throw ContractViolation("metrics: samples must share one K and carry a full allocation");
    for (std::size_t u = 0; u < k; ++u) {
      const auto ui = static_cast<Eigen::Index>(u);
      if (effective_capacity(s.channel.alpha(ui), s.power(ui), s.bandwidth_hz(ui), q, draws, cfg) >= q.s_e)
        ++satisfied[i];
      total_hz[i] += s.bandwidth_hz(ui);
    }
  });
  MetricsRow row;
  row.k = k;
  row.n_samples = samples.size();
  std::size_t sat = 0;
  double hz = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    sat += satisfied[i];
    hz += total_hz[i];
  }
  row.availability = static_cast<double>(sat) / static_cast<double>(k * samples.size());
  row.bandwidth_mhz = hz / static_cast<double>(samples.size()) / 1e6;
  return row;
}

}  // namespace pealloc::urllc

#pragma once

// Sum-rate power control on a K-pair interference channel:
//
//   max sum_k ln(1 + P_k G_kk / (sum_{j != k} P_j G_kj + sigma0)),  0 <= P_k <= P_max
//
// solved with the scalar WMMSE iteration, plus the empirical statistics
// (near-binary solutions, Pr{P_k = P_max | G_kk}) used to study how the
// policy behaves across K.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pealloc/common.hpp"
#include "pealloc/nn_core.hpp"

namespace pealloc::interference {

using nn::Mat;
using nn::Vec;

/// G(k, j) is the power gain from transmitter j to receiver k.
struct InterferenceInstance {
  Mat G;
  double p_max = 1.0;
  double sigma0 = 1.0;

  std::size_t size() const { return static_cast<std::size_t>(G.rows()); }

  void validate() const {
    if (G.rows() == 0 || G.rows() != G.cols()) throw DomainError("interference: G must be square and non-empty");
    if (!((G.array() >= 0.0).all() && G.allFinite())) throw DomainError("interference: gains must be >= 0");
    if (!(G.diagonal().array() > 0.0).all()) throw DomainError("interference: direct gains must be > 0");
    if (!(p_max > 0.0) || !(sigma0 > 0.0)) throw DomainError("interference: P_max and sigma0 must be > 0");
  }
};

/// Exp(1) power gains on every link (unit Rayleigh amplitudes).
inline InterferenceInstance rayleigh_instance(std::size_t k, double p_max, double sigma0, Rng& rng) {
  InterferenceInstance inst{Mat(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)), p_max, sigma0};
  for (Eigen::Index r = 0; r < inst.G.rows(); ++r)
    for (Eigen::Index c = 0; c < inst.G.cols(); ++c) inst.G(r, c) = unit_exponential(rng);
  return inst;
}

inline double sum_rate(const InterferenceInstance& inst, const Vec& p) {
  const auto k_count = static_cast<Eigen::Index>(inst.size());
  if (p.size() != k_count) throw ContractViolation("sum_rate: power vector length mismatch");
  for (Eigen::Index k = 0; k < k_count; ++k)
    if (!(p(k) >= 0.0 && p(k) <= inst.p_max))
      throw DomainError("sum_rate: power " + std::to_string(p(k)) + " outside [0, P_max]");
  const Vec received = inst.G * p;  // sum_j G_kj P_j
  double total = 0.0;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const double signal = inst.G(k, k) * p(k);
    total += std::log1p(signal / (received(k) - signal + inst.sigma0));
  }
  return total;
}

enum class WmmseInit { full_power, random };

struct WmmseOptions {
  int max_iters = 500;
  double tol = 1e-6;
  WmmseInit init = WmmseInit::full_power;
  std::uint64_t seed = 0;  // used by WmmseInit::random
};

struct WmmseResult {
  Vec powers;
  std::vector<double> objective;  // sum rate after init and after every iteration
  int iterations = 0;
  bool hit_cap = false;
  bool monotone = true;  // objective never decreased beyond round-off
};

/// Scalar WMMSE on amplitudes h_kj = sqrt(G_kj). Each sweep updates the
/// receivers u, the weights w = 1/e, then the transmit amplitudes v
/// clipped to [0, sqrt(P_max)]. The sum rate is non-decreasing.
inline WmmseResult wmmse_solve(const InterferenceInstance& inst, const WmmseOptions& opt = {}) {
  inst.validate();
  const auto k_count = static_cast<Eigen::Index>(inst.size());
  const Mat h = inst.G.cwiseSqrt();
  const Vec hd = h.diagonal();
  const double v_max = std::sqrt(inst.p_max);

  Vec v(k_count);
  if (opt.init == WmmseInit::full_power) {
    v.setConstant(v_max);
  } else {
    Rng rng = make_rng(opt.seed, 0x77a1);
    for (Eigen::Index k = 0; k < k_count; ++k) v(k) = v_max * std::sqrt(uniform01(rng));
  }

  WmmseResult res;
  Vec p = v.cwiseAbs2().cwiseMin(inst.p_max);
  double prev = sum_rate(inst, p);
  res.objective.push_back(prev);
  Vec u(k_count);
  Vec w(k_count);
  for (int it = 0; it < opt.max_iters; ++it) {
    const Vec interference_plus_noise = inst.G * p + Vec::Constant(k_count, inst.sigma0);
    for (Eigen::Index k = 0; k < k_count; ++k) {
      u(k) = hd(k) * v(k) / interference_plus_noise(k);
      w(k) = 1.0 / (1.0 - u(k) * hd(k) * v(k));
    }
    // denominator_j = sum_k w_k u_k^2 G_kj
    const Vec wu2 = w.cwiseProduct(u.cwiseAbs2());
    const Vec denom = inst.G.transpose() * wu2;
    for (Eigen::Index j = 0; j < k_count; ++j) {
      const double num = w(j) * u(j) * hd(j);
      const double vj = denom(j) > 0.0 ? num / denom(j) : v_max;
      v(j) = std::clamp(vj, 0.0, v_max);
    }
    p = v.cwiseAbs2().cwiseMin(inst.p_max);
    const double cur = sum_rate(inst, p);
    res.objective.push_back(cur);
    res.iterations = it + 1;
    if (cur < prev - 1e-12 * std::max(1.0, std::abs(prev))) res.monotone = false;
    if (std::abs(cur - prev) < opt.tol) {
      res.powers = p;
      return res;
    }
    prev = cur;
  }
  res.hit_cap = true;
  res.powers = p;
  return res;
}

/// Fraction of entries of a P_max = 1 normalized batch within `threshold`
/// of 0 or 1.
inline double binary_fraction(const std::vector<Vec>& powers, double threshold = 1e-3) {
  std::size_t total = 0;
  std::size_t binary = 0;
  for (const auto& p : powers) {
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      ++total;
      if (p(k) <= threshold || p(k) >= 1.0 - threshold) ++binary;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(binary) / static_cast<double>(total);
}

struct CurvePoint {
  std::size_t k = 0;
  double g_center = 0.0;
  double half_width = 0.1;
  std::optional<double> prob;  // empty when no sample fell into the bin
  std::size_t count = 0;
};

struct CurveOptions {
  std::vector<std::size_t> k_list{10, 50};
  std::size_t realizations = 1000;
  double half_width = 0.1;
  std::vector<double> g_grid{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 3.5, 4.0};
  double p_max = 1.0;
  double sigma0 = 1.0;
  std::uint64_t seed = 1;
  WmmseOptions wmmse{};
};

struct BinarySummary {
  std::size_t k = 0;
  double fraction = 0.0;
  std::size_t n = 0;
};

struct CurveResult {
  std::vector<CurvePoint> points;
  std::vector<BinarySummary> binary;
};

/// Pr{P_k >= (1 - 1e-3) P_max} conditioned on G_kk in (center - d, center + d),
/// estimated from `realizations` WMMSE solutions per K.
inline CurveResult full_power_curve(const CurveOptions& opt) {
  if (opt.realizations < 1) throw ContractViolation("full_power_curve: need at least one realization");
  CurveResult out;
  for (std::size_t ki = 0; ki < opt.k_list.size(); ++ki) {
    const std::size_t k = opt.k_list[ki];
    std::vector<Vec> gains(opt.realizations);
    std::vector<Vec> powers(opt.realizations);
    parallel_for(opt.realizations, [&](std::size_t r) {
      Rng rng = make_rng(opt.seed, 0xf162 + k, r);
      const auto inst = rayleigh_instance(k, opt.p_max, opt.sigma0, rng);
      gains[r] = inst.G.diagonal();
      powers[r] = wmmse_solve(inst, opt.wmmse).powers;
    });
    std::vector<Vec> normalized;
    normalized.reserve(powers.size());
    for (const auto& p : powers) normalized.push_back(p / opt.p_max);
    out.binary.push_back({k, binary_fraction(normalized), opt.realizations});
    for (double center : opt.g_grid) {
      std::size_t in_bin = 0;
      std::size_t full = 0;
      for (std::size_t r = 0; r < opt.realizations; ++r) {
        for (Eigen::Index u = 0; u < gains[r].size(); ++u) {
          const double g = gains[r](u);
          if (g > center - opt.half_width && g < center + opt.half_width) {
            ++in_bin;
            if (powers[r](u) >= (1.0 - 1e-3) * opt.p_max) ++full;
          }
        }
      }
      CurvePoint pt{k, center, opt.half_width, std::nullopt, in_bin};
      if (in_bin > 0) pt.prob = static_cast<double>(full) / static_cast<double>(in_bin);
      out.points.push_back(pt);
    }
  }
  return out;
}

}  // namespace pealloc::interference

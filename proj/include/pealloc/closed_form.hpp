#pragma once

// Exact solvers for the two convex FDMA allocation problems:
//  * min total power s.t. B log2(1 + P_k g_k / (N0 B)) >= s0  (P_k = C / g_k)
//  * min shared bandwidth s.t. the same rate target and sum P_k <= P_max,
//    whose power split is a softmax over ln(1/g_k) and whose bandwidth
//    solves F(B) = P_max / sum(1/g_k) with F(B) = N0 B (2^{s0/B} - 1).

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "pealloc/common.hpp"
#include "pealloc/nn_core.hpp"
#include "pealloc/penn.hpp"

namespace pealloc::closed_form {

using nn::Vec;

struct SimpleAllocProblem {
  Vec g;
  double bandwidth = 1.0;
  double s0 = 1.0;
  double n0 = 1.0;
};

struct JointAllocProblem {
  Vec g;
  double s0 = 1.0;
  double n0 = 1.0;
  double p_max = 1.0;
};

struct JointSolution {
  Vec powers;
  double bandwidth = 0.0;
};

inline constexpr double kDefaultBisectionTol = 1e-9;
inline constexpr int kBisectionCap = 200;

namespace detail {
inline void require_positive(const Vec& g, const char* what) {
  if (g.size() == 0) throw DomainError(std::string(what) + ": empty gain vector");
  if (!((g.array() > 0.0).all() && g.allFinite()))
    throw DomainError(std::string(what) + ": gains must be finite and positive");
}
inline void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be positive");
}
}  // namespace detail

/// Rate B log2(1 + P g / (N0 B)) in bits/s.
inline double shannon_rate(double p, double g, double bandwidth, double n0) {
  return bandwidth * std::log2(1.0 + p * g / (n0 * bandwidth));
}

/// F(B) = N0 B (2^{s0/B} - 1): power per unit gain needed for rate s0.
inline double eval_F(double bandwidth, double s0, double n0) {
  if (!(bandwidth > 0.0)) throw DomainError("eval_F: bandwidth must be positive");
  return n0 * bandwidth * std::expm1(std::numbers::ln2 * s0 / bandwidth);
}

/// lim_{B -> inf} F(B)
inline double F_asymptote(double s0, double n0) { return n0 * s0 * std::numbers::ln2; }

inline Vec solve_min_power(const SimpleAllocProblem& p) {
  detail::require_positive(p.g, "solve_min_power");
  detail::require_positive(p.bandwidth, "bandwidth");
  detail::require_positive(p.s0, "s0");
  detail::require_positive(p.n0, "n0");
  const double c = eval_F(p.bandwidth, p.s0, p.n0);
  return p.g.cwiseInverse() * c;
}

/// Bisection for F(B) = target. The bracket starts at [s0 1e-6, s0] and the
/// upper end doubles until F(hi) <= target. `tol` is on F, relative above 1.
inline double invert_F(double target, double s0, double n0, double tol = kDefaultBisectionTol) {
  detail::require_positive(s0, "s0");
  detail::require_positive(n0, "n0");
  const double floor_value = F_asymptote(s0, n0);
  if (!(target > floor_value)) {
    std::ostringstream os;
    os.precision(17);
    os << "invert_F: target " << target << " is not above the asymptote N0*s0*ln2 = " << floor_value;
    throw InfeasibleError(os.str());
  }
  double lo = s0 * 1e-6;
  double hi = s0;
  int grow = 0;
  while (eval_F(hi, s0, n0) > target) {
    lo = hi;
    hi *= 2.0;
    if (++grow > kBisectionCap) throw InfeasibleError("invert_F: bracket growth cap reached");
  }
  // tolerance is relative once F exceeds 1
  const double abs_tol = tol * std::max(1.0, target);
  for (int it = 0; it < kBisectionCap; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = eval_F(mid, s0, n0);
    if (std::abs(f - target) <= abs_tol) return mid;
    if (f > target)
      lo = mid;
    else
      hi = mid;
    // bracket exhausted in double precision: mid is as close as B can get
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) return mid;
  }
  throw InfeasibleError("invert_F: bisection did not reach tolerance within the iteration cap");
}

/// P_k = P_max (1/g_k) / sum_j (1/g_j); B = F^{-1}(P_max / sum_j 1/g_j).
inline JointSolution solve_joint(const JointAllocProblem& p, double tol = kDefaultBisectionTol) {
  detail::require_positive(p.g, "solve_joint");
  detail::require_positive(p.s0, "s0");
  detail::require_positive(p.n0, "n0");
  detail::require_positive(p.p_max, "p_max");
  const Vec inv = p.g.cwiseInverse();
  const double inv_sum = inv.sum();
  JointSolution sol;
  sol.powers = p.p_max * inv / inv_sum;
  sol.bandwidth = invert_F(p.p_max / inv_sum, p.s0, p.n0, tol);
  return sol;
}

/// Same power split routed through the softmax head on ln(1/g_k).
inline Vec joint_powers_via_softmax(const Vec& g, double p_max) {
  detail::require_positive(g, "joint_powers_via_softmax");
  return penn::softmax_power_head(g.cwiseInverse().array().log().matrix(), p_max);
}

/// max_k |rate_k - s0| / s0
inline double rate_residual(const Vec& powers, const Vec& g, double bandwidth, double s0, double n0) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < g.size(); ++k)
    worst = std::max(worst, std::abs(shannon_rate(powers(k), g(k), bandwidth, n0) - s0) / s0);
  return worst;
}

}  // namespace pealloc::closed_form

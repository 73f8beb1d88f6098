#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "pealloc/nn_core.hpp"

namespace pealloc::testutil {

inline constexpr double kFdStep = 1e-6;

/// |a - b| / max(|a|, |b|, floor); the floor keeps near-zero entries from
/// dominating.
inline double rel_err(double a, double b, double floor = 1e-5) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// A central difference of f carries round-off of about eps |f| / h, so the
// floor grows with |f|.
inline double fd_floor(double f0) { return std::max(1e-5, 1e-5 * std::abs(f0)); }

/// Worst relative error between analytic gradients and a central
/// difference of `f` for every entry of `params`.
inline double fd_params(std::vector<nn::DenseParam>& params, const std::vector<nn::DenseParam>& grads,
                        const std::function<double()>& f, bool skip_zero_bias_rows = false) {
  const double floor = fd_floor(f());
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto probe = [&](double& x, double g) {
      const double keep = x;
      x = keep + kFdStep;
      const double up = f();
      x = keep - kFdStep;
      const double dn = f();
      x = keep;
      worst = std::max(worst, rel_err((up - dn) / (2.0 * kFdStep), g, floor));
    };
    for (Eigen::Index r = 0; r < params[i].weight.rows(); ++r)
      for (Eigen::Index c = 0; c < params[i].weight.cols(); ++c) probe(params[i].weight(r, c), grads[i].weight(r, c));
    if (skip_zero_bias_rows && grads[i].bias.isZero(0.0)) continue;
    for (Eigen::Index r = 0; r < params[i].bias.size(); ++r) probe(params[i].bias(r), grads[i].bias(r));
  }
  return worst;
}

inline double fd_vector(nn::Mat& x, const nn::Mat& grad, const std::function<double()>& f) {
  const double floor = fd_floor(f());
  double worst = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double keep = x(r, c);
      x(r, c) = keep + kFdStep;
      const double up = f();
      x(r, c) = keep - kFdStep;
      const double dn = f();
      x(r, c) = keep;
      worst = std::max(worst, rel_err((up - dn) / (2.0 * kFdStep), grad(r, c), floor));
    }
  return worst;
}

}  // namespace pealloc::testutil

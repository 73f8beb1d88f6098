#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "pealloc/interference.hpp"

using namespace pealloc;
using namespace pealloc::interference;
using nn::Mat;
using nn::Vec;

namespace {

InterferenceInstance strong_pair() {
  Mat g(2, 2);
  g << 1.0, 10.0, 10.0, 1.0;
  return {g, 1.0, 1.0};
}

}  // namespace

TEST(SumRate, HandValues) {
  const InterferenceInstance one{Mat::Ones(1, 1), 1.0, 1.0};
  EXPECT_NEAR(sum_rate(one, Vec::Ones(1)), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(sum_rate(strong_pair(), Vec::Zero(2)), 0.0);
  Vec p(2);
  p << 1.0, 0.0;
  EXPECT_NEAR(sum_rate(strong_pair(), p), std::log(2.0), 1e-15);
  EXPECT_NEAR(sum_rate(strong_pair(), Vec::Ones(2)), 2.0 * std::log(12.0 / 11.0), 1e-15);
}

TEST(SumRate, OutOfBoxPowersAreRejected) {
  Vec p(2);
  p << 1.5, 0.0;
  EXPECT_THROW(sum_rate(strong_pair(), p), DomainError);
}

TEST(Wmmse, TrivialInstances) {
  const InterferenceInstance one{Mat::Constant(1, 1, 0.3), 2.0, 1.0};
  EXPECT_NEAR(wmmse_solve(one).powers(0), 2.0, 1e-12);
  Mat g = Mat::Zero(2, 2);
  g(0, 0) = 0.5;
  g(1, 1) = 2.0;
  const Vec p = wmmse_solve({g, 1.0, 1.0}).powers;
  EXPECT_NEAR(p(0), 1.0, 1e-12);
  EXPECT_NEAR(p(1), 1.0, 1e-12);
}

// Oracle: exhaustive grid over {0, 0.05, ..., 1}^2.
TEST(Wmmse, StrongInterferenceMatchesGridSearch) {
  const auto inst = strong_pair();
  double best = 0.0;
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) {
      Vec p(2);
      p << 0.05 * i, 0.05 * j;
      best = std::max(best, sum_rate(inst, p));
    }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto res = wmmse_solve(inst, {500, 1e-9, WmmseInit::random, seed});
    EXPECT_GE(sum_rate(inst, res.powers), best - 1e-3);
    EXPECT_TRUE(res.monotone);
    EXPECT_LE(res.powers.minCoeff(), 1e-3);
    EXPECT_GE(res.powers.maxCoeff(), 1.0 - 1e-3);
  }
  // symmetric start on a symmetric instance cannot pick a winner: (1,1) is a KKT point
  const auto sym = wmmse_solve(inst, {500, 1e-9, WmmseInit::full_power, 0});
  EXPECT_NEAR(sym.powers(0), 1.0, 1e-9);
  EXPECT_NEAR(sym.powers(1), 1.0, 1e-9);
  EXPECT_NEAR(sum_rate(inst, sym.powers), 2.0 * std::log(12.0 / 11.0), 1e-9);
}

TEST(Wmmse, MonotoneAndBoxFeasibleOnRandomInstances) {
  for (std::size_t r = 0; r < 200; ++r) {
    Rng rng = make_rng(31, 0, r);
    const auto inst = rayleigh_instance(2 + r % 12, 1.0, 1.0, rng);
    const auto res = wmmse_solve(inst, {500, 1e-6, WmmseInit::random, r});
    EXPECT_TRUE(res.monotone);
    for (std::size_t i = 1; i < res.objective.size(); ++i)
      ASSERT_GE(res.objective[i], res.objective[i - 1] - 1e-12 * std::max(1.0, res.objective[i - 1]));
    EXPECT_TRUE((res.powers.array() >= 0.0).all() && (res.powers.array() <= 1.0).all());
  }
}

TEST(Wmmse, RelabelingPermutesTheSolution) {
  Rng rng = make_rng(37, 0);
  const auto inst = rayleigh_instance(6, 1.0, 1.0, rng);
  std::vector<Eigen::Index> perm{3, 0, 5, 1, 4, 2};
  InterferenceInstance p_inst = inst;
  for (Eigen::Index a = 0; a < 6; ++a)
    for (Eigen::Index b = 0; b < 6; ++b) p_inst.G(a, b) = inst.G(perm[a], perm[b]);
  const Vec x = wmmse_solve(inst).powers;
  const Vec y = wmmse_solve(p_inst).powers;
  for (Eigen::Index a = 0; a < 6; ++a) EXPECT_NEAR(y(a), x(perm[a]), 1e-9);
}

TEST(BinaryFraction, Extremes) {
  Vec a(4);
  a << 0.0, 1.0, 1.0, 0.0;
  EXPECT_DOUBLE_EQ(binary_fraction({a}), 1.0);
  EXPECT_DOUBLE_EQ(binary_fraction({Vec::Constant(5, 0.5)}), 0.0);
}

TEST(BinaryFraction, RayleighKTen) {
  CurveOptions opt;
  opt.k_list = {10};
  opt.realizations = 1000;
  const auto res = full_power_curve(opt);
  ASSERT_EQ(res.binary.size(), 1u);
  EXPECT_GE(res.binary[0].fraction, 0.90);
  EXPECT_EQ(res.binary[0].n, 1000u);
}

TEST(FullPowerCurve, BlocksAndEmptyBins) {
  CurveOptions opt;
  opt.realizations = 20;
  opt.g_grid = {0.5, 3.0, 60.0};
  const auto res = full_power_curve(opt);
  ASSERT_EQ(res.points.size(), 6u);
  EXPECT_EQ(res.points[0].k, 10u);
  EXPECT_EQ(res.points[3].k, 50u);
  // no Exp(1) gain near 60 in a few thousand draws
  EXPECT_FALSE(res.points[2].prob.has_value());
  EXPECT_EQ(res.points[2].count, 0u);
  for (const auto& p : res.points) {
    if (p.prob) {
      EXPECT_TRUE(*p.prob >= 0.0 && *p.prob <= 1.0);
    }
  }
}

TEST(FullPowerCurve, WeakLinksStayOffAtFifty) {
  CurveOptions opt;
  opt.k_list = {50};
  opt.realizations = 300;
  opt.g_grid = {0.5};
  const auto res = full_power_curve(opt);
  ASSERT_TRUE(res.points[0].prob);
  EXPECT_LE(*res.points[0].prob, 0.1);
}

// With i.i.d. Exp(1) cross gains the active set stays near five links, so the
// on-threshold in g climbs with K (top order statistics of K draws).
TEST(FullPowerCurve, ThresholdClimbsWithK) {
  CurveOptions opt;
  opt.k_list = {10, 80};
  opt.realizations = 200;
  opt.g_grid = {3.0};
  const auto res = full_power_curve(opt);
  ASSERT_TRUE(res.points[0].prob && res.points[1].prob);
  EXPECT_GE(*res.points[0].prob, 0.9);
  EXPECT_LT(*res.points[1].prob, *res.points[0].prob);
}

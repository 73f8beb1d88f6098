#include <boost/math/tools/roots.hpp>
#include <gtest/gtest.h>

#include "pealloc/closed_form.hpp"
#include "pealloc/theory.hpp"

using namespace pealloc;
using namespace pealloc::closed_form;
using nn::Vec;

namespace {

Vec random_gains(std::size_t k, Rng& rng) {
  Vec g(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = uniform(rng, 0.05, 5.0);
  return g;
}

}  // namespace

TEST(MinPower, SingleUser) {
  const Vec p = solve_min_power({Vec::Ones(1), 1.0, 1.0, 1.0});
  EXPECT_NEAR(p(0), 1.0, 1e-15);
}

TEST(MinPower, TwoUsers) {
  Vec g(2);
  g << 2.0, 4.0;
  const Vec p = solve_min_power({g, 1.0, 2.0, 1.0});
  EXPECT_NEAR(p(0), 1.5, 1e-14);
  EXPECT_NEAR(p(1), 0.75, 1e-14);
  const Vec q = solve_min_power({2.0 * g, 1.0, 2.0, 1.0});
  EXPECT_NEAR(q(0), 0.75, 1e-14);
  EXPECT_NEAR(q(1), 0.375, 1e-14);
}

TEST(MinPower, RejectsNonPositiveInputs) {
  Vec g(2);
  g << 1.0, 0.0;
  EXPECT_THROW(solve_min_power({g, 1.0, 1.0, 1.0}), DomainError);
  EXPECT_THROW(solve_min_power({Vec::Ones(2), -1.0, 1.0, 1.0}), DomainError);
}

TEST(EvalF, Values) {
  EXPECT_NEAR(eval_F(1.0, 1.0, 1.0), 1.0, 1e-15);
  EXPECT_NEAR(eval_F(0.5, 1.0, 1.0), 1.5, 1e-15);
  EXPECT_GT(eval_F(10.0, 1.0, 1.0), std::log(2.0));
  EXPECT_LT(eval_F(10.0, 1.0, 1.0), eval_F(1.0, 1.0, 1.0));
  EXPECT_NEAR(eval_F(1e7, 1.0, 1.0), F_asymptote(1.0, 1.0), 1e-7);
  EXPECT_THROW(eval_F(0.0, 1.0, 1.0), DomainError);
}

TEST(InvertF, RoundTrip) {
  const double b = invert_F(eval_F(1.0, 1.0, 1.0), 1.0, 1.0, 1e-12);
  EXPECT_NEAR(b, 1.0, 1e-9);
  for (double bw : {0.01, 0.3, 2.0, 40.0}) {
    const double target = eval_F(bw, 2.0, 0.5);
    EXPECT_NEAR(eval_F(invert_F(target, 2.0, 0.5), 2.0, 0.5), target, 1e-9 * std::max(1.0, target));
  }
}

// Oracle: TOMS 748 on F(B) - 2 over a bracket found by hand.
TEST(InvertF, MatchesIndependentRootFinder) {
  auto f = [](double b) { return b * (std::pow(2.0, 1.0 / b) - 1.0) - 2.0; };
  boost::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(f, 0.1, 1.0, boost::math::tools::eps_tolerance<double>(50), iters);
  const double oracle = 0.5 * (r.first + r.second);
  const double b = invert_F(2.0, 1.0, 1.0, 1e-9);
  EXPECT_NEAR(b, oracle, 1e-8);
  EXPECT_NEAR(b, 0.376, 1e-3);
}

TEST(InvertF, BelowAsymptoteIsInfeasible) {
  try {
    (void)invert_F(0.69, 1.0, 1.0);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("0.693"), std::string::npos) << e.what();
  }
}

TEST(Joint, SymmetricAndRatio) {
  const auto eq = solve_joint({Vec::Constant(4, 2.0), 1.0, 1.0, 8.0});
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_NEAR(eq.powers(k), 2.0, 1e-15);
  Vec g(2);
  g << 1.0, 3.0;
  const auto s = solve_joint({g, 1.0, 1.0, 4.0});
  EXPECT_NEAR(s.powers(0), 3.0, 1e-14);
  EXPECT_NEAR(s.powers(1), 1.0, 1e-14);
}

TEST(Joint, InfeasibleInstancePropagates) {
  EXPECT_THROW(solve_joint({Vec::Constant(3, 0.1), 1.0, 1.0, 0.1}), InfeasibleError);
}

TEST(Joint, KktResidualsOnRandomInstances) {
  Rng rng = make_rng(17, 0);
  double worst_min = 0.0;
  double worst_joint = 0.0;
  double worst_softmax = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 1 + static_cast<std::size_t>(uniform01(rng) * 20);
    const Vec g = random_gains(k, rng);
    const double s0 = uniform(rng, 0.5, 4.0);
    const double n0 = uniform(rng, 0.1, 2.0);
    const double bw = uniform(rng, 0.2, 5.0);
    const Vec p = solve_min_power({g, bw, s0, n0});
    worst_min = std::max(worst_min, rate_residual(p, g, bw, s0, n0));
    // P_max comfortably above the feasibility edge
    const double edge = F_asymptote(s0, n0) * g.cwiseInverse().sum();
    const double p_max = edge * uniform(rng, 1.5, 20.0);
    const auto sol = solve_joint({g, s0, n0, p_max}, 1e-13);
    worst_joint = std::max(worst_joint, rate_residual(sol.powers, g, sol.bandwidth, s0, n0));
    EXPECT_NEAR(sol.powers.sum(), p_max, 1e-12 * p_max);
    const Vec soft = joint_powers_via_softmax(g, p_max);
    worst_softmax = std::max(worst_softmax, ((soft - sol.powers).cwiseAbs() / p_max).maxCoeff());
  }
  EXPECT_LE(worst_min, 1e-9);
  EXPECT_LE(worst_joint, 1e-9);
  EXPECT_LE(worst_softmax, 1e-12);
}

TEST(Joint, LargeKApproximation) {
  // 8-antenna gains so that E[1/g] is finite
  Rng rng = make_rng(23, 0);
  const auto gains = theory::gamma_gains(8);
  Vec g(200);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = gains(rng);
  const double e_inv = theory::mean_inverse(gains, 400000, 5);
  const auto sol = solve_joint({g, 1.0, 1.0, 1000.0});
  double worst = 0.0;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double approx = 1000.0 / (g(k) * e_inv);
    worst = std::max(worst, std::abs(200.0 * sol.powers(k) - approx) / approx);
  }
  EXPECT_LE(worst, 0.05);
}

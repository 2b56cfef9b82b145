#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "itemper/analysis.hpp"
#include "itemper/kernels.hpp"

namespace itemper {
namespace {

constexpr double kMinP = 1e-3;

TEST(Gibbs, SingleCoordinateMixesInOneStep) {
  const auto p = gibbs_transition_matrix(1, 2);
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p(1, 0), 0.5);
  RandomStream rng(1);
  std::vector<std::uint64_t> counts(2, 0);
  for (int r = 0; r < 20000; ++r) {
    State x{static_cast<Symbol>(r % 2)};
    gibbs_step(x, 2, rng);
    ++counts[x[0]];
  }
  EXPECT_GT(chi_squared_gof(counts, std::vector<double>{0.5, 0.5}).p_value, kMinP);
}

TEST(Gibbs, UniformIsStationary) {
  const auto p = gibbs_transition_matrix(4, 2);
  const Eigen::RowVectorXd uniform = Eigen::RowVectorXd::Constant(16, 1.0 / 16.0);
  EXPECT_LT((uniform * p - uniform).cwiseAbs().maxCoeff(), 1e-15);

  std::vector<std::uint64_t> counts(16, 0);
  for (std::uint64_t r = 0; r < 50000; ++r) {
    RandomStream rng(7, r, 0, Regime::primary);
    State x(4, 0);
    for (int t = 0; t < 200; ++t) gibbs_step(x, 2, rng);
    ++counts[state_index(x, 2)];
  }
  EXPECT_GT(chi_squared_gof(counts, std::vector<double>(16, 1.0 / 16.0)).p_value, kMinP);
}

TEST(Gibbs, ConsumesExactlyTwoWordsAndReplays) {
  RandomStream a(5), b(5);
  State x(6, 0), y(6, 0);
  for (int t = 0; t < 100; ++t) {
    gibbs_step(x, 3, a);
    gibbs_step(y, 3, b);
    EXPECT_EQ(x, y);
  }
  RandomStream c(9), d(9);
  State z(6, 0);
  gibbs_step(z, 3, c);
  d.next();
  d.next();
  EXPECT_EQ(c.next(), d.next());
}

TEST(GibbsCoupled, EqualInputsStayEqualAndAgreementIsAbsorbing) {
  RandomStream rng(3);
  State a(10, 0), b(10, 0);
  for (int t = 0; t < 500; ++t) {
    gibbs_coupled_step(a, b, 2, rng);
    ASSERT_EQ(a, b);
  }
  State x(10, 0), y(10, 1);
  std::vector<bool> agreed(10, false);
  for (int t = 0; t < 500; ++t) {
    gibbs_coupled_step(x, y, 2, rng);
    for (std::size_t i = 0; i < 10; ++i) {
      if (agreed[i]) {
        ASSERT_EQ(x[i], y[i]);
      }
      agreed[i] = agreed[i] || x[i] == y[i];
    }
  }
}

TEST(GibbsCoupled, MarginalMatchesSingleStepLaw) {
  const State start{1, 0, 1};
  const auto p = gibbs_transition_matrix(3, 2);
  std::vector<double> law(8);
  for (int k = 0; k < 8; ++k) law[k] = p(static_cast<Eigen::Index>(state_index(start, 2)), k);
  std::vector<std::uint64_t> counts(8, 0);
  RandomStream rng(4);
  for (int r = 0; r < 50000; ++r) {
    State a = start, b{0, 1, 0};
    gibbs_coupled_step(a, b, 2, rng);
    ++counts[state_index(a, 2)];
  }
  EXPECT_GT(chi_squared_gof(counts, law).p_value, kMinP);
}

TEST(GibbsCoupled, CouponCollectorTail) {
  const std::size_t n = 16;
  const int pairs = 5000;
  for (double c : {1.0, 2.0}) {
    const auto horizon = static_cast<long>(std::ceil(n * std::log(n) + c * n));
    int late = 0;
    for (int r = 0; r < pairs; ++r) {
      RandomStream rng(11, r, 0, Regime::shared);
      State a(n, 0), b(n, 1);
      std::vector<bool> touched(n, false);
      std::size_t remaining = n;
      long tau = 0;
      while (remaining > 0) {
        const auto d = draw_gibbs(n, 2, rng);
        UniformGibbsKernel::apply(a, d);
        UniformGibbsKernel::apply(b, d);
        ++tau;
        if (!touched[d.coordinate]) {
          touched[d.coordinate] = true;
          --remaining;
        }
      }
      EXPECT_EQ(a, b);
      late += tau > horizon;
    }
    const double rate = static_cast<double>(late) / pairs;
    EXPECT_LE(rate, std::exp(-c) + 3.0 * binomial_sigma(std::exp(-c), pairs)) << "c=" << c;
  }
}

TEST(Metropolis, FlatTargetAcceptsEveryProposal) {
  const UniformModel model(5, 3);
  const MetropolisKernel kernel(model, 3);
  RandomStream rng(8);
  State x(5, 0);
  int held = 0, moved = 0;
  for (int t = 0; t < 20000; ++t) {
    const auto before = x;
    const auto outcome = metropolis_step(kernel, x, rng);
    ASSERT_NE(outcome, MoveOutcome::rejected);
    if (outcome == MoveOutcome::held) {
      ++held;
      EXPECT_EQ(x, before);
    } else {
      ++moved;
      int changed = 0;
      for (std::size_t i = 0; i < 5; ++i) changed += x[i] != before[i];
      EXPECT_EQ(changed, 1);
    }
  }
  EXPECT_GE(static_cast<double>(held) / 20000, 0.5 - 3.0 * binomial_sigma(0.5, 20000));
}

TEST(Metropolis, ProposalIntoNeedleIsAlwaysAccepted) {
  const State z{1, 1, 0, 1};
  const auto model = make_needle(4, 0.25, z);
  for (std::size_t level = 1; level <= 4; ++level) {
    const MetropolisKernel kernel(model, level);
    EXPECT_EQ(kernel.log_acceptance(0.0, model.statistic(z)), 0.0);
    EXPECT_LT(kernel.log_acceptance(model.statistic(z), 0.0), 0.0);
  }
}

TEST(Metropolis, DetailedBalanceOnNeedle) {
  const auto model = make_needle(4, 0.3, State{0, 1, 1, 0});
  const std::size_t level = 2;
  const auto p = metropolis_transition_matrix(model, level);
  const auto pi = tempered_distribution(model, static_cast<double>(level));
  for (int x = 0; x < 16; ++x) {
    EXPECT_NEAR(p.row(x).sum(), 1.0, 1e-14);
    EXPECT_GE(p(x, x), 0.5);
    for (int y = 0; y < 16; ++y) EXPECT_NEAR(pi.p[x] * p(x, y), pi.p[y] * p(y, x), 1e-12);
  }
}

TEST(Metropolis, SamplerMatchesTransitionMatrix) {
  const auto model = make_curie_weiss_potts(3, 3, 1.5);
  const std::size_t level = 3;
  const auto p = metropolis_transition_matrix(model, level);
  const State start{0, 0, 2};
  const auto from = static_cast<Eigen::Index>(state_index(start, 3));
  std::vector<double> law(27);
  for (int k = 0; k < 27; ++k) law[k] = p(from, k);
  const MetropolisKernel kernel(model, level);
  RandomStream rng(12);
  std::vector<std::uint64_t> counts(27, 0);
  for (int r = 0; r < 60000; ++r) {
    State x = start;
    metropolis_step(kernel, x, rng);
    ++counts[state_index(x, 3)];
  }
  EXPECT_GT(chi_squared_gof(counts, law).p_value, kMinP);
}

TEST(Metropolis, LazinessOnPeakedTarget) {
  const auto model = make_ising(cycle_graph(6), 1.2);
  const MetropolisKernel kernel(model, 6);
  RandomStream rng(2);
  State x(6, 1);
  int stayed = 0;
  const int steps = 20000;
  for (int t = 0; t < steps; ++t) {
    const auto before = x;
    metropolis_step(kernel, x, rng);
    stayed += x == before;
  }
  EXPECT_GE(static_cast<double>(stayed) / steps, 0.5 - 3.0 * binomial_sigma(0.5, steps));
}

TEST(CouponConstant, DominatesCouponCollectorHorizon) {
  for (double eps : {0.01, 0.1, 0.25, 0.5, 0.9, 1.0}) {
    const double c = coupon_constant(eps);
    for (long n = 2; n <= 1000000; ++n) {
      const double nd = static_cast<double>(n);
      const double lhs = c * nd * std::log(nd);
      const double rhs = std::ceil(nd * (std::log(nd) + std::log((nd + 1.0) / eps)));
      if (lhs < rhs) FAIL() << "eps=" << eps << " n=" << n;
    }
  }
  EXPECT_NEAR(coupon_constant(0.1), 3.0 + 2.0 * std::log(10.0), 1e-15);
}

}  // namespace
}  // namespace itemper

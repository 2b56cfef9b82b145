#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "itemper/analysis.hpp"
#include "itemper/coupling.hpp"

namespace itemper {
namespace {

constexpr double kMinP = 1e-3;

TEST(Coupling, EqualStartsStayIdentical) {
  const auto model = make_curie_weiss_potts(5, 3, 1.0);
  const auto schedule = make_schedule(model, 0.5, 0.5);
  for (std::uint64_t r = 0; r < 20; ++r) {
    const auto start = realize_start(UniformStart{}, 5, 3, 4, r);
    CoupledEngine pair(model, schedule, start, start, 4, r);
    while (pair.time() < schedule.horizon() + 20) {
      pair.step();
      ASSERT_TRUE(pair.all_agree()) << "t=" << pair.time();
    }
    for (std::size_t j = 0; j <= 5; ++j) {
      EXPECT_TRUE(pair.event_a(j));
      EXPECT_TRUE(pair.event_b(j));
    }
    EXPECT_EQ(pair.coalescence_time(), 0);
  }
}

TEST(Coupling, EventsAreNestedAndLatchedInOrder) {
  const auto model = make_needle(6, 0.25, State(6, 1));
  const auto schedule = make_schedule(model, 0.5, 0.9);
  const auto report = forgetting_experiment(model, schedule, ConstantStart{State(6, 0)}, UniformStart{}, 300, 19);
  for (const auto& p : report.pairs) {
    for (std::size_t j = 0; j <= 6; ++j) {
      EXPECT_EQ(p.b[j], p.a[j] && (j == 0 || p.b[j - 1]));
    }
  }
  EXPECT_EQ(report.at_risk[0], 300u);
}

TEST(Coupling, AgreementOnBIsGeometricallyDominated) {
  const auto model = make_needle(6, 0.25, State{0, 1, 1, 0, 1, 0});
  const auto schedule = make_schedule(model, 0.5, 0.9);
  const std::size_t pairs = 3000;
  std::vector<std::vector<int>> at_risk(7), late(7);
  const std::vector<std::int64_t> lags{1, 4, 8, 16, schedule.g};
  for (std::size_t j = 1; j <= 6; ++j) {
    at_risk[j].assign(lags.size(), 0);
    late[j].assign(lags.size(), 0);
  }
  for (std::size_t r = 0; r < pairs; ++r) {
    auto pair = make_coupled_engine(model, schedule, ConstantStart{State(6, 0)}, ConstantStart{State(6, 1)}, 23, r);
    pair.run_until(schedule.horizon());
    for (std::size_t j = 1; j <= 6; ++j) {
      if (!pair.event_b(j - 1)) continue;
      for (std::size_t k = 0; k < lags.size(); ++k) {
        ++at_risk[j][k];
        const auto first = pair.first_agreement(j);
        late[j][k] += first < 0 || first > schedule.activation(j) + lags[k];
      }
    }
  }
  for (std::size_t j = 1; j <= 6; ++j) {
    for (std::size_t k = 0; k < lags.size(); ++k) {
      if (at_risk[j][k] == 0) continue;
      const double bound = std::pow(1.0 - schedule.lambda, static_cast<double>(lags[k]));
      const double rate = static_cast<double>(late[j][k]) / at_risk[j][k];
      EXPECT_LE(rate, bound + 3.0 * binomial_sigma(bound, at_risk[j][k]) + 1e-12)
          << "j=" << j << " lag=" << lags[k];
    }
  }
}

TEST(Coupling, SidesKeepTheirUncoupledLaw) {
  const auto model = make_needle(3, 0.25, State{1, 0, 1});
  const auto schedule = make_schedule(model, 0.5, 0.6, 0.5);
  const State x0{0, 0, 0}, y0{1, 1, 1};
  const std::vector<std::int64_t> times{schedule.activation(2) + 1, schedule.horizon()};
  const std::size_t replicas = 30000;
  // counts[side][time][j]: side 0/1 coupled X/Y, 2/3 uncoupled X/Y.
  std::vector<std::vector<std::vector<std::vector<std::uint64_t>>>> counts(
      4, std::vector<std::vector<std::vector<std::uint64_t>>>(times.size(),
                                                              std::vector<std::vector<std::uint64_t>>(4, std::vector<std::uint64_t>(8, 0))));
  for (std::size_t r = 0; r < replicas; ++r) {
    auto pair = make_coupled_engine(model, schedule, ConstantStart{x0}, ConstantStart{y0}, 101, r);
    auto ex = make_engine(model, schedule, ConstantStart{x0}, 202, r);
    auto ey = make_engine(model, schedule, ConstantStart{y0}, 303, r);
    for (std::size_t k = 0; k < times.size(); ++k) {
      pair.run_until(times[k]);
      ex.run_until(times[k]);
      ey.run_until(times[k]);
      for (std::size_t j = 0; j <= 3; ++j) {
        ++counts[0][k][j][state_index(pair.x().coordinate(j), 2)];
        ++counts[1][k][j][state_index(pair.y().coordinate(j), 2)];
        ++counts[2][k][j][state_index(ex.coordinate(j), 2)];
        ++counts[3][k][j][state_index(ey.coordinate(j), 2)];
      }
    }
  }
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (std::size_t j = 0; j <= 3; ++j) {
      EXPECT_GT(chi_squared_homogeneity(counts[0][k][j], counts[2][k][j]).p_value, kMinP) << "X t=" << times[k] << " j=" << j;
      EXPECT_GT(chi_squared_homogeneity(counts[1][k][j], counts[3][k][j]).p_value, kMinP) << "Y t=" << times[k] << " j=" << j;
    }
  }
}

TEST(Coupling, SharedCrossDrawsOnlyOnB) {
  const auto model = make_needle(5, 0.25, State(5, 1));
  const auto schedule = make_schedule(model, 0.5, 0.9);
  for (std::uint64_t r = 0; r < 50; ++r) {
    auto pair = make_coupled_engine(model, schedule, UniformStart{}, UniformStart{}, 7, r);
    pair.run_until(schedule.horizon());
    for (std::size_t j = 1; j <= 5; ++j) {
      if (!pair.event_b(j - 1)) {
        EXPECT_EQ(pair.shared_cross_draws(j), 0u) << "j=" << j;
      } else {
        EXPECT_GT(pair.shared_cross_draws(j), 0u) << "j=" << j;
      }
    }
  }
}

TEST(Coupling, PerStepFailureBudgetGivesOneMinusEpsilon) {
  for (double eps : {0.01, 0.1, 0.25, 0.5, 0.9}) {
    for (std::size_t n = 1; n <= 100000; n = n * 3 + 1) {
      const double m = static_cast<double>(n + 1);
      EXPECT_GE(std::pow(1.0 - eps / m, m), 1.0 - eps);
    }
  }
}

TEST(Coupling, ForgettingReportConsistency) {
  const auto model = make_curie_weiss_potts(5, 3, 1.0);
  const auto schedule = make_schedule(model, 0.5, 0.5);
  const auto one = forgetting_experiment(model, schedule, ConstantStart{State(5, 0)}, ConstantStart{State(5, 2)}, 64, 5, 1);
  const auto many = forgetting_experiment(model, schedule, ConstantStart{State(5, 0)}, ConstantStart{State(5, 2)}, 64, 5, 4);
  ASSERT_EQ(one.pairs.size(), many.pairs.size());
  for (std::size_t r = 0; r < one.pairs.size(); ++r) {
    EXPECT_EQ(one.pairs[r].a, many.pairs[r].a);
    EXPECT_EQ(one.pairs[r].coalescence_time, many.pairs[r].coalescence_time);
  }
  EXPECT_DOUBLE_EQ(one.uncoalesced_fraction, many.uncoalesced_fraction);
  EXPECT_THROW(forgetting_experiment(model, schedule, UniformStart{}, UniformStart{}, 0, 5), std::invalid_argument);
}

}  // namespace
}  // namespace itemper

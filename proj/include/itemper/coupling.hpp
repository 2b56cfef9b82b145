#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "itemper/engine.hpp"
#include "itemper/parallel.hpp"

namespace itemper {

/// Two interacting tempering processes (X, Y) advanced in lock-step under
/// the coupling used to bound how fast starting distributions are forgotten.
///
/// Coordinate 0 uses the coupled Gibbs kernel (shared (i, B)). For j >= 1 the
/// joint move depends on B_{j-1} = {X_{t_i}^(i) = Y_{t_i}^(i) for all i < j},
/// latched at time t_{j-1}:
///  - on B_{j-1}: one shared coin; heads -> one shared proposal Z' from the
///    common history window and one shared uniform U', each side accepting
///    by its own ratio; tails -> a single local move copied to both sides if
///    they agree, independent local moves otherwise;
///  - off B_{j-1}: independent ordinary transitions.
///
/// Streams per coordinate: X uses `primary`, Y uses `secondary`, shared draws
/// use `shared`. Either side, viewed alone, is an interacting tempering
/// process with fresh randomness at every step.
template <TargetModel M>
class CoupledEngine {
 public:
  CoupledEngine(const M& model, const Schedule& schedule, std::vector<State> x0, std::vector<State> y0,
                std::uint64_t root_seed, std::uint64_t replica = 0)
      : x_(model, schedule, std::move(x0), make_streams(model.size() + 1, root_seed, replica, Regime::primary)),
        y_(model, schedule, std::move(y0), make_streams(model.size() + 1, root_seed, replica, Regime::secondary)),
        shared_(make_streams(model.size() + 1, root_seed, replica, Regime::shared)) {
    const std::size_t count = model.size() + 1;
    a_.assign(count, false);
    b_.assign(count, false);
    latched_.assign(count, false);
    first_agreement_.assign(count, -1);
    shared_draws_.assign(count, 0);
    update_agreement();
    latch();
  }

  const Engine<M>& x() const { return x_; }
  const Engine<M>& y() const { return y_; }
  std::int64_t time() const { return x_.time(); }
  std::size_t coordinates() const { return a_.size(); }

  /// Whether A_j / B_j have been decided (time >= t_j).
  bool latched(std::size_t j) const { return latched_[j]; }
  bool event_a(std::size_t j) const { return a_[j]; }
  bool event_b(std::size_t j) const { return b_[j]; }
  /// First time X^(j) = Y^(j), or -1.
  std::int64_t first_agreement(std::size_t j) const { return first_agreement_[j]; }
  /// First time the full (n+1)-vectors agreed, or -1.
  std::int64_t coalescence_time() const { return coalescence_; }
  /// Number of shared (coin, Z', U') cross draws consumed by coordinate j.
  std::uint64_t shared_cross_draws(std::size_t j) const { return shared_draws_[j]; }

  bool agree(std::size_t j) const { return x_.coordinate(j) == y_.coordinate(j); }
  bool all_agree() const {
    for (std::size_t j = 0; j < coordinates(); ++j) {
      if (!agree(j)) return false;
    }
    return true;
  }

  void step() {
    const auto& schedule = x_.schedule();
    const auto t = time();
    std::vector<bool> equal_before(coordinates());
    for (std::size_t j = 0; j < coordinates(); ++j) equal_before[j] = agree(j);

    const auto draw = draw_gibbs(x_.coordinate(0).size(), x_.model().alphabet(), shared_[0]);
    x_.apply_gibbs(draw);
    y_.apply_gibbs(draw);

    for (std::size_t j = 1; j < coordinates(); ++j) {
      if (x_.frozen(j)) continue;
      if (!latched_[j - 1]) throw std::logic_error("B_{j-1} not latched when coordinate j starts moving");
      if (!b_[j - 1]) {
        x_.advance_coordinate(j, x_.stream(j));
        y_.advance_coordinate(j, y_.stream(j));
        continue;
      }
      auto& rng = shared_[j];
      if (rng.bernoulli(schedule.v)) {
        const std::size_t window = x_.window_size(j);
        if (y_.window_size(j) != window) throw std::logic_error("history windows differ on B_{j-1}");
        const auto index = static_cast<std::size_t>(rng.index(window));
        const double u = rng.uniform();
        const auto zx = x_.history(j - 1).at(index);
        const auto zy = y_.history(j - 1).at(index);
        if (!std::equal(zx.begin(), zx.end(), zy.begin(), zy.end())) {
          throw std::logic_error("histories of coordinate " + std::to_string(j - 1) + " differ on B_{j-1}");
        }
        ++shared_draws_[j];
        x_.apply_cross(j, index, u);
        y_.apply_cross(j, index, u);
      } else if (equal_before[j]) {
        x_.apply_local(j, rng);
        y_.set_coordinate(j, x_.coordinate(j), x_.statistic(j));
      } else {
        x_.apply_local(j, x_.stream(j));
        y_.apply_local(j, y_.stream(j));
      }
    }

    x_.finish_step();
    y_.finish_step();

    for (std::size_t j = 0; j < coordinates(); ++j) {
      const bool absorbing = j == 0 || (latched_[j - 1] && b_[j - 1] && t >= schedule.activation(j));
      if (absorbing && equal_before[j] && !agree(j)) {
        throw std::logic_error("coordinate " + std::to_string(j) + " separated after agreeing on B_{j-1}");
      }
    }
    update_agreement();
    latch();
  }

  void run_until(std::int64_t t) {
    while (time() < t) step();
  }

 private:
  void update_agreement() {
    bool all = true;
    for (std::size_t j = 0; j < coordinates(); ++j) {
      const bool same = agree(j);
      if (same && first_agreement_[j] < 0) first_agreement_[j] = time();
      all = all && same;
    }
    if (all && coalescence_ < 0) coalescence_ = time();
  }

  void latch() {
    const auto& schedule = x_.schedule();
    for (std::size_t j = 0; j < coordinates(); ++j) {
      if (latched_[j] || time() < schedule.collection(j)) continue;
      a_[j] = agree(j);
      b_[j] = a_[j] && (j == 0 || b_[j - 1]);
      if (j > 0 && !latched_[j - 1]) throw std::logic_error("events latched out of order");
      if (b_[j] && j > 0 && !b_[j - 1]) throw std::logic_error("B_j not contained in B_{j-1}");
      latched_[j] = true;
    }
  }

  Engine<M> x_;
  Engine<M> y_;
  std::vector<RandomStream> shared_;
  std::vector<bool> a_, b_, latched_;
  std::vector<std::int64_t> first_agreement_;
  std::vector<std::uint64_t> shared_draws_;
  std::int64_t coalescence_ = -1;
};

template <TargetModel M>
CoupledEngine<M> make_coupled_engine(const M& model, const Schedule& schedule, const StartSpec& x_start,
                                     const StartSpec& y_start, std::uint64_t root_seed,
                                     std::uint64_t replica = 0) {
  const auto n = model.size();
  const auto q = model.alphabet();
  return CoupledEngine<M>(model, schedule,
                          realize_start(x_start, n, q, root_seed, replica, Regime::start_primary),
                          realize_start(y_start, n, q, root_seed, replica, Regime::start_secondary),
                          root_seed, replica);
}

/// Outcome of one coupled pair run to the horizon.
struct PairOutcome {
  std::uint64_t replica = 0;
  std::vector<bool> a;  // A_j
  std::vector<bool> b;  // B_j
  std::vector<std::int64_t> first_agreement;
  std::int64_t coalescence_time = -1;
  bool coalesced_at_horizon = false;
};

struct ForgettingReport {
  Schedule schedule;
  std::int64_t horizon = 0;
  std::vector<PairOutcome> pairs;
  double uncoalesced_fraction = 0.0;
  /// at_risk[j] = #B_{j-1} (all pairs for j = 0), failures[j] = #(B_{j-1} and not A_j).
  std::vector<std::size_t> at_risk;
  std::vector<std::size_t> failures;

  double failure_rate(std::size_t j) const {
    return at_risk[j] == 0 ? 0.0 : static_cast<double>(failures[j]) / static_cast<double>(at_risk[j]);
  }
};

/// Runs `replicas` coupled pairs from the two start specs up to t_n and
/// reports the uncoalesced fraction at t_n and the conditional failure rates
/// P(A_j^c | B_{j-1}).
template <TargetModel M>
ForgettingReport forgetting_experiment(const M& model, const Schedule& schedule, const StartSpec& x_start,
                                       const StartSpec& y_start, std::size_t replicas, std::uint64_t seed,
                                       unsigned threads = 1) {
  if (replicas < 1) throw std::invalid_argument("forgetting experiment needs at least one replica");
  ForgettingReport report;
  report.schedule = schedule;
  report.horizon = schedule.horizon();
  report.pairs.resize(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) {
    auto pair = make_coupled_engine(model, schedule, x_start, y_start, seed, r);
    pair.run_until(report.horizon);
    PairOutcome out;
    out.replica = r;
    for (std::size_t j = 0; j < pair.coordinates(); ++j) {
      out.a.push_back(pair.event_a(j));
      out.b.push_back(pair.event_b(j));
      out.first_agreement.push_back(pair.first_agreement(j));
    }
    out.coalescence_time = pair.coalescence_time();
    out.coalesced_at_horizon = pair.all_agree();
    report.pairs[r] = std::move(out);
  });
  const std::size_t count = model.size() + 1;
  report.at_risk.assign(count, 0);
  report.failures.assign(count, 0);
  std::size_t uncoalesced = 0;
  for (const auto& p : report.pairs) {
    uncoalesced += p.coalesced_at_horizon ? 0 : 1;
    for (std::size_t j = 0; j < count; ++j) {
      const bool risk = j == 0 || p.b[j - 1];
      if (!risk) continue;
      ++report.at_risk[j];
      if (!p.a[j]) ++report.failures[j];
    }
  }
  report.uncoalesced_fraction = static_cast<double>(uncoalesced) / static_cast<double>(replicas);
  return report;
}

}  // namespace itemper

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "itemper/kernels.hpp"
#include "itemper/models.hpp"
#include "itemper/random.hpp"
#include "itemper/state.hpp"

namespace itemper {

/// Activation and collection times of the interacting tempering process.
///
/// Coordinate j starts moving at s_j and its history is collected from t_j on:
///   s_0 = 0, t_0 = G0, s_j = G0 + (j-1) G, t_j = G0 + j G  (j >= 1),
/// with G0 = ceil(C(eps) n ln n), lambda = v e^{-beta D} and
///   G = ceil( ln((n+1)/eps) / ln(1/(1-lambda)) ).
struct Schedule {
  std::size_t n = 0;
  double epsilon = 0.0;
  double v = 0.0;
  double lambda = 0.0;
  double c_epsilon = 0.0;
  std::int64_t g0 = 0;
  std::int64_t g = 0;

  std::int64_t activation(std::size_t j) const { return j == 0 ? 0 : g0 + static_cast<std::int64_t>(j - 1) * g; }
  std::int64_t collection(std::size_t j) const { return g0 + static_cast<std::int64_t>(j) * g; }
  /// t_n = G0 + n G, after which the starting distribution is forgotten up to eps.
  std::int64_t horizon() const { return collection(n); }
  /// eps >= 1 makes the total-variation guarantee vacuous.
  bool vacuous() const { return epsilon >= 1.0; }
};

inline Schedule make_schedule(std::size_t n, double beta, double bound, double epsilon, double v,
                              std::optional<double> c_override = std::nullopt) {
  if (n < 2) throw std::invalid_argument("schedule needs n >= 2");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("interaction probability v must lie in (0, 1)");
  if (c_override && !(*c_override >= 0.0)) throw std::invalid_argument("C override must be non-negative");
  const double nd = static_cast<double>(n);
  Schedule s;
  s.n = n;
  s.epsilon = epsilon;
  s.v = v;
  s.lambda = v * std::exp(-beta * bound);
  if (!(s.lambda > 0.0)) throw std::invalid_argument("lambda = v exp(-beta D) underflows to zero");
  const double numerator = std::log((nd + 1.0) / epsilon);
  if (!(numerator > 0.0)) throw std::invalid_argument("epsilon >= n + 1 gives a non-positive burn-in G");
  s.g = static_cast<std::int64_t>(std::ceil(numerator / -std::log1p(-s.lambda)));
  s.c_epsilon = c_override.value_or(coupon_constant(epsilon));
  s.g0 = static_cast<std::int64_t>(std::ceil(s.c_epsilon * nd * std::log(nd)));
  return s;
}

template <TargetModel M>
Schedule make_schedule(const M& model, double epsilon, double v,
                       std::optional<double> c_override = std::nullopt) {
  return make_schedule(model.size(), model.beta(), model.bound(), epsilon, v, c_override);
}

/// exp{beta [S(y) - S(x)]}: the cross-temperature acceptance ratio. It does
/// not depend on the level j.
template <TargetModel M>
double cross_accept_ratio(const M& model, StateView x, StateView y) {
  return std::exp(model.beta() * (model.statistic(y) - model.statistic(x)));
}

/// Log-space acceptance test shared by single and coupled engines.
inline bool accept_cross(double beta, double s_from, double s_to, double u) {
  return std::log(u) < std::min(0.0, beta * (s_to - s_from));
}

/// Append-only record of one coordinate's states from its collection time on.
/// States are stored contiguously, n bytes each, with their statistic.
class History {
 public:
  explicit History(std::size_t n = 0) : n_(n) {}

  void push(StateView x, double stat) {
    data_.insert(data_.end(), x.begin(), x.end());
    stats_.push_back(stat);
  }

  std::size_t size() const { return stats_.size(); }
  bool empty() const { return stats_.empty(); }
  StateView at(std::size_t k) const { return StateView(data_).subspan(k * n_, n_); }
  double statistic(std::size_t k) const { return stats_[k]; }
  void reserve(std::size_t entries) {
    data_.reserve(entries * n_);
    stats_.reserve(entries);
  }

 private:
  std::size_t n_;
  std::vector<Symbol> data_;
  std::vector<double> stats_;
};

struct CoordinateCounters {
  std::uint64_t cross_attempts = 0;
  std::uint64_t cross_accepts = 0;
  std::uint64_t local_attempts = 0;
  std::uint64_t local_accepts = 0;
};

/// The (n+1)-coordinate interacting tempering process.
///
/// Per step t -> t+1, coordinates are updated in the order 0, 1, ..., n:
/// coordinate 0 by the uniform Gibbs kernel; coordinate j >= 1 stays frozen
/// while t < s_j, otherwise flips a Ber(v) coin and either proposes an entry
/// drawn uniformly from history[j-1] (times t_{j-1}..t) or makes a lazy
/// Metropolis move for pi_j. Histories are extended only after all
/// coordinates moved, so every coordinate reads time-t information only.
/// Within a coordinate the draw order is coin, proposal index, acceptance
/// uniform.
template <TargetModel M>
class Engine {
 public:
  Engine(const M& model, Schedule schedule, std::vector<State> start, std::vector<RandomStream> streams)
      : model_(&model),
        schedule_(std::move(schedule)),
        x_(std::move(start)),
        streams_(std::move(streams)) {
    const std::size_t n = model.size();
    if (schedule_.n != n) throw std::invalid_argument("schedule dimension does not match the model");
    if (x_.size() != n + 1) throw std::invalid_argument("start must provide n + 1 states");
    if (streams_.size() != n + 1) throw std::invalid_argument("engine needs n + 1 random streams");
    for (const auto& x : x_) {
      if (!valid_state(x, n, model.alphabet())) throw std::invalid_argument("start state outside the state space");
    }
    stat_.resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) stat_[j] = model.statistic(x_[j]);
    history_.assign(n + 1, History(n));
    counters_.assign(n + 1, CoordinateCounters{});
    last_proposal_.assign(n + 1, -1);
    first_mark_.assign(n + 1, -1);
    record_time();
  }

  const M& model() const { return *model_; }
  const Schedule& schedule() const { return schedule_; }
  std::int64_t time() const { return t_; }
  std::size_t coordinates() const { return x_.size(); }
  const State& coordinate(std::size_t j) const { return x_[j]; }
  double statistic(std::size_t j) const { return stat_[j]; }
  const History& history(std::size_t j) const { return history_[j]; }
  const CoordinateCounters& counters(std::size_t j) const { return counters_[j]; }
  /// Time index of the most recent cross proposal for coordinate j, or -1.
  std::int64_t last_proposal_time(std::size_t j) const { return last_proposal_[j]; }
  /// First time coordinate j sat on the model's marked state, or -1.
  std::int64_t first_mark(std::size_t j) const { return first_mark_[j]; }

  void step() {
    for (std::size_t j = 0; j < x_.size(); ++j) advance_coordinate(j, streams_[j]);
    finish_step();
  }

  void run_until(std::int64_t t) {
    while (t_ < t) step();
  }

  // Building blocks for coupled evolution. A step is a sequence of
  // per-coordinate transitions at the current time followed by finish_step().

  RandomStream& stream(std::size_t j) { return streams_[j]; }

  bool frozen(std::size_t j) const { return j > 0 && t_ < schedule_.activation(j); }

  /// Number of entries a cross proposal for coordinate j >= 1 chooses from.
  std::size_t window_size(std::size_t j) const {
    const auto& window = history_[j - 1];
    const auto expected = t_ - schedule_.collection(j - 1) + 1;
    if (window.empty() || static_cast<std::int64_t>(window.size()) != expected) {
      throw std::logic_error("cross move for coordinate " + std::to_string(j) +
                             " does not see the history window t_{j-1}..t");
    }
    return window.size();
  }

  /// Ordinary transition of coordinate j at the current time using `rng`.
  void advance_coordinate(std::size_t j, RandomStream& rng) {
    if (j == 0) {
      UniformGibbsKernel::apply(x_[0], draw_gibbs(x_[0].size(), model_->alphabet(), rng));
      stat_[0] = model_->statistic(x_[0]);
      return;
    }
    if (frozen(j)) return;
    if (rng.bernoulli(schedule_.v)) {
      const auto index = static_cast<std::size_t>(rng.index(window_size(j)));
      const double u = rng.uniform();
      apply_cross(j, index, u);
    } else {
      apply_local(j, rng);
    }
  }

  void apply_gibbs(const GibbsDraw& draw) {
    UniformGibbsKernel::apply(x_[0], draw);
    stat_[0] = model_->statistic(x_[0]);
  }

  /// Cross move of coordinate j with proposal history[j-1][index] and uniform u.
  bool apply_cross(std::size_t j, std::size_t index, double u) {
    const auto& window = history_[j - 1];
    ++counters_[j].cross_attempts;
    last_proposal_[j] = schedule_.collection(j - 1) + static_cast<std::int64_t>(index);
    const double proposed = window.statistic(index);
    if (!accept_cross(model_->beta(), stat_[j], proposed, u)) return false;
    const auto y = window.at(index);
    std::copy(y.begin(), y.end(), x_[j].begin());
    stat_[j] = proposed;
    ++counters_[j].cross_accepts;
    return true;
  }

  MoveOutcome apply_local(std::size_t j, RandomStream& rng) {
    ++counters_[j].local_attempts;
    const auto outcome = MetropolisKernel<M>(*model_, j).step(x_[j], stat_[j], rng);
    if (outcome == MoveOutcome::accepted) ++counters_[j].local_accepts;
    return outcome;
  }

  void set_coordinate(std::size_t j, const State& x, double stat) {
    x_[j] = x;
    stat_[j] = stat;
  }

  void finish_step() {
    ++t_;
    record_time();
  }

 private:
  void record_time() {
    for (std::size_t j = 0; j < x_.size(); ++j) {
      if (t_ >= schedule_.collection(j)) history_[j].push(x_[j], stat_[j]);
      if constexpr (MarkedModel<M>) {
        if (first_mark_[j] < 0 && model_->is_marked(x_[j])) first_mark_[j] = t_;
      }
    }
  }

  const M* model_;
  Schedule schedule_;
  std::vector<State> x_;
  std::vector<double> stat_;
  std::vector<History> history_;
  std::vector<RandomStream> streams_;
  std::vector<CoordinateCounters> counters_;
  std::vector<std::int64_t> last_proposal_;
  std::vector<std::int64_t> first_mark_;
  std::int64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Start specifications

/// Every coordinate drawn independently and uniformly from the state space.
struct UniformStart {};
/// The same state in all n + 1 coordinates.
struct ConstantStart {
  State state;
};
/// One explicit state per coordinate.
struct PerCoordinateStart {
  std::vector<State> states;
};
using StartSpec = std::variant<UniformStart, ConstantStart, PerCoordinateStart>;

/// Materializes a start spec. Uniform starts draw coordinate j from the
/// substream (root, replica, j, regime).
inline std::vector<State> realize_start(const StartSpec& spec, std::size_t n, unsigned q,
                                        std::uint64_t root, std::uint64_t replica,
                                        Regime regime = Regime::start_primary) {
  struct Visitor {
    std::size_t n;
    unsigned q;
    std::uint64_t root, replica;
    Regime regime;
    std::vector<State> operator()(const UniformStart&) const {
      std::vector<State> out(n + 1, State(n));
      for (std::size_t j = 0; j <= n; ++j) {
        RandomStream rng(root, replica, j, regime);
        for (auto& s : out[j]) s = static_cast<Symbol>(rng.index(q));
      }
      return out;
    }
    std::vector<State> operator()(const ConstantStart& c) const {
      if (!valid_state(c.state, n, q)) throw std::invalid_argument("start state outside the state space");
      return std::vector<State>(n + 1, c.state);
    }
    std::vector<State> operator()(const PerCoordinateStart& p) const {
      if (p.states.size() != n + 1) throw std::invalid_argument("per-coordinate start needs n + 1 states");
      for (const auto& x : p.states) {
        if (!valid_state(x, n, q)) throw std::invalid_argument("start state outside the state space");
      }
      return p.states;
    }
  };
  return std::visit(Visitor{n, q, root, replica, regime}, spec);
}

inline std::vector<RandomStream> make_streams(std::size_t count, std::uint64_t root, std::uint64_t replica,
                                              Regime regime) {
  std::vector<RandomStream> streams;
  streams.reserve(count);
  for (std::size_t j = 0; j < count; ++j) streams.emplace_back(root, replica, j, regime);
  return streams;
}

template <TargetModel M>
Engine<M> make_engine(const M& model, const Schedule& schedule, const StartSpec& start,
                      std::uint64_t root_seed, std::uint64_t replica = 0) {
  const std::size_t n = model.size();
  return Engine<M>(model, schedule, realize_start(start, n, model.alphabet(), root_seed, replica),
                   make_streams(n + 1, root_seed, replica, Regime::primary));
}

// ---------------------------------------------------------------------------
// Observation and run records

enum class ObserveMode { statistic, states };

/// Which (t, j) pairs a run records. Times are either the explicit `times`
/// list or every `stride`-th step (always including 0).
struct ObservationPlan {
  ObserveMode mode = ObserveMode::statistic;
  std::vector<std::size_t> coordinates;  // empty: all coordinates
  std::int64_t stride = 1;
  std::vector<std::int64_t> times;
  std::uint64_t state_cap = kDefaultEnumerationCap;

  bool observes_time(std::int64_t t) const {
    if (!times.empty()) return std::binary_search(times.begin(), times.end(), t);
    return t % stride == 0;
  }
};

struct Observation {
  std::int64_t t = 0;
  std::uint32_t coordinate = 0;
  double statistic = 0.0;
  bool needle_hit = false;
  std::uint64_t cross_accepts = 0;
  std::optional<std::uint64_t> state;

  bool operator==(const Observation&) const = default;
};

struct RunRecord {
  std::uint64_t root_seed = 0;
  std::uint64_t replica = 0;
  Schedule schedule;
  std::int64_t horizon = 0;
  std::vector<Observation> observations;
  std::vector<CoordinateCounters> counters;
  /// First time each coordinate visited the marked state (-1: never).
  std::vector<std::int64_t> first_mark;

  /// Observations of one coordinate in time order.
  std::vector<Observation> trajectory(std::size_t j) const {
    std::vector<Observation> out;
    for (const auto& o : observations) {
      if (o.coordinate == j) out.push_back(o);
    }
    return out;
  }
};

/// Normalizes a plan against a model: sorts times, resolves the coordinate
/// list and enforces the state-storage cap.
template <TargetModel M>
ObservationPlan resolve_plan(const M& model, ObservationPlan plan) {
  const std::size_t n = model.size();
  if (plan.stride < 1) throw std::invalid_argument("observation stride must be >= 1");
  if (plan.coordinates.empty()) {
    for (std::size_t j = 0; j <= n; ++j) plan.coordinates.push_back(j);
  }
  for (auto j : plan.coordinates) {
    if (j > n) throw std::invalid_argument("observed coordinate exceeds n");
  }
  std::sort(plan.times.begin(), plan.times.end());
  plan.times.erase(std::unique(plan.times.begin(), plan.times.end()), plan.times.end());
  if (plan.mode == ObserveMode::states && space_size(n, model.alphabet()) > plan.state_cap) {
    throw GuardError("full-state observation needs q^n <= " + std::to_string(plan.state_cap) +
                     "; use statistic observation for this model");
  }
  return plan;
}

template <TargetModel M>
void observe(const Engine<M>& engine, const ObservationPlan& plan, RunRecord& record) {
  const auto t = engine.time();
  if (!plan.observes_time(t)) return;
  for (auto j : plan.coordinates) {
    Observation o;
    o.t = t;
    o.coordinate = static_cast<std::uint32_t>(j);
    o.statistic = engine.statistic(j);
    o.needle_hit = is_marked(engine.model(), engine.coordinate(j));
    o.cross_accepts = engine.counters(j).cross_accepts;
    if (plan.mode == ObserveMode::states) {
      o.state = state_index(engine.coordinate(j), engine.model().alphabet());
    }
    record.observations.push_back(std::move(o));
  }
}

/// Runs one replica for `steps` steps and records the plan's observations at
/// times 0..steps. Deterministic in (root_seed, replica).
template <TargetModel M>
RunRecord run(const M& model, const Schedule& schedule, const StartSpec& start, std::int64_t steps,
              const ObservationPlan& plan, std::uint64_t root_seed, std::uint64_t replica = 0) {
  if (steps < 0) throw std::invalid_argument("run length T must be non-negative");
  const auto resolved = resolve_plan(model, plan);
  auto engine = make_engine(model, schedule, start, root_seed, replica);
  RunRecord record;
  record.root_seed = root_seed;
  record.replica = replica;
  record.schedule = schedule;
  record.horizon = steps;
  observe(engine, resolved, record);
  while (engine.time() < steps) {
    engine.step();
    observe(engine, resolved, record);
  }
  for (std::size_t j = 0; j < engine.coordinates(); ++j) {
    record.counters.push_back(engine.counters(j));
    record.first_mark.push_back(engine.first_mark(j));
  }
  return record;
}

}  // namespace itemper

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "itemper/models.hpp"
#include "itemper/random.hpp"
#include "itemper/state.hpp"

namespace itemper {

/// C(eps) = 3 + 2 ln(1/eps): the burn-in constant that makes the coupled
/// Gibbs sampler on [q]^n agree with probability >= 1 - eps/(n+1) after
/// C(eps) n ln n steps.
inline double coupon_constant(double epsilon) { return 3.0 + 2.0 * std::log(1.0 / epsilon); }

/// One random-scan update: coordinate index first, then the new symbol.
struct GibbsDraw {
  std::size_t coordinate;
  Symbol symbol;
};

inline GibbsDraw draw_gibbs(std::size_t n, unsigned q, RandomStream& rng) {
  const auto i = static_cast<std::size_t>(rng.index(n));
  const auto b = static_cast<Symbol>(rng.index(q));
  return {i, b};
}

/// Gibbs sampler for Uniform({0..q-1}^n): pick a coordinate and refresh it
/// with a uniform symbol. Consumes exactly two words per step.
class UniformGibbsKernel {
 public:
  UniformGibbsKernel(std::size_t n, unsigned q) : n_(n), q_(q) {
    if (n == 0 || q < 2) throw std::invalid_argument("UniformGibbsKernel needs n >= 1, q >= 2");
  }

  std::size_t size() const { return n_; }
  unsigned alphabet() const { return q_; }

  void step(State& x, RandomStream& rng) const { apply(x, draw_gibbs(n_, q_, rng)); }

  /// Same (i, B) for both states; coordinate agreement is absorbing.
  void coupled_step(State& a, State& b, RandomStream& rng) const {
    const auto d = draw_gibbs(n_, q_, rng);
    apply(a, d);
    apply(b, d);
  }

  static void apply(State& x, const GibbsDraw& d) { x[d.coordinate] = d.symbol; }

 private:
  std::size_t n_;
  unsigned q_;
};

inline void gibbs_step(State& x, unsigned q, RandomStream& rng) {
  UniformGibbsKernel(x.size(), q).step(x, rng);
}

inline void gibbs_coupled_step(State& a, State& b, unsigned q, RandomStream& rng) {
  UniformGibbsKernel(a.size(), q).coupled_step(a, b, rng);
}

enum class MoveOutcome { held, accepted, rejected };

/// Lazy random-walk Metropolis for pi_j on the Hamming graph.
///
/// Draw order: laziness coin, coordinate, replacement symbol (one of the q-1
/// other symbols), acceptance uniform. A held step consumes only the coin.
/// The graph is regular so the degree terms cancel and a move is accepted
/// iff ln U < min(0, j beta (S(y) - S(x))).
template <TargetModel M>
class MetropolisKernel {
 public:
  MetropolisKernel(const M& model, std::size_t level) : model_(&model), level_(level) {
    if (level == 0) throw std::invalid_argument("Metropolis level must be >= 1");
  }

  std::size_t level() const { return level_; }

  double log_acceptance(double s_from, double s_to) const {
    return std::min(0.0, static_cast<double>(level_) * model_->beta() * (s_to - s_from));
  }

  /// `stat` must equal S(x) on entry and is kept in sync.
  MoveOutcome step(State& x, double& stat, RandomStream& rng) const {
    if (rng.uniform() < 0.5) return MoveOutcome::held;
    const auto i = static_cast<std::size_t>(rng.index(x.size()));
    const auto r = static_cast<Symbol>(rng.index(model_->alphabet() - 1));
    const Symbol old = x[i];
    x[i] = r < old ? r : static_cast<Symbol>(r + 1);
    const double proposed = model_->statistic(x);
    const double u = rng.uniform();
    if (std::log(u) < log_acceptance(stat, proposed)) {
      stat = proposed;
      return MoveOutcome::accepted;
    }
    x[i] = old;
    return MoveOutcome::rejected;
  }

  MoveOutcome step(State& x, RandomStream& rng) const {
    double stat = model_->statistic(x);
    return step(x, stat, rng);
  }

 private:
  const M* model_;
  std::size_t level_;
};

template <TargetModel M>
MoveOutcome metropolis_step(const MetropolisKernel<M>& kernel, State& x, RandomStream& rng) {
  return kernel.step(x, rng);
}

}  // namespace itemper

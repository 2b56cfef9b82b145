#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "itemper/engine.hpp"
#include "itemper/kernels.hpp"
#include "itemper/models.hpp"
#include "itemper/state.hpp"

namespace itemper {

// ---------------------------------------------------------------------------
// Total variation

/// (1/2) sum |p - q| over a common support.
inline double tv_exact(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv_exact: tables have different supports");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

/// TV lower bound from the event A = X \ {z}: pi(z) - P(X = z), clamped at 0.
inline double tv_lower_bound_event(double hit_rate, double pi_z) {
  if (hit_rate < 0.0 || hit_rate > 1.0 || pi_z < 0.0 || pi_z > 1.0) {
    throw std::invalid_argument("tv_lower_bound_event: arguments must lie in [0, 1]");
  }
  return std::max(0.0, pi_z - hit_rate);
}

// ---------------------------------------------------------------------------
// Binomial and chi-squared helpers

inline double binomial_sigma(double p, std::size_t trials) {
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(trials));
}

/// Upper end of the Wilson score interval with z standard errors.
inline double wilson_upper(std::size_t successes, std::size_t trials, double z) {
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = p + z2 / (2.0 * n);
  const double spread = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return std::min(1.0, (centre + spread) / (1.0 + z2 / n));
}

struct ChiSquaredResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
};

inline double chi_squared_survival(double statistic, std::size_t dof) {
  if (dof == 0) return 1.0;
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * static_cast<double>(dof), 0.5 * statistic);
}

/// Goodness of fit of observed counts to cell probabilities.
inline ChiSquaredResult chi_squared_gof(std::span<const std::uint64_t> counts, std::span<const double> probs) {
  if (counts.size() != probs.size()) throw std::invalid_argument("chi_squared_gof: size mismatch");
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  ChiSquaredResult r;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expected = total * probs[i];
    if (expected <= 0.0) {
      if (counts[i] > 0) r.statistic = std::numeric_limits<double>::infinity();
      continue;
    }
    const double diff = static_cast<double>(counts[i]) - expected;
    r.statistic += diff * diff / expected;
    ++cells;
  }
  r.dof = cells > 0 ? cells - 1 : 0;
  r.p_value = std::isinf(r.statistic) ? 0.0 : chi_squared_survival(r.statistic, r.dof);
  return r;
}

/// Two-sample homogeneity test on a 2 x k contingency table.
inline ChiSquaredResult chi_squared_homogeneity(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("chi_squared_homogeneity: size mismatch");
  double na = 0.0, nb = 0.0;
  for (auto c : a) na += static_cast<double>(c);
  for (auto c : b) nb += static_cast<double>(c);
  const double total = na + nb;
  ChiSquaredResult r;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double column = static_cast<double>(a[i] + b[i]);
    if (column == 0.0) continue;
    const double ea = na * column / total;
    const double eb = nb * column / total;
    r.statistic += std::pow(static_cast<double>(a[i]) - ea, 2) / ea + std::pow(static_cast<double>(b[i]) - eb, 2) / eb;
    ++cells;
  }
  r.dof = cells > 0 ? cells - 1 : 0;
  r.p_value = chi_squared_survival(r.statistic, r.dof);
  return r;
}

// ---------------------------------------------------------------------------
// Empirical distributions

/// Counts over an enumerated space (states indexed by state_index).
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::size_t cells) : counts_(cells, 0) {}

  void add(std::uint64_t cell, std::uint64_t weight = 1) {
    if (cell >= counts_.size()) throw std::out_of_range("EmpiricalDistribution: cell out of range");
    counts_[cell] += weight;
    total_ += weight;
  }

  std::uint64_t total() const { return total_; }
  std::span<const std::uint64_t> counts() const { return counts_; }

  std::vector<double> probabilities() const {
    std::vector<double> p(counts_.size(), 0.0);
    if (total_ == 0) return p;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
    return p;
  }

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

struct UniformityResult {
  ChiSquaredResult test;
  std::size_t samples = 0;
  /// Fewer than 100 samples per cell.
  bool few_samples = false;
};

/// Chi-squared test of the time-t marginal of coordinate j across replicas
/// against the uniform distribution. Records must carry state observations.
inline UniformityResult uniformity_test(std::span<const RunRecord> records, std::size_t coordinate, std::int64_t t,
                                        std::size_t n, unsigned q) {
  const std::uint64_t cells = space_size(n, q);
  if (cells > kDefaultEnumerationCap) throw GuardError("uniformity_test: state space too large");
  EmpiricalDistribution empirical(cells);
  for (const auto& rec : records) {
    for (const auto& o : rec.observations) {
      if (o.t == t && o.coordinate == coordinate) {
        if (!o.state) throw std::invalid_argument("uniformity_test: record has no state observations");
        empirical.add(*o.state);
      }
    }
  }
  UniformityResult r;
  r.samples = empirical.total();
  if (r.samples == 0) throw std::invalid_argument("uniformity_test: no observations at the requested (t, j)");
  const std::vector<double> uniform(cells, 1.0 / static_cast<double>(cells));
  r.test = chi_squared_gof(empirical.counts(), uniform);
  r.few_samples = r.samples < 100 * cells;
  return r;
}

// ---------------------------------------------------------------------------
// Exact transition matrices and d(t), d_bar(t)

inline constexpr std::uint64_t kMatrixStateCap = std::uint64_t{1} << 12;

inline std::size_t checked_matrix_size(std::size_t n, unsigned q) {
  const auto size = space_size(n, q);
  if (size > kMatrixStateCap) throw GuardError("exact matrix computations are limited to 4096 states");
  return static_cast<std::size_t>(size);
}

/// Transition matrix of the uniform Gibbs kernel P^(0) on {0..q-1}^n.
inline Eigen::MatrixXd gibbs_transition_matrix(std::size_t n, unsigned q) {
  const std::size_t size = checked_matrix_size(n, q);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
  const double w = 1.0 / (static_cast<double>(n) * q);
  for (std::size_t from = 0; from < size; ++from) {
    State x = state_from_index(from, n, q);
    for (std::size_t i = 0; i < n; ++i) {
      const Symbol old = x[i];
      for (unsigned b = 0; b < q; ++b) {
        x[i] = static_cast<Symbol>(b);
        p(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(state_index(x, q))) += w;
      }
      x[i] = old;
    }
  }
  return p;
}

/// Transition matrix of the lazy Metropolis kernel for pi_level.
template <TargetModel M>
Eigen::MatrixXd metropolis_transition_matrix(const M& model, std::size_t level) {
  const std::size_t n = model.size();
  const unsigned q = model.alphabet();
  const std::size_t size = checked_matrix_size(n, q);
  MetropolisKernel<M> kernel(model, level);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
  const double w = 0.5 / (static_cast<double>(n) * (q - 1));
  for (std::size_t from = 0; from < size; ++from) {
    State x = state_from_index(from, n, q);
    const double s = model.statistic(x);
    double stay = 0.5;
    for (std::size_t i = 0; i < n; ++i) {
      const Symbol old = x[i];
      for (unsigned b = 0; b < q; ++b) {
        if (b == old) continue;
        x[i] = static_cast<Symbol>(b);
        const double a = std::exp(kernel.log_acceptance(s, model.statistic(x)));
        p(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(state_index(x, q))) += w * a;
        stay += w * (1.0 - a);
      }
      x[i] = old;
    }
    p(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(from)) += stay;
  }
  return p;
}

struct MixingDistances {
  std::int64_t t = 0;
  double d = 0.0;     // max_x TV(P^t(x, .), pi)
  double d_bar = 0.0; // max_{x,y} TV(P^t(x, .), P^t(y, .))
};

/// d(t) and d_bar(t) for t = 0..steps by repeated multiplication.
inline std::vector<MixingDistances> d_and_dbar(const Eigen::MatrixXd& kernel, std::span<const double> pi,
                                               std::int64_t steps) {
  const auto size = kernel.rows();
  if (kernel.cols() != size || static_cast<std::size_t>(size) != pi.size()) {
    throw std::invalid_argument("d_and_dbar: kernel and pi dimensions differ");
  }
  if (static_cast<std::uint64_t>(size) > kMatrixStateCap) throw GuardError("d_and_dbar: space too large");
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(size, size);
  std::vector<MixingDistances> out;
  out.reserve(static_cast<std::size_t>(steps + 1));
  for (std::int64_t t = 0; t <= steps; ++t) {
    MixingDistances m{t, 0.0, 0.0};
    for (Eigen::Index x = 0; x < size; ++x) {
      double to_pi = 0.0;
      for (Eigen::Index k = 0; k < size; ++k) to_pi += std::abs(power(x, k) - pi[static_cast<std::size_t>(k)]);
      m.d = std::max(m.d, 0.5 * to_pi);
      for (Eigen::Index y = x + 1; y < size; ++y) {
        m.d_bar = std::max(m.d_bar, 0.5 * (power.row(x) - power.row(y)).cwiseAbs().sum());
      }
    }
    out.push_back(m);
    power = power * kernel;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Estimation and diagnostics

/// (1/t) sum_{s=B+1}^{B+t} h(Y_s) with t = len - B - 1, i.e. everything after
/// the burn-in index B.
template <class T, class H>
double mc_estimate(std::span<const T> trajectory, H&& h, std::size_t burnin) {
  if (burnin + 1 >= trajectory.size()) throw std::invalid_argument("mc_estimate: burn-in leaves no samples");
  double sum = 0.0;
  for (std::size_t s = burnin + 1; s < trajectory.size(); ++s) sum += h(trajectory[s]);
  return sum / static_cast<double>(trajectory.size() - burnin - 1);
}

inline double mc_estimate(std::span<const double> trajectory, std::size_t burnin) {
  return mc_estimate(trajectory, [](double v) { return v; }, burnin);
}

/// Estimate from the coordinate-n statistic trajectory of a run record.
/// The record must observe coordinate n at every step.
template <class H>
double mc_estimate(const RunRecord& record, H&& h, std::size_t burnin) {
  const auto traj = record.trajectory(record.schedule.n);
  return mc_estimate(std::span<const Observation>(traj), std::forward<H>(h), burnin);
}

/// Inclusive range of time indices [begin, end].
struct Window {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - begin + 1; }
};

struct DiagnosticReport {
  Window window;
  std::vector<double> means;
  std::vector<double> variances;  // per process, divisor L - 1
  double within = 0.0;            // W: average of the per-process variances
  double between = 0.0;           // B: L/(m-1) sum (mean_i - grand mean)^2
  double mixture_variance = 0.0;  // V = ((L-1)/L) W + B/L
  double psrf = 1.0;              // sqrt(V / ((L-1)/L W))
  bool infinite = false;          // W = 0 with unequal means
};

/// Between/within potential scale reduction over m >= 2 sequences.
///
/// The ratio compares the pooled variance estimate V with the average
/// within-process variance taken with divisor L, so it is exactly 1 when all
/// process means agree (B = 0) and it is invariant under a common affine map.
/// Identical constant sequences give 1; constants with different values give
/// an infinite ratio, flagged in `infinite`.
inline DiagnosticReport psrf(std::span<const std::span<const double>> processes, Window window) {
  const std::size_t m = processes.size();
  if (m < 2) throw std::invalid_argument("psrf needs at least two processes");
  if (window.end < window.begin || window.length() < 2) throw std::invalid_argument("psrf window must have length >= 2");
  for (const auto& p : processes) {
    if (p.size() <= window.end) throw std::invalid_argument("psrf window exceeds a process length");
  }
  const double len = static_cast<double>(window.length());
  DiagnosticReport r;
  r.window = window;
  double grand = 0.0;
  for (const auto& p : processes) {
    double mean = 0.0;
    for (std::size_t s = window.begin; s <= window.end; ++s) mean += p[s];
    mean /= len;
    double var = 0.0;
    for (std::size_t s = window.begin; s <= window.end; ++s) var += (p[s] - mean) * (p[s] - mean);
    var /= (len - 1.0);
    r.means.push_back(mean);
    r.variances.push_back(var);
    r.within += var;
    grand += mean;
  }
  r.within /= static_cast<double>(m);
  grand /= static_cast<double>(m);
  // Equal means are detected exactly; averaging them can leave rounding noise.
  const bool equal_means = std::all_of(r.means.begin(), r.means.end(), [&](double v) { return v == r.means[0]; });
  double spread = 0.0;
  if (!equal_means) {
    for (double mean : r.means) spread += (mean - grand) * (mean - grand);
  }
  r.between = len * spread / static_cast<double>(m - 1);
  r.mixture_variance = (len - 1.0) / len * r.within + r.between / len;
  const double within_pop = (len - 1.0) / len * r.within;
  const bool no_between = spread == 0.0;
  if (within_pop <= 0.0) {
    r.infinite = !no_between;
    r.psrf = r.infinite ? std::numeric_limits<double>::infinity() : 1.0;
  } else {
    r.psrf = std::sqrt(r.mixture_variance / within_pop);
  }
  return r;
}

inline DiagnosticReport psrf(const std::vector<std::vector<double>>& processes, Window window) {
  std::vector<std::span<const double>> views(processes.begin(), processes.end());
  return psrf(std::span<const std::span<const double>>(views), window);
}

}  // namespace itemper

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "itemper/graph.hpp"
#include "itemper/random.hpp"
#include "itemper/state.hpp"

namespace itemper {

/// A target of the form pi(x) = exp{n * beta * S(x)} / Z on {0..q-1}^n with
/// 0 <= S(x) <= D. Everything the samplers need is expressed through S, so no
/// normalizing constant is ever evaluated outside of exact enumeration.
template <class M>
concept TargetModel = requires(const M& m, StateView x) {
  { m.size() } -> std::convertible_to<std::size_t>;
  { m.alphabet() } -> std::convertible_to<unsigned>;
  { m.beta() } -> std::convertible_to<double>;
  { m.bound() } -> std::convertible_to<double>;
  { m.statistic(x) } -> std::convertible_to<double>;
  { m.name() } -> std::convertible_to<std::string_view>;
};

/// Models with a distinguished state (the needle) that runs can flag.
template <class M>
concept MarkedModel = TargetModel<M> && requires(const M& m, StateView x) {
  { m.is_marked(x) } -> std::convertible_to<bool>;
};

template <TargetModel M>
bool is_marked(const M& model, StateView x) {
  if constexpr (MarkedModel<M>) {
    return model.is_marked(x);
  } else {
    return false;
  }
}

/// Shared metadata of every model. `shift` is the constant added to the raw
/// per-site energy so that S is non-negative; it cancels in every ratio.
class ModelBase {
 public:
  std::size_t size() const { return n_; }
  unsigned alphabet() const { return q_; }
  double beta() const { return beta_; }
  double bound() const { return bound_; }
  double shift() const { return shift_; }

 protected:
  ModelBase(std::size_t n, unsigned q, double beta) : n_(n), q_(q), beta_(beta) {
    if (n == 0) throw std::invalid_argument("model dimension n must be positive");
    if (q < 2 || q > 256) throw std::invalid_argument("alphabet size q must be in [2, 256]");
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
      throw std::invalid_argument("beta must be finite and non-negative");
    }
  }

  std::size_t n_;
  unsigned q_;
  double beta_;
  double bound_ = 0.0;
  double shift_ = 0.0;
};

namespace detail {

inline void require_graph(const Graph& g) {
  if (g.vertices == 0) throw std::invalid_argument("graph has no vertices");
  g.validate();
}

}  // namespace detail

/// Uniform distribution on {0..q-1}^n (S identically zero).
class UniformModel : public ModelBase {
 public:
  UniformModel(std::size_t n, unsigned q) : ModelBase(n, q, 1.0) {}
  static constexpr std::string_view name() { return "uniform"; }
  double statistic(StateView) const { return 0.0; }
};

/// Ising model exp{beta * (sum_{v~w} s_v s_w + h * sum_v s_v)}.
///
/// S = (sum_{v~w} s_v s_w + h sum_v s_v + |E| + |h| n) / n, so S >= 0 and
/// D = 2|E|/n + 2|h|. The shift equals the minimum whenever the graph is
/// bipartite and h = 0.
class IsingModel : public ModelBase {
 public:
  IsingModel(Graph graph, double beta, double field = 0.0)
      : ModelBase(graph.vertices, 2, beta), graph_(std::move(graph)), field_(field) {
    detail::require_graph(graph_);
    const double n = static_cast<double>(n_);
    const double edges = static_cast<double>(graph_.edges.size());
    offset_ = edges + std::abs(field_) * n;
    shift_ = offset_ / n;
    bound_ = 2.0 * offset_ / n;
  }

  static constexpr std::string_view name() { return "ising"; }
  const Graph& graph() const { return graph_; }
  double field() const { return field_; }

  double interaction_sum(StateView x) const {
    long sum = 0;
    for (const auto& e : graph_.edges) sum += spin(x[e.u]) * spin(x[e.v]);
    return static_cast<double>(sum);
  }

  double magnetization(StateView x) const {
    long sum = 0;
    for (Symbol s : x) sum += spin(s);
    return static_cast<double>(sum);
  }

  double statistic(StateView x) const {
    const double raw = interaction_sum(x) + (field_ != 0.0 ? field_ * magnetization(x) : 0.0);
    return std::max(0.0, (raw + offset_) / static_cast<double>(n_));
  }

 private:
  Graph graph_;
  double field_;
  double offset_ = 0.0;
};

/// Potts model exp{beta * sum_{u~v} 1{s_u = s_v}} on a bounded-degree graph,
/// S = n^-1 * (number of monochromatic edges), D = d/2 for max degree d.
class PottsModel : public ModelBase {
 public:
  PottsModel(Graph graph, unsigned q, double beta)
      : ModelBase(graph.vertices, q, beta), graph_(std::move(graph)) {
    detail::require_graph(graph_);
    bound_ = static_cast<double>(graph_.max_degree()) / 2.0;
  }

  static constexpr std::string_view name() { return "potts"; }
  const Graph& graph() const { return graph_; }

  std::size_t agreeing_edges(StateView x) const {
    std::size_t count = 0;
    for (const auto& e : graph_.edges) count += (x[e.u] == x[e.v]);
    return count;
  }

  double statistic(StateView x) const {
    return static_cast<double>(agreeing_edges(x)) / static_cast<double>(n_);
  }

 private:
  Graph graph_;
};

/// Mean-field Potts model exp{(beta/n) sum_{v,w} 1{s_v = s_w}} where the sum
/// runs over all ordered pairs including v = w. S = n^-2 * sum, D = 1.
class CurieWeissPottsModel : public ModelBase {
 public:
  CurieWeissPottsModel(std::size_t n, unsigned q, double beta) : ModelBase(n, q, beta) {
    bound_ = 1.0;
  }

  static constexpr std::string_view name() { return "curie_weiss_potts"; }

  double statistic(StateView x) const {
    std::vector<std::size_t> counts(q_, 0);
    for (Symbol s : x) ++counts[s];
    double agree = 0.0;
    for (auto c : counts) agree += static_cast<double>(c) * static_cast<double>(c);
    const double n = static_cast<double>(n_);
    return agree / (n * n);
  }
};

/// Edwards-Anderson spin glass exp{beta * sum_{v~w} J_vw s_v s_w} with
/// quenched Rademacher couplings drawn from a dedicated disorder seed.
/// S = (sum J s s + |E|) / n, D = 2|E|/n.
class SpinGlassModel : public ModelBase {
 public:
  SpinGlassModel(Graph graph, double beta, std::uint64_t disorder_seed)
      : SpinGlassModel(graph, beta, draw_couplings(graph.edges.size(), disorder_seed)) {
    seed_ = disorder_seed;
  }

  /// Explicit couplings, each +1 or -1, in edge-list order.
  SpinGlassModel(Graph graph, double beta, std::vector<int> couplings)
      : ModelBase(graph.vertices, 2, beta),
        graph_(std::move(graph)),
        couplings_(std::move(couplings)) {
    detail::require_graph(graph_);
    if (couplings_.size() != graph_.edges.size()) {
      throw std::invalid_argument("need exactly one coupling per edge");
    }
    for (int j : couplings_) {
      if (j != 1 && j != -1) throw std::invalid_argument("couplings must be +1 or -1");
    }
    const double n = static_cast<double>(n_);
    const double edges = static_cast<double>(graph_.edges.size());
    shift_ = edges / n;
    bound_ = 2.0 * edges / n;
  }

  static std::vector<int> draw_couplings(std::size_t edges, std::uint64_t seed) {
    RandomStream rng(seed);
    std::vector<int> j(edges);
    for (auto& c : j) c = rng.bernoulli(0.5) ? 1 : -1;
    return j;
  }

  static constexpr std::string_view name() { return "spin_glass"; }
  const Graph& graph() const { return graph_; }
  const std::vector<int>& couplings() const { return couplings_; }
  std::uint64_t disorder_seed() const { return seed_; }

  double interaction_sum(StateView x) const {
    long sum = 0;
    for (std::size_t k = 0; k < graph_.edges.size(); ++k) {
      const auto& e = graph_.edges[k];
      sum += couplings_[k] * spin(x[e.u]) * spin(x[e.v]);
    }
    return static_cast<double>(sum);
  }

  double statistic(StateView x) const {
    return (interaction_sum(x) + static_cast<double>(graph_.edges.size())) /
           static_cast<double>(n_);
  }

 private:
  Graph graph_;
  std::vector<int> couplings_;
  std::uint64_t seed_ = 0;
};

/// Edge-triangle exponential random graph model on nu vertices,
/// pi(G) proportional to exp{2 beta1 E(G) + 6 beta2 Delta(G) / nu}.
///
/// Coordinates are the n = nu(nu-1)/2 potential edges in lexicographic pair
/// order (0,1), (0,2), ..., (nu-2, nu-1). The model is put in the form
/// exp{n * beta * S} with beta = 1 and
///   S = (H - H_lo) / n,  D = (H_hi - H_lo) / n,
/// where H = 2 beta1 E + 6 beta2 Delta / nu and [H_lo, H_hi] is the range
/// obtained from 0 <= E <= n and 0 <= Delta <= C(nu, 3) term by term.
class ErgmEdgeTriangleModel : public ModelBase {
 public:
  ErgmEdgeTriangleModel(std::size_t nu, double beta1, double beta2)
      : ModelBase(checked_pairs(nu), 2, 1.0), nu_(nu), beta1_(beta1), beta2_(beta2) {
    if (!std::isfinite(beta1) || !std::isfinite(beta2)) {
      throw std::invalid_argument("ERGM parameters must be finite");
    }
    const double n = static_cast<double>(n_);
    const double nu_d = static_cast<double>(nu_);
    const double max_triangles = nu_d * (nu_d - 1.0) * (nu_d - 2.0) / 6.0;
    const double edge_term = 2.0 * beta1_ * n;
    const double tri_term = 6.0 * beta2_ * max_triangles / nu_d;
    low_ = std::min(0.0, edge_term) + std::min(0.0, tri_term);
    const double high = std::max(0.0, edge_term) + std::max(0.0, tri_term);
    shift_ = -low_ / n;
    bound_ = (high - low_) / n;
    pairs_.reserve(n_);
    for (std::uint32_t i = 0; i < nu_; ++i) {
      for (std::uint32_t j = i + 1; j < nu_; ++j) pairs_.push_back({i, j});
    }
  }

  static constexpr std::string_view name() { return "ergm_edge_triangle"; }
  std::size_t vertices() const { return nu_; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }

  /// Coordinate of the pair {i, j}, i != j.
  std::size_t edge_index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return i * nu_ - i * (i + 1) / 2 + (j - i - 1);
  }

  const Edge& pair(std::size_t k) const { return pairs_[k]; }

  Graph decode(StateView x) const {
    Graph g{nu_, {}};
    for (std::size_t k = 0; k < n_; ++k) {
      if (x[k] != 0) g.edges.push_back(pairs_[k]);
    }
    return g;
  }

  State encode(const Graph& g) const {
    if (g.vertices != nu_) throw std::invalid_argument("graph vertex count mismatch");
    State x(n_, 0);
    for (const auto& e : g.edges) {
      if (e.u == e.v || e.u >= nu_ || e.v >= nu_) {
        throw std::invalid_argument("invalid edge for ERGM encoding");
      }
      x[edge_index(e.u, e.v)] = 1;
    }
    return x;
  }

  std::size_t edge_count(StateView x) const {
    return static_cast<std::size_t>(std::count_if(x.begin(), x.end(), [](Symbol s) { return s != 0; }));
  }

  /// Triangles via neighbor bitsets: each edge (i, j) contributes the common
  /// neighbors k > j.
  std::size_t triangle_count(StateView x) const {
    const std::size_t words = (nu_ + 63) / 64;
    std::vector<std::uint64_t> nbr(nu_ * words, 0);
    auto set = [&](std::size_t a, std::size_t b) { nbr[a * words + b / 64] |= (1ULL << (b % 64)); };
    for (std::size_t k = 0; k < n_; ++k) {
      if (x[k] != 0) {
        set(pairs_[k].u, pairs_[k].v);
        set(pairs_[k].v, pairs_[k].u);
      }
    }
    std::size_t triangles = 0;
    for (std::size_t k = 0; k < n_; ++k) {
      if (x[k] == 0) continue;
      const std::size_t i = pairs_[k].u, j = pairs_[k].v;
      for (std::size_t w = j / 64; w < words; ++w) {
        std::uint64_t common = nbr[i * words + w] & nbr[j * words + w];
        if (w == j / 64) {
          const unsigned bit = static_cast<unsigned>(j % 64);
          common &= (bit == 63) ? 0ULL : (~0ULL << (bit + 1));
        }
        triangles += static_cast<std::size_t>(__builtin_popcountll(common));
      }
    }
    return triangles;
  }

  /// 2 beta1 E + 6 beta2 Delta / nu.
  double hamiltonian(StateView x) const {
    return 2.0 * beta1_ * static_cast<double>(edge_count(x)) +
           6.0 * beta2_ * static_cast<double>(triangle_count(x)) / static_cast<double>(nu_);
  }

  double statistic(StateView x) const {
    return std::max(0.0, (hamiltonian(x) - low_) / static_cast<double>(n_));
  }

 private:
  static std::size_t checked_pairs(std::size_t nu) {
    if (nu < 3) throw std::invalid_argument("ERGM needs at least 3 vertices");
    return nu * (nu - 1) / 2;
  }

  std::size_t nu_;
  double beta1_;
  double beta2_;
  double low_ = 0.0;
  std::vector<Edge> pairs_;
};

/// Needle in a haystack on {0,1}^n: unnormalized mass 2^n / delta at z and 1
/// elsewhere. S(x) = 1{x = z} (log 2 + log(1/delta) / n), beta = 1,
/// D = log(2/delta).
class NeedleModel : public ModelBase {
 public:
  NeedleModel(std::size_t n, double delta, State needle)
      : ModelBase(n, 2, 1.0), delta_(delta), needle_(std::move(needle)) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    if (!valid_state(needle_, n_, 2)) throw std::invalid_argument("needle must be a binary state of length n");
    peak_ = std::log(2.0) + std::log(1.0 / delta_) / static_cast<double>(n_);
    bound_ = std::log(2.0 / delta_);
  }

  static constexpr std::string_view name() { return "needle"; }
  double delta() const { return delta_; }
  const State& needle() const { return needle_; }

  bool is_marked(StateView x) const { return std::equal(x.begin(), x.end(), needle_.begin(), needle_.end()); }

  double statistic(StateView x) const { return is_marked(x) ? peak_ : 0.0; }

  /// Z = 2^n (1 + 1/delta) - 1.
  double normalizer() const {
    return std::ldexp(1.0 + 1.0 / delta_, static_cast<int>(n_)) - 1.0;
  }

  /// pi(z) = (2^n / delta) / Z, evaluated without forming 2^n.
  double needle_probability() const {
    return 1.0 / (1.0 + delta_ - delta_ * std::ldexp(1.0, -static_cast<int>(n_)));
  }

 private:
  double delta_;
  State needle_;
  double peak_ = 0.0;
};

inline IsingModel make_ising(Graph graph, double beta, double field = 0.0) {
  return IsingModel(std::move(graph), beta, field);
}
inline PottsModel make_potts(Graph graph, unsigned q, double beta) {
  return PottsModel(std::move(graph), q, beta);
}
inline CurieWeissPottsModel make_curie_weiss_potts(std::size_t n, unsigned q, double beta) {
  return CurieWeissPottsModel(n, q, beta);
}
inline SpinGlassModel make_spin_glass(Graph graph, double beta, std::uint64_t seed) {
  return SpinGlassModel(std::move(graph), beta, seed);
}
inline ErgmEdgeTriangleModel make_ergm_edge_triangle(std::size_t nu, double beta1, double beta2) {
  return ErgmEdgeTriangleModel(nu, beta1, beta2);
}
inline NeedleModel make_needle(std::size_t n, double delta, State z) {
  return NeedleModel(n, delta, std::move(z));
}

/// Closed set of models selectable at run time (config files, CLI).
using AnyModel = std::variant<UniformModel, IsingModel, PottsModel, CurieWeissPottsModel,
                              SpinGlassModel, ErgmEdgeTriangleModel, NeedleModel>;

/// Probability table over the whole space, indexed by state_index().
struct ProbabilityTable {
  std::size_t n = 0;
  unsigned q = 2;
  std::vector<double> p;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 24;

/// Exact tempered distribution pi_j(x) proportional to exp{j beta S(x)}.
/// level = n gives the target, level = 0 the uniform distribution.
template <TargetModel M>
ProbabilityTable tempered_distribution(const M& model, double level,
                                       std::uint64_t cap = kDefaultEnumerationCap) {
  const std::size_t n = model.size();
  const unsigned q = model.alphabet();
  const std::uint64_t size = space_size(n, q);
  if (size > cap) {
    throw GuardError("state space of size q^n exceeds the enumeration cap of " +
                     std::to_string(cap) + " states");
  }
  ProbabilityTable table{n, q, std::vector<double>(size)};
  const double scale = level * model.beta();
  State x(n, 0);
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::uint64_t i = 0; i < size; ++i) {
    table.p[i] = scale * model.statistic(x);
    max_log = std::max(max_log, table.p[i]);
    next_state(x, q);
  }
  double total = 0.0;
  for (auto& v : table.p) {
    v = std::exp(v - max_log);
    total += v;
  }
  for (auto& v : table.p) v /= total;
  return table;
}

/// Exact target distribution pi(x) = exp{n beta S(x)} / Z.
template <TargetModel M>
ProbabilityTable exact_distribution(const M& model, std::uint64_t cap = kDefaultEnumerationCap) {
  return tempered_distribution(model, static_cast<double>(model.size()), cap);
}

}  // namespace itemper

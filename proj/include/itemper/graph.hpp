#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "itemper/random.hpp"

namespace itemper {

struct Edge {
  std::uint32_t u;
  std::uint32_t v;
  bool operator==(const Edge&) const = default;
};

/// Simple undirected graph given by an explicit edge list.
struct Graph {
  std::size_t vertices = 0;
  std::vector<Edge> edges;

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> deg(vertices, 0);
    for (const auto& e : edges) {
      ++deg[e.u];
      ++deg[e.v];
    }
    return deg;
  }

  std::size_t max_degree() const {
    const auto deg = degrees();
    return deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
  }

  /// Throws on self-loops, duplicate edges or out-of-range endpoints.
  void validate() const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> seen;
    seen.reserve(edges.size());
    for (const auto& e : edges) {
      if (e.u >= vertices || e.v >= vertices) {
        throw std::invalid_argument("edge endpoint out of range");
      }
      if (e.u == e.v) throw std::invalid_argument("self-loop in edge list");
      seen.emplace_back(std::min(e.u, e.v), std::max(e.u, e.v));
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
      throw std::invalid_argument("duplicate edge in edge list");
    }
  }
};

inline Graph cycle_graph(std::size_t n) {
  if (n < 3) throw std::invalid_argument("cycle needs at least 3 vertices");
  Graph g{n, {}};
  for (std::size_t i = 0; i < n; ++i) {
    g.edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>((i + 1) % n)});
  }
  return g;
}

inline Graph path_graph(std::size_t n) {
  Graph g{n, {}};
  for (std::size_t i = 0; i + 1 < n; ++i) {
    g.edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i + 1)});
  }
  return g;
}

inline Graph complete_graph(std::size_t n) {
  Graph g{n, {}};
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) g.edges.push_back({i, j});
  }
  return g;
}

/// Periodic side x side square lattice (side >= 3).
inline Graph torus_graph(std::size_t side) {
  if (side < 3) throw std::invalid_argument("torus side must be at least 3");
  Graph g{side * side, {}};
  auto id = [side](std::size_t r, std::size_t c) {
    return static_cast<std::uint32_t>(r * side + c);
  };
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      g.edges.push_back({id(r, c), id(r, (c + 1) % side)});
      g.edges.push_back({id(r, c), id((r + 1) % side, c)});
    }
  }
  return g;
}

/// Uniform-ish random d-regular simple graph by the pairing model, retrying
/// until the pairing has no loops or multi-edges.
inline Graph random_regular_graph(std::size_t n, std::size_t degree, std::uint64_t seed) {
  if ((n * degree) % 2 != 0) throw std::invalid_argument("n * degree must be even");
  if (degree >= n) throw std::invalid_argument("degree must be below n");
  RandomStream rng(seed);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<std::uint32_t> points(n * degree);
    for (std::size_t i = 0; i < points.size(); ++i) {
      points[i] = static_cast<std::uint32_t>(i / degree);
    }
    for (std::size_t i = points.size(); i > 1; --i) {
      std::swap(points[i - 1], points[rng.index(i)]);
    }
    Graph g{n, {}};
    bool simple = true;
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < points.size(); i += 2) {
      const auto u = points[i];
      const auto v = points[i + 1];
      if (u == v || adj[u][v]) {
        simple = false;
        break;
      }
      adj[u][v] = adj[v][u] = true;
      g.edges.push_back({std::min(u, v), std::max(u, v)});
    }
    if (simple) return g;
  }
  throw std::runtime_error("random_regular_graph: no simple pairing found");
}

/// Reads one "u v" pair per line (0-indexed). Blank lines and lines starting
/// with '#' are skipped. The vertex count is max endpoint + 1 unless given.
inline Graph read_edge_list(std::istream& in, std::size_t vertices = 0) {
  Graph g{vertices, {}};
  std::string line;
  std::size_t lineno = 0;
  std::uint32_t max_vertex = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    long long u = -1, v = -1;
    if (!(fields >> u >> v) || u < 0 || v < 0) {
      throw std::invalid_argument("edge list line " + std::to_string(lineno) +
                                  ": expected two non-negative integers");
    }
    g.edges.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v)});
    max_vertex = std::max({max_vertex, static_cast<std::uint32_t>(u),
                           static_cast<std::uint32_t>(v)});
  }
  if (vertices == 0 && !g.edges.empty()) g.vertices = max_vertex + 1;
  g.validate();
  return g;
}

inline Graph read_edge_list_file(const std::string& path, std::size_t vertices = 0) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open edge list file: " + path);
  return read_edge_list(in, vertices);
}

}  // namespace itemper

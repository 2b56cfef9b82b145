#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace itemper {

/// One coordinate of a configuration. Spin models read symbol s as spin 2s - 1.
using Symbol = std::uint8_t;

/// A point of the product space {0, ..., q-1}^n.
using State = std::vector<Symbol>;

using StateView = std::span<const Symbol>;

/// Thrown when an operation would enumerate or store more than its cap allows.
class GuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline int spin(Symbol s) { return 2 * static_cast<int>(s) - 1; }

/// q^n, saturating at uint64 max.
inline std::uint64_t space_size(std::size_t n, unsigned q) {
  std::uint64_t size = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (size > std::numeric_limits<std::uint64_t>::max() / q) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    size *= q;
  }
  return size;
}

/// Mixed-radix index with coordinate 0 as the least significant digit.
inline std::uint64_t state_index(StateView x, unsigned q) {
  std::uint64_t index = 0;
  for (std::size_t i = x.size(); i-- > 0;) {
    index = index * q + x[i];
  }
  return index;
}

inline State state_from_index(std::uint64_t index, std::size_t n, unsigned q) {
  State x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<Symbol>(index % q);
    index /= q;
  }
  return x;
}

inline bool valid_state(StateView x, std::size_t n, unsigned q) {
  if (x.size() != n) return false;
  for (Symbol s : x) {
    if (s >= q) return false;
  }
  return true;
}

/// Advances x to the next state in index order; returns false after the last.
inline bool next_state(State& x, unsigned q) {
  for (auto& s : x) {
    if (++s < q) return true;
    s = 0;
  }
  return false;
}

inline std::string to_string(StateView x) {
  std::string out;
  out.reserve(x.size());
  for (Symbol s : x) out.push_back(static_cast<char>(s < 10 ? '0' + s : 'a' + (s - 10)));
  return out;
}

}  // namespace itemper

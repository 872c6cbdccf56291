#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace jetprol {

/// Number of multi-indices of height h in n variables, i.e. the dimension of
/// homogeneous polynomials of degree h: (n-1+h)! / ((n-1)! h!).
/// Zero for negative h.
constexpr std::size_t count(int n, int h) {
  if (n < 1) throw std::invalid_argument("count: n must be positive");
  if (h < 0) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= h; ++i) r = r * static_cast<std::uint64_t>(n - 1 + i) / static_cast<std::uint64_t>(i);
  return static_cast<std::size_t>(r);
}

/// Binomial coefficient C(a, b), zero outside 0 <= b <= a.
constexpr std::size_t binomial(int a, int b) {
  if (b < 0 || a < 0 || b > a) return 0;
  return count(b + 1, a - b);
}

/// Derivative orders (i_1, ..., i_n) with respect to n coordinates.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::size_t n) : e_(n, 0) {}
  MultiIndex(std::initializer_list<int> entries) : e_(entries) {
    for (int x : e_)
      if (x < 0) throw std::invalid_argument("MultiIndex: negative entry");
  }
  explicit MultiIndex(std::vector<int> entries) : e_(std::move(entries)) {
    for (int x : e_)
      if (x < 0) throw std::invalid_argument("MultiIndex: negative entry");
  }

  std::size_t size() const noexcept { return e_.size(); }
  int operator[](std::size_t i) const { return e_[i]; }
  const std::vector<int>& entries() const noexcept { return e_; }

  int height() const noexcept {
    int h = 0;
    for (int x : e_) h += x;
    return h;
  }

  /// The index with entry i (0-based) raised by one.
  MultiIndex raised(std::size_t i) const {
    MultiIndex r = *this;
    ++r.e_.at(i);
    return r;
  }

  /// The index with entry i lowered by one; requires entry i > 0.
  MultiIndex lowered(std::size_t i) const {
    if (e_.at(i) == 0) throw std::invalid_argument("MultiIndex: cannot lower a zero entry");
    MultiIndex r = *this;
    --r.e_[i];
    return r;
  }

  /// Componentwise sum.
  MultiIndex operator+(const MultiIndex& o) const {
    MultiIndex r = *this;
    for (std::size_t i = 0; i < e_.size(); ++i) r.e_[i] += o.e_.at(i);
    return r;
  }

  bool operator==(const MultiIndex&) const = default;

  /// Lexicographic on entries; only for use as a map key. The LL order is
  /// provided by `ll_less`.
  auto operator<=>(const MultiIndex&) const = default;

 private:
  std::vector<int> e_;
};

inline std::ostream& operator<<(std::ostream& os, const MultiIndex& m) {
  os << '(';
  for (std::size_t i = 0; i < m.size(); ++i) os << (i ? "," : "") << m[i];
  return os << ')';
}

/// The LL order: by height, then by the entry at the highest position
/// where the two indices differ.
inline bool ll_less(const MultiIndex& a, const MultiIndex& b) {
  if (a.height() != b.height()) return a.height() < b.height();
  for (std::size_t i = a.size(); i-- > 0;)
    if (a[i] != b[i]) return a[i] < b[i];
  return false;
}

/// Enumeration of all n-variable multi-indices of height <= h_max in LL order.
/// Ranks are 0-based: rank 0 is the zero index, ranks 1..n are the unit
/// indices, and height-h indices occupy [count(n+1,h-1), count(n+1,h)).
class LLTable {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  LLTable(int n, int h_max) : n_(n), h_max_(h_max) {
    if (n < 1) throw std::invalid_argument("LLTable: n must be positive");
    if (h_max < 0) throw std::invalid_argument("LLTable: negative h_max");
    by_rank_.reserve(count(n + 1, h_max));
    std::vector<int> scratch(static_cast<std::size_t>(n), 0);
    for (int h = 0; h <= h_max; ++h) enumerate(scratch, n - 1, h);
    for (std::size_t r = 0; r < by_rank_.size(); ++r) rank_of_.emplace(by_rank_[r], r);

    ad_.assign(by_rank_.size() * static_cast<std::size_t>(n), npos);
    for (std::size_t t = 0; t < by_rank_.size(); ++t) {
      if (by_rank_[t].height() == h_max) continue;
      for (int i = 0; i < n; ++i)
        ad_[t * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] = rank_of_.at(by_rank_[t].raised(static_cast<std::size_t>(i)));
    }
  }

  int n() const noexcept { return n_; }
  int h_max() const noexcept { return h_max_; }
  std::size_t size() const noexcept { return by_rank_.size(); }

  const MultiIndex& unrank(std::size_t t) const { return by_rank_.at(t); }

  std::size_t rank_of(const MultiIndex& m) const {
    auto it = rank_of_.find(m);
    if (it == rank_of_.end()) throw std::out_of_range("LLTable: index not in table");
    return it->second;
  }

  int height(std::size_t t) const { return by_rank_.at(t).height(); }

  /// First rank of height h (== number of indices of height < h).
  std::size_t begin_of_height(int h) const { return count(n_ + 1, h - 1); }
  std::size_t end_of_height(int h) const { return count(n_ + 1, h); }

  /// Rank of unrank(t) with entry i (0-based) incremented.
  std::size_t ad(std::size_t t, int i) const {
    if (i < 0 || i >= n_) throw std::out_of_range("LLTable::ad: direction out of range");
    if (t >= size()) throw std::out_of_range("LLTable::ad: rank out of range");
    std::size_t r = ad_[t * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i)];
    if (r == npos) throw std::out_of_range("table exhausted");
    return r;
  }

 private:
  // Highest position varies slowest: fix entry `pos`, recurse on the lower ones.
  void enumerate(std::vector<int>& e, int pos, int remaining) {
    if (pos == 0) {
      e[0] = remaining;
      by_rank_.emplace_back(e);
      return;
    }
    for (int x = 0; x <= remaining; ++x) {
      e[static_cast<std::size_t>(pos)] = x;
      enumerate(e, pos - 1, remaining - x);
    }
    e[static_cast<std::size_t>(pos)] = 0;
  }

  int n_;
  int h_max_;
  std::vector<MultiIndex> by_rank_;
  std::map<MultiIndex, std::size_t> rank_of_;
  std::vector<std::size_t> ad_;
};

/// Position of a matrix entry within a q-row (or p-column) block layout:
/// 1-based index i = u + q*t with u in 1..q and t the LL rank.
struct BlockPosition {
  std::size_t component;  // u (or v), 1-based
  std::size_t rank;       // t (or s), 0-based LL rank
  bool operator==(const BlockPosition&) const = default;
};

inline BlockPosition decode_index(std::size_t i, std::size_t block) {
  if (i < 1 || block < 1) throw std::invalid_argument("decode_index: indices are 1-based");
  std::size_t t = (i - 1) / block;
  return {i - block * t, t};
}

inline std::size_t encode_index(BlockPosition pos, std::size_t block) {
  if (pos.component < 1 || pos.component > block) throw std::invalid_argument("encode_index: component out of range");
  return pos.component + block * pos.rank;
}

/// Row i of a prolongation matrix with q equations per block -> (u, t).
inline BlockPosition decode_row(std::size_t i, std::size_t q) { return decode_index(i, q); }
/// Column j of a prolongation matrix with p unknowns per block -> (v, s).
inline BlockPosition decode_col(std::size_t j, std::size_t p) { return decode_index(j, p); }

}  // namespace jetprol

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jetprol/errors.hpp"
#include "jetprol/multiindex.hpp"
#include "jetprol/rational.hpp"

namespace jetprol {

/// Coefficient layout for jets in n variables truncated at a given order.
/// Coefficients are stored by LL rank, so the layout of a lower order is a
/// prefix of the layout of a higher one.
class JetLayout {
 public:
  using Pair = std::pair<std::uint32_t, std::uint32_t>;

  /// Shared immutable layout for (n, order).
  static std::shared_ptr<const JetLayout> get(int n, int order) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const JetLayout>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{n, order}];
    if (!slot) slot = std::shared_ptr<const JetLayout>(new JetLayout(n, order));
    return slot;
  }

  int n() const noexcept { return table_.n(); }
  int order() const noexcept { return table_.h_max(); }
  std::size_t size() const noexcept { return table_.size(); }
  const LLTable& table() const noexcept { return table_; }

  /// All (a, b) rank pairs with unrank(a) + unrank(b) == unrank(t).
  std::span<const Pair> factors_of(std::size_t t) const {
    return {pairs_.data() + offsets_[t], pairs_.data() + offsets_[t + 1]};
  }

 private:
  JetLayout(int n, int order) : table_(n, order) {
    std::vector<std::vector<Pair>> by_target(table_.size());
    for (std::size_t a = 0; a < table_.size(); ++a) {
      const MultiIndex& ia = table_.unrank(a);
      int room = order - ia.height();
      for (std::size_t b = 0; b < table_.end_of_height(room); ++b)
        by_target[table_.rank_of(ia + table_.unrank(b))].emplace_back(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
    }
    offsets_.reserve(by_target.size() + 1);
    offsets_.push_back(0);
    for (auto& v : by_target) {
      pairs_.insert(pairs_.end(), v.begin(), v.end());
      offsets_.push_back(pairs_.size());
    }
  }

  LLTable table_;
  std::vector<Pair> pairs_;
  std::vector<std::size_t> offsets_;
};

/// Dimension and base point shared by a family of jets.
struct JetSpace {
  int n;
  std::vector<Rational> base_point;

  static std::shared_ptr<const JetSpace> make(std::vector<Rational> base) {
    if (base.empty()) throw InputError("jet", "base point must have at least one coordinate");
    int n = static_cast<int>(base.size());
    return std::make_shared<const JetSpace>(JetSpace{n, std::move(base)});
  }

  bool operator==(const JetSpace&) const = default;
};

using SpacePtr = std::shared_ptr<const JetSpace>;

/// Truncated Taylor expansion at a rational base point with exact
/// coefficients. Coefficient at I multiplies (x - base)^I, so the constant
/// term is the value at the base point. `order` is the usable truncation
/// order: every operation reports the order up to which its result is exact.
class Jet {
 public:
  Jet() = default;

  static Jet zero(SpacePtr space, int order) {
    check_order(order);
    auto layout = JetLayout::get(space->n, order);
    std::vector<Rational> c(layout->size());
    return Jet(std::move(space), std::move(layout), std::move(c));
  }

  static Jet constant(SpacePtr space, int order, const Rational& value) {
    Jet j = zero(std::move(space), order);
    j.c_[0] = value;
    return j;
  }

  /// The coordinate function x_i (0-based i) expanded at the base point.
  static Jet variable(SpacePtr space, int order, int i) {
    if (i < 0 || i >= space->n) throw InputError("jet", "variable index out of range");
    Rational base = space->base_point[static_cast<std::size_t>(i)];
    Jet j = constant(std::move(space), order, base);
    if (order >= 1) j.c_[static_cast<std::size_t>(i) + 1] = 1;
    return j;
  }

  /// Coefficients listed by LL rank; must have exactly count(n+1, order) entries.
  static Jet from_coefficients(SpacePtr space, int order, std::vector<Rational> coeffs) {
    check_order(order);
    auto layout = JetLayout::get(space->n, order);
    if (coeffs.size() != layout->size()) throw InputError("jet", "coefficient count does not match order");
    return Jet(std::move(space), std::move(layout), std::move(coeffs));
  }

  bool valid() const noexcept { return static_cast<bool>(layout_); }
  int n() const { return layout_->n(); }
  int order() const { return layout_->order(); }
  const SpacePtr& space() const noexcept { return space_; }
  const JetLayout& layout() const { return *layout_; }
  const std::vector<Rational>& coefficients() const noexcept { return c_; }

  const Rational& coefficient(std::size_t rank) const { return c_.at(rank); }
  Rational coefficient(const MultiIndex& m) const {
    if (m.height() > order()) throw InputError("jet", "insufficient jet order");
    return c_[layout_->table().rank_of(m)];
  }
  const Rational& constant_term() const { return c_.at(0); }

  bool is_zero() const {
    for (const auto& x : c_)
      if (sgn(x) != 0) return false;
    return true;
  }

  /// The same function known to a lower order.
  Jet truncated(int new_order) const {
    if (new_order > order()) throw InputError("jet", "insufficient jet order");
    if (new_order == order()) return *this;
    check_order(new_order);
    auto layout = JetLayout::get(n(), new_order);
    std::vector<Rational> c(c_.begin(), c_.begin() + static_cast<std::ptrdiff_t>(layout->size()));
    return Jet(space_, std::move(layout), std::move(c));
  }

  /// Partial derivative along x_i (0-based); the result is known to order - 1.
  Jet derive(int i) const {
    if (order() < 1) throw InputError("jet", "insufficient jet order");
    if (i < 0 || i >= n()) throw InputError("jet", "derivation direction out of range");
    auto layout = JetLayout::get(n(), order() - 1);
    const LLTable& big = layout_->table();
    std::vector<Rational> c(layout->size());
    for (std::size_t r = 0; r < c.size(); ++r) {
      const Rational& src = c_[big.ad(r, i)];
      if (sgn(src) != 0) c[r] = src * (big.unrank(r)[static_cast<std::size_t>(i)] + 1);
    }
    return Jet(space_, std::move(layout), std::move(c));
  }

  /// Multiplicative inverse; requires a nonzero constant term.
  Jet inverse() const {
    if (sgn(c_[0]) == 0) throw DegeneracyError("jet", "non-unit jet");
    std::vector<Rational> b(c_.size());
    Rational inv0 = 1 / c_[0];
    b[0] = inv0;
    Rational acc;
    for (std::size_t t = 1; t < b.size(); ++t) {
      acc = 0;
      for (auto [s, u] : layout_->factors_of(t))
        if (s != 0 && sgn(c_[s]) != 0 && sgn(b[u]) != 0) acc += c_[s] * b[u];
      if (sgn(acc) != 0) b[t] = -inv0 * acc;
    }
    return Jet(space_, layout_, std::move(b));
  }

  Jet pow(unsigned e) const {
    Jet result = constant(space_, order(), 1);
    Jet base = *this;
    while (e) {
      if (e & 1u) result = result * base;
      e >>= 1;
      if (e) base = base * base;
    }
    return result;
  }

  Jet operator-() const {
    Jet r = *this;
    for (auto& x : r.c_) x = -x;
    return r;
  }

  friend Jet operator+(const Jet& a, const Jet& b) { return combine(a, b, false); }
  friend Jet operator-(const Jet& a, const Jet& b) { return combine(a, b, true); }

  friend Jet operator*(const Jet& a, const Jet& b) {
    check_compatible(a, b);
    const Jet& lo = a.order() <= b.order() ? a : b;
    const JetLayout& layout = *lo.layout_;
    std::vector<Rational> c(layout.size());
    // Skip structurally zero operands (constants are common).
    bool a_const = a.is_constant_up_to(layout.size());
    bool b_const = b.is_constant_up_to(layout.size());
    if (a_const || b_const) {
      const Jet& k = a_const ? a : b;
      const Jet& other = a_const ? b : a;
      const Rational& s = k.c_[0];
      if (sgn(s) != 0)
        for (std::size_t t = 0; t < c.size(); ++t)
          if (sgn(other.c_[t]) != 0) c[t] = s * other.c_[t];
      return Jet(lo.space_, lo.layout_, std::move(c));
    }
    Rational acc;
    for (std::size_t t = 0; t < c.size(); ++t) {
      acc = 0;
      for (auto [x, y] : layout.factors_of(t))
        if (sgn(a.c_[x]) != 0 && sgn(b.c_[y]) != 0) acc += a.c_[x] * b.c_[y];
      c[t] = acc;
    }
    return Jet(lo.space_, lo.layout_, std::move(c));
  }

  friend Jet operator*(const Rational& s, const Jet& a) {
    Jet r = a;
    for (auto& x : r.c_)
      if (sgn(x) != 0) x *= s;
    return r;
  }

  Jet& operator+=(const Jet& o) { return *this = *this + o; }
  Jet& operator-=(const Jet& o) { return *this = *this - o; }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }

  /// Exact equality: same order, same base point, same coefficients.
  friend bool operator==(const Jet& a, const Jet& b) {
    if (!a.valid() || !b.valid()) return a.valid() == b.valid();
    return a.order() == b.order() && same_space(a, b) && a.c_ == b.c_;
  }

  /// Equality of the two jets up to the smaller of their orders.
  friend bool agree(const Jet& a, const Jet& b) {
    check_compatible(a, b);
    std::size_t m = std::min(a.c_.size(), b.c_.size());
    for (std::size_t t = 0; t < m; ++t)
      if (a.c_[t] != b.c_[t]) return false;
    return true;
  }

  friend bool same_space(const Jet& a, const Jet& b) {
    return a.space_ == b.space_ || *a.space_ == *b.space_;
  }

 private:
  Jet(SpacePtr space, std::shared_ptr<const JetLayout> layout, std::vector<Rational> c)
      : space_(std::move(space)), layout_(std::move(layout)), c_(std::move(c)) {}

  static void check_order(int order) {
    if (order < 0) throw InputError("jet", "insufficient jet order");
  }

  static void check_compatible(const Jet& a, const Jet& b) {
    if (!a.valid() || !b.valid()) throw InputError("jet", "operation on an empty jet");
    if (!same_space(a, b)) throw InputError("jet", "base-point or dimension mismatch");
  }

  bool is_constant_up_to(std::size_t m) const {
    for (std::size_t t = 1; t < m; ++t)
      if (sgn(c_[t]) != 0) return false;
    return true;
  }

  static Jet combine(const Jet& a, const Jet& b, bool subtract) {
    check_compatible(a, b);
    const Jet& lo = a.order() <= b.order() ? a : b;
    std::vector<Rational> c(lo.c_.size());
    for (std::size_t t = 0; t < c.size(); ++t) c[t] = subtract ? Rational(a.c_[t] - b.c_[t]) : Rational(a.c_[t] + b.c_[t]);
    return Jet(lo.space_, lo.layout_, std::move(c));
  }

  SpacePtr space_;
  std::shared_ptr<const JetLayout> layout_;
  std::vector<Rational> c_;
};

}  // namespace jetprol

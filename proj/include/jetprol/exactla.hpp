#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "jetprol/errors.hpp"
#include "jetprol/jet.hpp"
#include "jetprol/rational.hpp"

namespace jetprol {

/// Dense row-major matrix of exact rationals.
class RationalMatrix {
 public:
  RationalMatrix() = default;
  RationalMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * cols) {}

  static RationalMatrix identity(std::size_t n) {
    RationalMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  Rational& operator()(std::size_t r, std::size_t c) { return a_[r * cols_ + c]; }
  const Rational& operator()(std::size_t r, std::size_t c) const { return a_[r * cols_ + c]; }

  bool operator==(const RationalMatrix&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<Rational> a_;
};

/// Rank with the pivots chosen by elimination: columns scanned left to
/// right, the topmost unused row with a nonzero entry becomes the pivot.
struct RankInfo {
  std::size_t rank = 0;
  std::vector<std::size_t> pivot_cols;  // ascending
  std::vector<std::size_t> pivot_rows;  // pivot_rows[i] pairs with pivot_cols[i]
};

inline RankInfo rational_rank(RationalMatrix m) {
  RankInfo info;
  std::vector<bool> used(m.rows(), false);
  Rational f;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    std::size_t piv = m.rows();
    for (std::size_t r = 0; r < m.rows(); ++r)
      if (!used[r] && sgn(m(r, c)) != 0) {
        piv = r;
        break;
      }
    if (piv == m.rows()) continue;
    used[piv] = true;
    info.pivot_cols.push_back(c);
    info.pivot_rows.push_back(piv);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (used[r] || sgn(m(r, c)) == 0) continue;
      f = m(r, c) / m(piv, c);
      for (std::size_t j = c; j < m.cols(); ++j)
        if (sgn(m(piv, j)) != 0) m(r, j) -= f * m(piv, j);
    }
  }
  info.rank = info.pivot_cols.size();
  return info;
}

/// Matrix over the jet ring. All entries share the jet space and a common
/// usable order.
class JetMatrix {
 public:
  JetMatrix() = default;

  JetMatrix(SpacePtr space, int order, std::size_t rows, std::size_t cols)
      : space_(std::move(space)), order_(order), rows_(rows), cols_(cols), a_(rows * cols, Jet::zero(space_, order)) {}

  static JetMatrix identity(SpacePtr space, int order, std::size_t n) {
    JetMatrix m(std::move(space), order, n, n);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i, Jet::constant(m.space_, order, 1));
    return m;
  }

  static JetMatrix from_rational(SpacePtr space, int order, const RationalMatrix& r) {
    JetMatrix m(std::move(space), order, r.rows(), r.cols());
    for (std::size_t i = 0; i < r.rows(); ++i)
      for (std::size_t j = 0; j < r.cols(); ++j)
        if (sgn(r(i, j)) != 0) m.set(i, j, Jet::constant(m.space_, order, r(i, j)));
    return m;
  }

  const SpacePtr& space() const noexcept { return space_; }
  int order() const noexcept { return order_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  const Jet& operator()(std::size_t r, std::size_t c) const { return a_.at(r * cols_ + c); }

  /// Stores `j` truncated to the matrix order.
  void set(std::size_t r, std::size_t c, const Jet& j) {
    if (r >= rows_ || c >= cols_) throw std::out_of_range("JetMatrix::set");
    if (j.order() < order_) throw InputError("exactla", "insufficient jet order");
    a_[r * cols_ + c] = j.truncated(order_);
  }

  RationalMatrix constant_part() const {
    RationalMatrix m(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j).constant_term();
    return m;
  }

  bool is_zero() const {
    return std::all_of(a_.begin(), a_.end(), [](const Jet& j) { return j.is_zero(); });
  }

  JetMatrix truncated(int order) const {
    if (order > order_) throw InputError("exactla", "insufficient jet order");
    JetMatrix m(space_, order, rows_, cols_);
    for (std::size_t k = 0; k < a_.size(); ++k) m.a_[k] = a_[k].truncated(order);
    return m;
  }

  JetMatrix derive(int i) const {
    if (order_ < 1) throw InputError("exactla", "insufficient jet order");
    JetMatrix m(space_, order_ - 1, rows_, cols_);
    for (std::size_t k = 0; k < a_.size(); ++k) m.a_[k] = a_[k].derive(i);
    return m;
  }

  /// Rows `rs` and columns `cs`, in the given order.
  JetMatrix submatrix(const std::vector<std::size_t>& rs, const std::vector<std::size_t>& cs) const {
    JetMatrix m(space_, order_, rs.size(), cs.size());
    for (std::size_t i = 0; i < rs.size(); ++i)
      for (std::size_t j = 0; j < cs.size(); ++j) m.a_[i * cs.size() + j] = (*this)(rs[i], cs[j]);
    return m;
  }

  JetMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) throw std::out_of_range("JetMatrix::block");
    JetMatrix m(space_, order_, nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < nc; ++j) m.a_[i * nc + j] = (*this)(r0 + i, c0 + j);
    return m;
  }

  /// Copies `b` into this matrix with its top-left corner at (r0, c0).
  void place(std::size_t r0, std::size_t c0, const JetMatrix& b) {
    for (std::size_t i = 0; i < b.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) set(r0 + i, c0 + j, b(i, j));
  }

  JetMatrix operator-() const {
    JetMatrix m = *this;
    for (auto& j : m.a_) j = -j;
    return m;
  }

  friend JetMatrix operator+(const JetMatrix& a, const JetMatrix& b) { return combine(a, b, false); }
  friend JetMatrix operator-(const JetMatrix& a, const JetMatrix& b) { return combine(a, b, true); }

  friend JetMatrix operator*(const JetMatrix& a, const JetMatrix& b) {
    if (a.cols_ != b.rows_) throw std::invalid_argument("JetMatrix: dimension mismatch in product");
    int order = std::min(a.order_, b.order_);
    JetMatrix m(a.space_, order, a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t j = 0; j < b.cols_; ++j) {
        std::optional<Jet> acc;
        for (std::size_t l = 0; l < a.cols_; ++l) {
          const Jet& x = a(i, l);
          const Jet& y = b(l, j);
          if (x.is_zero() || y.is_zero()) continue;
          Jet t = x * y;
          acc = acc ? *acc + t : t;
        }
        if (acc) m.a_[i * m.cols_ + j] = acc->truncated(order);
      }
    return m;
  }

  /// Matrix-vector product; the vector entries share the matrix space.
  std::vector<Jet> apply(const std::vector<Jet>& x) const {
    if (x.size() != cols_) throw std::invalid_argument("JetMatrix: dimension mismatch in apply");
    int order = order_;
    for (const auto& j : x) order = std::min(order, j.order());
    std::vector<Jet> y(rows_, Jet::zero(space_, order));
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t l = 0; l < cols_; ++l)
        if (!(*this)(i, l).is_zero() && !x[l].is_zero()) y[i] += (*this)(i, l) * x[l];
    for (auto& j : y) j = j.truncated(order);
    return y;
  }

  friend bool operator==(const JetMatrix& a, const JetMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.order_ == b.order_ && a.a_ == b.a_;
  }

 private:
  static JetMatrix combine(const JetMatrix& a, const JetMatrix& b, bool subtract) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw std::invalid_argument("JetMatrix: dimension mismatch");
    int order = std::min(a.order_, b.order_);
    JetMatrix m(a.space_, order, a.rows_, a.cols_);
    for (std::size_t k = 0; k < a.a_.size(); ++k) m.a_[k] = subtract ? a.a_[k] - b.a_[k] : a.a_[k] + b.a_[k];
    return m;
  }

  SpacePtr space_;
  int order_ = 0;
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<Jet> a_;
};

/// Rank of the matrix evaluated at the base point.
inline RankInfo rank_at_base(const JetMatrix& m) { return rational_rank(m.constant_part()); }

/// Inverse over the jet ring by Gauss-Jordan elimination. Pivots are the
/// topmost rows with a nonzero constant term, so they are jet units.
inline JetMatrix invert_square(const JetMatrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("invert_square: matrix is not square");
  const std::size_t n = m.rows();
  const int order = m.order();
  std::vector<std::vector<Jet>> a(n), inv(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i].push_back(m(i, j));
    inv[i].assign(n, Jet::zero(m.space(), order));
    inv[i][i] = Jet::constant(m.space(), order, 1);
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = n;
    for (std::size_t r = c; r < n; ++r)
      if (sgn(a[r][c].constant_term()) != 0) {
        piv = r;
        break;
      }
    if (piv == n) throw DegeneracyError("exactla", "not invertible at base point");
    std::swap(a[piv], a[c]);
    std::swap(inv[piv], inv[c]);
    Jet pinv = a[c][c].inverse();
    for (std::size_t j = 0; j < n; ++j) {
      if (!a[c][j].is_zero()) a[c][j] = a[c][j] * pinv;
      if (!inv[c][j].is_zero()) inv[c][j] = inv[c][j] * pinv;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || a[r][c].is_zero()) continue;
      Jet f = a[r][c];
      for (std::size_t j = 0; j < n; ++j) {
        if (!a[c][j].is_zero()) a[r][j] -= f * a[c][j];
        if (!inv[c][j].is_zero()) inv[r][j] -= f * inv[c][j];
      }
    }
  }
  JetMatrix out(m.space(), order, n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.set(i, j, inv[i][j]);
  return out;
}

/// Solves m * x = 0 for the dependent components of x in terms of the free
/// ones. Returns L with x[dependent] = L * x[free], where dependent columns
/// are the complement of `free_cols` in ascending order. The dependent
/// columns must be square and invertible at the base point against the
/// pivot rows; any remaining rows are verified to vanish on the solution.
inline JetMatrix solve_dependent(const JetMatrix& m, const std::vector<std::size_t>& free_cols) {
  std::vector<bool> is_free(m.cols(), false);
  for (std::size_t c : free_cols) {
    if (c >= m.cols()) throw std::out_of_range("solve_dependent: column out of range");
    is_free[c] = true;
  }
  std::vector<std::size_t> dep, fre;
  for (std::size_t c = 0; c < m.cols(); ++c) (is_free[c] ? fre : dep).push_back(c);

  std::vector<std::size_t> all_rows(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) all_rows[r] = r;
  JetMatrix md = m.submatrix(all_rows, dep);
  RankInfo ri = rank_at_base(md);
  if (ri.rank != dep.size()) throw DegeneracyError("exactla", "frame not adapted");
  std::vector<std::size_t> prow = ri.pivot_rows;
  std::sort(prow.begin(), prow.end());

  JetMatrix l = -(invert_square(m.submatrix(prow, dep)) * m.submatrix(prow, fre));

  if (prow.size() < m.rows()) {
    // Remaining rows must vanish on every solution: m_D * L + m_F == 0.
    JetMatrix residual = md * l + m.submatrix(all_rows, fre);
    if (!residual.is_zero()) throw DegeneracyError("exactla", "frame not adapted: redundant rows are inconsistent");
  }
  return l;
}

}  // namespace jetprol

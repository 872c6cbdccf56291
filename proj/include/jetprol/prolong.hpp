#pragma once

#include <cstddef>
#include <map>
#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "jetprol/errors.hpp"
#include "jetprol/exactla.hpp"
#include "jetprol/jet.hpp"
#include "jetprol/multiindex.hpp"

namespace jetprol {

/// A linear homogeneous operator of order k acting on p unknown functions
/// with q scalar equations, trivialized over one chart.
///
/// `coeff` is the q x p*c(n+1,k) matrix M_k: row u is equation u, column
/// v + p*s carries the coefficient of the derivative of f_v indexed by the
/// LL rank s (all derivatives of order <= k).
class OperatorSpec {
 public:
  OperatorSpec(int k, int p, int q, JetMatrix coeff) : k_(k), p_(p), q_(q), coeff_(std::move(coeff)) {
    if (k < 1) throw InputError("operator", "order k must be at least 1");
    if (p < 1 || q < 1) throw InputError("operator", "p and q must be positive");
    const int n = coeff_.space()->n;
    if (coeff_.rows() != static_cast<std::size_t>(q) || coeff_.cols() != static_cast<std::size_t>(p) * count(n + 1, k))
      throw InputError("operator", "coefficient matrix must be q x p*c(n+1,k)");
    table_ = std::make_shared<const LLTable>(n, k);
  }

  int n() const { return coeff_.space()->n; }
  int k() const noexcept { return k_; }
  int p() const noexcept { return p_; }
  int q() const noexcept { return q_; }
  const SpacePtr& space() const { return coeff_.space(); }
  int order() const { return coeff_.order(); }
  const JetMatrix& coeff() const noexcept { return coeff_; }

  /// Coefficient M_u^{K,v} (u, v 0-based).
  const Jet& coeff(int u, const MultiIndex& K, int v) const {
    return coeff_(static_cast<std::size_t>(u), static_cast<std::size_t>(v) + static_cast<std::size_t>(p_) * table_->rank_of(K));
  }

 private:
  int k_, p_, q_;
  JetMatrix coeff_;
  std::shared_ptr<const LLTable> table_;
};

enum class Range { I, II, III };

inline const char* to_string(Range r) {
  switch (r) {
    case Range::I: return "I";
    case Range::II: return "II";
    case Range::III: return "III";
  }
  return "?";
}

inline Range classify_range(int n, int k, int p, int q) {
  if (q <= p) return Range::I;
  if (static_cast<std::size_t>(q) > static_cast<std::size_t>(p) * count(n, k)) return Range::II;
  return Range::III;
}

/// Largest h >= k with p*c(n,h) >= q*c(n,h-k). Range III only.
inline int compute_h0(int n, int k, int p, int q) {
  if (classify_range(n, k, p, q) != Range::III)
    throw InputError("prolong", "h0 is defined only for p < q <= p*c(n,k); use classify_range");
  auto fits = [&](int h) { return static_cast<std::size_t>(p) * count(n, h) >= static_cast<std::size_t>(q) * count(n, h - k); };
  int h = k;
  // phi(h) = c(n,h-k)/c(n,h) increases to 1 and p < q, so this terminates.
  while (fits(h + 1)) ++h;
  return h;
}

/// p*c(n,h0) == q*c(n,h0-k): the integrality condition behind calibration.
inline bool calibration_identity(int n, int k, int p, int q, int h0) {
  return static_cast<std::size_t>(p) * count(n, h0) == static_cast<std::size_t>(q) * count(n, h0 - k);
}

/// Rank of R_h: p*c(n+1,k-1) + sum_{l=k..h} (p*c(n,l) - q*c(n,l-k)).
/// The telescoped form p*c(n+1,h) - q*c(n+1,h-k) is checked against it.
inline std::size_t rho(int n, int k, int p, int q, int h) {
  if (h < k - 1) throw InputError("prolong", "rho: h below k-1");
  if (classify_range(n, k, p, q) == Range::III && h > compute_h0(n, k, p, q))
    throw InputError("prolong", "rho: h above h0");
  long long sum = static_cast<long long>(p) * static_cast<long long>(count(n + 1, k - 1));
  for (int l = k; l <= h; ++l)
    sum += static_cast<long long>(p) * static_cast<long long>(count(n, l)) - static_cast<long long>(q) * static_cast<long long>(count(n, l - k));
  long long closed = static_cast<long long>(p) * static_cast<long long>(count(n + 1, h)) -
                     static_cast<long long>(q) * static_cast<long long>(count(n + 1, h - k));
  if (sum != closed) throw ConsistencyError("prolong", "rho: summed and closed forms disagree");
  return static_cast<std::size_t>(closed);
}

/// The dimension bound pi(n,k,p,q) = rho_{h0}.
inline std::size_t pi_bound(int n, int k, int p, int q) { return rho(n, k, p, q, compute_h0(n, k, p, q)); }

/// The prolonged systems M_h for k <= h <= h_limit.
///
/// Stored as row blocks: block tau (0 <= tau <= h_limit-k) holds the
/// equations differentiated by every index t of height tau, i.e. the
/// q*c(n,tau) rows u + q*t and the p*c(n+1,tau+k) columns v + p*s with
/// |s| <= tau+k. Its entries are known to order spec.order() - tau.
/// M_h stacks blocks 0..h-k and pads with zeros, which is the recursion
/// M_h = [[M_{h-1}, 0], [Q_h, P_h]].
class ProlongationTower {
 public:
  ProlongationTower(OperatorSpec spec, int h_limit) : spec_(std::move(spec)), h_limit_(h_limit), table_(spec_.n(), h_limit) {}

  const OperatorSpec& spec() const noexcept { return spec_; }
  int h_limit() const noexcept { return h_limit_; }
  const LLTable& table() const noexcept { return table_; }

  /// Rows for derivatives of height tau of the equations.
  const JetMatrix& row_block(int tau) const { return blocks_.at(static_cast<std::size_t>(tau)); }

  /// Principal symbol sigma_h: the columns of height exactly h in block h-k.
  JetMatrix P(int h) const {
    check_level(h);
    const JetMatrix& b = row_block(h - spec_.k());
    std::size_t p = static_cast<std::size_t>(spec_.p());
    std::size_t c0 = p * table_.begin_of_height(h);
    return b.block(0, c0, b.rows(), b.cols() - c0);
  }

  /// Columns of height < h in block h-k.
  JetMatrix Q(int h) const {
    check_level(h);
    const JetMatrix& b = row_block(h - spec_.k());
    return b.block(0, 0, b.rows(), static_cast<std::size_t>(spec_.p()) * table_.begin_of_height(h));
  }

  /// The full q*c(n+1,h-k) x p*c(n+1,h) matrix M_h.
  JetMatrix M(int h) const {
    check_level(h);
    const int k = spec_.k();
    const std::size_t p = static_cast<std::size_t>(spec_.p()), q = static_cast<std::size_t>(spec_.q());
    int order = spec_.order() - (h - k);
    JetMatrix m(spec_.space(), order, q * count(spec_.n() + 1, h - k), p * count(spec_.n() + 1, h));
    for (int tau = 0; tau <= h - k; ++tau) {
      const JetMatrix& b = row_block(tau);
      m.place(q * table_.begin_of_height(tau), 0, b.truncated(order));
    }
    return m;
  }

  /// Entry F(i, j) of M_h_limit with 1-based row/column indices (zero
  /// outside the stored blocks).
  Jet F(std::size_t i, std::size_t j) const {
    const std::size_t p = static_cast<std::size_t>(spec_.p()), q = static_cast<std::size_t>(spec_.q());
    BlockPosition row = decode_row(i, q);
    (void)decode_col(j, p);
    int tau = table_.height(row.rank);
    const JetMatrix& b = row_block(tau);
    std::size_t local_row = (row.component - 1) + q * (row.rank - table_.begin_of_height(tau));
    std::size_t local_col = j - 1;
    if (local_col >= b.cols()) return Jet::zero(spec_.space(), b.order());
    return b(local_row, local_col);
  }

 private:
  friend ProlongationTower build_tower(const OperatorSpec& spec, int h_limit);

  void check_level(int h) const {
    if (h < spec_.k() || h > h_limit_) throw std::out_of_range("ProlongationTower: level not built");
  }

  OperatorSpec spec_;
  int h_limit_;
  LLTable table_;
  std::vector<JetMatrix> blocks_;
};

namespace detail {

// Differentiates the q rows of equation block t (rows `row0`.. in `src`)
// along direction i. Column (v, s) of the result receives d_i of the old
// entry plus the old entry at (v, r) when s = ad_i(r).
inline std::vector<Jet> derive_rows(const JetMatrix& src, std::size_t row0, std::size_t q, std::size_t p, const LLTable& table,
                                    int i, std::size_t new_cols) {
  const std::size_t old_cols = src.cols();
  const int order = src.order() - 1;
  std::vector<Jet> out;
  out.reserve(q * new_cols);
  for (std::size_t u = 0; u < q; ++u) {
    std::vector<Jet> row(new_cols, Jet::zero(src.space(), order));
    for (std::size_t j = 0; j < old_cols; ++j) {
      const Jet& e = src(row0 + u, j);
      if (e.is_zero()) continue;
      row[j] += e.derive(i);
      std::size_t v = j % p, r = j / p;
      std::size_t target = v + p * table.ad(r, i);
      row[target] += e.truncated(order);
    }
    for (auto& x : row) out.push_back(std::move(x));
  }
  return out;
}

}  // namespace detail

/// Builds M_k .. M_{h_limit}. Row block ad_i(t) comes from differentiating
/// row block t along x_i; every target is produced by its first (t, i) pair
/// in LL order and the other producing pairs are asserted to agree.
inline ProlongationTower build_tower(const OperatorSpec& spec, int h_limit) {
  const int k = spec.k();
  if (h_limit < k) throw InputError("prolong", "h_limit must be at least k");
  if (spec.order() < h_limit - k) throw InputError("prolong", "insufficient jet order");
  ProlongationTower tower(spec, h_limit);
  const LLTable& table = tower.table_;
  const int n = spec.n();
  const std::size_t p = static_cast<std::size_t>(spec.p()), q = static_cast<std::size_t>(spec.q());

  tower.blocks_.push_back(spec.coeff());
  for (int tau = 1; tau <= h_limit - k; ++tau) {
    const JetMatrix& prev = tower.blocks_.back();
    const std::size_t prev_begin = table.begin_of_height(tau - 1);
    const std::size_t cur_begin = table.begin_of_height(tau);
    const std::size_t nrow_blocks = count(n, tau);
    const std::size_t new_cols = p * count(n + 1, tau + k);
    JetMatrix block(spec.space(), spec.order() - tau, q * nrow_blocks, new_cols);
    for (std::size_t b = 0; b < nrow_blocks; ++b) {
      const MultiIndex& target = table.unrank(cur_begin + b);
      // Producing pairs (t, i) with ad_i t == target, ordered by rank of t.
      std::vector<std::pair<std::size_t, int>> producers;
      for (int i = 0; i < n; ++i)
        if (target[static_cast<std::size_t>(i)] > 0) producers.emplace_back(table.rank_of(target.lowered(static_cast<std::size_t>(i))), i);
      std::sort(producers.begin(), producers.end());
      std::vector<Jet> rows;
      for (std::size_t idx = 0; idx < producers.size(); ++idx) {
        auto [t, i] = producers[idx];
        std::size_t row0 = q * (t - prev_begin);
        std::vector<Jet> candidate = detail::derive_rows(prev, row0, q, p, table, i, new_cols);
        if (idx == 0) {
          rows = std::move(candidate);
        } else if (candidate != rows) {
          std::ostringstream os;
          os << "row block " << target << " differs between derivation directions";
          throw ConsistencyError("build_tower", os.str());
        }
      }
      for (std::size_t u = 0; u < q; ++u)
        for (std::size_t j = 0; j < new_cols; ++j) block.set(q * b + u, j, rows[u * new_cols + j]);
    }
    tower.blocks_.push_back(std::move(block));
  }
  return tower;
}

/// Expected versus actual rank of one principal symbol.
struct LevelRank {
  int h;
  std::size_t expected;
  std::size_t actual;
  bool operator==(const LevelRank&) const = default;
};

struct OrdinaryReport {
  bool ordinary = true;
  std::vector<LevelRank> levels;
  std::optional<int> failing_level;
};

/// Range III only. Checks sigma_h at the base point for k <= h <= h0+1, or
/// up to h0 when the calibration identity holds.
inline OrdinaryReport check_ordinary(const ProlongationTower& tower) {
  const OperatorSpec& s = tower.spec();
  const int n = s.n(), k = s.k(), p = s.p(), q = s.q();
  const int h0 = compute_h0(n, k, p, q);
  const int last = calibration_identity(n, k, p, q, h0) ? h0 : h0 + 1;
  if (tower.h_limit() < last) throw InputError("prolong", "tower not built far enough to decide ordinariness");
  OrdinaryReport rep;
  for (int h = k; h <= last; ++h) {
    std::size_t expected = std::min(static_cast<std::size_t>(q) * count(n, h - k), static_cast<std::size_t>(p) * count(n, h));
    std::size_t actual = rank_at_base(tower.P(h)).rank;
    rep.levels.push_back({h, expected, actual});
    if (actual != expected && rep.ordinary) {
      rep.ordinary = false;
      rep.failing_level = h;
    }
  }
  return rep;
}

/// dim R_h at the base point: p*c(n+1,h) minus the rank of M_h.
inline std::size_t formal_rank_oracle(const ProlongationTower& tower, int h) {
  const OperatorSpec& s = tower.spec();
  return static_cast<std::size_t>(s.p()) * count(s.n() + 1, h) - rank_at_base(tower.M(h)).rank;
}

struct OperatorAnalysis {
  int n = 0, k = 0, p = 0, q = 0;
  Range range = Range::I;
  std::optional<int> h0;
  bool ordinary = false;
  std::vector<LevelRank> ranks;
  std::optional<int> failing_level;
  bool calibrated = false;
  std::map<int, std::size_t> rho;
  std::optional<std::size_t> pi;
  std::optional<std::size_t> range_ii_bound;  // p*c(n+1,k-1)
};

/// Default tower height: h0 when the calibration identity holds, else h0+1.
inline int default_h_limit(int n, int k, int p, int q) {
  int h0 = compute_h0(n, k, p, q);
  return calibration_identity(n, k, p, q, h0) ? h0 : h0 + 1;
}

/// Classification and, in range III, ordinariness, calibration and the
/// rank table. `tower` must reach default_h_limit in range III.
inline OperatorAnalysis analyze(const ProlongationTower& tower) {
  const OperatorSpec& s = tower.spec();
  OperatorAnalysis a;
  a.n = s.n();
  a.k = s.k();
  a.p = s.p();
  a.q = s.q();
  a.range = classify_range(a.n, a.k, a.p, a.q);
  if (a.range == Range::II) {
    a.range_ii_bound = static_cast<std::size_t>(a.p) * count(a.n + 1, a.k - 1);
    return a;
  }
  if (a.range == Range::I) {
    for (int h = a.k - 1; h <= tower.h_limit(); ++h) a.rho[h] = rho(a.n, a.k, a.p, a.q, h);
    return a;
  }
  a.h0 = compute_h0(a.n, a.k, a.p, a.q);
  OrdinaryReport ord = check_ordinary(tower);
  a.ordinary = ord.ordinary;
  a.ranks = ord.levels;
  a.failing_level = ord.failing_level;
  a.calibrated = a.ordinary && calibration_identity(a.n, a.k, a.p, a.q, *a.h0);
  for (int h = a.k - 1; h <= *a.h0; ++h) a.rho[h] = rho(a.n, a.k, a.p, a.q, h);
  if (a.ordinary) a.pi = a.rho.at(*a.h0);
  return a;
}

/// Calibration verdict of a finished analysis.
inline bool check_calibrated(const OperatorAnalysis& a) { return a.calibrated; }

}  // namespace jetprol

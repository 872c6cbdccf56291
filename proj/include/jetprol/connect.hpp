#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "jetprol/errors.hpp"
#include "jetprol/exactla.hpp"
#include "jetprol/jet.hpp"
#include "jetprol/multiindex.hpp"
#include "jetprol/prolong.hpp"

namespace jetprol {

/// One coordinate of an adapted frame: the jet component d^I f_v.
struct FrameCoordinate {
  int v;             // unknown, 0-based
  std::size_t rank;  // LL rank of I
  int level;         // |I|, or k-1 for every component of order <= k-1
  bool operator==(const FrameCoordinate&) const = default;
};

/// Coordinates on E = R_{h0-1} drawn level by level from the jet
/// components themselves. `parametrize` maps frame coordinates to all
/// p*c(n+1,h0-1) components (row v + p*s), with unit rows at the frame
/// components.
struct AdaptedFrame {
  int n = 0, k = 0, p = 0, q = 0, h0 = 0;
  std::vector<FrameCoordinate> coords;
  std::vector<std::size_t> level_sizes;  // levels k-1, k, ..., h0-1
  JetMatrix parametrize;

  std::size_t dimension() const noexcept { return coords.size(); }

  std::size_t component_row(int v, std::size_t rank) const { return static_cast<std::size_t>(v) + static_cast<std::size_t>(p) * rank; }
};

/// Chooses the free components level by level. Level k-1 takes every
/// component of order <= k-1. Level h takes the non-pivot columns of P_h;
/// the pivot columns are solved for in terms of lower-order and free
/// components. Requires the calibration identity and an ordinary operator.
inline AdaptedFrame adapted_frame(const ProlongationTower& tower) {
  const OperatorSpec& s = tower.spec();
  const int n = s.n(), k = s.k(), p = s.p(), q = s.q();
  if (classify_range(n, k, p, q) != Range::III) throw InputError("adapted_frame", "operator is not in range III");
  const int h0 = compute_h0(n, k, p, q);
  if (!calibration_identity(n, k, p, q, h0)) throw InputError("adapted_frame", "operator is not calibrated");
  if (tower.h_limit() < h0) throw InputError("adapted_frame", "tower not built to h0");

  const LLTable& table = tower.table();
  const std::size_t pp = static_cast<std::size_t>(p);
  const std::size_t ncomp = pp * count(n + 1, h0 - 1);
  const std::size_t dim = pi_bound(n, k, p, q);

  AdaptedFrame fr;
  fr.n = n;
  fr.k = k;
  fr.p = p;
  fr.q = q;
  fr.h0 = h0;

  // phi[j] expresses component j through the frame coordinates.
  std::vector<std::vector<Jet>> phi(ncomp);
  int order = s.order();
  auto unit_row = [&](std::size_t a) {
    std::vector<Jet> row(dim, Jet::zero(s.space(), s.order()));
    row[a] = Jet::constant(s.space(), s.order(), 1);
    return row;
  };

  const std::size_t base_count = pp * count(n + 1, k - 1);
  for (std::size_t j = 0; j < base_count; ++j) {
    fr.coords.push_back({static_cast<int>(j % pp), j / pp, k - 1});
    phi[j] = unit_row(j);
  }
  fr.level_sizes.push_back(base_count);

  for (int h = k; h <= h0 - 1; ++h) {
    const JetMatrix& block = tower.row_block(h - k);
    const std::size_t c0 = pp * table.begin_of_height(h);
    RankInfo ri = rank_at_base(tower.P(h));
    if (ri.rank != block.rows()) throw DegeneracyError("adapted_frame", "no adapted frame at this base point");
    std::vector<bool> pivot(block.cols() - c0, false);
    for (std::size_t c : ri.pivot_cols) pivot[c] = true;

    std::vector<std::size_t> free_cols;
    for (std::size_t c = 0; c < c0; ++c) free_cols.push_back(c);
    std::size_t level_start = fr.coords.size();
    for (std::size_t c = 0; c < pivot.size(); ++c)
      if (!pivot[c]) {
        std::size_t col = c0 + c;
        free_cols.push_back(col);
        fr.coords.push_back({static_cast<int>(col % pp), col / pp, h});
        phi[col] = unit_row(fr.coords.size() - 1);
      }
    fr.level_sizes.push_back(fr.coords.size() - level_start);

    JetMatrix l = in_stage("adapted_frame", [&] { return solve_dependent(block, free_cols); });
    order = std::min(order, l.order());
    std::size_t dep_index = 0;
    for (std::size_t c = 0; c < pivot.size(); ++c) {
      if (!pivot[c]) continue;
      std::vector<Jet> row(dim, Jet::zero(s.space(), l.order()));
      for (std::size_t f = 0; f < free_cols.size(); ++f) {
        const Jet& coef = l(dep_index, f);
        if (coef.is_zero()) continue;
        const std::vector<Jet>& src = phi[free_cols[f]];
        for (std::size_t a = 0; a < dim; ++a)
          if (!src[a].is_zero()) row[a] += coef * src[a];
      }
      phi[c0 + c] = std::move(row);
      ++dep_index;
    }
  }
  if (fr.coords.size() != dim) throw ConsistencyError("adapted_frame", "frame size differs from pi");

  for (const auto& row : phi)
    for (const auto& x : row) order = std::min(order, x.order());
  fr.parametrize = JetMatrix(s.space(), order, ncomp, dim);
  for (std::size_t j = 0; j < ncomp; ++j)
    for (std::size_t a = 0; a < dim; ++a) fr.parametrize.set(j, a, phi[j][a]);
  return fr;
}

/// The connection nabla_i = d_i - A_i on E in an adapted frame.
struct Connection {
  AdaptedFrame frame;
  JetMatrix U;     // order-h0 components from the (h0-1)-jet: -(P_h0)^-1 Q_h0
  JetMatrix lift;  // U * parametrize
  std::vector<JetMatrix> A;

  int n() const { return frame.n; }
  std::size_t dimension() const { return frame.dimension(); }
};

/// Row a of A_i is component (v_a, I_a + 1_i) of the lifted jet, read from
/// `parametrize` below order h0 and from U * parametrize at order h0.
inline Connection build_connection(const ProlongationTower& tower, const AdaptedFrame& frame) {
  const int h0 = frame.h0;
  if (tower.h_limit() < h0) throw InputError("build_connection", "tower not built to h0");
  JetMatrix P = tower.P(h0);
  if (P.rows() != P.cols()) throw InputError("build_connection", "P_h0 is not square: operator is not calibrated");
  Connection c;
  c.frame = frame;
  c.U = -(in_stage("build_connection", [&] { return invert_square(P); }) * tower.Q(h0));
  c.lift = c.U * frame.parametrize;

  const LLTable& table = tower.table();
  const std::size_t pp = static_cast<std::size_t>(frame.p);
  const std::size_t top = table.begin_of_height(h0);
  const std::size_t dim = frame.dimension();
  const int order = std::min(frame.parametrize.order(), c.lift.order());
  for (int i = 0; i < frame.n; ++i) {
    JetMatrix a(frame.parametrize.space(), order, dim, dim);
    for (std::size_t row = 0; row < dim; ++row) {
      const FrameCoordinate& fc = frame.coords[row];
      std::size_t J = table.ad(fc.rank, i);
      for (std::size_t col = 0; col < dim; ++col) {
        const Jet& e = J < top ? frame.parametrize(frame.component_row(fc.v, J), col)
                               : c.lift(static_cast<std::size_t>(fc.v) + pp * (J - top), col);
        if (!e.is_zero()) a.set(row, col, e);
      }
    }
    c.A.push_back(std::move(a));
  }
  return c;
}

/// d_i sigma - A_i sigma for a section given by frame coordinates.
inline std::vector<Jet> covariant_derivative(const Connection& c, int i, const std::vector<Jet>& sigma) {
  std::vector<Jet> a_sigma = c.A.at(static_cast<std::size_t>(i)).apply(sigma);
  std::vector<Jet> out;
  out.reserve(sigma.size());
  for (std::size_t r = 0; r < sigma.size(); ++r) out.push_back(sigma[r].derive(i) - a_sigma[r]);
  return out;
}

struct CurvatureBlock {
  int i, j;  // 0-based, i < j
  JetMatrix K;
};

/// K_ij = d_j A_i - d_i A_j + A_i A_j - A_j A_i, so that
/// K_ij sigma = [nabla_i, nabla_j] sigma for nabla_i = d_i - A_i.
inline std::vector<CurvatureBlock> curvature(const Connection& c) {
  std::vector<CurvatureBlock> out;
  const int n = c.n();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const JetMatrix& ai = c.A[static_cast<std::size_t>(i)];
      const JetMatrix& aj = c.A[static_cast<std::size_t>(j)];
      if (ai.order() < 1) throw InputError("curvature", "insufficient jet order");
      JetMatrix k = ai.derive(j) - aj.derive(i) + ai * aj - aj * ai;
      out.push_back({i, j, std::move(k)});
    }
  return out;
}

struct CurvatureEntry {
  int i, j;
  std::size_t row, col;  // 1-based
  bool operator==(const CurvatureEntry&) const = default;
};

struct ConcentrationReport {
  std::size_t zero_rows = 0;  // rows 1..zero_rows must vanish
  bool holds = true;
  std::optional<CurvatureEntry> first_violation;
  std::vector<std::size_t> nonzero_rows;  // 1-based, over all K_ij
  bool flat = true;
  int certified_order = 0;
};

/// Number of leading curvature rows that vanish in an adapted frame:
/// p*c(n+1,h0-2) - q*c(n+1,h0-2-k).
inline std::size_t concentration_zero_rows(int n, int k, int p, int q, int h0) {
  return static_cast<std::size_t>(p) * count(n + 1, h0 - 2) - static_cast<std::size_t>(q) * count(n + 1, h0 - 2 - k);
}

inline ConcentrationReport concentration_check(const std::vector<CurvatureBlock>& curv, const AdaptedFrame& frame) {
  ConcentrationReport rep;
  rep.zero_rows = concentration_zero_rows(frame.n, frame.k, frame.p, frame.q, frame.h0);
  std::size_t below_top = 0;
  for (std::size_t l = 0; l + 1 < frame.level_sizes.size(); ++l) below_top += frame.level_sizes[l];
  if (below_top != rep.zero_rows) throw ConsistencyError("concentration", "frame levels disagree with the zero-row count");

  const std::size_t dim = frame.dimension();
  std::vector<bool> nonzero(dim, false);
  rep.certified_order = curv.empty() ? frame.parametrize.order() : curv.front().K.order();
  for (const auto& b : curv) {
    rep.certified_order = std::min(rep.certified_order, b.K.order());
    for (std::size_t r = 0; r < dim; ++r)
      for (std::size_t c = 0; c < dim; ++c) {
        if (b.K(r, c).is_zero()) continue;
        nonzero[r] = true;
        rep.flat = false;
        if (r < rep.zero_rows && rep.holds) {
          rep.holds = false;
          rep.first_violation = CurvatureEntry{b.i, b.j, r + 1, c + 1};
        }
      }
  }
  for (std::size_t r = 0; r < dim; ++r)
    if (nonzero[r]) rep.nonzero_rows.push_back(r + 1);
  return rep;
}

/// A formal flat section and the solution of the operator it encodes.
struct FlatSection {
  std::vector<Jet> frame;    // coordinates in the adapted frame
  std::vector<Jet> section;  // the p components f_v
};

namespace detail {

inline Jet partial(Jet f, const MultiIndex& I) {
  for (std::size_t i = 0; i < I.size(); ++i)
    for (int e = 0; e < I[i]; ++e) f = f.derive(static_cast<int>(i));
  return f;
}

}  // namespace detail

/// Frame coordinates of the (h0-1)-jet of a section f of E: d^I f_v at each
/// frame component.
inline std::vector<Jet> frame_coordinates_of(const AdaptedFrame& frame, const LLTable& table, const std::vector<Jet>& f) {
  std::vector<Jet> sigma;
  for (const auto& fc : frame.coords) sigma.push_back(detail::partial(f.at(static_cast<std::size_t>(fc.v)), table.unrank(fc.rank)));
  return sigma;
}

/// Integrates d_i sigma = A_i sigma formally to `order`, one section per
/// unit initial value. Each Taylor coefficient is generated along the
/// lowest direction it depends on and re-checked along all others; the
/// resulting f is then checked against the operator and the frame.
inline std::vector<FlatSection> integrate_flat_sections(const Connection& c, const ProlongationTower& tower, int order) {
  const AdaptedFrame& fr = c.frame;
  const std::size_t dim = fr.dimension();
  const int a_order = c.A.front().order();
  if (order > a_order + 1) throw InputError("integrate", "insufficient jet order for the requested section order");
  if (order < tower.spec().k()) throw InputError("integrate", "section order below operator order");
  for (const auto& b : curvature(c))
    for (std::size_t r = 0; r < dim; ++r)
      for (std::size_t col = 0; col < dim; ++col)
        if (sgn(b.K(r, col).constant_term()) != 0) throw DegeneracyError("integrate", "not flat");

  const SpacePtr& space = fr.parametrize.space();
  auto layout = JetLayout::get(fr.n, order);
  const LLTable& table = layout->table();
  const std::size_t size = layout->size();

  // (A_i sigma)_a at LL rank r, from the coefficients generated so far.
  auto rhs = [&](const std::vector<std::vector<Rational>>& sig, int i, std::size_t a, std::size_t r) {
    Rational acc;
    const JetMatrix& A = c.A[static_cast<std::size_t>(i)];
    for (std::size_t b = 0; b < dim; ++b) {
      const Jet& e = A(a, b);
      if (e.is_zero()) continue;
      for (auto [x, y] : layout->factors_of(r))
        if (sgn(e.coefficient(x)) != 0 && sgn(sig[b][y]) != 0) acc += e.coefficient(x) * sig[b][y];
    }
    return acc;
  };

  std::vector<FlatSection> out;
  for (std::size_t start = 0; start < dim; ++start) {
    std::vector<std::vector<Rational>> sig(dim, std::vector<Rational>(size));
    sig[start][0] = 1;
    for (std::size_t t = 1; t < size; ++t) {
      const MultiIndex& T = table.unrank(t);
      int i = 0;
      while (T[static_cast<std::size_t>(i)] == 0) ++i;
      std::size_t r = table.rank_of(T.lowered(static_cast<std::size_t>(i)));
      for (std::size_t a = 0; a < dim; ++a) sig[a][t] = rhs(sig, i, a, r) / T[static_cast<std::size_t>(i)];
    }
    for (std::size_t t = 1; t < size; ++t) {
      const MultiIndex& T = table.unrank(t);
      for (int i = 0; i < fr.n; ++i) {
        if (T[static_cast<std::size_t>(i)] == 0) continue;
        std::size_t r = table.rank_of(T.lowered(static_cast<std::size_t>(i)));
        for (std::size_t a = 0; a < dim; ++a)
          if (sig[a][t] * T[static_cast<std::size_t>(i)] != rhs(sig, i, a, r))
            throw ConsistencyError("integrate", "flatness violated at order " + std::to_string(T.height()));
      }
    }
    FlatSection fs;
    for (std::size_t a = 0; a < dim; ++a) fs.frame.push_back(Jet::from_coefficients(space, order, std::move(sig[a])));
    for (int v = 0; v < fr.p; ++v) fs.section.push_back(fs.frame[static_cast<std::size_t>(v)]);
    out.push_back(std::move(fs));
  }

  // Each f must solve the operator and reproduce its own frame through
  // the parametrization.
  const OperatorSpec& spec = tower.spec();
  const std::size_t pp = static_cast<std::size_t>(spec.p());
  for (const auto& fs : out) {
    for (int u = 0; u < spec.q(); ++u) {
      std::optional<Jet> acc;
      for (std::size_t col = 0; col < spec.coeff().cols(); ++col) {
        const Jet& m = spec.coeff()(static_cast<std::size_t>(u), col);
        if (m.is_zero()) continue;
        Jet term = m * detail::partial(fs.section[col % pp], table.unrank(col / pp));
        acc = acc ? *acc + term : term;
      }
      if (acc && !acc->is_zero()) throw ConsistencyError("integrate", "reconstructed section violates equation " + std::to_string(u + 1));
    }
    std::vector<Jet> comps = fr.parametrize.apply(fs.frame);
    for (std::size_t j = 0; j < comps.size(); ++j) {
      if (tower.table().height(j / pp) > order) continue;
      Jet d = detail::partial(fs.section[j % pp], tower.table().unrank(j / pp));
      if (!agree(d, comps[j])) throw ConsistencyError("integrate", "flat section is not the jet of its base component");
    }
  }
  return out;
}

}  // namespace jetprol

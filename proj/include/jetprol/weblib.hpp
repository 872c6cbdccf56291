#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "jetprol/errors.hpp"
#include "jetprol/exactla.hpp"
#include "jetprol/expr.hpp"
#include "jetprol/pipeline.hpp"
#include "jetprol/prolong.hpp"

namespace jetprol {

/// d vector fields X_l = sum_i a_l^i d/dx_i on an n-chart, each spanning
/// the tangent line of one foliation by curves.
struct WebSpec {
  int n = 0;
  int d = 0;
  std::vector<std::vector<ExprPtr>> fields;  // d rows of n coefficient expressions
  std::vector<Rational> base_point;
};

namespace forms {

// Differential form with jet coefficients; keys are bitmasks of dx indices.
using Form = std::map<unsigned, Jet>;

inline int bits_below(unsigned mask, int l) { return __builtin_popcount(mask & ((1u << l) - 1u)); }

inline void accumulate(Form& f, unsigned mask, const Jet& j) {
  auto it = f.find(mask);
  if (it == f.end()) f.emplace(mask, j);
  else it->second += j;
}

inline Form exterior_derivative(const Form& w, int n) {
  Form out;
  for (const auto& [mask, c] : w)
    for (int l = 0; l < n; ++l) {
      if (mask & (1u << l)) continue;
      Jet t = c.derive(l);
      accumulate(out, mask | (1u << l), bits_below(mask, l) % 2 ? -t : t);
    }
  return out;
}

inline Form interior(const std::vector<Jet>& X, const Form& w, int n) {
  Form out;
  for (const auto& [mask, c] : w) {
    int pos = 0;
    for (int m = 0; m < n; ++m) {
      if (!(mask & (1u << m))) continue;
      Jet t = X[static_cast<std::size_t>(m)] * c;
      accumulate(out, mask & ~(1u << m), pos % 2 ? -t : t);
      ++pos;
    }
  }
  return out;
}

/// Cartan's formula L_X = i_X d + d i_X.
inline Form lie_derivative(const std::vector<Jet>& X, const Form& w, int n) {
  Form a = interior(X, exterior_derivative(w, n), n);
  for (const auto& [mask, c] : exterior_derivative(interior(X, w, n), n)) accumulate(a, mask, c);
  return a;
}

}  // namespace forms

/// The web's abelian-relation operator, reduced to a surjective one.
struct WebOperator {
  OperatorSpec spec;
  std::vector<int> eliminated;  // foliations whose f_l were solved for (0-based)
  std::vector<int> free;        // foliation carrying unknown v
  int dropped_row = -1;         // raw equation removed (0-based)
  std::vector<Jet> g;           // L_{X_l} omega_l = g_l omega_l
};

/// g with L_X(i_X vol) = g * i_X vol, extracted componentwise from Cartan's
/// formula and checked on every component.
inline Jet lie_factor(const std::vector<Jet>& X, int n) {
  const SpacePtr& space = X.front().space();
  forms::Form vol{{(1u << n) - 1u, Jet::constant(space, X.front().order(), 1)}};
  forms::Form omega = forms::interior(X, vol, n);
  forms::Form lie = forms::lie_derivative(X, omega, n);
  std::optional<Jet> g;
  for (const auto& [mask, w] : omega)
    if (sgn(w.constant_term()) != 0) {
      auto it = lie.find(mask);
      g = it == lie.end() ? Jet::zero(space, w.order() - 1) : it->second * w.inverse();
      break;
    }
  if (!g) throw DegeneracyError("web_operator", "vector field vanishes at base point");
  for (const auto& [mask, w] : omega) {
    auto it = lie.find(mask);
    Jet lhs = it == lie.end() ? Jet::zero(space, g->order()) : it->second;
    if (!agree(lhs, *g * w)) throw ConsistencyError("web_operator", "Lie derivative is not proportional to the generator");
  }
  return *g;
}

inline std::vector<std::vector<Jet>> compile_fields(const WebSpec& web, const SpacePtr& space, int order) {
  std::vector<std::vector<Jet>> a;
  for (int l = 0; l < web.d; ++l) {
    std::vector<Jet> row;
    for (int i = 0; i < web.n; ++i)
      row.push_back(in_stage("compile", [&] { return compile(web.fields[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)], space, order); }));
    a.push_back(std::move(row));
  }
  return a;
}

/// Every n of the d directions must be independent at the base point.
/// Returns the first dependent subset, if any.
inline std::optional<std::vector<int>> dependent_direction_subset(const RationalMatrix& dirs, int n) {
  const int d = static_cast<int>(dirs.rows());
  std::vector<int> pick(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pick[static_cast<std::size_t>(i)] = i;
  for (;;) {
    RationalMatrix m(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) m(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = dirs(static_cast<std::size_t>(pick[static_cast<std::size_t>(r)]), static_cast<std::size_t>(c));
    if (rational_rank(m).rank < static_cast<std::size_t>(n)) return pick;
    int i = n - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == d - n + i) --i;
    if (i < 0) return std::nullopt;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < n; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
}

/// Checks shape, poles and general position at the base point.
inline void validate_web(const WebSpec& web) {
  if (web.n < 2) throw InputError("web", "webs need n >= 2");
  if (web.d <= web.n) throw InputError("web", "webs need d > n");
  if (web.n > 16) throw InputError("web", "n too large");
  if (web.fields.size() != static_cast<std::size_t>(web.d)) throw InputError("web", "expected d field rows");
  for (const auto& row : web.fields)
    if (row.size() != static_cast<std::size_t>(web.n)) throw InputError("web", "each field needs n coefficients");
  if (web.base_point.size() != static_cast<std::size_t>(web.n)) throw InputError("web", "base point must have n coordinates");
  auto space = JetSpace::make(web.base_point);
  auto a = compile_fields(web, space, 0);
  RationalMatrix dirs(static_cast<std::size_t>(web.d), static_cast<std::size_t>(web.n));
  for (int l = 0; l < web.d; ++l)
    for (int i = 0; i < web.n; ++i) dirs(static_cast<std::size_t>(l), static_cast<std::size_t>(i)) = a[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)].constant_term();
  if (auto bad = dependent_direction_subset(dirs, web.n)) {
    std::string s;
    for (int l : *bad) s += (s.empty() ? "" : ",") + std::to_string(l + 1);
    throw DegeneracyError("web", "directions {" + s + "} are linearly dependent at the base point");
  }
}

namespace detail {

inline bool is_coordinate_field(const std::vector<Jet>& a) {
  int ones = 0;
  for (const auto& x : a) {
    for (std::size_t t = 1; t < x.coefficients().size(); ++t)
      if (sgn(x.coefficient(t)) != 0) return false;
    if (x.constant_term() == 1) ++ones;
    else if (sgn(x.constant_term()) != 0) return false;
  }
  return ones == 1;
}

}  // namespace detail

/// Builds the first-order operator whose solutions are the abelian
/// relations. With omega_l = i_{X_l} vol and eta_l = f_l omega_l:
///   (a) sum_l f_l a_l^i = 0 for every i, solved for n of the f_l;
///   (b) X_l f_l + g_l f_l = 0 for every l, after substituting (a).
/// The d equations of (b) have rank d-1; one dependent row is dropped.
/// `compile_order` is the Taylor order of the field coefficients; the
/// operator coefficients are one order lower.
inline WebOperator web_operator(const WebSpec& web, int compile_order, std::optional<std::vector<int>> pivots = std::nullopt) {
  validate_web(web);
  if (compile_order < 1) throw InputError("web_operator", "insufficient jet order");
  const int n = web.n, d = web.d, p = d - n;
  auto space = JetSpace::make(web.base_point);
  auto a = compile_fields(web, space, compile_order);

  std::vector<Jet> g;
  for (int l = 0; l < d; ++l) g.push_back(lie_factor(a[static_cast<std::size_t>(l)], n));

  // Constraint matrix C (n x d) at the base point picks the eliminated f_l.
  RationalMatrix c0(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
  for (int l = 0; l < d; ++l)
    for (int i = 0; i < n; ++i) c0(static_cast<std::size_t>(i), static_cast<std::size_t>(l)) = a[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)].constant_term();
  std::vector<int> piv;
  if (pivots) {
    piv = *pivots;
    std::sort(piv.begin(), piv.end());
    if (piv.size() != static_cast<std::size_t>(n) || std::adjacent_find(piv.begin(), piv.end()) != piv.end() || piv.front() < 0 || piv.back() >= d)
      throw InputError("web_operator", "elimination needs n distinct foliations");
  } else {
    std::vector<int> order;
    for (int l = 0; l < d; ++l)
      if (detail::is_coordinate_field(a[static_cast<std::size_t>(l)])) order.push_back(l);
    for (int l = 0; l < d; ++l)
      if (!detail::is_coordinate_field(a[static_cast<std::size_t>(l)])) order.push_back(l);
    for (int l : order) {
      std::vector<int> trial = piv;
      trial.push_back(l);
      RationalMatrix m(static_cast<std::size_t>(n), trial.size());
      for (int i = 0; i < n; ++i)
        for (std::size_t c = 0; c < trial.size(); ++c) m(static_cast<std::size_t>(i), c) = c0(static_cast<std::size_t>(i), static_cast<std::size_t>(trial[c]));
      if (rational_rank(m).rank == trial.size()) piv = trial;
      if (piv.size() == static_cast<std::size_t>(n)) break;
    }
    std::sort(piv.begin(), piv.end());
  }
  std::vector<int> fre;
  for (int l = 0; l < d; ++l)
    if (!std::binary_search(piv.begin(), piv.end(), l)) fre.push_back(l);

  JetMatrix cp(space, compile_order, static_cast<std::size_t>(n), static_cast<std::size_t>(n));
  JetMatrix cf(space, compile_order, static_cast<std::size_t>(n), static_cast<std::size_t>(p));
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < n; ++r) cp.set(static_cast<std::size_t>(i), static_cast<std::size_t>(r), a[static_cast<std::size_t>(piv[static_cast<std::size_t>(r)])][static_cast<std::size_t>(i)]);
    for (int v = 0; v < p; ++v) cf.set(static_cast<std::size_t>(i), static_cast<std::size_t>(v), a[static_cast<std::size_t>(fre[static_cast<std::size_t>(v)])][static_cast<std::size_t>(i)]);
  }
  if (rank_at_base(cp).rank != static_cast<std::size_t>(n)) throw DegeneracyError("web_operator", "degenerate direction matrix");
  JetMatrix elim = -(invert_square(cp) * cf);  // f_piv = elim * f_free

  // Raw system: d equations, columns v + p*s with s = 0 (value) or s = i+1 (d/dx_i).
  const int order = compile_order - 1;
  const std::size_t pp = static_cast<std::size_t>(p);
  JetMatrix raw(space, order, static_cast<std::size_t>(d), pp * static_cast<std::size_t>(n + 1));
  for (int l = 0; l < d; ++l) {
    const auto& al = a[static_cast<std::size_t>(l)];
    const std::size_t row = static_cast<std::size_t>(l);
    auto free_it = std::find(fre.begin(), fre.end(), l);
    if (free_it != fre.end()) {
      std::size_t v = static_cast<std::size_t>(free_it - fre.begin());
      raw.set(row, v, g[static_cast<std::size_t>(l)]);
      for (int i = 0; i < n; ++i) raw.set(row, v + pp * static_cast<std::size_t>(i + 1), al[static_cast<std::size_t>(i)]);
      continue;
    }
    std::size_t r = static_cast<std::size_t>(std::find(piv.begin(), piv.end(), l) - piv.begin());
    for (std::size_t v = 0; v < pp; ++v) {
      const Jet& lv = elim(r, v);
      Jet value = g[static_cast<std::size_t>(l)] * lv;
      for (int i = 0; i < n; ++i) {
        value += al[static_cast<std::size_t>(i)] * lv.derive(i);
        raw.set(row, v + pp * static_cast<std::size_t>(i + 1), al[static_cast<std::size_t>(i)] * lv);
      }
      raw.set(row, v, value);
    }
  }

  RankInfo full = rank_at_base(raw);
  if (full.rank != static_cast<std::size_t>(d - 1))
    throw DegeneracyError("web_operator", "raw system has rank " + std::to_string(full.rank) + " at the base point, expected " + std::to_string(d - 1));
  int dropped = -1;
  RationalMatrix r0 = raw.constant_part();
  // First row lying in the span of the rows above it.
  for (int l = 0; l < d && dropped < 0; ++l) {
    RationalMatrix head(static_cast<std::size_t>(l + 1), r0.cols());
    for (int i = 0; i <= l; ++i)
      for (std::size_t c = 0; c < r0.cols(); ++c) head(static_cast<std::size_t>(i), c) = r0(static_cast<std::size_t>(i), c);
    if (rational_rank(head).rank < static_cast<std::size_t>(l + 1)) dropped = l;
  }

  std::vector<std::size_t> keep, all_cols;
  for (int l = 0; l < d; ++l)
    if (l != dropped) keep.push_back(static_cast<std::size_t>(l));
  for (std::size_t c = 0; c < raw.cols(); ++c) all_cols.push_back(c);
  JetMatrix reduced = raw.submatrix(keep, all_cols);

  // The dropped row must be a jet combination of the kept ones.
  {
    RankInfo ri = rank_at_base(reduced);
    JetMatrix sq = reduced.submatrix([&] {
      std::vector<std::size_t> rs(keep.size());
      for (std::size_t i = 0; i < rs.size(); ++i) rs[i] = i;
      return rs;
    }(), ri.pivot_cols);
    JetMatrix drow = raw.submatrix({static_cast<std::size_t>(dropped)}, ri.pivot_cols);
    JetMatrix mu = drow * invert_square(sq);
    JetMatrix recon = mu * reduced;
    JetMatrix actual = raw.submatrix({static_cast<std::size_t>(dropped)}, all_cols);
    if (!(recon - actual).is_zero()) throw ConsistencyError("web_operator", "dropped equation is not dependent at jet level");
  }

  return WebOperator{OperatorSpec(1, p, d - 1, std::move(reduced)), piv, fre, dropped, std::move(g)};
}

/// Damiano's bound sum_{h=0}^{d-n-1} C(n-2+h, h)(d-n-h), checked against
/// C(d-1, n) and pi(n, 1, d-n, d-1).
inline std::size_t damiano_bound(int n, int d) {
  if (n < 2 || d <= n) throw InputError("weblib", "damiano_bound needs d > n >= 2");
  std::size_t sum = 0;
  for (int h = 0; h <= d - n - 1; ++h) sum += count(n - 1, h) * static_cast<std::size_t>(d - n - h);
  if (sum != binomial(d - 1, n)) throw ConsistencyError("weblib", "Damiano sum differs from C(d-1,n)");
  if (sum != pi_bound(n, 1, d - n, d - 1)) throw ConsistencyError("weblib", "Damiano sum differs from pi(n,1,d-n,d-1)");
  return sum;
}

/// The (n+3)-web W_c: the n coordinate fields and
///   X_{n+1} = 1/(x_n+c)       sum_i (x_i+c) d_i
///   X_{n+2} = 1/(x_n-1-c)     sum_i (x_i-1-c) d_i
///   X_{n+3} = 1/(x_n(x_n-1))  sum_i x_i(x_i-1) d_i
/// The base point must avoid the poles and keep the directions in general
/// position.
inline WebSpec wc_family(int n, const Rational& c, const std::vector<Rational>& base) {
  if (n < 2) throw InputError("wc_family", "n must be at least 2");
  if (base.size() != static_cast<std::size_t>(n)) throw InputError("wc_family", "base point must have n coordinates");
  const Rational& xn = base.back();
  std::vector<std::string> bad;
  if (xn + c == 0) bad.push_back("x_n = -c (pole of X_{n+1})");
  if (xn - 1 - c == 0) bad.push_back("x_n = 1+c (pole of X_{n+2})");
  if (xn == 0 || xn == 1) bad.push_back("x_n in {0,1} (pole of X_{n+3})");
  if (!bad.empty()) {
    std::string s;
    for (const auto& b : bad) s += (s.empty() ? "" : "; ") + b;
    throw DegeneracyError("wc_family", "base point on a pole: " + s);
  }

  WebSpec web;
  web.n = n;
  web.d = n + 3;
  web.base_point = base;
  const std::string cs = "(" + (sgn(c) < 0 ? "-" + to_string(Rational(-c)) : to_string(c)) + ")";
  const std::string last = "x" + std::to_string(n);
  for (int l = 0; l < n; ++l) {
    std::vector<ExprPtr> row;
    for (int i = 0; i < n; ++i) row.push_back(Expr::literal(i == l ? 1 : 0));
    web.fields.push_back(std::move(row));
  }
  auto family = [&](auto numerator, const std::string& denominator) {
    std::vector<ExprPtr> row;
    for (int i = 1; i <= n; ++i) row.push_back(parse_expr("(" + numerator("x" + std::to_string(i)) + ")/(" + denominator + ")"));
    web.fields.push_back(std::move(row));
  };
  family([&](const std::string& x) { return x + "+" + cs; }, last + "+" + cs);
  family([&](const std::string& x) { return x + "-1-" + cs; }, last + "-1-" + cs);
  family([&](const std::string& x) { return x + "*(" + x + "-1)"; }, last + "*(" + last + "-1)");
  in_stage("wc_family", [&] { validate_web(web); });
  return web;
}

/// Random rational point with small numerators and denominators.
template <typename Rng>
std::vector<Rational> random_base_point(Rng& rng, int n) {
  std::uniform_int_distribution<int> num(-12, 12), den(2, 13);
  std::vector<Rational> b;
  for (int i = 0; i < n; ++i) {
    Rational r(num(rng), den(rng));
    r.canonicalize();
    b.push_back(r);
  }
  return b;
}

/// First admissible W_c base point from a fixed pseudo-random sequence.
inline std::vector<Rational> default_wc_base(int n, const Rational& c) {
  std::vector<Rational> candidate;
  for (int i = 0; i < n; ++i) candidate.emplace_back(1, 2 * i + 3);
  std::mt19937_64 rng(0x5eed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    try {
      wc_family(n, c, candidate);
      return candidate;
    } catch (const DegeneracyError&) {
      candidate = random_base_point(rng, n);
    }
  }
  throw DegeneracyError("wc_family", "no admissible base point found for this c");
}

struct WebAnalysis {
  WebOperator op;
  PipelineResult result;
  std::size_t damiano = 0;
  int compile_order = 0;
};

/// Default Taylor order of the field coefficients: one more than the
/// operator needs, since building the operator differentiates once.
inline int default_web_compile_order(int n, int d) { return default_jet_order(n, 1, d - n, d - 1) + 1; }

/// Full pipeline for a web. The operator is expected to be ordinary and
/// calibrated with h0 = d-n; anything else is reported as a degeneracy.
inline WebAnalysis analyze_web(const WebSpec& web, std::optional<int> compile_order = std::nullopt,
                               std::optional<std::vector<int>> pivots = std::nullopt) {
  int order = compile_order.value_or(default_web_compile_order(web.n, web.d));
  WebOperator op = in_stage("web_operator", [&] { return web_operator(web, order, pivots); });
  PipelineResult res = run_pipeline(op.spec);
  const OperatorAnalysis& an = res.analysis;
  if (!an.ordinary) throw DegeneracyError("check_ordinary", "web operator is not ordinary at this base point");
  if (!an.calibrated) throw DegeneracyError("check_ordinary", "web operator is not calibrated at this base point");
  if (an.h0 != web.d - web.n) throw ConsistencyError("check_ordinary", "h0 differs from d-n");
  std::size_t dam = damiano_bound(web.n, web.d);
  if (an.pi != dam) throw ConsistencyError("check_ordinary", "pi differs from the Damiano bound");
  return WebAnalysis{std::move(op), std::move(res), dam, order};
}

}  // namespace jetprol

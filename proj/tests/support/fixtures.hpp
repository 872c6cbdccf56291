#pragma once

#include <random>
#include <vector>

#include "jetprol/connect.hpp"
#include "jetprol/exactla.hpp"
#include "jetprol/expr.hpp"
#include "jetprol/jet.hpp"
#include "jetprol/prolong.hpp"

namespace fixtures {

using namespace jetprol;
using Rng = std::mt19937_64;

inline Rational random_rational(Rng& rng, int num = 9, int den = 6) {
  std::uniform_int_distribution<int> a(-num, num), b(1, den);
  Rational r(a(rng), b(rng));
  r.canonicalize();
  return r;
}

inline Rational random_nonzero(Rng& rng) {
  for (;;) {
    Rational r = random_rational(rng);
    if (sgn(r) != 0) return r;
  }
}

/// Dense random jet; about a third of the higher coefficients are zero.
inline Jet random_jet(const SpacePtr& space, int order, Rng& rng, bool unit = false) {
  auto layout = JetLayout::get(space->n, order);
  std::vector<Rational> c(layout->size());
  std::uniform_int_distribution<int> keep(0, 2);
  for (std::size_t i = 0; i < c.size(); ++i)
    if (i == 0 || keep(rng) != 0) c[i] = random_rational(rng);
  if (unit && sgn(c[0]) == 0) c[0] = 1;
  return Jet::from_coefficients(space, order, std::move(c));
}

inline JetMatrix random_matrix(const SpacePtr& space, int order, std::size_t rows, std::size_t cols, Rng& rng) {
  JetMatrix m(space, order, rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m.set(i, j, random_jet(space, order, rng));
  return m;
}

inline std::vector<Rational> random_point(Rng& rng, int n) {
  std::vector<Rational> b;
  for (int i = 0; i < n; ++i) b.push_back(random_rational(rng, 5, 7));
  return b;
}

/// Operator with every coefficient a random jet.
inline OperatorSpec random_operator(int n, int k, int p, int q, int order, Rng& rng) {
  auto space = JetSpace::make(random_point(rng, n));
  return OperatorSpec(k, p, q, random_matrix(space, order, static_cast<std::size_t>(q), static_cast<std::size_t>(p) * count(n + 1, k), rng));
}

/// The n=2, k=1, p=2, q=3 system A f + B f_x + C f_y = 0 with 3x2 blocks.
inline OperatorSpec block_operator(const JetMatrix& A, const JetMatrix& B, const JetMatrix& C) {
  JetMatrix m(A.space(), A.order(), 3, 6);
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t v = 0; v < 2; ++v) {
      m.set(u, v, A(u, v));
      m.set(u, v + 2, B(u, v));
      m.set(u, v + 4, C(u, v));
    }
  return OperatorSpec(1, 2, 3, std::move(m));
}

/// d_i f = omega_i f for a scalar f: p = 1, q = n, k = 1.
inline OperatorSpec one_form_operator(const std::vector<Jet>& omega) {
  const SpacePtr& space = omega.front().space();
  const int n = space->n, order = omega.front().order();
  JetMatrix m(space, order, static_cast<std::size_t>(n), static_cast<std::size_t>(n) + 1);
  for (int i = 0; i < n; ++i) {
    m.set(static_cast<std::size_t>(i), 0, -omega[static_cast<std::size_t>(i)]);
    m.set(static_cast<std::size_t>(i), static_cast<std::size_t>(i) + 1, Jet::constant(space, order, 1));
  }
  return OperatorSpec(1, 1, n, std::move(m));
}

inline std::vector<Jet> compile_all(const std::vector<std::string>& exprs, const SpacePtr& space, int order) {
  std::vector<Jet> out;
  for (const auto& e : exprs) out.push_back(compile(parse_expr(e), space, order));
  return out;
}

/// Full calibrated pipeline for a random (n,k,p,q) operator, redrawn until
/// the operator is ordinary. Some shapes are never generically ordinary,
/// so the number of draws is capped.
inline OperatorSpec random_calibrated(int n, int k, int p, int q, Rng& rng) {
  const int order = (compute_h0(n, k, p, q) - k) + 3;
  for (int attempt = 0; attempt < 20; ++attempt) {
    OperatorSpec s = random_operator(n, k, p, q, order, rng);
    ProlongationTower t = build_tower(s, default_h_limit(n, k, p, q));
    if (analyze(t).calibrated) return s;
  }
  throw std::runtime_error("random_calibrated: no calibrated draw");
}

}  // namespace fixtures

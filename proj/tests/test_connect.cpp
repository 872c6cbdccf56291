#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "jetprol/connect.hpp"
#include "jetprol/pipeline.hpp"
#include "oracles.hpp"

using namespace jetprol;
using fixtures::Rng;

namespace {

bool matrices_agree(const JetMatrix& a, const JetMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c)
      if (!agree(a(r, c), b(r, c))) return false;
  return true;
}

SpacePtr plane() { return JetSpace::make({Rational(1, 2), Rational(1, 3)}); }

/// e^g for g with zero constant term, as a truncated power series.
Jet exp_series(const Jet& g) {
  const int N = g.order();
  Jet term = Jet::constant(g.space(), N, 1), sum = term;
  for (int m = 1; m <= N; ++m) {
    term = Rational(1, m) * (term * g);
    sum += term;
  }
  return sum;
}

/// The constant system f1_x = 0, f2_x + f1_y = 0, f2_y = 0.
OperatorSpec rotation_system(const SpacePtr& s, int order) {
  auto c = [&](int v) { return Jet::constant(s, order, v); };
  JetMatrix A(s, order, 3, 2), B(s, order, 3, 2), C(s, order, 3, 2);
  B.set(0, 0, c(1));
  B.set(1, 1, c(1));
  C.set(1, 0, c(1));
  C.set(2, 1, c(1));
  return fixtures::block_operator(A, B, C);
}

}  // namespace

TEST(Frame, BlockSystemLevels) {
  Rng rng(51);
  OperatorSpec spec = fixtures::random_calibrated(2, 1, 2, 3, rng);
  PipelineResult res = run_pipeline(spec);
  ASSERT_TRUE(res.connection);
  const AdaptedFrame& fr = res.connection->frame;
  EXPECT_EQ(fr.level_sizes, (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(fr.dimension(), 3u);
  EXPECT_EQ(fr.coords[0], (FrameCoordinate{0, 0, 0}));
  EXPECT_EQ(fr.coords[1], (FrameCoordinate{1, 0, 0}));
  EXPECT_EQ(fr.coords[2].level, 1);
  EXPECT_EQ(concentration_zero_rows(2, 1, 2, 3, 2), 2u);
}

TEST(Frame, SingleUnknownIsIdentity) {
  Rng rng(52);
  OperatorSpec spec = fixtures::random_calibrated(2, 1, 1, 2, rng);
  ProlongationTower tower = build_tower(spec, 1);
  AdaptedFrame fr = adapted_frame(tower);
  EXPECT_EQ(fr.dimension(), 1u);
  EXPECT_EQ(fr.parametrize, JetMatrix::identity(spec.space(), spec.order(), 1));
}

TEST(Frame, Invariants) {
  Rng rng(53);
  struct Case {
    int n, k, p, q;
  };
  for (Case c : {Case{2, 1, 2, 3}, Case{2, 1, 3, 4}, Case{3, 1, 3, 5}, Case{2, 2, 2, 3}}) {
    OperatorSpec spec = fixtures::random_calibrated(c.n, c.k, c.p, c.q, rng);
    const int h0 = compute_h0(c.n, c.k, c.p, c.q);
    ProlongationTower tower = build_tower(spec, h0);
    AdaptedFrame fr = adapted_frame(tower);
    EXPECT_EQ(fr.dimension(), pi_bound(c.n, c.k, c.p, c.q));
    for (std::size_t a = 0; a < fr.dimension(); ++a) {
      std::size_t row = fr.component_row(fr.coords[a].v, fr.coords[a].rank);
      for (std::size_t b = 0; b < fr.dimension(); ++b) EXPECT_EQ(fr.parametrize(row, b).is_zero(), a != b);
      EXPECT_EQ(fr.parametrize(row, a).constant_term(), 1);
    }
    EXPECT_EQ(oracle::bareiss_rank(fr.parametrize.constant_part()), fr.dimension());
    if (h0 - 1 >= c.k) {
      JetMatrix m = tower.M(h0 - 1);
      EXPECT_TRUE((m * fr.parametrize.truncated(std::min(m.order(), fr.parametrize.order()))).is_zero());
    }
  }
}

TEST(Connection, OneFormIsItsOwnConnection) {
  Rng rng(54);
  for (int n : {2, 3}) {
    auto s = JetSpace::make(fixtures::random_point(rng, n));
    std::vector<Jet> omega;
    for (int i = 0; i < n; ++i) omega.push_back(fixtures::random_jet(s, 4, rng));
    PipelineResult res = run_pipeline(fixtures::one_form_operator(omega));
    ASSERT_TRUE(res.connection);
    for (int i = 0; i < n; ++i) {
      const JetMatrix& a = res.connection->A[static_cast<std::size_t>(i)];
      ASSERT_EQ(a.rows(), 1u);
      EXPECT_TRUE(agree(a(0, 0), omega[static_cast<std::size_t>(i)]));
    }
  }
}

TEST(Curvature, OneFormExamples) {
  auto s = plane();
  PipelineResult res = run_pipeline(fixtures::one_form_operator(fixtures::compile_all({"x2", "0"}, s, 4)));
  ASSERT_EQ(res.curvature.size(), 1u);
  EXPECT_TRUE(agree(res.curvature[0].K(0, 0), Jet::constant(s, 4, 1)));
  EXPECT_FALSE(res.concentration->flat);
  EXPECT_TRUE(res.concentration->holds);

  PipelineResult exact = run_pipeline(fixtures::one_form_operator(fixtures::compile_all({"x2", "x1"}, s, 4)));
  EXPECT_TRUE(exact.concentration->flat);

  auto s3 = JetSpace::make({Rational(1), Rational(2), Rational(-1, 4)});
  PipelineResult three = run_pipeline(fixtures::one_form_operator(fixtures::compile_all({"x2", "0", "x1"}, s3, 4)));
  ASSERT_EQ(three.curvature.size(), 3u);
  EXPECT_TRUE(agree(three.curvature[0].K(0, 0), Jet::constant(s3, 4, 1)));
  EXPECT_TRUE(agree(three.curvature[1].K(0, 0), Jet::constant(s3, 4, -1)));
  EXPECT_TRUE(three.curvature[2].K.is_zero());
}

TEST(Connection, HandSolvedConstantSystem) {
  auto s = plane();
  PipelineResult res = run_pipeline(rotation_system(s, 4));
  ASSERT_TRUE(res.connection);
  const Connection& c = *res.connection;
  // Frame (f1, f2, d_y f1).
  ASSERT_EQ(c.frame.dimension(), 3u);
  EXPECT_EQ(c.frame.coords[2], (FrameCoordinate{0, 2, 1}));
  auto k = [&](int v) { return Jet::constant(s, c.A[0].order(), v); };
  JetMatrix ax(s, c.A[0].order(), 3, 3), ay(s, c.A[1].order(), 3, 3);
  ax.set(1, 2, k(-1));
  ay.set(0, 2, k(1));
  EXPECT_EQ(c.A[0], ax);
  EXPECT_EQ(c.A[1], ay);
  EXPECT_TRUE(res.concentration->flat);

  // f1 = a - l*y, f2 = b + l*x is covariantly constant.
  Rational a(2, 3), b(-5), l(7, 4);
  Jet x = Jet::variable(s, 4, 0), y = Jet::variable(s, 4, 1);
  std::vector<Jet> f{Jet::constant(s, 4, a) - l * y, Jet::constant(s, 4, b) + l * x};
  std::vector<Jet> sigma = frame_coordinates_of(c.frame, res.tower->table(), f);
  for (int i = 0; i < 2; ++i)
    for (const Jet& d : covariant_derivative(c, i, sigma)) EXPECT_TRUE(d.is_zero());
}

TEST(Connection, SolutionsAreCovariantlyConstant) {
  auto s = plane();
  for (const char* g_text : {"x1*x2", "x1^2 - 3*x2 + x1*x2^2"}) {
    Jet g = compile(parse_expr(g_text), s, 5);
    Jet g0 = g - Jet::constant(s, 5, g.constant_term());
    std::vector<Jet> omega{g.derive(0), g.derive(1)};
    PipelineResult res = run_pipeline(fixtures::one_form_operator(omega));
    ASSERT_TRUE(res.concentration->flat);
    std::vector<Jet> sigma{exp_series(g0)};
    for (int i = 0; i < 2; ++i) EXPECT_TRUE(covariant_derivative(*res.connection, i, sigma)[0].is_zero());
  }
}

TEST(Curvature, FrameChangeCovariance) {
  // sigma = G tau gives A' = G^-1 (A G - dG) and K' = G^-1 K G.
  Rng rng(55);
  OperatorSpec spec = fixtures::random_calibrated(2, 1, 2, 3, rng);
  PipelineResult res = run_pipeline(spec);
  const Connection& c = *res.connection;
  const std::size_t dim = c.dimension();
  const int order = c.A[0].order();
  JetMatrix G = fixtures::random_matrix(spec.space(), order + 1, dim, dim, rng);
  while (oracle::bareiss_rank(G.constant_part()) != dim) G = fixtures::random_matrix(spec.space(), order + 1, dim, dim, rng);
  JetMatrix Ginv = invert_square(G);
  Connection changed = c;
  for (int i = 0; i < 2; ++i) changed.A[static_cast<std::size_t>(i)] = Ginv * (c.A[static_cast<std::size_t>(i)] * G - G.derive(i));
  std::vector<CurvatureBlock> k2 = curvature(changed);
  ASSERT_EQ(k2.size(), 1u);
  EXPECT_TRUE(matrices_agree(k2[0].K, Ginv * res.curvature[0].K * G));
}

TEST(Curvature, CommutatorOfCovariantDerivatives) {
  Rng rng(56);
  OperatorSpec spec = fixtures::random_calibrated(2, 1, 2, 3, rng);
  PipelineResult res = run_pipeline(spec);
  const Connection& c = *res.connection;
  std::vector<Jet> sigma;
  for (std::size_t a = 0; a < c.dimension(); ++a) sigma.push_back(fixtures::random_jet(spec.space(), 3, rng));
  std::vector<Jet> d01 = covariant_derivative(c, 1, covariant_derivative(c, 0, sigma));
  std::vector<Jet> d10 = covariant_derivative(c, 0, covariant_derivative(c, 1, sigma));
  std::vector<Jet> ks = res.curvature[0].K.apply(sigma);
  // K_01 sigma = [nabla_0, nabla_1] sigma.
  for (std::size_t a = 0; a < sigma.size(); ++a) EXPECT_TRUE(agree(d10[a] - d01[a], ks[a]));
}

TEST(Concentration, RandomCalibratedOperators) {
  Rng rng(57);
  struct Case {
    int n, k, p, q;
  };
  for (Case c : {Case{2, 1, 2, 3}, Case{2, 1, 3, 4}, Case{2, 2, 2, 3}}) {
    OperatorSpec spec = fixtures::random_calibrated(c.n, c.k, c.p, c.q, rng);
    PipelineResult res = run_pipeline(spec);
    ASSERT_TRUE(res.concentration);
    const std::size_t zero = concentration_zero_rows(c.n, c.k, c.p, c.q, compute_h0(c.n, c.k, c.p, c.q));
    EXPECT_TRUE(res.concentration->holds);
    for (const auto& b : res.curvature)
      for (std::size_t r = 0; r < zero; ++r)
        for (std::size_t col = 0; col < b.K.cols(); ++col) EXPECT_TRUE(b.K(r, col).is_zero());
    EXPECT_GE(res.concentration->certified_order, 1);
  }
}

TEST(Concentration, DetectsViolation) {
  Rng rng(58);
  OperatorSpec spec = fixtures::random_calibrated(2, 1, 2, 3, rng);
  PipelineResult res = run_pipeline(spec);
  std::vector<CurvatureBlock> curv = res.curvature;
  JetMatrix bumped = curv[0].K;
  bumped.set(1, 0, bumped(1, 0) + Jet::constant(spec.space(), bumped.order(), 1));
  curv[0].K = bumped;
  ConcentrationReport rep = concentration_check(curv, res.connection->frame);
  EXPECT_FALSE(rep.holds);
  EXPECT_EQ(rep.first_violation, (CurvatureEntry{0, 1, 2, 1}));
}

TEST(Integrate, ZeroFormGivesConstants) {
  auto s = plane();
  PipelineResult res = run_pipeline(fixtures::one_form_operator(fixtures::compile_all({"0", "0"}, s, 4)));
  auto sections = integrate_flat_sections(*res.connection, *res.tower, 4);
  ASSERT_EQ(sections.size(), 1u);
  EXPECT_EQ(sections[0].section[0], Jet::constant(s, 4, 1));
}

TEST(Integrate, ExponentialSeries) {
  auto s = plane();
  PipelineResult res = run_pipeline(fixtures::one_form_operator(fixtures::compile_all({"1", "0"}, s, 6)));
  auto sections = integrate_flat_sections(*res.connection, *res.tower, 6);
  const Jet& f = sections.at(0).section[0];
  Rational fact(1);
  for (int m = 0; m <= 6; ++m) {
    if (m > 0) fact *= m;
    EXPECT_EQ(f.coefficient(MultiIndex{m, 0}), 1 / fact);
    if (m > 0) {
      EXPECT_EQ(f.coefficient(MultiIndex{0, m}), 0);
    }
  }
}

TEST(Integrate, ExactFormMatchesExponential) {
  auto s = plane();
  Jet g = compile(parse_expr("x1*x2"), s, 6);
  PipelineResult res = run_pipeline(fixtures::one_form_operator({g.derive(0), g.derive(1)}));
  auto sections = integrate_flat_sections(*res.connection, *res.tower, 5);
  EXPECT_EQ(sections.at(0).section[0], exp_series((g - Jet::constant(s, 6, g.constant_term())).truncated(5)));
}

TEST(Integrate, RotationSystem) {
  auto s = plane();
  PipelineResult res = run_pipeline(rotation_system(s, 4));
  auto sections = integrate_flat_sections(*res.connection, *res.tower, 3);
  ASSERT_EQ(sections.size(), 3u);
  Jet x = Jet::variable(s, 3, 0) - Jet::constant(s, 3, Rational(1, 2));
  Jet y = Jet::variable(s, 3, 1) - Jet::constant(s, 3, Rational(1, 3));
  Jet one = Jet::constant(s, 3, 1), zero = Jet::zero(s, 3);
  EXPECT_EQ(sections[0].section, (std::vector<Jet>{one, zero}));
  EXPECT_EQ(sections[1].section, (std::vector<Jet>{zero, one}));
  // Unit d_y f1 at the base: f1 = y, f2 = -x.
  EXPECT_EQ(sections[2].section, (std::vector<Jet>{y, -x}));
}

TEST(Integrate, RefusesCurvedConnection) {
  auto s = plane();
  PipelineResult res = run_pipeline(fixtures::one_form_operator(fixtures::compile_all({"x2", "0"}, s, 4)));
  try {
    integrate_flat_sections(*res.connection, *res.tower, 3);
    FAIL() << "expected an exception";
  } catch (const DegeneracyError& e) {
    EXPECT_STREQ(e.what(), "not flat");
  }
  PipelineResult flat = run_pipeline(fixtures::one_form_operator(fixtures::compile_all({"0", "0"}, s, 2)));
  EXPECT_THROW(integrate_flat_sections(*flat.connection, *flat.tower, 4), InputError);
}

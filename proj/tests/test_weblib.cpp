#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "jetprol/weblib.hpp"
#include "oracles.hpp"

using namespace jetprol;

namespace {

WebSpec make_web(const std::vector<std::vector<std::string>>& rows, std::vector<Rational> base) {
  WebSpec w;
  w.n = static_cast<int>(base.size());
  w.d = static_cast<int>(rows.size());
  w.base_point = std::move(base);
  for (const auto& r : rows) {
    std::vector<ExprPtr> row;
    for (const auto& e : r) row.push_back(parse_expr(e));
    w.fields.push_back(std::move(row));
  }
  return w;
}

std::size_t damiano_by_hand(int n, int d) {
  std::size_t s = 0;
  for (int h = 0; h <= d - n - 1; ++h) s += binomial(n - 2 + h, h) * static_cast<std::size_t>(d - n - h);
  return s;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(LieFactor, CoordinateFieldsAreZero) {
  auto s = JetSpace::make({Rational(1, 3), Rational(2, 7), Rational(-1)});
  for (int i = 0; i < 3; ++i) {
    std::vector<Jet> X(3, Jet::zero(s, 3));
    X[static_cast<std::size_t>(i)] = Jet::constant(s, 3, 1);
    EXPECT_TRUE(lie_factor(X, 3).is_zero());
  }
}

TEST(LieFactor, IsDivergence) {
  fixtures::Rng rng(61);
  for (int n : {2, 3}) {
    auto s = JetSpace::make(fixtures::random_point(rng, n));
    for (int t = 0; t < 5; ++t) {
      std::vector<Jet> X;
      for (int i = 0; i < n; ++i) X.push_back(fixtures::random_jet(s, 3, rng, true));
      Jet div = X[0].derive(0);
      for (int i = 1; i < n; ++i) div += X[static_cast<std::size_t>(i)].derive(i);
      EXPECT_TRUE(agree(lie_factor(X, n), div));
    }
  }
}

TEST(Forms, CartanFormulaOnFunctions) {
  // L_X f = X(f) for a 0-form.
  fixtures::Rng rng(62);
  auto s = JetSpace::make(fixtures::random_point(rng, 2));
  std::vector<Jet> X{fixtures::random_jet(s, 3, rng), fixtures::random_jet(s, 3, rng)};
  Jet f = fixtures::random_jet(s, 3, rng);
  forms::Form zero{{0u, f}};
  forms::Form lie = forms::lie_derivative(X, zero, 2);
  EXPECT_TRUE(agree(lie.at(0u), X[0] * f.derive(0) + X[1] * f.derive(1)));
}

TEST(WebOperator, MinimalWeb) {
  WebSpec w = make_web({{"1", "0"}, {"0", "1"}, {"1", "1 + x1*x2"}}, {Rational(1, 2), Rational(1, 5)});
  WebOperator op = web_operator(w, 4);
  EXPECT_EQ(op.spec.p(), 1);
  EXPECT_EQ(op.spec.q(), 2);
  EXPECT_EQ(op.spec.k(), 1);
  EXPECT_EQ(op.spec.order(), 3);
  EXPECT_EQ(op.eliminated, (std::vector<int>{0, 1}));
  EXPECT_EQ(op.free, (std::vector<int>{2}));
  WebAnalysis a = analyze_web(w);
  EXPECT_EQ(a.result.analysis.pi, 1u);
  EXPECT_EQ(a.damiano, 1u);
}

TEST(WebOperator, ShapeForAnyDegree) {
  for (int d = 3; d <= 5; ++d) {
    std::vector<std::vector<std::string>> rows{{"1", "0"}, {"0", "1"}};
    for (int l = 2; l < d; ++l) rows.push_back({"1", std::to_string(l) + " + x1^2"});
    WebOperator op = web_operator(make_web(rows, {Rational(1, 3), Rational(1, 4)}), 3);
    EXPECT_EQ(op.spec.p(), d - 2);
    EXPECT_EQ(op.spec.q(), d - 1);
    EXPECT_GE(op.dropped_row, 0);
  }
}

TEST(WebOperator, RejectsBadShapes) {
  EXPECT_THROW(web_operator(make_web({{"1", "0"}, {"0", "1"}}, {Rational(0), Rational(0)}), 3), InputError);
  EXPECT_THROW(web_operator(make_web({{"1", "0"}, {"0", "1"}, {"1"}}, {Rational(0), Rational(0)}), 3), InputError);
  EXPECT_THROW(web_operator(make_web({{"1", "0"}, {"0", "1"}, {"1", "x1"}}, {Rational(0), Rational(0)}), 3), DegeneracyError);
}

TEST(Damiano, Values) {
  EXPECT_EQ(damiano_bound(3, 6), 10u);
  EXPECT_EQ(damiano_bound(2, 5), 6u);
  EXPECT_EQ(damiano_bound(2, 3), 1u);
  EXPECT_THROW(damiano_bound(3, 3), InputError);
}

TEST(Damiano, AllSmallWebs) {
  for (int n = 2; n <= 11; ++n)
    for (int d = n + 1; d <= 12; ++d) {
      EXPECT_EQ(damiano_bound(n, d), damiano_by_hand(n, d));
      EXPECT_EQ(damiano_bound(n, d), binomial(d - 1, n));
    }
}

TEST(WcFamily, FieldValues) {
  WebSpec w = wc_family(2, Rational(0), {Rational(1, 3), Rational(1, 5)});
  ASSERT_EQ(w.d, 5);
  auto s = JetSpace::make(w.base_point);
  auto a = compile_fields(w, s, 0);
  auto val = [&](int l, int i) { return a[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)].constant_term(); };
  for (int l = 0; l < 2; ++l) {
    EXPECT_TRUE(detail::is_coordinate_field(compile_fields(w, s, 2)[static_cast<std::size_t>(l)]));
    for (int i = 0; i < 2; ++i) EXPECT_EQ(val(l, i), l == i ? 1 : 0);
  }
  EXPECT_EQ(val(2, 0), Rational(5, 3));
  EXPECT_EQ(val(3, 0), Rational(5, 6));
  EXPECT_EQ(val(4, 0), Rational(25, 18));
  for (int l = 2; l < 5; ++l) EXPECT_EQ(val(l, 1), 1);
  EXPECT_FALSE(detail::is_coordinate_field(compile_fields(w, s, 2)[2]));
}

TEST(WcFamily, CoincidingFieldsRejected) {
  // At c = -1/2 the fields n+1 and n+2 coincide.
  std::string msg = message_of([] { wc_family(2, Rational(-1, 2), {Rational(1, 3), Rational(1, 5)}); });
  EXPECT_NE(msg.find("linearly dependent"), std::string::npos) << msg;
  EXPECT_THROW(default_wc_base(2, Rational(-1, 2)), DegeneracyError);
}

TEST(WcFamily, PoleErrorsNameTheCondition) {
  std::string zero = message_of([] { wc_family(2, Rational(0), {Rational(1, 3), Rational(0)}); });
  EXPECT_NE(zero.find("x_n in {0,1}"), std::string::npos) << zero;
  EXPECT_NE(zero.find("x_n = -c"), std::string::npos) << zero;
  std::string shifted = message_of([] { wc_family(3, Rational(1, 7), {Rational(1), Rational(2), Rational(8, 7)}); });
  EXPECT_NE(shifted.find("x_n = 1+c"), std::string::npos) << shifted;
  EXPECT_THROW(wc_family(2, Rational(0), {Rational(1, 3), Rational(1)}), DegeneracyError);
}

TEST(WcFamily, DefaultBaseIsAdmissible) {
  for (int n : {2, 3, 4})
    for (Rational c : {Rational(0), Rational(1, 7), Rational(-3, 2)}) EXPECT_NO_THROW(wc_family(n, c, default_wc_base(n, c)));
}

TEST(AnalyzeWeb, W0Plane) {
  WebSpec w = wc_family(2, Rational(0), default_wc_base(2, Rational(0)));
  WebAnalysis a = analyze_web(w);
  EXPECT_EQ(a.op.spec.p(), 3);
  EXPECT_EQ(a.op.spec.q(), 4);
  EXPECT_EQ(a.result.analysis.h0, 3);
  EXPECT_EQ(a.result.analysis.pi, 6u);
  EXPECT_EQ(a.damiano, 6u);
  ASSERT_TRUE(a.result.concentration);
  EXPECT_TRUE(a.result.concentration->flat);
  EXPECT_EQ(formal_rank_oracle(*a.result.tower, 3), 6u);
  EXPECT_EQ(3 * count(3, 3) - oracle::bareiss_rank(a.result.tower->M(3).constant_part()), 6u);
}

TEST(AnalyzeWeb, PivotChoiceDoesNotChangeVerdicts) {
  WebSpec w = wc_family(2, Rational(1, 7), default_wc_base(2, Rational(1, 7)));
  WebAnalysis def = analyze_web(w);
  for (std::vector<int> piv : {std::vector<int>{2, 3}, std::vector<int>{1, 4}, std::vector<int>{0, 3}}) {
    WebAnalysis other = analyze_web(w, std::nullopt, piv);
    EXPECT_EQ(other.op.eliminated, piv);
    EXPECT_EQ(other.result.analysis.pi, def.result.analysis.pi);
    EXPECT_EQ(other.result.concentration->flat, def.result.concentration->flat);
    EXPECT_TRUE(other.result.concentration->holds);
    for (int h = 1; h <= 3; ++h) EXPECT_EQ(formal_rank_oracle(*other.result.tower, h), formal_rank_oracle(*def.result.tower, h));
  }
  EXPECT_THROW(analyze_web(w, std::nullopt, std::vector<int>{0, 0}), InputError);
}

TEST(AnalyzeWeb, W0PlaneFlatSections) {
  WebSpec w = wc_family(2, Rational(0), default_wc_base(2, Rational(0)));
  WebAnalysis a = analyze_web(w);
  auto sections = integrate_flat_sections(*a.result.connection, *a.result.tower, 3);
  EXPECT_EQ(sections.size(), 6u);
  for (const auto& fs : sections) EXPECT_EQ(fs.section.size(), 3u);
}

TEST(AnalyzeWeb, InsufficientOrder) {
  WebSpec w = wc_family(2, Rational(0), default_wc_base(2, Rational(0)));
  EXPECT_THROW(web_operator(w, 0), InputError);
  EXPECT_THROW(analyze_web(w, 2), InputError);
}

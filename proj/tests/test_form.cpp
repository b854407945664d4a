#include <cmath>

#include "chaincalc/verify.hpp"
#include "doctest.h"

using namespace chaincalc;

namespace {

Expr X(int n = 2) { return Expr::var(0, n); }
Expr Y(int n = 2) { return Expr::var(1, n); }
KVector b(int n, std::initializer_list<int> idx, double c = 1.0) { return KVector::basis(n, idx, c); }
ChainElement el(Point p, KVector a) { return ChainElement(std::move(p), std::move(a)); }

// x dy
Form xdy() { return Form(2, 1, {{2u, X()}}); }

}  // namespace

TEST_CASE("evalElement examples") {
  Form dy = Form::constant(b(2, {2}));
  CHECK(evalElement(dy, el({0.3, 0.4}, b(2, {2}))) == 1.0);
  CHECK(evalElement(xdy(), ChainElement({0, 0}, SymTensor::monomial(2, {1}), b(2, {2}))) == doctest::Approx(1.0));
  CHECK(evalElement(xdy(), el({3, 5}, b(2, {2}))) == doctest::Approx(3.0));
}

TEST_CASE("evaluation is linear in the k-vector and symmetric in the dipole factors") {
  Rng g(71);
  for (int trial = 0; trial < 20; ++trial) {
    Form w = randomPolyForm(g, 3, 2, 3);
    Point p = g.vector(3);
    KVector a = randomKVector(g, 3, 2), c = randomKVector(g, 3, 2);
    double s = g.uniform(-2, 2);
    CHECK(w.eval(p, a + s * c) == doctest::Approx(w.eval(p, a) + s * w.eval(p, c)));
    Vec u = g.vector(3), v = g.vector(3);
    double uv = evalElement(w, ChainElement(p, SymTensor(3, {u, v}), a));
    double vu = evalElement(w, ChainElement(p, SymTensor(3, {v, u}), a));
    CHECK(uv == doctest::Approx(vu));
  }
}

TEST_CASE("directional derivatives agree with central differences") {
  Expr x = X(), y = Y();
  Form w(2, 1, {{1u, sin(x) * y * y}, {2u, exp(Expr(0.3) * x * y)}});
  Rng g(73);
  for (int trial = 0; trial < 10; ++trial) {
    Point p = g.vector(2);
    KVector a = randomKVector(g, 2, 1);
    Vec u = g.vector(2);
    double exact = evalElement(w, ChainElement(p, SymTensor(2, {u}), a));
    double prev = INFINITY;
    for (double h : {1e-2, 5e-3}) {
      Point pp = p, pm = p;
      for (int i = 0; i < 2; ++i) pp[i] += h * u[i], pm[i] -= h * u[i];
      double err = std::abs((w.eval(pp, a) - w.eval(pm, a)) / (2 * h) - exact);
      CHECK(err < 1e-3);
      if (prev < INFINITY) CHECK(err < prev / 3.0);  // O(h^2)
      prev = err;
    }
  }
}

TEST_CASE("exterior derivative examples") {
  Form d = exteriorD(xdy());
  CHECK(d.grade() == 2);
  CHECK(d.eval(Point{0.4, -2}, b(2, {1, 2})) == doctest::Approx(1.0));
  CHECK(d.eval(Point{7, 1}, b(2, {1, 2})) == doctest::Approx(1.0));
  Form c = exteriorD(Form::constant(b(3, {1}, 2.0) + b(3, {3}, -1.0)));
  CHECK(c.coeffs().empty());
  Rng g(79);
  for (int trial = 0; trial < 10; ++trial) {
    Form f = randomPolyForm(g, 3, 0, 4);
    Form dd = exteriorD(exteriorD(f));
    Point p = g.vector(3);
    for (Blade bl : {3u, 5u, 6u}) CHECK(std::abs(dd.eval(p, KVector::blade(3, bl))) < 1e-12);
  }
}

TEST_CASE("Stokes kernel: d against the boundary of a single element") {
  Rng g(83);
  for (int trial = 0; trial < 30; ++trial) {
    int n = g.integer(2, 4), k = g.integer(1, n);
    Form w = randomPolyForm(g, n, k - 1, 3);
    ChainElement e(g.vector(n), SymTensor(n), randomKVector(g, n, k));
    double lhs = evalElement(exteriorD(w), e);
    double rhs = evalChain(w, boundary(DiracChain::single(e)));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (1 + std::abs(lhs)));
  }
}

TEST_CASE("hodge is defined through perp") {
  Form dx = Form::constant(b(2, {1}));
  CHECK(hodge(dx).eval(Point{0, 0}, b(2, {2})) == doctest::Approx(1.0));
  CHECK(hodge(dx).eval(Point{0, 0}, b(2, {1})) == doctest::Approx(0.0));
  // star star on 1-forms in R^2 is -1 = (-1)^{k(n-k)}.
  Rng g(89);
  Form w = randomPolyForm(g, 2, 1, 2);
  Form ss = hodge(hodge(w));
  for (int trial = 0; trial < 5; ++trial) {
    Point p = g.vector(2);
    KVector a = randomKVector(g, 2, 1);
    CHECK(ss.eval(p, a) == doctest::Approx(-w.eval(p, a)));
  }
  // star(f dx^dy)(p; 1) = f(p) <e12, perp 1> = f(p)
  Form f(2, 2, {{3u, X() * X() + Y()}});
  CHECK(hodge(f).eval(Point{2, 3}, KVector::scalar(2, 1.0)) == doctest::Approx(7.0));
}

TEST_CASE("interior, flat wedge and Lie derivative examples") {
  VectorFieldB e1 = VectorFieldB::constant({1, 0});
  Form vol = Form::constant(b(2, {1, 2}));
  Form i = interior(e1, vol);
  CHECK(i.eval(Point{0, 0}, b(2, {2})) == doctest::Approx(1.0));
  CHECK(i.eval(Point{0, 0}, b(2, {1})) == doctest::Approx(0.0));
  Form f = Form::scalar(2, X() * Y() + Expr(2.0));
  CHECK(flatWedge(e1, f).eval(Point{3, 1}, b(2, {1})) == doctest::Approx(5.0));
  Form g = Form::scalar(2, sin(X()) * Y());
  Point p{0.4, 1.5};
  CHECK(lie(e1, g).eval(p, KVector::scalar(2, 1.0)) == doctest::Approx(std::cos(0.4) * 1.5));
}

TEST_CASE("Cartan formula on forms") {
  Rng g(97);
  for (int trial = 0; trial < 15; ++trial) {
    int n = g.integer(2, 3), k = g.integer(0, n - 1);
    Form w = randomPolyForm(g, n, k, 3);
    VectorFieldB V = randomPolyField(g, n, 2);
    Form lhs = lie(V, w);
    Form rhs = interior(V, exteriorD(w));
    if (k > 0) rhs = rhs + exteriorD(interior(V, w));
    Point p = g.vector(n);
    KVector a = randomKVector(g, n, k);
    CHECK(std::abs(lhs.eval(p, a) - rhs.eval(p, a)) < 1e-9);
  }
}

TEST_CASE("multiplication and pullback") {
  Rng g(101);
  Form w = randomPolyForm(g, 2, 1, 2);
  Form one = Form::scalar(2, Expr(1.0));
  Form id = pullback(SmoothMap::identity(2), w);
  Form m = multiplyForm(one, w);
  for (int trial = 0; trial < 5; ++trial) {
    Point p = g.vector(2);
    KVector a = randomKVector(g, 2, 1);
    CHECK(id.eval(p, a) == doctest::Approx(w.eval(p, a)));
    CHECK(m.eval(p, a) == doctest::Approx(w.eval(p, a)));
  }
  SmoothMap F = SmoothMap::linear(2, 2, {1, 0, 1, 1});
  Form dy = Form::constant(b(2, {2}));
  CHECK(pullback(F, dy).eval(Point{0.2, 0.9}, b(2, {1})) == doctest::Approx(1.0));
}

TEST_CASE("certified norms") {
  Form c = Form::constant(b(3, {1, 3}, -2.5));
  auto s = certifiedSeminorms(c, 3, Box{{-5, -5, -5}, {5, 5, 5}});
  REQUIRE(s.size() == 4);
  CHECK(s[0] == doctest::Approx(2.5));
  CHECK(s[1] == 0.0);
  CHECK(s[3] == 0.0);
  CHECK(certifiedNorm(xdy(), 2, Box{{0, 0}, {1, 1}}) == doctest::Approx(1.0));
  Form sx(1, 1, {{1u, sin(Expr::var(0, 1))}});
  for (int r = 0; r <= 4; ++r) CHECK(certifiedNorm(sx, r, Box::unbounded(1)) == doctest::Approx(1.0));
}

TEST_CASE("certified norm bounds the pairing with random chains") {
  Rng g(103);
  for (int trial = 0; trial < 20; ++trial) {
    DiracChain a = randomChain(g, 2, 1, 0, 6);
    Form w = randomPolyForm(g, 2, 1, 2);
    double bound = certifiedNorm(w, 1, Box::around(a, 0.1)) * normUB(a, 1).upper;
    CHECK(std::abs(evalChain(w, a)) <= bound * (1 + 1e-12) + 1e-14);
  }
}

TEST_CASE("form JSON payloads") {
  nlohmann::json j = {{"family", "poly"},
                      {"grade", 1},
                      {"terms", {{{"idx", {2}}, {"monomial", {{"exps", {1, 0}}}}, {"c", 1.0}}}}};
  Form w = formFromJson(j, 2);
  CHECK(w.eval(Point{3, 5}, b(2, {2})) == doctest::Approx(3.0));
  CHECK_THROWS(formFromJson(nlohmann::json{{"family", "nope"}}, 2));
}

TEST_CASE("star convention table") {
  for (int n = 1; n <= 4; ++n)
    for (auto& row : hodgeConventionTable(n)) {
      int k = static_cast<int>(row.idx.size());
      CHECK(row.sign == (((n - k) * (k + 1)) % 2 ? -1 : 1));
    }
  // Even n agrees with the usual convention everywhere; in R^3 the even grades flip.
  for (auto& row : hodgeConventionTable(2)) CHECK(row.sign == 1);
  auto t = hodgeConventionTable(3);
  CHECK(t[0].sign == -1);
  CHECK(t[1].sign == 1);
  CHECK(t[3].sign == -1);
  CHECK(t[7].sign == 1);
}

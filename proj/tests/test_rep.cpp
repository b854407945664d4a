#include <cmath>

#include "chaincalc/verify.hpp"
#include "doctest.h"

using namespace chaincalc;

namespace {

Expr X(int n = 2) { return Expr::var(0, n); }
Expr Y(int n = 2) { return Expr::var(1, n); }
Form vol2() { return Form::constant(KVector::volume(2)); }

IntegrateConfig depths(int jmin, int jmax, std::vector<int> rich = {}) {
  IntegrateConfig c;
  c.jmin = jmin;
  c.jmax = jmax;
  c.richardson = std::move(rich);
  return c;
}

}  // namespace

TEST_CASE("cube streams") {
  ChainStream s = cubeStream({0, 0}, {1, 1});
  DiracChain a0 = s.snapshot(0);
  REQUIRE(a0.size() == 1);
  CHECK(a0.elements()[0].point == Point{0.5, 0.5});
  CHECK(a0.elements()[0].kv.coeff(3u) == doctest::Approx(1.0));
  for (int j = 0; j <= 6; ++j) CHECK(massNorm(s.snapshot(j)) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(approxEqual(s.snapshot(3), s.snapshot(3), 0.0));
  // x y is bilinear, so the midpoint sums are exact at every depth.
  Form xy(2, 2, {{3u, X() * Y()}});
  CHECK(pairStream(xy, s, 10) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS(cubeStream({0, 0}, {1, 0}));
}

TEST_CASE("cell streams and polyhedral chains") {
  ChainStream seg = cellStream({0, 0}, {{1, 0}});
  DiracChain a1 = seg.snapshot(1);
  REQUIRE(a1.size() == 2);
  for (auto& e : a1.elements()) CHECK(e.kv.coeff(1u) == doctest::Approx(0.5));
  Form dx = Form::constant(KVector::basis(2, {1}));
  for (int j = 0; j <= 8; ++j) CHECK(pairStream(dx, seg, j) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS(cellStream({0, 0}, {{1, 1}, {2, 2}}));
  // Two rectangles with opposite weights cancel.
  ChainStream r = cellStream({0, 0}, {{1, 0}, {0, 1}});
  ChainStream p = polyhedral({{1.0, r}, {-1.0, r}});
  CHECK(p.snapshot(3).empty());
}

TEST_CASE("shrinking cubes converge to the point mass") {
  Expr x = X(), y = Y();
  Form w(2, 2, {{3u, sin(x) * exp(y) + x * y * y}});
  Point p{0.3, -0.4};
  double target = std::sin(0.3) * std::exp(-0.4) + 0.3 * 0.16;
  double prev = INFINITY;
  for (int m = 1; m <= 6; ++m) {
    double h = std::ldexp(1.0, -m);
    ChainStream q = cubeStream({p[0] - h / 2, p[1] - h / 2}, {p[0] + h / 2, p[1] + h / 2});
    double err = std::abs(pairStream(w, q, 2) / (h * h) - target);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("open square by Whitney cubes, extrapolated") {
  ChainStream s = openSetStream(OpenRegion::box({0, 0}, {1, 1}));
  // The kept area misses a boundary strip of width ~ 2^-j; two Richardson
  // steps remove the first- and second-order terms.
  IntegrateResult r = integrateStream(vol2(), s, depths(5, 9, {1, 2}));
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("unit disk area within 1e-3 by depth 9" * doctest::should_fail()) {
  // The Whitney strip along a curved boundary is not a clean power series
  // in 2^-j, so no fixed extrapolation reaches 1e-3 at depth 9. Kept as an
  // expected failure; the measured errors are printed.
  ChainStream s = openSetStream(OpenRegion::ball({0, 0}, 1.0));
  double raw = pairStream(vol2(), s, 9);
  double ait = integrateStream(vol2(), s, depths(5, 9)).value;
  double ri = integrateStream(vol2(), s, depths(5, 9, {1})).value;
  MESSAGE("disk area errors at j=9: raw " << raw - M_PI << ", Aitken " << ait - M_PI << ", Richardson "
                                           << ri - M_PI);
  CHECK(std::abs(ait - M_PI) <= 1e-3);
}

TEST_CASE("disk area converges") {
  ChainStream s = openSetStream(OpenRegion::ball({0, 0}, 1.0));
  double prev = INFINITY;
  for (int j = 5; j <= 9; ++j) {
    double err = std::abs(pairStream(vol2(), s, j) - M_PI);
    CHECK(err < 0.6 * prev);
    prev = err;
  }
  CHECK(std::abs(integrateStream(vol2(), s, depths(5, 9, {1})).value - M_PI) < 5e-3);
}

TEST_CASE("slit disk and disk streams agree against smooth forms") {
  ChainStream q = openSetStream(OpenRegion::ball({0, 0}, 1.0));
  ChainStream qs = openSetStream(OpenRegion::slitDisk());
  Form w(2, 2, {{3u, Expr(1.0) + X() * Y() + cos(X())}});
  // The cubes lost along the slit form a strip of width ~ 2^-j, so the
  // difference is first order and extrapolates to zero.
  std::vector<double> d;
  for (int j = 5; j <= 9; ++j) d.push_back(pairStream(w, q, j) - pairStream(w, qs, j));
  for (size_t i = 1; i < d.size(); ++i) CHECK(std::abs(d[i] / d[i - 1] - 0.5) < 0.1);
  CHECK(std::abs(2 * d[4] - d[3]) < 0.1 * std::abs(d[4]));
}

TEST_CASE("Cantor set") {
  ChainStream g = cantorStream();
  Form x = Form::scalar(1, Expr::var(0, 1));
  Form dx3(1, 1, {{1u, Expr(3.0) * Expr::var(0, 1) * Expr::var(0, 1)}});
  for (int n = 0; n <= 12; ++n) {
    CHECK(evalChain(x, boundary(g.snapshot(n))) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pairStream(x, cantorBoundaryStream(), n) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(massNorm(cantorStage(n)) == doctest::Approx(std::pow(2.0 / 3.0, n)).epsilon(1e-13));
    // Stokes per stage: int_Gamma d(x^3) = int_{dGamma} x^3.
    Form x3 = Form::scalar(1, Expr::var(0, 1) * Expr::var(0, 1) * Expr::var(0, 1));
    CHECK(std::abs(pairStream(dx3, g, n) - evalChain(x3, boundary(g.snapshot(n)))) <= 1e-8);
  }
  // The limit of int_Gamma d(x^3) is 3 E[X^2] for the Cantor distribution,
  // 3 (1/8 + 1/4) = 9/8, not 1^3 - 0^3.
  CHECK(pairStream(dx3, g, 14) == doctest::Approx(9.0 / 8.0).epsilon(1e-10));
}

TEST_CASE("Sierpinski stages keep their weighted area") {
  ChainStream s = sierpinskiStream();
  for (int k = 0; k <= 6; ++k) CHECK(massNorm(s.snapshot(k)) == doctest::Approx(std::sqrt(3.0) / 4).epsilon(1e-12));
}

TEST_CASE("vector field representatives") {
  OpenRegion sq = OpenRegion::box({0, 0}, {1, 1});
  Form dx = Form::constant(KVector::basis(2, {1}));
  Form dy = Form::constant(KVector::basis(2, {2}));
  ChainStream c = vectorFieldRep(1, {{1u, Expr(1.0)}}, sq);
  CHECK(integrateStream(dx, c, depths(5, 9, {1, 2})).value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(pairStream(dy, c, 6)) <= 1e-15);
  // bump f with compact support: int f dV = pi R^2 / (m + 1)
  double R = 0.4;
  ChainStream fb = vectorFieldRep(1, {{1u, bump({0.5, 0.5}, R, 3)}}, sq);
  CHECK(pairStream(dx, fb, 9) == doctest::Approx(M_PI * R * R / 4).epsilon(1e-4));
}

TEST_CASE("algebraic chains") {
  // The fold x -> |x| maps the two halves of [-1, 1] onto [0, 1] with
  // opposite orientations.
  SmoothMap fold(1, {abs(Expr::var(0, 1))});
  ChainStream f = algebraicStream(fold, cellStream({-1.0}, {{2.0}}));
  for (int j = 1; j <= 8; ++j) CHECK(f.snapshot(j).maxCoeff() <= 1e-15);
  Expr t = Expr::var(0, 1);
  ChainStream circle = algebraicStream(SmoothMap(1, {cos(t), sin(t)}), cellStream({0.0}, {{2 * M_PI}}));
  Form w(2, 1, {{1u, -Y()}, {2u, X()}});
  CHECK(integrateStream(w, circle, depths(4, 10)).value == doctest::Approx(2 * M_PI).epsilon(1e-4 / (2 * M_PI)));
  // dipole cell: pairing with w equals int of L_{e2} w over the segment
  Form u(2, 1, {{1u, X() + Y() + X() * Y()}});
  ChainStream d = dipoleCell({0, 1}, cellStream({0, 0}, {{1, 0}}));
  for (int j = 0; j <= 5; ++j) CHECK(pairStream(u, d, j) == doctest::Approx(1.5));
}

TEST_CASE("integration along streams") {
  ChainStream s = cubeStream({0, 0}, {1, 1});
  IntegrateResult c = integrateStream(Form::constant(KVector::volume(2) * 2.5), s, depths(0, 0));
  CHECK(c.value == doctest::Approx(2.5));
  Form w(2, 2, {{3u, X() * X() * Y()}});
  IntegrateResult r = integrateStream(w, s, depths(4, 10));
  CHECK(r.value == doctest::Approx(1.0 / 6.0).epsilon(1e-6));
  CHECK(std::abs(r.raw - 1.0 / 6.0) <= r.errorBound);
  CHECK(r.rows.size() == 7);
  CHECK(std::isnan(r.rows[0].diff));
}

TEST_CASE("cube stream Cauchy certificate") {
  ChainStream s = cubeStream({0, 0}, {1, 1});
  for (int j = 0; j <= 6; ++j) {
    double ub = streamDifferenceUB(s, j, 1);
    CHECK(ub <= std::ldexp(2.0, -j) + 1e-12);
    CHECK(ub <= s.cauchyRate(j) + 1e-12);
  }
}

TEST_CASE("boundary of the square equals its four oriented edges") {
  Form w(2, 1, {{1u, X() * X() * Y() + sin(Y())}, {2u, exp(X()) * Y()}});
  ChainStream bd = boxBoundaryStream({0, 0}, {1, 1});
  ChainStream edges = polyhedral({{1.0, cellStream({0, 0}, {{1, 0}})},
                                  {1.0, cellStream({1, 0}, {{0, 1}})},
                                  {-1.0, cellStream({0, 1}, {{1, 0}})},
                                  {-1.0, cellStream({0, 0}, {{0, 1}})}});
  for (int j = 0; j <= 8; ++j) CHECK(std::abs(pairStream(w, bd, j) - pairStream(w, edges, j)) <= 1e-8);
}

TEST_CASE("Stokes along streams within certified bounds") {
  Form w(2, 1, {{1u, X() * Y() * Y()}, {2u, X() * X() * X()}});
  w = w.withDomain(Box{{0, 0}, {1, 1}});
  ChainStream cube = cubeStream({0, 0}, {1, 1});
  ChainStream bd = boxBoundaryStream({0, 0}, {1, 1});
  Form dw = exteriorD(w);
  for (int j = 3; j <= 8; ++j) {
    double lhs = pairStream(w, bd, j), rhs = pairStream(dw, cube, j);
    double bound = certifiedNorm(w, bd.normOrder) * bd.tailBound(j) + certifiedNorm(dw, cube.normOrder) * cube.tailBound(j);
    CHECK(std::abs(lhs - rhs) <= bound);
  }
}

TEST_CASE("different subdivisions of the same square agree") {
  ChainStream a = cubeStream({0, 0}, {1, 1});
  ChainStream b = polyhedral({{1.0, cellStream({0, 0}, {{1.0 / 3, 0}, {0, 1}})},
                              {1.0, cellStream({1.0 / 3, 0}, {{2.0 / 3, 0}, {0, 1}})}});
  Rng g(223);
  for (int i = 0; i < 10; ++i) {
    Form w = randomPolyForm(g, 2, 2, 3).withDomain(Box{{0, 0}, {1, 1}});
    int j = 7;
    double bound = certifiedNorm(w, 1) * (a.tailBound(j) + b.tailBound(j));
    CHECK(std::abs(pairStream(w, a, j) - pairStream(w, b, j)) <= bound);
  }
}

TEST_CASE("streams from JSON") {
  ChainStream s = streamFromJson({{"kind", "cube"}, {"lo", {0, 0}}, {"hi", {2, 1}}});
  CHECK(pairStream(vol2(), s, 3) == doctest::Approx(2.0));
  CHECK_THROWS(streamFromJson({{"kind", "nope"}}));
}

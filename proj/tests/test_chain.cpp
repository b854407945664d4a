#include <algorithm>
#include <cmath>

#include "chaincalc/verify.hpp"
#include "doctest.h"

using namespace chaincalc;

namespace {

ChainElement el(Point p, KVector a) { return ChainElement(std::move(p), std::move(a)); }
KVector e1(int n = 2, double c = 1.0) { return KVector::basis(n, {1}, c); }

// Reference expansion of Delta_sigma(p; alpha) by inclusion-exclusion over
// subsets of the factors.
DiracChain referenceDifference(const std::vector<Vec>& us, const Point& p, const KVector& a) {
  int j = static_cast<int>(us.size());
  std::vector<ChainElement> raw;
  for (int mask = 0; mask < (1 << j); ++mask) {
    Point q = p;
    for (int i = 0; i < j; ++i)
      if (mask >> i & 1)
        for (size_t d = 0; d < q.size(); ++d) q[d] += us[i][d];
    int missing = j - __builtin_popcount(mask);
    raw.push_back(el(q, (missing % 2 ? -1.0 : 1.0) * a));
  }
  return DiracChain(static_cast<int>(p.size()), raw);
}

}  // namespace

TEST_CASE("canonicalize cancels, merges and sorts") {
  CHECK(DiracChain(2, {el({0, 0}, e1()), el({0, 0}, -e1())}).empty());
  DiracChain m(2, {el({1, 1}, e1()), el({1, 1}, e1())});
  REQUIRE(m.size() == 1);
  CHECK(m.elements()[0].kv.coeff(1u) == 2.0);
  DiracChain s(2, {el({2, 0}, e1()), el({1, 5}, KVector::basis(2, {2}))});
  REQUIRE(s.size() == 2);
  CHECK(s.elements()[0].point == Point{1, 5});
  CHECK(s.elements()[1].point == Point{2, 0});
}

TEST_CASE("canonical form does not depend on input order") {
  Rng g(41);
  for (int trial = 0; trial < 20; ++trial) {
    DiracChain a = randomChain(g, 3, 1, 2, 12);
    std::vector<ChainElement> raw = a.elements();
    raw.insert(raw.end(), a.elements().begin(), a.elements().end());
    std::reverse(raw.begin(), raw.end());
    DiracChain b(3, raw);
    CHECK(approxEqual(b, 2.0 * a, 1e-14));
    CHECK(approxEqual(a - a, DiracChain(3), 0.0));
  }
}

TEST_CASE("difference chains") {
  KVector a = e1();
  Point p{0.5, -1};
  CHECK(approxEqual(differenceChain(SymTensor(2), el(p, a)), DiracChain::single(el(p, a)), 0.0));
  Vec u{0.25, 0}, v{0, 0.5};
  DiracChain d1 = differenceChain(SymTensor(2, {u}), el(p, a));
  CHECK(approxEqual(d1, DiracChain(2, {el({0.75, -1}, a), el(p, -a)}), 1e-15));
  DiracChain d2 = differenceChain(SymTensor(2, {u, v}), el(p, a));
  DiracChain want(2, {el({0.75, -0.5}, a), el({0.75, -1}, -a), el({0.5, -0.5}, -a), el(p, a)});
  CHECK(approxEqual(d2, want, 1e-15));
  CHECK(support(d2).size() == 4);
}

TEST_CASE("difference chains agree with inclusion-exclusion and carry 2^j mass") {
  Rng g(43);
  for (int trial = 0; trial < 30; ++trial) {
    int n = g.integer(1, 4), j = g.integer(0, 4);
    std::vector<Vec> us;
    for (int i = 0; i < j; ++i) us.push_back(g.vector(n));
    Point p = g.vector(n);
    KVector a = randomKVector(g, n, g.integer(0, n));
    DiracChain d = differenceChain(SymTensor(n, us), el(p, a));
    CHECK(approxEqual(d, referenceDifference(us, p, a), 1e-13));
    CHECK(massNorm(d) == doctest::Approx(std::ldexp(massBound(a), j)).epsilon(1e-12));
  }
}

TEST_CASE("translate") {
  Rng g(47);
  DiracChain a = randomChain(g, 2, 1, 0, 6);
  Vec u{0.3, -0.7}, mu{-0.3, 0.7};
  CHECK(approxEqual(translate(Vec{0, 0}, a), a, 0.0));
  CHECK(approxEqual(translate(mu, translate(u, a)), a, 1e-14));
  DiracChain t = translate(u, DiracChain::single(el({1, 1}, e1())));
  CHECK(t.elements()[0].point[0] == doctest::Approx(1.3));
  CHECK(t.elements()[0].point[1] == doctest::Approx(0.3));
}

TEST_CASE("support") {
  DiracChain a(2, {el({0, 0}, e1()), el({1, 0}, e1())});
  CHECK(support(a).size() == 2);
  CHECK(support(DiracChain(2, {el({0, 0}, e1()), el({0, 0}, -e1())})).empty());
}

TEST_CASE("restrict to regions") {
  OpenRegion w = OpenRegion::ball({0, 0}, 2.0);
  DiracChain in(2, {el({0, 0}, e1()), el({1, 0.5}, e1())});
  CHECK(approxEqual(restrict(in, w), in, 0.0));
  DiracChain out(2, {el({5, 0}, e1()), el({0, -3}, e1())});
  CHECK(restrict(out, w).empty());
}

TEST_CASE("restriction is not continuous: the unit disk example") {
  // A_m = ((1 + 1/2m, 0); m) - ((1 - 1/2m, 0); m), B_m = A_m - ((1,0); e1 (x) 1).
  // B_m tends to zero against smooth forms while its part in the disk has
  // mass m.
  OpenRegion q = OpenRegion::ball({0, 0}, 1.0);
  Expr x = Expr::var(0, 2), y = Expr::var(1, 2);
  Form f = Form::scalar(2, sin(Expr(3.0) * x) * exp(y) + x * x * x);
  double prev = INFINITY;
  for (int m : {4, 16, 64, 256}) {
    double h = 1.0 / (2.0 * m);
    DiracChain b(2, {el({1 + h, 0}, KVector::scalar(2, m)), el({1 - h, 0}, KVector::scalar(2, -m)),
                     ChainElement({1, 0}, SymTensor::monomial(2, {1}), KVector::scalar(2, -1.0))});
    DiracChain part = restrict(b, q);
    CHECK(massNorm(part) == doctest::Approx(m));
    double pairing = std::abs(evalChain(f, b));
    CHECK(pairing < prev);
    prev = pairing;
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("insideRegion") {
  OpenRegion big = OpenRegion::ball({0, 0}, 10.0);
  CHECK(insideRegion(SymTensor(2, {{1, 0}}), Point{0, 0}, big));
  OpenRegion slit = OpenRegion::slitDisk();
  // Both vertices lie in the slit disk but the segment between them crosses
  // the removed nonnegative x-axis.
  Point p{0.5, -0.1};
  CHECK(slit.contains(p));
  CHECK(slit.contains(Point{0.5, 0.1}));
  CHECK_FALSE(insideRegion(SymTensor(2, {{0, 0.2}}), p, slit));
  CHECK(insideRegion(SymTensor(2, {{0.2, 0}}), p, slit));
  CHECK(insideRegion(SymTensor(2), Point{0.2, 0.3}, slit));
  CHECK_FALSE(insideRegion(SymTensor(2), Point{0.2, 0.0}, slit));
}

TEST_CASE("JSON round trip of chains and regions") {
  Rng g(53);
  DiracChain a = randomChain(g, 3, 2, 2, 8);
  nlohmann::json j = a;
  CHECK(approxEqual(chainFromJson(j), a, 0.0));
  OpenRegion u = OpenRegion::box({0, 0}, {1, 2});
  nlohmann::json ju = u;
  OpenRegion v = regionFromJson(ju);
  CHECK(v.contains(Point{0.5, 1.5}));
  CHECK_FALSE(v.contains(Point{0.5, 2.5}));
}

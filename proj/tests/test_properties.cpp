// Randomized invariants swept over many seeds.

#include <cmath>

#include "chaincalc/verify.hpp"
#include "doctest.h"

using namespace chaincalc;

namespace {

constexpr int kSeeds = 25;

double vnorm(const Vec& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double rel(double a, double b) { return std::abs(a - b) / (1 + std::abs(a) + std::abs(b)); }

}  // namespace

TEST_CASE("Stokes pairing on random chains of every order") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng g(1000 + seed);
    int n = g.integer(1, 4), k = g.integer(1, n);
    DiracChain a = randomChain(g, n, k, 2, 6);
    Form w = randomPolyForm(g, n, k - 1, 4);
    CHECK(rel(evalChain(exteriorD(w), a), evalChain(w, boundary(a))) <= 1e-10);
  }
}

TEST_CASE("operators are linear over chains") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng g(2000 + seed);
    int n = g.integer(2, 4), k = g.integer(1, n - 1);
    DiracChain a = randomChain(g, n, k, 1, 4), b = randomChain(g, n, k, 1, 4);
    double s = g.uniform(-2, 2), t = g.uniform(-2, 2);
    Vec v = g.vector(n);
    std::vector<ChainOperator> ops = {opBoundary(), opPerp(), opExtrude(v), opRetract(v), opPrederiv(v),
                                      opCoboundary(), opDirBoundary(v)};
    for (auto& op : ops) {
      INFO(op.name);
      CHECK(approxEqual(op(s * a + t * b), s * op(a) + t * op(b), 1e-11));
    }
  }
}

TEST_CASE("boundary squares to zero and Cartan holds on chains") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng g(3000 + seed);
    int n = g.integer(2, 5), k = g.integer(0, n - 1);
    DiracChain a = randomChain(g, n, k, 2, 5);
    Vec v = g.vector(n);
    CHECK(boundary(boundary(a)).maxCoeff() <= 1e-12 * (1 + a.maxCoeff()));
    CHECK(approxEqual(boundary(extrude(v, a)) + extrude(v, boundary(a)), prederiv(v, a), 1e-11));
  }
}

TEST_CASE("perp preserves mass and follows its double sign") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng g(4000 + seed);
    int n = g.integer(1, 5), k = g.integer(0, n);
    DiracChain a = randomChain(g, n, k, 0, 5);
    CHECK(massNorm(perp(a)) == doctest::Approx(massNorm(a)).epsilon(1e-12));
    double s = (n + k * (n - k)) % 2 ? -1.0 : 1.0;
    CHECK(approxEqual(perp(perp(a)), s * a, 1e-12));
    // star is the dual of perp, so star star carries the same sign.
    Form w = randomPolyForm(g, n, k, 2);
    Point p = g.vector(n);
    KVector al = randomKVector(g, n, k);
    CHECK(hodge(hodge(w)).eval(p, al) == doctest::Approx(s * w.eval(p, al)));
  }
}

TEST_CASE("canonicalization is idempotent") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng g(5000 + seed);
    DiracChain a = randomChain(g, g.integer(1, 4), 1, 2, 10);
    DiracChain b(a.dim(), a.elements());
    CHECK(approxEqual(a, b, 0.0));
    CHECK(b.size() == a.size());
  }
}

TEST_CASE("difference chains carry 2^j times the mass") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng g(6000 + seed);
    int n = g.integer(1, 4), j = g.integer(0, 4);
    std::vector<Vec> us;
    for (int i = 0; i < j; ++i) us.push_back(g.vector(n));
    KVector al = randomKVector(g, n, g.integer(0, n));
    DiracChain d = differenceChain(SymTensor(n, us), ChainElement(g.vector(n), al));
    CHECK(massNorm(d) == doctest::Approx(std::ldexp(massBound(al), j)).epsilon(1e-12));
  }
}

TEST_CASE("certified inequalities at the evaluable level") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng g(7000 + seed);
    int n = g.integer(1, 3), k = g.integer(0, n - 1), r = g.integer(0, 2);
    DiracChain a = randomChain(g, n, k, 0, 6);
    a += translate(g.vector(n, -0.2, 0.2), -1.0 * a);
    if (a.empty()) continue;
    Box box = Box::around(a, 0.5);
    Form w = randomPolyForm(g, n, k, 3);
    double ub = normUB(a, r).upper;
    CHECK(std::abs(evalChain(w, a)) <= certifiedNorm(w, r, box) * ub * (1 + 1e-12) + 1e-14);
    Vec v = g.vector(n);
    Form w1 = randomPolyForm(g, n, k + 1, 3);
    CHECK(std::abs(evalChain(w1, extrude(v, a))) <= vnorm(v) * certifiedNorm(w1, r, box) * ub * (1 + 1e-12) + 1e-14);
  }
}

TEST_CASE("affine pushforward commutes with boundary at every order") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng g(8000 + seed);
    int n = g.integer(1, 3);
    std::vector<double> M(n * n);
    for (auto& x : M) x = g.uniform(-1, 1);
    SmoothMap L = SmoothMap::linear(n, n, M, g.vector(n));
    DiracChain a = randomChain(g, n, g.integer(0, n), 2, 5);
    CHECK(approxEqual(pushforward(L, boundary(a)), boundary(pushforward(L, a)), 1e-11));
    Vec u = g.vector(n);
    CHECK(approxEqual(translate(u, a), pushforward(SmoothMap::linear(n, n, [&] {
                                                     std::vector<double> I(n * n, 0.0);
                                                     for (int i = 0; i < n; ++i) I[i * n + i] = 1;
                                                     return I;
                                                   }(), u), a),
                      1e-14));
  }
}

TEST_CASE("general pushforward commutes with boundary through the form side") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng g(9000 + seed);
    int n = g.integer(2, 3), k = g.integer(1, n);
    SmoothMap F = randomQuadraticMap(g, n);
    DiracChain a = randomChain(g, n, k, 0, 4);
    Form w = randomPolyForm(g, n, k - 1, 3);
    // w(d F_* A) = (dw)(F_* A) = (F^* dw)(A) = (d F^* w)(A) = (F^* w)(dA) = w(F_* dA)
    double lhs = evalChain(exteriorD(w), pushforward(F, a));
    double rhs = evalChain(pullback(F, w), boundary(a));
    CHECK(rel(lhs, rhs) <= 1e-10);
  }
}

#include <cmath>

#include "chaincalc/verify.hpp"
#include "doctest.h"

using namespace chaincalc;

namespace {

Expr X() { return Expr::var(0, 2); }
Expr Y() { return Expr::var(1, 2); }
VectorFieldB rotation() { return VectorFieldB({-Y(), X()}); }
VectorFieldB dilation() { return VectorFieldB({X(), Y()}); }

// The constant stream (p; 1).
ChainStream pointStream(Point p) {
  ChainStream s;
  s.dim = static_cast<int>(p.size());
  s.grade = 0;
  s.domain = {p, p};
  s.cauchyRate = [](int) { return 0.0; };
  s.gen = [p](int, int part, int, const ElementVisitor& f) {
    if (part == 0) f(p, SymTensor(static_cast<int>(p.size())), KVector::scalar(static_cast<int>(p.size()), 1.0), 1.0);
  };
  return s;
}

}  // namespace

TEST_CASE("flow of constant and rotation fields") {
  Point q = flowPoint(VectorFieldB::constant({1, 0}), 1.0, Point{0, 0});
  CHECK(q[0] == doctest::Approx(1.0));
  CHECK(q[1] == doctest::Approx(0.0));
  Point r = flowPoint(rotation(), M_PI / 2, Point{1, 0});
  CHECK(std::abs(r[0]) < 1e-8);
  CHECK(std::abs(r[1] - 1) < 1e-8);
  double t = 0.8;
  auto J = flowJacobian(rotation(), t, Point{0.3, -0.2});
  std::vector<double> R = {std::cos(t), -std::sin(t), std::sin(t), std::cos(t)};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(J[i] - R[i]) < 1e-8);
}

TEST_CASE("flows compose") {
  Expr x = X(), y = Y();
  VectorFieldB v({sin(y) + Expr(0.5), x * y - Expr(0.2) * x});
  Rng g(227);
  for (int trial = 0; trial < 5; ++trial) {
    Point p = g.vector(2, -0.5, 0.5);
    double s = g.uniform(0, 0.5), t = g.uniform(0, 0.5);
    Point a = flowPoint(v, s + t, p), b = flowPoint(v, s, flowPoint(v, t, p));
    CHECK(std::abs(a[0] - b[0]) < 1e-9);
    CHECK(std::abs(a[1] - b[1]) < 1e-9);
  }
  Point p0 = flowPoint(v, 0.0, Point{0.1, 0.2});
  CHECK(p0 == Point{0.1, 0.2});
}

TEST_CASE("variational Jacobian matches finite differences of the flow") {
  Expr x = X(), y = Y();
  VectorFieldB v({y * y - x, sin(x)});
  Point p{0.4, 0.1};
  double t = 0.7, h = 1e-5;
  auto J = flowJacobian(v, t, p);
  for (int j = 0; j < 2; ++j) {
    Point pp = p, pm = p;
    pp[j] += h, pm[j] -= h;
    Point a = flowPoint(v, t, pp), b = flowPoint(v, t, pm);
    for (int i = 0; i < 2; ++i) CHECK(J[i * 2 + j] == doctest::Approx((a[i] - b[i]) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("pushforward along flows") {
  Rng g(229);
  DiracChain a = randomChain(g, 2, 1, 0, 5);
  CHECK(approxEqual(pushforwardFlow(rotation(), 0.0, a), a, 1e-14));
  Vec v{0.3, -0.4};
  CHECK(approxEqual(pushforwardFlow(VectorFieldB::constant(v), 2.0, a), translate(Vec{0.6, -0.8}, a), 1e-12));
  DiracChain e = DiracChain::single(ChainElement({1, 0}, KVector::basis(2, {1})));
  DiracChain got = pushforwardFlow(rotation(), M_PI / 2, e);
  REQUIRE(got.size() == 1);
  const ChainElement& ge = got.elements()[0];
  CHECK(std::abs(ge.point[0]) < 1e-8);
  CHECK(std::abs(ge.point[1] - 1) < 1e-8);
  CHECK(std::abs(ge.kv.coeff(1u)) < 1e-8);
  CHECK(std::abs(ge.kv.coeff(2u) - 1) < 1e-8);
  CHECK_THROWS(pushforwardFlow(rotation(), 1.0, DiracChain::single(ChainElement({0, 0}, SymTensor::monomial(2, {1}),
                                                                                   KVector::basis(2, {1})))));
}

TEST_CASE("flow limit characterizes the field prederivative") {
  Expr x = X(), y = Y();
  VectorFieldB V({x * y + Expr(0.3), sin(x)});
  DiracChain a = DiracChain::single(ChainElement({0.2, 0.5}, KVector::basis(2, {1}, 1.5)));
  Form w(2, 1, {{1u, x * x * y}, {2u, cos(y) + x}});
  double target = evalChain(w, prederiv(V, a));
  double prev = INFINITY;
  for (double t : {0.02, 0.01, 0.005}) {
    double q = (evalChain(w, pushforwardFlow(V, t, a)) - evalChain(w, a)) / t;
    double err = std::abs(q - target);
    if (prev < INFINITY) CHECK(err == doctest::Approx(prev / 2).epsilon(0.15));
    prev = err;
  }
}

TEST_CASE("evolving chain of a point under a constant field") {
  Vec v{0.5, 0.25};
  VectorFieldB V = VectorFieldB::constant(v);
  Expr x = X(), y = Y();
  Expr f = sin(x) * y + x * x;
  Form lvf = lie(V, Form::scalar(2, f));
  // The time direction is retracted, so {J_t} is a 0-chain paired with L_V f.
  Point p{0.1, 0.2};
  double a = 0.0, b = 1.0;
  auto fAt = [&](double s) {
    Point q{p[0] + s * v[0], p[1] + s * v[1]};
    return f.eval(q);
  };
  double exact = fAt(b) - fAt(a);
  double prev = INFINITY;
  for (int m = 3; m <= 6; ++m) {
    double got = pairStream(lvf, evolvingChain(pointStream(p), V, a, b, 0), m);
    double err = std::abs(got - exact);
    CHECK(err < prev);
    if (prev < INFINITY) CHECK(err < prev / 3.5);
    prev = err;
  }
  // A zero field gives a zero chain.
  DiracChain z = evolvingChain(pointStream(p), VectorFieldB::constant({0, 0}), a, b, 0).snapshot(4);
  CHECK(std::abs(evalChain(lie(VectorFieldB::constant({0, 0}), Form::scalar(2, f)), z)) < 1e-15);
}

TEST_CASE("evolving chain snapshot matches the literal construction") {
  ChainStream seg = simplexStream({{0.2, 0.1}, {1.1, 0.3}});
  for (int m = 1; m <= 4; ++m) {
    DiracChain s = evolvingChain(seg, rotation(), 0.0, 0.7, 3).snapshot(m);
    DiracChain l = evolvingChainLiteral(seg.snapshot(3), rotation(), 0.0, 0.7, m);
    CHECK(maxDifference(s, l) < 1e-9);
  }
}

TEST_CASE("the t-slice of the evolving chain is the flowed chain") {
  ChainStream sq = cubeStream({0, 0}, {1, 1});
  DiracChain j0 = sq.snapshot(3);
  double t = 0.4;
  CHECK(maxDifference(flowedStream(sq, dilation(), t).snapshot(3), pushforwardFlow(dilation(), t, j0)) < 1e-9);
}

TEST_CASE("boundary of the evolving chain is the evolving boundary") {
  ChainStream sq = cubeStream({0, 0}, {1, 1});
  ChainStream bd = boundaryStreamOf(sq);
  Expr x = X(), y = Y();
  Form w(2, 1, {{1u, x * y}, {2u, x * x + y}});
  int j = 5, m = 6;
  double lhs = evalChain(w, boundary(evolvingChain(sq, rotation(), 0.0, 0.5, j).snapshot(m)));
  double rhs = pairStream(w, evolvingChain(bd, rotation(), 0.0, 0.5, j), m);
  CHECK(std::abs(lhs - rhs) < 1e-3);
}

TEST_CASE("fundamental theorem for chains in a flow") {
  ChainStream seg = simplexStream({{0.2, 0.1}, {1.1, 0.3}});
  Form xdy(2, 1, {{2u, X()}});
  double prev = INFINITY;
  for (int m = 6; m <= 8; ++m) {
    double res = ftcCheck(seg, rotation(), xdy, 0.0, 1.0, m, 6).residual;
    if (prev < INFINITY) CHECK(prev / res >= 3.5);
    prev = res;
  }
  CHECK(prev < 1e-3);
  CHECK(ftcCheck(seg, VectorFieldB::constant({0, 0}), xdy, 0.0, 1.0, 4, 6).residual < 1e-14);
  // (x^2 + y^2)(x dx + y dy) is invariant under rotation.
  Expr r2 = X() * X() + Y() * Y();
  Form radial(2, 1, {{1u, r2 * X()}, {2u, r2 * Y()}});
  FlowCheck c = ftcCheck(seg, rotation(), radial, 0.0, 1.0, 4, 6);
  CHECK(c.residual <= 1e-6);
  CHECK(std::abs(c.lhs) <= 1e-6);
}

TEST_CASE("Stokes for evolving chains") {
  ChainStream sq = cubeStream({0, 0}, {1, 1});
  Form w(2, 1, {{1u, X() * Y()}, {2u, X() * X()}});
  CHECK(stokesEvolvingCheck(sq, rotation(), w, 0.0, 1.0, 8, 6).residual <= 1e-3);
  CHECK(stokesEvolvingCheck(sq, VectorFieldB::constant({0, 0}), w, 0.0, 1.0, 4, 6).residual <= 1e-14);
}

TEST_CASE("Leibniz rule and Reynolds transport") {
  ChainStream sq = cubeStream({0, 0}, {1, 1});
  // w_t = t dx dy on a static square
  Form st(3, 2, {{3u, Expr::var(2, 3)}});
  TimeForm tw(2, st);
  FlowCheck l = leibnizCheck(sq, VectorFieldB::constant({0, 0}), tw, 0.5, 1e-3, 4);
  CHECK(l.lhs == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(l.residual <= 1e-8);
  // dilation of the unit square: area(t) = e^{2t}
  TimeForm area = TimeForm::constant(Form(2, 2, {{3u, Expr(1.0)}}));
  FlowCheck r = reynoldsCheck(sq, dilation(), area, 0.5, 1e-3, 6);
  CHECK(r.residual <= 1e-4);
  CHECK(r.lhs == doctest::Approx(2 * std::exp(1.0)).epsilon(1e-5));
  FlowCheck z = reynoldsCheck(sq, VectorFieldB::constant({0, 0}), area, 0.5, 1e-3, 4);
  CHECK(std::abs(z.residual) <= 1e-12);
}

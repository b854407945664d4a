#include <cmath>

#include "chaincalc/verify.hpp"
#include "doctest.h"

using namespace chaincalc;

namespace {

// Fourth-order central difference.
double fd(const Expr& f, Vec x, int i, double h = 1e-3) {
  auto at = [&](double s) {
    Vec y = x;
    y[i] += s;
    return f.eval(y);
  };
  return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
}

}  // namespace

TEST_CASE("polynomial arithmetic and evaluation") {
  Polynomial x = Polynomial::variable(0, 2), y = Polynomial::variable(1, 2);
  Polynomial p = (x * x * y + y.scaled(3.0)) + Polynomial::constant(1.0, 2);
  double pt[2] = {2.0, -1.0};
  CHECK(p.eval(pt) == doctest::Approx(4 * -1 - 3 + 1));
  CHECK(p.degree() == 3);
  CHECK(p.partial(0).eval(pt) == doctest::Approx(2 * 2 * -1));
  CHECK(p.partial(1).eval(pt) == doctest::Approx(4 + 3));
  CHECK((p + p.scaled(-1.0)).isZero());
}

TEST_CASE("symbolic partials match finite differences") {
  Expr x = Expr::var(0, 2), y = Expr::var(1, 2);
  std::vector<Expr> fs = {sin(x * y) + exp(Expr(0.5) * x), cos(x) * y * y, posPow(Expr(1.0) - x * x - y * y, 3),
                          exp(sin(x) + cos(y))};
  Rng g(59);
  for (auto& f : fs)
    for (int trial = 0; trial < 10; ++trial) {
      Vec p = g.vector(2, -0.6, 0.6);
      for (int i = 0; i < 2; ++i) CHECK(f.partial(i).eval(p) == doctest::Approx(fd(f, p, i)).epsilon(1e-7));
    }
}

TEST_CASE("mixed partials commute") {
  Expr x = Expr::var(0, 3), y = Expr::var(1, 3), z = Expr::var(2, 3);
  Expr f = sin(x * z) * exp(y) + x * y * y * z;
  Rng g(61);
  for (int trial = 0; trial < 10; ++trial) {
    Vec p = g.vector(3);
    CHECK(f.partial(0).partial(2).eval(p) == doctest::Approx(f.partial(2).partial(0).eval(p)));
    CHECK(f.partial(1).partial(2).eval(p) == doctest::Approx(f.partial(2).partial(1).eval(p)));
  }
}

TEST_CASE("interval enclosures contain sampled values") {
  Expr x = Expr::var(0, 2), y = Expr::var(1, 2);
  Expr f = sin(Expr(3.0) * x) * y + exp(x * y) - x * x * x;
  std::vector<Interval> box = {{-0.5, 1.0}, {0.2, 0.7}};
  Interval b = f.bound(box);
  Rng g(67);
  for (int trial = 0; trial < 2000; ++trial) {
    Vec p = {g.uniform(-0.5, 1.0), g.uniform(0.2, 0.7)};
    double v = f.eval(p);
    CHECK(v >= b.lo);
    CHECK(v <= b.hi);
  }
}

TEST_CASE("substitution composes") {
  Expr t = Expr::var(0, 1);
  Expr x = Expr::var(0, 2), y = Expr::var(1, 2);
  Expr f = x * x + sin(y);
  std::vector<Expr> subs = {cos(t), t * t};
  Expr g = f.substitute(subs);
  double v = 0.7;
  CHECK(g.eval(&v) == doctest::Approx(std::cos(v) * std::cos(v) + std::sin(v * v)));
}

TEST_CASE("black-box expressions differentiate numerically") {
  Expr f = Expr::opaque([](const double* x) { return std::sin(x[0]) * x[1]; }, 2);
  CHECK_FALSE(f.certifiable());
  Vec p = {0.3, 2.0};
  CHECK(f.partial(0).eval(p) == doctest::Approx(std::cos(0.3) * 2.0).epsilon(1e-7));
  CHECK(f.partial(1).eval(p) == doctest::Approx(std::sin(0.3)).epsilon(1e-7));
}

TEST_CASE("bump functions vanish outside their ball") {
  Expr b = bump({0.0, 0.0}, 0.5, 3);
  CHECK(b.eval(Vec{0.0, 0.0}) == doctest::Approx(1.0));
  CHECK(b.eval(Vec{0.6, 0.0}) == 0.0);
  CHECK(b.partial(0).eval(Vec{0.6, 0.0}) == 0.0);
}

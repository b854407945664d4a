#include "chaincalc/expr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace chaincalc {

// ---------------------------------------------------------------- intervals

namespace {
constexpr double kPad = 4e-16;
double down(double x) { return x - kPad * (1 + std::abs(x)); }
double up(double x) { return x + kPad * (1 + std::abs(x)); }
}  // namespace

double Interval::mag() const { return std::max(std::abs(lo), std::abs(hi)); }

Interval operator+(Interval a, Interval b) { return {down(a.lo + b.lo), up(a.hi + b.hi)}; }
Interval operator-(Interval a, Interval b) { return {down(a.lo - b.hi), up(a.hi - b.lo)}; }

Interval operator*(Interval a, Interval b) {
  if ((a.lo == 0 && a.hi == 0) || (b.lo == 0 && b.hi == 0)) return {0, 0};
  double c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  double lo = c[0], hi = c[0];
  for (double v : c) {
    if (std::isnan(v)) v = 0;  // 0 * inf from an unbounded box: the factor is exactly zero
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {down(lo), up(hi)};
}

Interval ipow(Interval a, int e) {
  if (e == 0) return {1, 1};
  if (e == 1) return a;
  double p = std::pow(a.lo, e), q = std::pow(a.hi, e);
  if (e % 2 == 1) return {down(p), up(q)};
  if (a.lo >= 0) return {down(p), up(q)};
  if (a.hi <= 0) return {down(q), up(p)};
  return {0, up(std::max(p, q))};
}

namespace {
// Does [lo, hi] contain a point of the form base + 2*pi*k?
bool containsPhase(double lo, double hi, double base) {
  double k = std::ceil((lo - base) / (2 * M_PI));
  return base + 2 * M_PI * k <= hi;
}
}  // namespace

Interval isin(Interval a) {
  if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || a.width() >= 2 * M_PI) return {-1, 1};
  double s1 = std::sin(a.lo), s2 = std::sin(a.hi);
  double lo = std::min(s1, s2), hi = std::max(s1, s2);
  if (containsPhase(a.lo, a.hi, M_PI / 2)) hi = 1;
  if (containsPhase(a.lo, a.hi, -M_PI / 2)) lo = -1;
  return {std::max(-1.0, down(lo)), std::min(1.0, up(hi))};
}

Interval icos(Interval a) {
  if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || a.width() >= 2 * M_PI) return {-1, 1};
  double s1 = std::cos(a.lo), s2 = std::cos(a.hi);
  double lo = std::min(s1, s2), hi = std::max(s1, s2);
  if (containsPhase(a.lo, a.hi, 0)) hi = 1;
  if (containsPhase(a.lo, a.hi, M_PI)) lo = -1;
  return {std::max(-1.0, down(lo)), std::min(1.0, up(hi))};
}

Interval iexp(Interval a) { return {std::max(0.0, down(std::exp(a.lo))), up(std::exp(a.hi))}; }

// ---------------------------------------------------------------- polynomial

Polynomial Polynomial::constant(double c, int nvars) {
  Polynomial p(nvars);
  if (c != 0.0) {
    p.exps_.assign(nvars, 0);
    p.coeffs_.push_back(c);
  }
  return p;
}

Polynomial Polynomial::variable(int i, int nvars) {
  if (i < 0 || i >= nvars) throw std::invalid_argument("Polynomial::variable: index out of range");
  Polynomial p(nvars);
  p.exps_.assign(nvars, 0);
  p.exps_[i] = 1;
  p.coeffs_.push_back(1.0);
  return p;
}

Polynomial Polynomial::monomial(std::vector<int> exps, double c) {
  Polynomial p(static_cast<int>(exps.size()));
  for (int e : exps)
    if (e < 0) throw std::invalid_argument("Polynomial::monomial: negative exponent");
  if (c != 0.0) {
    p.exps_ = std::move(exps);
    p.coeffs_.push_back(c);
  }
  return p;
}

bool Polynomial::isConstant() const {
  if (coeffs_.empty()) return true;
  if (coeffs_.size() > 1) return false;
  for (int i = 0; i < n_; ++i)
    if (exps_[i]) return false;
  return true;
}

double Polynomial::constantValue() const { return coeffs_.empty() ? 0.0 : coeffs_[0]; }

int Polynomial::degree() const {
  int d = 0;
  for (size_t t = 0; t < coeffs_.size(); ++t) {
    int s = 0;
    for (int i = 0; i < n_; ++i) s += exps(t)[i];
    d = std::max(d, s);
  }
  return d;
}

Polynomial Polynomial::widened(int nvars) const {
  if (nvars <= n_) return *this;
  Polynomial p(nvars);
  for (size_t t = 0; t < coeffs_.size(); ++t) {
    for (int i = 0; i < nvars; ++i) p.exps_.push_back(i < n_ ? exps(t)[i] : 0);
    p.coeffs_.push_back(coeffs_[t]);
  }
  return p;
}

void Polynomial::addTerm(const int* e, double c) {
  exps_.insert(exps_.end(), e, e + n_);
  coeffs_.push_back(c);
}

void Polynomial::normalize() {
  size_t m = coeffs_.size();
  std::vector<size_t> ord(m);
  std::iota(ord.begin(), ord.end(), 0);
  std::sort(ord.begin(), ord.end(), [&](size_t a, size_t b) {
    return std::lexicographical_compare(exps(a), exps(a) + n_, exps(b), exps(b) + n_);
  });
  std::vector<int> e;
  std::vector<double> c;
  for (size_t k = 0; k < m;) {
    size_t t = ord[k];
    double acc = 0;
    size_t j = k;
    while (j < m && std::equal(exps(t), exps(t) + n_, exps(ord[j]))) acc += coeffs_[ord[j++]];
    if (acc != 0.0) {
      e.insert(e.end(), exps(t), exps(t) + n_);
      c.push_back(acc);
    }
    k = j;
  }
  exps_ = std::move(e);
  coeffs_ = std::move(c);
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  int n = std::max(n_, o.n_);
  Polynomial a = widened(n), b = o.widened(n);
  for (size_t t = 0; t < b.coeffs_.size(); ++t) a.addTerm(b.exps(t), b.coeffs_[t]);
  a.normalize();
  return a;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  int n = std::max(n_, o.n_);
  Polynomial a = widened(n), b = o.widened(n);
  Polynomial r(n);
  std::vector<int> e(n);
  for (size_t s = 0; s < a.coeffs_.size(); ++s)
    for (size_t t = 0; t < b.coeffs_.size(); ++t) {
      for (int i = 0; i < n; ++i) e[i] = a.exps(s)[i] + b.exps(t)[i];
      r.addTerm(e.data(), a.coeffs_[s] * b.coeffs_[t]);
    }
  r.normalize();
  return r;
}

Polynomial Polynomial::scaled(double s) const {
  if (s == 0.0) return Polynomial(n_);
  Polynomial p = *this;
  for (auto& c : p.coeffs_) c *= s;
  return p;
}

Polynomial Polynomial::partial(int i) const {
  Polynomial p(n_);
  if (i >= n_) return p;
  std::vector<int> e(n_);
  for (size_t t = 0; t < coeffs_.size(); ++t) {
    int k = exps(t)[i];
    if (k == 0) continue;
    std::copy(exps(t), exps(t) + n_, e.begin());
    e[i] = k - 1;
    p.addTerm(e.data(), coeffs_[t] * k);
  }
  p.normalize();
  return p;
}

double Polynomial::eval(const double* x) const {
  double s = 0;
  const int* e = exps_.data();
  for (size_t t = 0; t < coeffs_.size(); ++t, e += n_) {
    double v = coeffs_[t];
    for (int i = 0; i < n_; ++i)
      for (int k = e[i]; k > 0; --k) v *= x[i];
    s += v;
  }
  return s;
}

Interval Polynomial::bound(std::span<const Interval> box) const {
  Interval acc(0.0);
  for (size_t t = 0; t < coeffs_.size(); ++t) {
    Interval v(coeffs_[t]);
    for (int i = 0; i < n_; ++i)
      if (exps(t)[i]) v = v * ipow(box[i], exps(t)[i]);
    acc = acc + v;
  }
  return acc;
}

// ---------------------------------------------------------------- Expr

namespace {

using Kind = ExprNode::Kind;

std::shared_ptr<ExprNode> makeNode(Kind k) {
  auto n = std::make_shared<ExprNode>();
  n->kind = k;
  return n;
}

Expr unary(Kind k, const Expr& g) {
  auto n = makeNode(k);
  n->kids.push_back(g);
  return Expr(std::shared_ptr<const ExprNode>(std::move(n)));
}

// Richardson-refined central difference of a black box.
std::function<double(const double*)> fdPartial(std::function<double(const double*)> f, int nvars, int i) {
  return [f = std::move(f), nvars, i](const double* x) {
    std::vector<double> y(x, x + nvars);
    double r = 0;
    for (int k = 0; k < nvars; ++k) r += x[k] * x[k];
    double h = 1e-5 * (1 + std::sqrt(r));
    auto central = [&](double hh) {
      y[i] = x[i] + hh;
      double fp = f(y.data());
      y[i] = x[i] - hh;
      double fm = f(y.data());
      y[i] = x[i];
      return (fp - fm) / (2 * hh);
    };
    double d1 = central(h), d2 = central(h / 2);
    return (4 * d2 - d1) / 3;
  };
}

}  // namespace

Expr::Expr() : Expr(0.0) {}

Expr::Expr(double c) : Expr(Polynomial::constant(c)) {}

Expr::Expr(Polynomial p) {
  auto n = makeNode(Kind::Poly);
  n->poly = std::move(p);
  node_ = std::move(n);
}

Expr Expr::var(int i, int nvars) { return Expr(Polynomial::variable(i, nvars)); }

Expr Expr::opaque(std::function<double(const double*)> f, int nvars, std::string label) {
  auto n = makeNode(Kind::Opaque);
  n->fn = std::move(f);
  n->nvars = nvars;
  n->label = std::move(label);
  return Expr(std::shared_ptr<const ExprNode>(std::move(n)));
}

bool Expr::isZero() const { return isPoly() && node_->poly.isZero(); }

bool Expr::certifiable() const {
  if (node_->kind == Kind::Opaque) return false;
  for (auto& k : node_->kids)
    if (!k.certifiable()) return false;
  return true;
}

double Expr::eval(const double* x) const {
  const ExprNode& n = *node_;
  switch (n.kind) {
    case Kind::Poly:
      return n.poly.eval(x);
    case Kind::Sum: {
      double s = 0;
      for (auto& k : n.kids) s += k.eval(x);
      return s;
    }
    case Kind::Prod: {
      double s = 1;
      for (auto& k : n.kids) s *= k.eval(x);
      return s;
    }
    case Kind::Sin:
      return std::sin(n.kids[0].eval(x));
    case Kind::Cos:
      return std::cos(n.kids[0].eval(x));
    case Kind::Exp:
      return std::exp(n.kids[0].eval(x));
    case Kind::PosPow: {
      double g = n.kids[0].eval(x);
      if (g <= 0) return 0.0;
      double v = 1;
      for (int k = 0; k < n.power; ++k) v *= g;
      return v;
    }
    case Kind::Abs:
      return std::abs(n.kids[0].eval(x));
    case Kind::Sign: {
      double g = n.kids[0].eval(x);
      return g > 0 ? 1.0 : (g < 0 ? -1.0 : 0.0);
    }
    case Kind::Opaque:
      return n.fn(x);
  }
  return 0;
}

Expr Expr::partial(int i) const {
  const ExprNode& n = *node_;
  switch (n.kind) {
    case Kind::Poly:
      return Expr(n.poly.partial(i));
    case Kind::Sum: {
      std::vector<Expr> t;
      for (auto& k : n.kids) t.push_back(k.partial(i));
      return sum(std::move(t));
    }
    case Kind::Prod: {
      std::vector<Expr> t;
      for (size_t j = 0; j < n.kids.size(); ++j) {
        Expr dj = n.kids[j].partial(i);
        if (dj.isZero()) continue;
        std::vector<Expr> f = n.kids;
        f[j] = dj;
        t.push_back(product(std::move(f)));
      }
      return sum(std::move(t));
    }
    case Kind::Sin:
      return cos(n.kids[0]) * n.kids[0].partial(i);
    case Kind::Cos:
      return -(sin(n.kids[0]) * n.kids[0].partial(i));
    case Kind::Exp:
      return *this * n.kids[0].partial(i);
    case Kind::PosPow:
      if (n.power == 0) return Expr(0.0);
      return Expr(static_cast<double>(n.power)) * posPow(n.kids[0], n.power - 1) * n.kids[0].partial(i);
    case Kind::Abs:
      return sign(n.kids[0]) * n.kids[0].partial(i);
    case Kind::Sign:
      return Expr(0.0);
    case Kind::Opaque:
      if (i >= n.nvars) return Expr(0.0);
      return opaque(fdPartial(n.fn, n.nvars, i), n.nvars, "d" + std::to_string(i) + "(" + n.label + ")");
  }
  return Expr(0.0);
}

Interval Expr::bound(std::span<const Interval> box) const {
  const ExprNode& n = *node_;
  switch (n.kind) {
    case Kind::Poly:
      return n.poly.bound(box);
    case Kind::Sum: {
      Interval s(0.0);
      for (auto& k : n.kids) s = s + k.bound(box);
      return s;
    }
    case Kind::Prod: {
      Interval s(1.0);
      for (auto& k : n.kids) s = s * k.bound(box);
      return s;
    }
    case Kind::Sin:
      return isin(n.kids[0].bound(box));
    case Kind::Cos:
      return icos(n.kids[0].bound(box));
    case Kind::Exp:
      return iexp(n.kids[0].bound(box));
    case Kind::PosPow: {
      Interval g = n.kids[0].bound(box);
      if (n.power == 0) return {g.hi > 0 ? (g.lo > 0 ? 1.0 : 0.0) : 0.0, g.hi > 0 ? 1.0 : 0.0};
      Interval c(std::max(0.0, g.lo), std::max(0.0, g.hi));
      return ipow(c, n.power);
    }
    case Kind::Abs: {
      Interval g = n.kids[0].bound(box);
      if (g.lo >= 0) return g;
      if (g.hi <= 0) return {-g.hi, -g.lo};
      return {0, g.mag()};
    }
    case Kind::Sign:
      return {-1, 1};
    case Kind::Opaque:
      throw std::runtime_error("no certified bound for black-box expression '" + n.label + "'");
  }
  return {0, 0};
}

Expr Expr::substitute(std::span<const Expr> subs) const {
  const ExprNode& n = *node_;
  switch (n.kind) {
    case Kind::Poly: {
      const Polynomial& p = n.poly;
      if (p.nvars() > static_cast<int>(subs.size()))
        throw std::invalid_argument("substitute: not enough substitutions");
      std::vector<Expr> terms;
      for (size_t t = 0; t < p.termCount(); ++t) {
        std::vector<Expr> f{Expr(p.coeff(t))};
        for (int i = 0; i < p.nvars(); ++i)
          for (int k = 0; k < p.exps(t)[i]; ++k) f.push_back(subs[i]);
        terms.push_back(product(std::move(f)));
      }
      return sum(std::move(terms));
    }
    case Kind::Sum: {
      std::vector<Expr> t;
      for (auto& k : n.kids) t.push_back(k.substitute(subs));
      return sum(std::move(t));
    }
    case Kind::Prod: {
      std::vector<Expr> t;
      for (auto& k : n.kids) t.push_back(k.substitute(subs));
      return product(std::move(t));
    }
    case Kind::Sin:
      return sin(n.kids[0].substitute(subs));
    case Kind::Cos:
      return cos(n.kids[0].substitute(subs));
    case Kind::Exp:
      return exp(n.kids[0].substitute(subs));
    case Kind::PosPow:
      return posPow(n.kids[0].substitute(subs), n.power);
    case Kind::Abs:
      return abs(n.kids[0].substitute(subs));
    case Kind::Sign:
      return sign(n.kids[0].substitute(subs));
    case Kind::Opaque: {
      std::vector<Expr> s(subs.begin(), subs.end());
      int m = 0;
      for (auto& e : s) {
        if (auto* p = e.poly()) m = std::max(m, p->nvars());
        else if (e.node().kind == Kind::Opaque) m = std::max(m, e.node().nvars);
        else m = std::max(m, 16);
      }
      auto f = n.fn;
      int nv = n.nvars;
      return opaque(
          [f, s, nv](const double* x) {
            std::vector<double> y(nv);
            for (int i = 0; i < nv; ++i) y[i] = s[i].eval(x);
            return f(y.data());
          },
          m, n.label + "∘sub");
    }
  }
  return *this;
}

std::string Expr::str() const {
  const ExprNode& n = *node_;
  std::ostringstream os;
  switch (n.kind) {
    case Kind::Poly: {
      const Polynomial& p = n.poly;
      if (p.isZero()) return "0";
      for (size_t t = 0; t < p.termCount(); ++t) {
        if (t) os << " + ";
        os << p.coeff(t);
        for (int i = 0; i < p.nvars(); ++i)
          if (p.exps(t)[i]) os << "*x" << i << (p.exps(t)[i] > 1 ? "^" + std::to_string(p.exps(t)[i]) : "");
      }
      return os.str();
    }
    case Kind::Sum:
    case Kind::Prod: {
      os << "(";
      for (size_t j = 0; j < n.kids.size(); ++j) os << (j ? (n.kind == Kind::Sum ? " + " : " * ") : "") << n.kids[j].str();
      os << ")";
      return os.str();
    }
    case Kind::Sin: return "sin(" + n.kids[0].str() + ")";
    case Kind::Cos: return "cos(" + n.kids[0].str() + ")";
    case Kind::Exp: return "exp(" + n.kids[0].str() + ")";
    case Kind::PosPow: return "max(" + n.kids[0].str() + ",0)^" + std::to_string(n.power);
    case Kind::Abs: return "|" + n.kids[0].str() + "|";
    case Kind::Sign: return "sign(" + n.kids[0].str() + ")";
    case Kind::Opaque: return n.label;
  }
  return "?";
}

Expr operator+(const Expr& a, const Expr& b) { return sum({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return sum({a, -b}); }
Expr operator*(const Expr& a, const Expr& b) { return product({a, b}); }
Expr Expr::operator-() const { return product({Expr(-1.0), *this}); }

Expr sum(std::vector<Expr> terms) {
  Polynomial acc;
  std::vector<Expr> rest;
  std::vector<Expr> stack(terms.rbegin(), terms.rend());
  while (!stack.empty()) {
    Expr e = std::move(stack.back());
    stack.pop_back();
    if (auto* p = e.poly()) {
      if (!p->isZero()) acc = acc + *p;
    } else if (e.node().kind == Kind::Sum) {
      for (auto it = e.node().kids.rbegin(); it != e.node().kids.rend(); ++it) stack.push_back(*it);
    } else {
      rest.push_back(std::move(e));
    }
  }
  if (rest.empty()) return Expr(std::move(acc));
  if (!acc.isZero()) rest.push_back(Expr(std::move(acc)));
  if (rest.size() == 1) return rest[0];
  auto n = makeNode(Kind::Sum);
  n->kids = std::move(rest);
  return Expr(std::shared_ptr<const ExprNode>(std::move(n)));
}

Expr product(std::vector<Expr> factors) {
  Polynomial acc = Polynomial::constant(1.0);
  std::vector<Expr> rest;
  std::vector<Expr> stack(factors.rbegin(), factors.rend());
  while (!stack.empty()) {
    Expr e = std::move(stack.back());
    stack.pop_back();
    if (auto* p = e.poly()) {
      if (p->isZero()) return Expr(0.0);
      acc = acc * *p;
    } else if (e.node().kind == Kind::Prod) {
      for (auto it = e.node().kids.rbegin(); it != e.node().kids.rend(); ++it) stack.push_back(*it);
    } else {
      rest.push_back(std::move(e));
    }
  }
  if (rest.empty()) return Expr(std::move(acc));
  bool unit = acc.isConstant() && acc.constantValue() == 1.0;
  if (!unit) rest.insert(rest.begin(), Expr(std::move(acc)));
  if (rest.size() == 1) return rest[0];
  auto n = makeNode(Kind::Prod);
  n->kids = std::move(rest);
  return Expr(std::shared_ptr<const ExprNode>(std::move(n)));
}

Expr sin(const Expr& g) {
  if (g.isConstant()) return Expr(std::sin(g.poly()->constantValue()));
  return unary(Kind::Sin, g);
}
Expr cos(const Expr& g) {
  if (g.isConstant()) return Expr(std::cos(g.poly()->constantValue()));
  return unary(Kind::Cos, g);
}
Expr exp(const Expr& g) {
  if (g.isConstant()) return Expr(std::exp(g.poly()->constantValue()));
  return unary(Kind::Exp, g);
}
Expr posPow(const Expr& g, int m) {
  if (m < 0) throw std::invalid_argument("posPow: negative power");
  if (g.isConstant()) {
    double v = g.poly()->constantValue();
    return Expr(v > 0 ? std::pow(v, m) : 0.0);
  }
  auto n = makeNode(Kind::PosPow);
  n->kids.push_back(g);
  n->power = m;
  return Expr(std::shared_ptr<const ExprNode>(std::move(n)));
}
Expr abs(const Expr& g) {
  if (g.isConstant()) return Expr(std::abs(g.poly()->constantValue()));
  return unary(Kind::Abs, g);
}
Expr sign(const Expr& g) {
  if (g.isConstant()) {
    double v = g.poly()->constantValue();
    return Expr(v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0));
  }
  return unary(Kind::Sign, g);
}

}  // namespace chaincalc

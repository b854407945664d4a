#pragma once
// Scalar expressions in x_0..x_{n-1} with exact symbolic partial derivatives
// and interval enclosures. Coefficients of forms, vector fields and maps are
// all built from these.

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace chaincalc {

struct Interval {
  double lo = 0, hi = 0;
  Interval() = default;
  Interval(double v) : lo(v), hi(v) {}
  Interval(double a, double b) : lo(a), hi(b) {}
  double mag() const;
  double width() const { return hi - lo; }
};
Interval operator+(Interval a, Interval b);
Interval operator-(Interval a, Interval b);
Interval operator*(Interval a, Interval b);
Interval ipow(Interval a, int e);
Interval isin(Interval a);
Interval icos(Interval a);
Interval iexp(Interval a);

// Sparse multivariate polynomial; exponents stored row-major, one row per
// term, rows sorted lexicographically.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(int nvars) : n_(nvars) {}
  static Polynomial constant(double c, int nvars = 0);
  static Polynomial variable(int i, int nvars);
  static Polynomial monomial(std::vector<int> exps, double c);

  int nvars() const { return n_; }
  size_t termCount() const { return coeffs_.size(); }
  const int* exps(size_t t) const { return exps_.data() + t * n_; }
  double coeff(size_t t) const { return coeffs_[t]; }
  bool isZero() const { return coeffs_.empty(); }
  bool isConstant() const;
  double constantValue() const;
  int degree() const;

  Polynomial widened(int nvars) const;
  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial scaled(double s) const;
  Polynomial partial(int i) const;
  double eval(const double* x) const;
  Interval bound(std::span<const Interval> box) const;

  void addTerm(const int* exps, double c);  // unsorted append; call normalize()
  void normalize();

 private:
  int n_ = 0;
  std::vector<int> exps_;
  std::vector<double> coeffs_;
};

class Expr;

struct ExprNode {
  enum class Kind { Poly, Sum, Prod, Sin, Cos, Exp, PosPow, Abs, Sign, Opaque };
  Kind kind;
  Polynomial poly;              // Poly
  std::vector<Expr> kids;       // Sum, Prod, unary argument in kids[0]
  int power = 0;                // PosPow
  std::function<double(const double*)> fn;  // Opaque
  int nvars = 0;                // Opaque
  std::string label;            // Opaque
};

class Expr {
 public:
  Expr();  // zero
  Expr(double c);
  explicit Expr(Polynomial p);
  explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}

  static Expr var(int i, int nvars);
  // Black-box function; derivatives by Richardson-refined central differences.
  static Expr opaque(std::function<double(const double*)> f, int nvars, std::string label = "opaque");

  const ExprNode& node() const { return *node_; }
  bool isZero() const;
  bool isPoly() const { return node_->kind == ExprNode::Kind::Poly; }
  bool isConstant() const { return isPoly() && node_->poly.isConstant(); }
  const Polynomial* poly() const { return isPoly() ? &node_->poly : nullptr; }
  // All subexpressions certified (no black boxes).
  bool certifiable() const;

  double eval(const double* x) const;
  double eval(std::span<const double> x) const { return eval(x.data()); }
  Expr partial(int i) const;
  Interval bound(std::span<const Interval> box) const;
  // x_i -> subs[i]
  Expr substitute(std::span<const Expr> subs) const;
  std::string str() const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  Expr operator-() const;

 private:
  std::shared_ptr<const ExprNode> node_;
};

Expr sin(const Expr& g);
Expr cos(const Expr& g);
Expr exp(const Expr& g);
// max(g, 0)^m; m = 0 is the indicator of {g > 0}.
Expr posPow(const Expr& g, int m);
Expr abs(const Expr& g);
Expr sign(const Expr& g);
Expr sum(std::vector<Expr> terms);
Expr product(std::vector<Expr> factors);

}  // namespace chaincalc

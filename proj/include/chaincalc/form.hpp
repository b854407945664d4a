#pragma once
// Differential forms with exact iterated directional derivatives, and the
// form-side operators. Every operator is written as the dual of a chain-side
// map so that the pairing identities hold up to round-off.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "chaincalc/chain.hpp"
#include "chaincalc/expr.hpp"

namespace chaincalc {

constexpr int kSmooth = 1 << 20;  // order of forms with unlimited derivatives

struct Box {
  Vec lo, hi;
  static Box unbounded(int n);
  static Box around(const DiracChain& a, double pad = 0.0);
  std::vector<Interval> intervals() const;
  bool finite() const;
};

class Form {
 public:
  Form() = default;
  Form(int dim, int grade, std::vector<std::pair<Blade, Expr>> coeffs, int order = kSmooth);

  static Form zero(int dim, int grade);
  static Form constant(const KVector& dual);  // sum c_I dx_I with c taken from a k-vector
  static Form scalar(int dim, Expr f, int order = kSmooth);
  // c * x^exps dx_idx, the basic polynomial term
  static Form monomial(std::vector<int> idx, std::vector<int> exps, double c);

  int dim() const { return dim_; }
  int grade() const { return grade_; }
  int order() const { return order_; }
  const std::vector<std::pair<Blade, Expr>>& coeffs() const { return coeffs_; }
  const Expr& coeff(Blade b) const;
  bool certifiable() const;

  // Region on which the form is defined and certified bounds are taken.
  const std::optional<Box>& domain() const { return domain_; }
  Form withDomain(Box b) const;
  Form withOrder(int r) const;

  // L_{e_mono} omega(p; alpha); mono lists 1-based indices (a multiset).
  double evalMono(std::span<const double> p, std::span<const int> mono, const KVector& alpha) const;
  // omega(p; alpha)
  double eval(std::span<const double> p, const KVector& alpha) const;
  // Coefficients of L_{e_mono} omega; cached.
  const std::vector<std::pair<Blade, Expr>>& derivative(std::span<const int> mono) const;

  Form operator+(const Form& o) const;
  Form operator-(const Form& o) const;
  Form scaled(double s) const;
  Form operator-() const { return scaled(-1.0); }

 private:
  int dim_ = 0, grade_ = 0, order_ = kSmooth;
  std::vector<std::pair<Blade, Expr>> coeffs_;  // sorted by blade, no zero exprs
  std::optional<Box> domain_;
  struct Cache {
    std::mutex mu;
    std::map<std::vector<int>, std::unique_ptr<std::vector<std::pair<Blade, Expr>>>> table;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

using ScalarField = Form;

struct VectorFieldB {
  int dim = 0;
  std::vector<Expr> comps;
  std::vector<std::vector<Expr>> jac;  // jac[i][j] = d V_i / d x_j

  VectorFieldB() = default;
  explicit VectorFieldB(std::vector<Expr> components);
  static VectorFieldB constant(const Vec& v);
  Vec at(std::span<const double> p) const;
  void at(const double* p, double* out) const;
  // row-major n x n
  void jacobianAt(const double* p, double* out) const;
  ScalarField component(int i) const;
  bool isConstant() const;
};

VectorFieldB bracket(const VectorFieldB& a, const VectorFieldB& b);  // DV_b V_a - DV_a V_b

struct SmoothMap {
  int n = 0, m = 0;  // R^n -> R^m
  std::vector<Expr> coords;
  std::vector<std::vector<Expr>> jac;  // m x n

  SmoothMap() = default;
  SmoothMap(int domainDim, std::vector<Expr> coordinates);
  static SmoothMap identity(int n);
  static SmoothMap linear(int m, int n, std::vector<double> M, std::vector<double> b = {});
  Point at(std::span<const double> p) const;
  std::vector<double> jacobianAt(std::span<const double> p) const;  // row-major m x n
  bool isAffine() const;
  SmoothMap compose(const SmoothMap& inner) const;  // this o inner
};

double evalElement(const Form& w, const ChainElement& e);
double evalChain(const Form& w, const DiracChain& a);

Form exteriorD(const Form& w);
Form hodge(const Form& w);
enum class FieldAction { Interior, FlatWedge, Lie };
Form interiorLie(const VectorFieldB& v, const Form& w, FieldAction kind);
Form interior(const VectorFieldB& v, const Form& w);
Form flatWedge(const VectorFieldB& v, const Form& w);
Form lie(const VectorFieldB& v, const Form& w);
Form multiplyForm(const ScalarField& f, const Form& w);
Form pullback(const SmoothMap& F, const Form& w);
Form dirExteriorD(const Vec& v, const Form& w);  // v-flat ^ L_v omega
Form codifferential(const Form& w);              // star d star
Form laplacian(const Form& w);                   // d delta + delta d
Form wedgeForms(const Form& a, const Form& b);

// Coefficient of vol in dx_I ^ *dx_I for each basis blade I. The usual
// convention w ^ *w = |w|^2 vol makes every sign +1; the star defined through
// perp gives (-1)^{(n-k)(k+1)}.
struct StarSignRow {
  std::vector<int> idx;
  int sign;
};
std::vector<StarSignRow> hodgeConventionTable(int n);

// Upper bounds of |omega|_{B^j}, j = 0..r, over the form's domain (or `box`).
std::vector<double> certifiedSeminorms(const Form& w, int r, std::optional<Box> box = std::nullopt);
double certifiedNorm(const Form& w, int r, std::optional<Box> box = std::nullopt);

// Built-in family payloads (poly, trig, bump) and maps/fields.
Form formFromJson(const nlohmann::json& j, int dimHint = 0);
Expr exprFromJson(const nlohmann::json& j, int dimHint = 0);
VectorFieldB fieldFromJson(const nlohmann::json& j);
SmoothMap mapFromJson(const nlohmann::json& j);

// max(1 - |x - c|^2 / r^2, 0)^m
Expr bump(const Vec& center, double radius, int m);

}  // namespace chaincalc

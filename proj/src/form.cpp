#include "chaincalc/form.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace chaincalc {

namespace {

Blade fullMask(int n) { return n >= 32 ? ~Blade{0} : ((Blade{1} << n) - 1); }

// All blades of grade k in dimension n, in lexicographic order.
std::vector<Blade> bladesOfGrade(int n, int k) {
  std::vector<Blade> out;
  for (Blade b = 0; b <= fullMask(n); ++b) {
    if (bladeGrade(b) == k) out.push_back(b);
    if (b == fullMask(n)) break;
  }
  std::sort(out.begin(), out.end(), bladeLess);
  return out;
}

int minOrder(int a, int b) { return std::min(a, b); }
int reduceOrder(int r, int by) { return r >= kSmooth ? kSmooth : r - by; }

using Coeffs = std::vector<std::pair<Blade, Expr>>;

struct Accum {
  std::map<Blade, std::vector<Expr>, bool (*)(Blade, Blade)> m{bladeLess};
  void add(Blade b, Expr e) {
    if (!e.isZero()) m[b].push_back(std::move(e));
  }
  Coeffs done() {
    Coeffs out;
    for (auto& [b, v] : m) {
      Expr s = sum(std::move(v));
      if (!s.isZero()) out.emplace_back(b, std::move(s));
    }
    return out;
  }
};

void rejectUnknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + ": expected an object");
  for (auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto* k : keys) ok = ok || key == k;
    if (!ok) throw std::invalid_argument(std::string(what) + ": unknown key '" + key + "'");
  }
}

}  // namespace

// ---------------------------------------------------------------- Box

Box Box::unbounded(int n) {
  double inf = std::numeric_limits<double>::infinity();
  return {Vec(n, -inf), Vec(n, inf)};
}

Box Box::around(const DiracChain& a, double pad) {
  int n = a.dim();
  Box b{Vec(n, std::numeric_limits<double>::infinity()), Vec(n, -std::numeric_limits<double>::infinity())};
  for (auto& e : a.elements())
    for (int i = 0; i < n; ++i) {
      b.lo[i] = std::min(b.lo[i], e.point[i]);
      b.hi[i] = std::max(b.hi[i], e.point[i]);
    }
  if (a.empty()) b.lo.assign(n, 0.0), b.hi.assign(n, 0.0);
  for (int i = 0; i < n; ++i) b.lo[i] -= pad, b.hi[i] += pad;
  return b;
}

std::vector<Interval> Box::intervals() const {
  std::vector<Interval> v;
  for (size_t i = 0; i < lo.size(); ++i) v.emplace_back(lo[i], hi[i]);
  return v;
}

bool Box::finite() const {
  for (size_t i = 0; i < lo.size(); ++i)
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i])) return false;
  return true;
}

// ---------------------------------------------------------------- Form

Form::Form(int dim, int grade, Coeffs coeffs, int order) : dim_(dim), grade_(grade), order_(order) {
  if (dim < 0 || dim > kMaxDim) throw DimensionError("Form: unsupported dimension");
  if (grade < -1 || grade > dim + 1) throw std::invalid_argument("Form: grade out of range");
  Accum acc;
  for (auto& [b, e] : coeffs) {
    if (bladeGrade(b) != grade) throw std::invalid_argument("Form: blade grade mismatch");
    if (b & ~fullMask(dim)) throw std::invalid_argument("Form: blade index exceeds dimension");
    acc.add(b, e);
  }
  coeffs_ = acc.done();
  if ((grade < 0 || grade > dim) && !coeffs_.empty())
    throw std::invalid_argument("Form: grade out of range");
}

Form Form::zero(int dim, int grade) { return Form(dim, grade, {}); }

Form Form::constant(const KVector& dual) {
  Coeffs c;
  for (auto& t : dual.terms()) c.emplace_back(t.blade, Expr(t.c));
  return Form(dual.dim(), dual.grade(), std::move(c));
}

Form Form::scalar(int dim, Expr f, int order) { return Form(dim, 0, {{0, std::move(f)}}, order); }

Form Form::monomial(std::vector<int> idx, std::vector<int> exps, double c) {
  int n = static_cast<int>(exps.size());
  Blade b = bladeFromIndices(idx);
  int inv = 0;
  for (size_t i = 0; i < idx.size(); ++i)
    for (size_t j = i + 1; j < idx.size(); ++j) inv += idx[i] > idx[j];
  for (int i : idx)
    if (i > n) throw std::invalid_argument("Form::monomial: index exceeds dimension");
  return Form(n, static_cast<int>(idx.size()), {{b, Expr(Polynomial::monomial(exps, (inv & 1) ? -c : c))}});
}

const Expr& Form::coeff(Blade b) const {
  static const Expr zero(0.0);
  for (auto& [bb, e] : coeffs_)
    if (bb == b) return e;
  return zero;
}

bool Form::certifiable() const {
  for (auto& [b, e] : coeffs_)
    if (!e.certifiable()) return false;
  return true;
}

Form Form::withDomain(Box b) const {
  Form f = *this;
  f.domain_ = std::move(b);
  return f;
}

Form Form::withOrder(int r) const {
  Form f = *this;
  f.order_ = r;
  return f;
}

const Coeffs& Form::derivative(std::span<const int> mono) const {
  if (mono.empty()) return coeffs_;
  std::vector<int> key(mono.begin(), mono.end());
  std::sort(key.begin(), key.end());
  std::lock_guard<std::mutex> lock(cache_->mu);
  // Walk up prefixes so each level is computed once.
  const Coeffs* prev = &coeffs_;
  std::vector<int> prefix;
  for (int i : key) {
    if (i < 1 || i > dim_) throw std::invalid_argument("Form::derivative: index out of range");
    prefix.push_back(i);
    auto it = cache_->table.find(prefix);
    if (it == cache_->table.end()) {
      auto d = std::make_unique<Coeffs>();
      for (auto& [b, e] : *prev) {
        Expr de = e.partial(i - 1);
        if (!de.isZero()) d->emplace_back(b, std::move(de));
      }
      it = cache_->table.emplace(prefix, std::move(d)).first;
    }
    prev = it->second.get();
  }
  return *prev;
}

double Form::evalMono(std::span<const double> p, std::span<const int> mono, const KVector& alpha) const {
  if (alpha.grade() != grade_) throw std::invalid_argument("Form: grade mismatch");
  if (static_cast<int>(mono.size()) > order_) throw std::invalid_argument("Form: insufficient smoothness order");
  if (static_cast<int>(p.size()) != dim_) throw DimensionError("Form: dimension mismatch");
  const Coeffs& d = derivative(mono);
  double s = 0;
  auto it = d.begin();
  for (auto& t : alpha.terms()) {
    while (it != d.end() && bladeLess(it->first, t.blade)) ++it;
    if (it == d.end()) break;
    if (it->first == t.blade) s += t.c * it->second.eval(p.data());
  }
  return s;
}

double Form::eval(std::span<const double> p, const KVector& alpha) const { return evalMono(p, {}, alpha); }

Form Form::operator+(const Form& o) const {
  if (dim_ != o.dim_ || grade_ != o.grade_) throw std::invalid_argument("Form +: shape mismatch");
  Coeffs c = coeffs_;
  c.insert(c.end(), o.coeffs_.begin(), o.coeffs_.end());
  Form f(dim_, grade_, std::move(c), minOrder(order_, o.order_));
  if (domain_) f.domain_ = domain_;
  return f;
}

Form Form::operator-(const Form& o) const { return *this + o.scaled(-1.0); }

Form Form::scaled(double s) const {
  Coeffs c;
  for (auto& [b, e] : coeffs_) c.emplace_back(b, Expr(s) * e);
  Form f(dim_, grade_, std::move(c), order_);
  f.domain_ = domain_;
  return f;
}

// ---------------------------------------------------------------- fields and maps

VectorFieldB::VectorFieldB(std::vector<Expr> components) : dim(static_cast<int>(components.size())), comps(std::move(components)) {
  jac.resize(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) jac[i].push_back(comps[i].partial(j));
}

VectorFieldB VectorFieldB::constant(const Vec& v) {
  std::vector<Expr> c;
  for (double x : v) c.emplace_back(x);
  return VectorFieldB(std::move(c));
}

Vec VectorFieldB::at(std::span<const double> p) const {
  Vec out(dim);
  at(p.data(), out.data());
  return out;
}

void VectorFieldB::at(const double* p, double* out) const {
  for (int i = 0; i < dim; ++i) out[i] = comps[i].eval(p);
}

void VectorFieldB::jacobianAt(const double* p, double* out) const {
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) out[i * dim + j] = jac[i][j].eval(p);
}

ScalarField VectorFieldB::component(int i) const { return Form::scalar(dim, comps.at(i)); }

bool VectorFieldB::isConstant() const {
  for (auto& c : comps)
    if (!c.isConstant()) return false;
  return true;
}

VectorFieldB bracket(const VectorFieldB& a, const VectorFieldB& b) {
  if (a.dim != b.dim) throw DimensionError("bracket: dimension mismatch");
  std::vector<Expr> c;
  for (int i = 0; i < a.dim; ++i) {
    std::vector<Expr> t;
    for (int j = 0; j < a.dim; ++j) {
      t.push_back(b.jac[i][j] * a.comps[j]);
      t.push_back(-(a.jac[i][j] * b.comps[j]));
    }
    c.push_back(sum(std::move(t)));
  }
  return VectorFieldB(std::move(c));
}

SmoothMap::SmoothMap(int domainDim, std::vector<Expr> coordinates)
    : n(domainDim), m(static_cast<int>(coordinates.size())), coords(std::move(coordinates)) {
  jac.resize(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) jac[i].push_back(coords[i].partial(j));
}

SmoothMap SmoothMap::identity(int n) {
  std::vector<Expr> c;
  for (int i = 0; i < n; ++i) c.push_back(Expr::var(i, n));
  return SmoothMap(n, std::move(c));
}

SmoothMap SmoothMap::linear(int m, int n, std::vector<double> M, std::vector<double> b) {
  if (static_cast<int>(M.size()) != m * n) throw DimensionError("SmoothMap::linear: matrix shape");
  if (!b.empty() && static_cast<int>(b.size()) != m) throw DimensionError("SmoothMap::linear: offset shape");
  std::vector<Expr> c;
  for (int i = 0; i < m; ++i) {
    Polynomial p = Polynomial::constant(b.empty() ? 0.0 : b[i], n);
    for (int j = 0; j < n; ++j) p = p + Polynomial::variable(j, n).scaled(M[i * n + j]);
    c.emplace_back(std::move(p));
  }
  return SmoothMap(n, std::move(c));
}

Point SmoothMap::at(std::span<const double> p) const {
  if (static_cast<int>(p.size()) != n) throw DimensionError("SmoothMap: dimension mismatch");
  Point q(m);
  for (int i = 0; i < m; ++i) q[i] = coords[i].eval(p.data());
  return q;
}

std::vector<double> SmoothMap::jacobianAt(std::span<const double> p) const {
  std::vector<double> J(m * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) J[i * n + j] = jac[i][j].eval(p.data());
  return J;
}

bool SmoothMap::isAffine() const {
  for (auto& c : coords) {
    auto* p = c.poly();
    if (!p || p->degree() > 1) return false;
  }
  return true;
}

SmoothMap SmoothMap::compose(const SmoothMap& inner) const {
  if (inner.m != n) throw DimensionError("SmoothMap::compose: dimension mismatch");
  std::vector<Expr> c;
  for (auto& e : coords) c.push_back(e.substitute(inner.coords));
  return SmoothMap(inner.n, std::move(c));
}

// ---------------------------------------------------------------- pairing

double evalElement(const Form& w, const ChainElement& e) {
  if (e.grade() != w.grade()) throw std::invalid_argument("evalElement: grade mismatch");
  if (e.order() > w.order()) throw std::invalid_argument("evalElement: insufficient smoothness order");
  if (auto& b = e.sym.basisIndices()) return w.evalMono(e.point, *b, e.kv);
  double s = 0;
  for (auto& [mono, c] : e.sym.expand()) s += c * w.evalMono(e.point, mono, e.kv);
  return s;
}

double evalChain(const Form& w, const DiracChain& a) {
  // Neumaier summation; the summation order is the canonical element order.
  double s = 0, comp = 0;
  for (auto& e : a.elements()) {
    double v = evalElement(w, e);
    double t = s + v;
    if (std::abs(s) >= std::abs(v)) comp += (s - t) + v;
    else comp += (v - t) + s;
    s = t;
  }
  return s + comp;
}

// ---------------------------------------------------------------- operators

Form exteriorD(const Form& w) {
  if (w.order() < 1) throw std::invalid_argument("exteriorD: smoothness order exhausted");
  int n = w.dim(), k = w.grade();
  if (k >= n) return Form::zero(n, k + 1).withOrder(reduceOrder(w.order(), 1));
  Accum acc;
  for (auto& [I, c] : w.coeffs())
    for (int i = 0; i < n; ++i) {
      Blade bit = Blade{1} << i;
      if (I & bit) continue;
      Blade J = I | bit;
      int pos = bladeGrade(J & (bit - 1));
      Expr d = c.partial(i);
      acc.add(J, (pos & 1) ? -d : d);
    }
  Form f(n, k + 1, acc.done(), reduceOrder(w.order(), 1));
  return w.domain() ? f.withDomain(*w.domain()) : f;
}

Form hodge(const Form& w) {
  int n = w.dim(), k = w.grade();
  if (k < 0 || k > n) return Form::zero(n, n - k).withOrder(w.order());
  Blade full = fullMask(n);
  Coeffs out;
  double gs = ((n - k) & 1) ? -1.0 : 1.0;
  for (auto& [I, c] : w.coeffs()) {
    Blade J = full & ~I;
    double s = gs * wedgeSign(J, I);
    out.emplace_back(J, s < 0 ? -c : c);
  }
  Form f(n, n - k, std::move(out), w.order());
  return w.domain() ? f.withDomain(*w.domain()) : f;
}

std::vector<StarSignRow> hodgeConventionTable(int n) {
  std::vector<StarSignRow> rows;
  Blade full = fullMask(n);
  Point origin(n, 0.0);
  for (Blade I = 0; I <= full; ++I) {
    Blade J = full & ~I;
    double c = evalElement(hodge(Form::constant(KVector::blade(n, I))), ChainElement(origin, KVector::blade(n, J)));
    double s = c * wedgeSign(I, J);
    rows.push_back({bladeIndices(I), s > 0.5 ? 1 : (s < -0.5 ? -1 : 0)});
  }
  return rows;
}

Form interior(const VectorFieldB& v, const Form& w) {
  int n = w.dim(), k = w.grade();
  if (v.dim != n) throw DimensionError("interior: dimension mismatch");
  if (k <= 0) return Form::zero(n, k - 1).withOrder(w.order());
  Accum acc;
  for (auto& [I, c] : w.coeffs())
    for (Blade bits = I; bits; bits &= bits - 1) {
      int i = __builtin_ctz(bits);
      Blade bit = Blade{1} << i;
      Blade J = I & ~bit;
      Expr t = v.comps[i] * c;
      acc.add(J, wedgeSign(bit, J) < 0 ? -t : t);
    }
  Form f(n, k - 1, acc.done(), w.order());
  return w.domain() ? f.withDomain(*w.domain()) : f;
}

Form flatWedge(const VectorFieldB& v, const Form& w) {
  int n = w.dim(), k = w.grade();
  if (v.dim != n) throw DimensionError("flatWedge: dimension mismatch");
  if (k >= n) return Form::zero(n, k + 1).withOrder(w.order());
  Accum acc;
  for (auto& [I, c] : w.coeffs())
    for (int i = 0; i < n; ++i) {
      Blade bit = Blade{1} << i;
      if (I & bit) continue;
      Blade J = I | bit;
      int pos = bladeGrade(J & (bit - 1));
      Expr t = v.comps[i] * c;
      acc.add(J, (pos & 1) ? -t : t);
    }
  Form f(n, k + 1, acc.done(), w.order());
  return w.domain() ? f.withDomain(*w.domain()) : f;
}

Form lie(const VectorFieldB& v, const Form& w) {
  if (w.order() < 1) throw std::invalid_argument("lie: smoothness order exhausted");
  Form a = interior(v, exteriorD(w));
  if (w.grade() == 0) return a;
  return a + exteriorD(interior(v, w).withOrder(w.order()));
}

Form interiorLie(const VectorFieldB& v, const Form& w, FieldAction kind) {
  switch (kind) {
    case FieldAction::Interior: return interior(v, w);
    case FieldAction::FlatWedge: return flatWedge(v, w);
    case FieldAction::Lie: return lie(v, w);
  }
  return w;
}

Form multiplyForm(const ScalarField& f, const Form& w) {
  if (f.grade() != 0) throw std::invalid_argument("multiplyForm: expected a 0-form");
  if (f.dim() != w.dim()) throw DimensionError("multiplyForm: dimension mismatch");
  const Expr& g = f.coeff(0);
  Coeffs out;
  for (auto& [b, c] : w.coeffs()) out.emplace_back(b, g * c);
  Form r(w.dim(), w.grade(), std::move(out), minOrder(f.order(), w.order()));
  return w.domain() ? r.withDomain(*w.domain()) : r;
}

namespace {

// det of the minor of a row-major expression matrix.
Expr minorDet(const std::vector<std::vector<Expr>>& M, const std::vector<int>& rows, const std::vector<int>& cols) {
  size_t k = rows.size();
  if (k == 0) return Expr(1.0);
  if (k == 1) return M[rows[0]][cols[0]];
  std::vector<Expr> terms;
  for (size_t c = 0; c < k; ++c) {
    const Expr& a = M[rows[0]][cols[c]];
    if (a.isZero()) continue;
    std::vector<int> r2(rows.begin() + 1, rows.end());
    std::vector<int> c2;
    for (size_t j = 0; j < k; ++j)
      if (j != c) c2.push_back(cols[j]);
    Expr t = a * minorDet(M, r2, c2);
    terms.push_back((c & 1) ? -t : t);
  }
  return sum(std::move(terms));
}

}  // namespace

Form pullback(const SmoothMap& F, const Form& w) {
  if (F.m != w.dim()) throw DimensionError("pullback: map codomain does not match the form");
  int k = w.grade();
  if (k < 0 || k > F.n) return Form::zero(F.n, k);
  Accum acc;
  auto targets = bladesOfGrade(F.n, k);
  for (auto& [I, c] : w.coeffs()) {
    Expr cf = c.substitute(F.coords);
    if (cf.isZero()) continue;
    std::vector<int> rows;
    for (int i : bladeIndices(I)) rows.push_back(i - 1);
    for (Blade J : targets) {
      std::vector<int> cols;
      for (int j : bladeIndices(J)) cols.push_back(j - 1);
      Expr det = minorDet(F.jac, rows, cols);
      if (!det.isZero()) acc.add(J, cf * det);
    }
  }
  return Form(F.n, k, acc.done(), w.order());
}

Form dirExteriorD(const Vec& v, const Form& w) {
  if (static_cast<int>(v.size()) != w.dim()) throw DimensionError("dirExteriorD: dimension mismatch");
  if (w.order() < 1) throw std::invalid_argument("dirExteriorD: smoothness order exhausted");
  Coeffs lv;
  for (auto& [b, c] : w.coeffs()) {
    std::vector<Expr> t;
    for (int i = 0; i < w.dim(); ++i)
      if (v[i] != 0.0) t.push_back(Expr(v[i]) * c.partial(i));
    lv.emplace_back(b, sum(std::move(t)));
  }
  Form L(w.dim(), w.grade(), std::move(lv), reduceOrder(w.order(), 1));
  return flatWedge(VectorFieldB::constant(v), L);
}

Form codifferential(const Form& w) { return hodge(exteriorD(hodge(w))); }

Form laplacian(const Form& w) {
  Form a = codifferential(exteriorD(w));
  Form b = exteriorD(codifferential(w));
  if (a.grade() != b.grade()) throw std::logic_error("laplacian: grade bookkeeping");
  return a + b;
}

Form wedgeForms(const Form& a, const Form& b) {
  if (a.dim() != b.dim()) throw DimensionError("wedgeForms: dimension mismatch");
  int g = a.grade() + b.grade();
  if (g > a.dim()) return Form::zero(a.dim(), a.dim() + 1);
  Accum acc;
  for (auto& [I, c] : a.coeffs())
    for (auto& [J, d] : b.coeffs()) {
      int s = wedgeSign(I, J);
      if (s) acc.add(I | J, s > 0 ? c * d : -(c * d));
    }
  return Form(a.dim(), g, acc.done(), minOrder(a.order(), b.order()));
}

// ---------------------------------------------------------------- certified bounds

std::vector<double> certifiedSeminorms(const Form& w, int r, std::optional<Box> box) {
  if (!w.certifiable()) throw std::runtime_error("certifiedNorm: form has no certified bounds");
  if (r > w.order()) throw std::invalid_argument("certifiedNorm: order exceeds the form's smoothness");
  Box b = box ? *box : (w.domain() ? *w.domain() : Box::unbounded(w.dim()));
  auto iv = b.intervals();
  int n = w.dim();
  std::vector<double> out;
  for (int j = 0; j <= r; ++j) {
    double acc = 0;
    // multisets of size j over {1..n}
    std::vector<int> mono(j, 1);
    while (true) {
      // number of ordered tuples with this multiset
      double mult = std::tgamma(j + 1.0);
      for (int i = 1, run = 0; i <= n; ++i, run = 0) {
        for (int x : mono) run += (x == i);
        mult /= std::tgamma(run + 1.0);
      }
      for (auto& [blade, e] : w.derivative(mono)) {
        double s = e.bound(iv).mag();
        acc += mult * s * s;
      }
      int pos = j - 1;
      while (pos >= 0 && mono[pos] == n) --pos;
      if (pos < 0) break;
      int v = mono[pos] + 1;
      for (int q = pos; q < j; ++q) mono[q] = v;
    }
    out.push_back(std::sqrt(acc) * (1 + 1e-15));
  }
  return out;
}

double certifiedNorm(const Form& w, int r, std::optional<Box> box) {
  auto s = certifiedSeminorms(w, r, std::move(box));
  return *std::max_element(s.begin(), s.end());
}

// ---------------------------------------------------------------- JSON payloads

Expr bump(const Vec& center, double radius, int m) {
  int n = static_cast<int>(center.size());
  Polynomial g = Polynomial::constant(1.0, n);
  for (int i = 0; i < n; ++i) {
    Polynomial d = Polynomial::variable(i, n) + Polynomial::constant(-center[i], n);
    g = g + (d * d).scaled(-1.0 / (radius * radius));
  }
  return posPow(Expr(std::move(g)), m);
}

namespace {

Expr trigTerm(const std::string& fn, const Vec& freq, double phase) {
  int n = static_cast<int>(freq.size());
  Polynomial arg = Polynomial::constant(phase, n);
  for (int i = 0; i < n; ++i) arg = arg + Polynomial::variable(i, n).scaled(freq[i]);
  Expr a(std::move(arg));
  if (fn == "sin") return sin(a);
  if (fn == "cos") return cos(a);
  if (fn == "exp") return exp(a);
  throw std::invalid_argument("trig term: unknown function '" + fn + "'");
}

std::vector<int> readIdx(const nlohmann::json& t) {
  return t.contains("idx") ? t.at("idx").get<std::vector<int>>() : std::vector<int>{};
}

Blade signedBlade(const std::vector<int>& idx, double& c) {
  int inv = 0;
  for (size_t i = 0; i < idx.size(); ++i)
    for (size_t j = i + 1; j < idx.size(); ++j) inv += idx[i] > idx[j];
  if (inv & 1) c = -c;
  return bladeFromIndices(idx);
}

}  // namespace

Expr exprFromJson(const nlohmann::json& j, int dimHint) {
  if (j.is_number()) return Expr(Polynomial::constant(j.get<double>(), dimHint));
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s.size() >= 2 && s[0] == 'x') return Expr::var(std::stoi(s.substr(1)) - 1, dimHint);
    throw std::invalid_argument("expression: unknown symbol '" + s + "'");
  }
  if (j.contains("poly")) {
    rejectUnknown(j, {"poly"}, "expression");
    Polynomial p(dimHint);
    for (auto& t : j.at("poly")) {
      rejectUnknown(t, {"exps", "c"}, "polynomial term");
      p = p + Polynomial::monomial(t.at("exps").get<std::vector<int>>(), t.value("c", 1.0));
    }
    return Expr(std::move(p));
  }
  if (j.contains("fn")) {
    rejectUnknown(j, {"fn", "freq", "phase", "c"}, "expression");
    return Expr(j.value("c", 1.0)) *
           trigTerm(j.at("fn").get<std::string>(), j.at("freq").get<Vec>(), j.value("phase", 0.0));
  }
  if (j.contains("bump")) {
    rejectUnknown(j, {"bump", "c"}, "expression");
    auto& b = j.at("bump");
    rejectUnknown(b, {"center", "radius", "power"}, "bump");
    return Expr(j.value("c", 1.0)) *
           bump(b.at("center").get<Vec>(), b.at("radius").get<double>(), b.at("power").get<int>());
  }
  if (j.contains("sum") || j.contains("prod")) {
    bool isSum = j.contains("sum");
    rejectUnknown(j, {isSum ? "sum" : "prod"}, "expression");
    std::vector<Expr> parts;
    for (auto& t : j.at(isSum ? "sum" : "prod")) parts.push_back(exprFromJson(t, dimHint));
    return isSum ? sum(std::move(parts)) : product(std::move(parts));
  }
  throw std::invalid_argument("expression: unrecognized payload");
}

Form formFromJson(const nlohmann::json& j, int dimHint) {
  std::string fam = j.at("family").get<std::string>();
  Coeffs coeffs;
  int n = j.value("n", dimHint);
  int grade = -1;
  auto noteGrade = [&](int g) {
    if (grade >= 0 && g != grade) throw std::invalid_argument("form: mixed grades in terms");
    grade = g;
  };
  if (fam == "poly") {
    rejectUnknown(j, {"family", "grade", "terms", "n", "domain"}, "poly form");
    for (auto& t : j.at("terms")) {
      rejectUnknown(t, {"idx", "monomial", "c"}, "poly term");
      auto idx = readIdx(t);
      double c = t.value("c", 1.0);
      std::vector<int> exps;
      if (t.contains("monomial")) {
        rejectUnknown(t.at("monomial"), {"exps"}, "monomial");
        exps = t.at("monomial").at("exps").get<std::vector<int>>();
      }
      n = std::max(n, static_cast<int>(exps.size()));
      for (int i : idx) n = std::max(n, i);
      noteGrade(static_cast<int>(idx.size()));
      Blade b = signedBlade(idx, c);
      exps.resize(n, 0);
      coeffs.emplace_back(b, Expr(Polynomial::monomial(exps, c)));
    }
  } else if (fam == "trig") {
    rejectUnknown(j, {"family", "grade", "terms", "n", "domain"}, "trig form");
    for (auto& t : j.at("terms")) {
      rejectUnknown(t, {"idx", "fn", "freq", "phase", "c"}, "trig term");
      auto idx = readIdx(t);
      double c = t.value("c", 1.0);
      Vec freq = t.at("freq").get<Vec>();
      n = std::max(n, static_cast<int>(freq.size()));
      noteGrade(static_cast<int>(idx.size()));
      Blade b = signedBlade(idx, c);
      freq.resize(n, 0.0);
      coeffs.emplace_back(b, Expr(c) * trigTerm(t.at("fn").get<std::string>(), freq, t.value("phase", 0.0)));
    }
  } else if (fam == "bump") {
    rejectUnknown(j, {"family", "grade", "center", "radius", "power", "c", "idx", "n", "domain"}, "bump form");
    Vec center = j.at("center").get<Vec>();
    n = std::max(n, static_cast<int>(center.size()));
    auto idx = readIdx(j);
    double c = j.value("c", 1.0);
    noteGrade(static_cast<int>(idx.size()));
    Blade b = signedBlade(idx, c);
    int m = j.at("power").get<int>();
    coeffs.emplace_back(b, Expr(c) * bump(center, j.at("radius").get<double>(), m));
    Form f(n, grade, std::move(coeffs), std::max(0, m - 1));
    if (j.contains("domain")) f = f.withDomain({j.at("domain").at("lo").get<Vec>(), j.at("domain").at("hi").get<Vec>()});
    return f;
  } else if (fam == "expr") {
    rejectUnknown(j, {"family", "grade", "terms", "n", "domain"}, "expr form");
    for (auto& t : j.at("terms")) {
      rejectUnknown(t, {"idx", "f"}, "expr term");
      auto idx = readIdx(t);
      double c = 1.0;
      noteGrade(static_cast<int>(idx.size()));
      Blade b = signedBlade(idx, c);
      coeffs.emplace_back(b, Expr(c) * exprFromJson(t.at("f"), n));
    }
  } else {
    throw std::invalid_argument("form: unknown family '" + fam + "'");
  }
  if (j.contains("grade")) {
    int g = j.at("grade").get<int>();
    if (grade >= 0 && g != grade) throw std::invalid_argument("form: declared grade does not match terms");
    grade = g;
  }
  if (grade < 0) grade = 0;
  if (n <= 0) throw std::invalid_argument("form: cannot infer the ambient dimension");
  Form f(n, grade, std::move(coeffs));
  if (j.contains("domain")) {
    rejectUnknown(j.at("domain"), {"lo", "hi"}, "form domain");
    f = f.withDomain({j.at("domain").at("lo").get<Vec>(), j.at("domain").at("hi").get<Vec>()});
  }
  return f;
}

VectorFieldB fieldFromJson(const nlohmann::json& j) {
  if (j.contains("components")) {
    rejectUnknown(j, {"components"}, "field");
    int n = static_cast<int>(j.at("components").size());
    std::vector<Expr> c;
    for (auto& t : j.at("components")) c.push_back(exprFromJson(t, n));
    return VectorFieldB(std::move(c));
  }
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "rotation") {
    rejectUnknown(j, {"kind", "rate"}, "field");
    double w = j.value("rate", 1.0);
    return VectorFieldB({Expr(w) * -Expr::var(1, 2), Expr(w) * Expr::var(0, 2)});
  }
  if (kind == "dilation") {
    rejectUnknown(j, {"kind", "n", "rate"}, "field");
    int n = j.value("n", 2);
    double w = j.value("rate", 1.0);
    std::vector<Expr> c;
    for (int i = 0; i < n; ++i) c.push_back(Expr(w) * Expr::var(i, n));
    return VectorFieldB(std::move(c));
  }
  if (kind == "constant") {
    rejectUnknown(j, {"kind", "v"}, "field");
    return VectorFieldB::constant(j.at("v").get<Vec>());
  }
  throw std::invalid_argument("field: unknown kind '" + kind + "'");
}

SmoothMap mapFromJson(const nlohmann::json& j) {
  std::string kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
  if (kind == "circle") {
    if (!j.is_string()) rejectUnknown(j, {"kind", "radius"}, "map");
    double r = j.is_string() ? 1.0 : j.value("radius", 1.0);
    Expr t = Expr::var(0, 1);
    return SmoothMap(1, {Expr(r) * cos(t), Expr(r) * sin(t)});
  }
  if (kind == "fold") {
    if (!j.is_string()) rejectUnknown(j, {"kind"}, "map");
    return SmoothMap(1, {abs(Expr::var(0, 1))});
  }
  if (kind == "identity") {
    rejectUnknown(j, {"kind", "n"}, "map");
    return SmoothMap::identity(j.at("n").get<int>());
  }
  if (kind == "linear") {
    rejectUnknown(j, {"kind", "M", "b"}, "map");
    auto rows = j.at("M").get<std::vector<Vec>>();
    int m = static_cast<int>(rows.size());
    int n = m ? static_cast<int>(rows[0].size()) : 0;
    std::vector<double> M;
    for (auto& r : rows) {
      if (static_cast<int>(r.size()) != n) throw std::invalid_argument("map: ragged matrix");
      M.insert(M.end(), r.begin(), r.end());
    }
    return SmoothMap::linear(m, n, M, j.contains("b") ? j.at("b").get<Vec>() : Vec{});
  }
  if (kind == "expr") {
    rejectUnknown(j, {"kind", "n", "coords"}, "map");
    int n = j.at("n").get<int>();
    std::vector<Expr> c;
    for (auto& t : j.at("coords")) c.push_back(exprFromJson(t, n));
    return SmoothMap(n, std::move(c));
  }
  throw std::invalid_argument("map: unknown kind '" + kind + "'");
}

}  // namespace chaincalc

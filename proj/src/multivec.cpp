#include "chaincalc/multivec.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Dense>

namespace chaincalc {

namespace {

void requireSameDim(int a, int b, const char* what) {
  if (a != b)
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
}

Blade fullMask(int n) { return n >= 32 ? ~Blade{0} : ((Blade{1} << n) - 1); }

}  // namespace

int wedgeSign(Blade a, Blade b) {
  if (a & b) return 0;
  int inv = 0;
  for (Blade m = b; m; m &= m - 1) {
    int j = __builtin_ctz(m);
    inv += __builtin_popcount(a >> (j + 1));
  }
  return (inv & 1) ? -1 : 1;
}

std::vector<int> bladeIndices(Blade b) {
  std::vector<int> out;
  for (Blade m = b; m; m &= m - 1) out.push_back(__builtin_ctz(m) + 1);
  return out;
}

Blade bladeFromIndices(std::span<const int> idx) {
  Blade b = 0;
  for (int i : idx) {
    if (i < 1 || i > kMaxDim) throw std::invalid_argument("blade index out of range");
    Blade bit = Blade{1} << (i - 1);
    if (b & bit) throw std::invalid_argument("repeated blade index");
    b |= bit;
  }
  return b;
}

KVector::KVector(int dim, int grade) : dim_(dim), grade_(grade) {
  if (dim < 0 || dim > kMaxDim) throw DimensionError("KVector: unsupported dimension");
  if (grade < 0 || grade > dim) throw std::invalid_argument("KVector: grade out of range");
}

KVector KVector::scalar(int dim, double c) {
  KVector v(dim, 0);
  v.add(0, c);
  return v;
}

KVector KVector::blade(int dim, Blade b, double c) {
  KVector v(dim, bladeGrade(b));
  if (b & ~fullMask(dim)) throw std::invalid_argument("blade index exceeds dimension");
  v.add(b, c);
  return v;
}

KVector KVector::basis(int dim, std::initializer_list<int> idx, double c) {
  std::vector<int> ix(idx);
  Blade b = bladeFromIndices(ix);
  // sign of sorting the given order into increasing order
  int inv = 0;
  for (size_t i = 0; i < ix.size(); ++i)
    for (size_t j = i + 1; j < ix.size(); ++j) inv += ix[i] > ix[j];
  return blade(dim, b, (inv & 1) ? -c : c);
}

KVector KVector::vector(std::span<const double> v) {
  KVector out(static_cast<int>(v.size()), 1);
  for (size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) out.terms_.push_back({Blade{1} << i, v[i]});
  return out;
}

KVector KVector::volume(int dim) { return blade(dim, fullMask(dim), 1.0); }

double KVector::coeff(Blade b) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), b,
                             [](const BladeTerm& t, Blade x) { return bladeLess(t.blade, x); });
  return (it != terms_.end() && it->blade == b) ? it->c : 0.0;
}

double KVector::maxAbs() const {
  double m = 0;
  for (auto& t : terms_) m = std::max(m, std::abs(t.c));
  return m;
}

void KVector::prune(double threshold) {
  std::erase_if(terms_, [&](const BladeTerm& t) { return std::abs(t.c) <= threshold; });
}

void KVector::add(Blade b, double c) {
  if (bladeGrade(b) != grade_) throw std::invalid_argument("KVector::add: grade mismatch");
  auto it = std::lower_bound(terms_.begin(), terms_.end(), b,
                             [](const BladeTerm& t, Blade x) { return bladeLess(t.blade, x); });
  if (it != terms_.end() && it->blade == b) {
    it->c += c;
    if (it->c == 0.0) terms_.erase(it);
  } else if (c != 0.0) {
    terms_.insert(it, {b, c});
  }
}

KVector& KVector::operator+=(const KVector& o) {
  if (o.terms_.empty()) return *this;
  if (terms_.empty() && dim_ == 0 && grade_ == 0) {
    *this = o;
    return *this;
  }
  requireSameDim(dim_, o.dim_, "KVector +");
  if (grade_ != o.grade_) throw std::invalid_argument("KVector +: grade mismatch");
  std::vector<BladeTerm> out;
  out.reserve(terms_.size() + o.terms_.size());
  size_t i = 0, j = 0;
  while (i < terms_.size() || j < o.terms_.size()) {
    if (j == o.terms_.size() || (i < terms_.size() && bladeLess(terms_[i].blade, o.terms_[j].blade))) {
      out.push_back(terms_[i++]);
    } else if (i == terms_.size() || bladeLess(o.terms_[j].blade, terms_[i].blade)) {
      out.push_back(o.terms_[j++]);
    } else {
      double c = terms_[i].c + o.terms_[j].c;
      if (c != 0.0) out.push_back({terms_[i].blade, c});
      ++i, ++j;
    }
  }
  terms_ = std::move(out);
  return *this;
}

KVector& KVector::operator-=(const KVector& o) { return *this += (o * -1.0); }

KVector& KVector::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& t : terms_) t.c *= s;
  return *this;
}

bool KVector::operator==(const KVector& o) const {
  if (dim_ != o.dim_ || grade_ != o.grade_ || terms_.size() != o.terms_.size()) return false;
  for (size_t i = 0; i < terms_.size(); ++i)
    if (terms_[i].blade != o.terms_[i].blade || terms_[i].c != o.terms_[i].c) return false;
  return true;
}

int KVector::compare(const KVector& a, const KVector& b) {
  if (a.grade_ != b.grade_) return a.grade_ < b.grade_ ? -1 : 1;
  size_t m = std::min(a.terms_.size(), b.terms_.size());
  for (size_t i = 0; i < m; ++i) {
    if (a.terms_[i].blade != b.terms_[i].blade)
      return bladeLess(a.terms_[i].blade, b.terms_[i].blade) ? -1 : 1;
    if (a.terms_[i].c != b.terms_[i].c) return a.terms_[i].c < b.terms_[i].c ? -1 : 1;
  }
  if (a.terms_.size() != b.terms_.size()) return a.terms_.size() < b.terms_.size() ? -1 : 1;
  return 0;
}

KVector KVector::shifted(int newDim, int shift) const {
  if (dim_ + shift > newDim) throw DimensionError("KVector::shifted: target too small");
  KVector out(newDim, grade_);
  for (auto& t : terms_) out.terms_.push_back({t.blade << shift, t.c});
  // shifting preserves the lexicographic order of equal-grade tuples
  return out;
}

std::string KVector::str() const {
  std::ostringstream os;
  if (terms_.empty()) return "0";
  bool first = true;
  for (auto& t : terms_) {
    if (!first) os << (t.c < 0 ? " - " : " + ");
    else if (t.c < 0) os << "-";
    first = false;
    os << std::abs(t.c);
    if (t.blade) {
      os << "*e";
      for (int i : bladeIndices(t.blade)) os << i;
    }
  }
  return os.str();
}

KVector wedge(const KVector& a, const KVector& b) {
  requireSameDim(a.dim(), b.dim(), "wedge");
  int g = a.grade() + b.grade();
  if (g > a.dim()) return KVector(a.dim(), 0);
  KVector out(a.dim(), g);
  for (auto& s : a.terms())
    for (auto& t : b.terms()) {
      int sg = wedgeSign(s.blade, t.blade);
      if (sg) out.add(s.blade | t.blade, sg * s.c * t.c);
    }
  return out;
}

double inner(const KVector& a, const KVector& b) {
  requireSameDim(a.dim(), b.dim(), "inner");
  if (a.grade() != b.grade()) throw std::invalid_argument("inner: grade mismatch");
  double s = 0;
  size_t i = 0, j = 0;
  auto& x = a.terms();
  auto& y = b.terms();
  while (i < x.size() && j < y.size()) {
    if (x[i].blade == y[j].blade) s += x[i++].c * y[j++].c;
    else if (bladeLess(x[i].blade, y[j].blade)) ++i;
    else ++j;
  }
  return s;
}

double norm(const KVector& a) {
  double s = 0;
  for (auto& t : a.terms()) s += t.c * t.c;
  return std::sqrt(s);
}

bool isSimple(const KVector& a, double tol) {
  int n = a.dim(), k = a.grade();
  if (a.isZero() || k <= 1 || k >= n - 1) return true;
  // a is simple iff the kernel of v -> v ^ a has dimension k.
  std::map<Blade, int, bool (*)(Blade, Blade)> rowOf(bladeLess);
  std::vector<KVector> cols;
  for (int i = 0; i < n; ++i) {
    cols.push_back(wedge(KVector::blade(n, Blade{1} << i), a));
    for (auto& t : cols.back().terms()) rowOf.emplace(t.blade, 0);
  }
  int r = 0;
  for (auto& kv : rowOf) kv.second = r++;
  if (r == 0) return true;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(r, n);
  for (int i = 0; i < n; ++i)
    for (auto& t : cols[i].terms()) M(rowOf[t.blade], i) = t.c;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  auto sv = svd.singularValues();
  double scale = norm(a);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * std::max(1.0, scale)) ++rank;
  return n - rank == k;
}

std::optional<double> mass(const KVector& a) {
  if (isSimple(a)) return norm(a);
  return std::nullopt;
}

double massUpper(const KVector& a) {
  if (isSimple(a)) return norm(a);
  std::vector<BladeTerm> ts = a.terms();
  std::stable_sort(ts.begin(), ts.end(),
                   [](const BladeTerm& x, const BladeTerm& y) { return std::abs(x.c) > std::abs(y.c); });
  std::vector<KVector> pieces;
  for (auto& t : ts) {
    KVector single = KVector::blade(a.dim(), t.blade, t.c);
    bool merged = false;
    for (auto& p : pieces) {
      KVector cand = p + single;
      if (isSimple(cand)) {
        p = std::move(cand);
        merged = true;
        break;
      }
    }
    if (!merged) pieces.push_back(std::move(single));
  }
  double s = 0;
  for (auto& p : pieces) s += norm(p);
  return s;
}

double massBound(const KVector& a) {
  if (auto m = mass(a)) return *m;
  return massUpper(a);
}

KVector retractKV(std::span<const double> v, const KVector& a) {
  requireSameDim(static_cast<int>(v.size()), a.dim(), "retractKV");
  if (a.grade() == 0) throw std::invalid_argument("retractKV: grade 0 input");
  KVector out(a.dim(), a.grade() - 1);
  for (auto& t : a.terms()) {
    int m = 0;
    for (Blade bits = t.blade; bits; bits &= bits - 1, ++m) {
      int i = __builtin_ctz(bits);
      if (v[i] == 0.0) continue;
      out.add(t.blade & ~(Blade{1} << i), ((m & 1) ? -1.0 : 1.0) * v[i] * t.c);
    }
  }
  return out;
}

KVector perpKV(const KVector& a) {
  int n = a.dim(), k = a.grade();
  Blade full = fullMask(n);
  KVector out(n, n - k);
  double gs = (k & 1) ? -1.0 : 1.0;
  for (auto& t : a.terms()) {
    Blade c = full & ~t.blade;
    out.add(c, gs * wedgeSign(t.blade, c) * t.c);
  }
  return out;
}

KVector pushKV(std::span<const double> M, int rows, const KVector& a) {
  int n = a.dim();
  if (static_cast<int>(M.size()) != rows * n) throw DimensionError("pushKV: matrix shape");
  std::vector<KVector> col(n);
  for (int j = 0; j < n; ++j) {
    Vec c(rows);
    for (int i = 0; i < rows; ++i) c[i] = M[i * n + j];
    col[j] = KVector::vector(c);
  }
  KVector out(rows, std::min(a.grade(), rows));
  if (a.grade() > rows) return KVector(rows, 0);
  for (auto& t : a.terms()) {
    KVector w = KVector::scalar(rows, t.c);
    for (Blade b = t.blade; b; b &= b - 1) w = wedge(w, col[__builtin_ctz(b)]);
    out += w;
  }
  return out;
}

// ---------------------------------------------------------------- SymTensor

SymTensor::SymTensor(int dim, std::vector<Vec> factors) : dim_(dim), factors_(std::move(factors)) {
  std::vector<int> idx;
  for (auto& f : factors_) {
    requireSameDim(static_cast<int>(f.size()), dim_, "SymTensor");
    int hit = -1, nz = 0;
    for (int i = 0; i < dim_; ++i)
      if (f[i] != 0.0) ++nz, hit = i;
    if (nz == 1 && f[hit] == 1.0) idx.push_back(hit + 1);
  }
  if (idx.size() == factors_.size()) {
    std::sort(idx.begin(), idx.end());
    basis_ = std::move(idx);
  } else {
    basis_.reset();
  }
}

SymTensor SymTensor::monomial(int dim, std::vector<int> idx) {
  SymTensor s(dim);
  std::sort(idx.begin(), idx.end());
  for (int i : idx) {
    if (i < 1 || i > dim) throw std::invalid_argument("SymTensor::monomial: index out of range");
    Vec e(dim, 0.0);
    e[i - 1] = 1.0;
    s.factors_.push_back(std::move(e));
  }
  s.basis_ = std::move(idx);
  return s;
}

std::vector<std::pair<std::vector<int>, double>> SymTensor::expand() const {
  if (basis_) return {{*basis_, 1.0}};
  std::map<std::vector<int>, double> acc;
  std::vector<int> pick(factors_.size(), 0);
  // enumerate one nonzero coordinate per factor
  std::vector<std::vector<int>> nz(factors_.size());
  for (size_t f = 0; f < factors_.size(); ++f)
    for (int i = 0; i < dim_; ++i)
      if (factors_[f][i] != 0.0) nz[f].push_back(i);
  for (auto& z : nz)
    if (z.empty()) return {};
  std::vector<size_t> cur(factors_.size(), 0);
  while (true) {
    std::vector<int> key;
    double w = 1;
    for (size_t f = 0; f < factors_.size(); ++f) {
      int i = nz[f][cur[f]];
      key.push_back(i + 1);
      w *= factors_[f][i];
    }
    std::sort(key.begin(), key.end());
    acc[key] += w;
    size_t f = 0;
    while (f < cur.size() && ++cur[f] == nz[f].size()) cur[f++] = 0;
    if (f == cur.size()) break;
  }
  std::vector<std::pair<std::vector<int>, double>> out;
  for (auto& [k, w] : acc)
    if (w != 0.0) out.emplace_back(k, w);
  return out;
}

SymTensor SymTensor::withFactor(const Vec& u) const {
  auto f = factors_;
  f.push_back(u);
  return SymTensor(dim_, std::move(f));
}

SymTensor SymTensor::withBasisFactor(int i) const {
  if (basis_) {
    auto idx = *basis_;
    idx.push_back(i);
    return monomial(dim_, std::move(idx));
  }
  Vec e(dim_, 0.0);
  e.at(i - 1) = 1.0;
  return withFactor(e);
}

SymTensor SymTensor::shifted(int newDim, int shift) const {
  std::vector<Vec> f;
  for (auto& u : factors_) {
    Vec w(newDim, 0.0);
    for (int i = 0; i < dim_; ++i) w[i + shift] = u[i];
    f.push_back(std::move(w));
  }
  return SymTensor(newDim, std::move(f));
}

bool SymTensor::sameMultiset(const SymTensor& o, double tol) const {
  if (dim_ != o.dim_ || order() != o.order()) return false;
  if (basis_ && o.basis_) return *basis_ == *o.basis_;
  std::vector<bool> used(o.factors_.size(), false);
  for (auto& u : factors_) {
    bool found = false;
    for (size_t j = 0; j < o.factors_.size() && !found; ++j) {
      if (used[j]) continue;
      double d = 0;
      for (int i = 0; i < dim_; ++i) d = std::max(d, std::abs(u[i] - o.factors_[j][i]));
      if (d <= tol) used[j] = found = true;
    }
    if (!found) return false;
  }
  return true;
}

SymTensor symCompose(const SymTensor& a, const SymTensor& b) {
  requireSameDim(a.dim(), b.dim(), "symCompose");
  if (a.basisIndices() && b.basisIndices()) {
    auto idx = *a.basisIndices();
    idx.insert(idx.end(), b.basisIndices()->begin(), b.basisIndices()->end());
    return SymTensor::monomial(a.dim(), std::move(idx));
  }
  auto f = a.factors();
  f.insert(f.end(), b.factors().begin(), b.factors().end());
  return SymTensor(a.dim(), std::move(f));
}

double symNorm(const SymTensor& s) {
  double p = 1;
  for (auto& u : s.factors()) {
    double q = 0;
    for (double x : u) q += x * x;
    p *= std::sqrt(q);
  }
  return p;
}

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const KVector& v) {
  nlohmann::json terms = nlohmann::json::array();
  for (auto& t : v.terms()) terms.push_back({{"idx", bladeIndices(t.blade)}, {"c", t.c}});
  j = {{"n", v.dim()}, {"grade", v.grade()}, {"terms", terms}};
}

void from_json(const nlohmann::json& j, KVector& v) {
  for (auto& [key, _] : j.items())
    if (key != "n" && key != "grade" && key != "terms")
      throw std::invalid_argument("KVector JSON: unknown key '" + key + "'");
  int n = j.at("n").get<int>();
  int g = j.at("grade").get<int>();
  KVector out(n, g);
  for (auto& t : j.at("terms")) {
    std::vector<int> idx = t.at("idx").get<std::vector<int>>();
    if (static_cast<int>(idx.size()) != g) throw std::invalid_argument("KVector JSON: idx size != grade");
    for (size_t i = 1; i < idx.size(); ++i)
      if (idx[i] <= idx[i - 1]) throw std::invalid_argument("KVector JSON: idx not increasing");
    for (int i : idx)
      if (i < 1 || i > n) throw std::invalid_argument("KVector JSON: idx out of range");
    out.add(bladeFromIndices(idx), t.at("c").get<double>());
  }
  v = std::move(out);
}

void to_json(nlohmann::json& j, const SymTensor& s) {
  j = {{"n", s.dim()}, {"factors", s.factors()}};
}

void from_json(const nlohmann::json& j, SymTensor& s) {
  for (auto& [key, _] : j.items())
    if (key != "n" && key != "factors")
      throw std::invalid_argument("SymTensor JSON: unknown key '" + key + "'");
  s = SymTensor(j.at("n").get<int>(), j.at("factors").get<std::vector<Vec>>());
}

}  // namespace chaincalc

#include "chaincalc/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace chaincalc {

ChainElement::ChainElement(Point p, KVector a) : point(std::move(p)), sym(static_cast<int>(point.size())), kv(std::move(a)) {}

ChainElement::ChainElement(Point p, SymTensor s, KVector a)
    : point(std::move(p)), sym(std::move(s)), kv(std::move(a)) {}

namespace {

struct Flat {
  size_t pointIdx;  // representative point index into `pts`
  std::vector<int> mono;
  KVector kv;
};

// Partitions indices [first, last) into clusters of points that chain
// together within tol, coordinate by coordinate.
void clusterRec(std::vector<size_t>& idx, size_t first, size_t last, int coord, int n,
                const std::vector<const Point*>& pts, std::vector<size_t>& clusterOf, size_t& next) {
  if (coord == n) {
    for (size_t i = first; i < last; ++i) clusterOf[idx[i]] = next;
    ++next;
    return;
  }
  std::sort(idx.begin() + first, idx.begin() + last,
            [&](size_t a, size_t b) { return (*pts[a])[coord] < (*pts[b])[coord]; });
  size_t start = first;
  for (size_t i = first + 1; i <= last; ++i) {
    if (i == last || (*pts[idx[i]])[coord] - (*pts[idx[i - 1]])[coord] > kPointTol) {
      if (i - start == 1) {
        clusterOf[idx[start]] = next++;
      } else {
        clusterRec(idx, start, i, coord + 1, n, pts, clusterOf, next);
      }
      start = i;
    }
  }
}

int cmpPoint(const Point& a, const Point& b) {
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
  return 0;
}

}  // namespace

DiracChain canonicalize(int dim, std::vector<ChainElement> raw) {
  // Expand sigma into the monomial basis of S^s.
  std::vector<const Point*> pts;
  std::vector<Flat> flat;
  flat.reserve(raw.size());
  pts.reserve(raw.size());
  double maxRaw = 0;
  for (auto& e : raw) {
    if (e.dim() != dim || e.kv.dim() != dim || e.sym.dim() != dim)
      throw DimensionError("canonicalize: mixed dimensions");
    if (e.kv.isZero()) continue;
    size_t pi = pts.size();
    pts.push_back(&e.point);
    if (e.sym.basisIndices()) {
      maxRaw = std::max(maxRaw, e.kv.maxAbs());
      flat.push_back({pi, *e.sym.basisIndices(), std::move(e.kv)});
    } else {
      for (auto& [mono, w] : e.sym.expand()) {
        KVector kv = e.kv * w;
        maxRaw = std::max(maxRaw, kv.maxAbs());
        flat.push_back({pi, mono, std::move(kv)});
      }
    }
  }
  DiracChain out(dim);
  if (flat.empty()) return out;

  // Merge nearly coincident points onto the lexicographically smallest member.
  std::vector<size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<size_t> clusterOf(pts.size());
  size_t nClusters = 0;
  clusterRec(idx, 0, idx.size(), 0, dim, pts, clusterOf, nClusters);
  std::vector<size_t> rep(nClusters, std::numeric_limits<size_t>::max());
  for (size_t i = 0; i < pts.size(); ++i) {
    size_t& r = rep[clusterOf[i]];
    if (r == std::numeric_limits<size_t>::max() || cmpPoint(*pts[i], *pts[r]) < 0) r = i;
  }
  for (auto& f : flat) f.pointIdx = rep[clusterOf[f.pointIdx]];

  std::vector<size_t> order(flat.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const Flat& x = flat[a];
    const Flat& y = flat[b];
    if (x.pointIdx != y.pointIdx) {
      int c = cmpPoint(*pts[x.pointIdx], *pts[y.pointIdx]);
      if (c != 0) return c < 0;
    }
    if (x.mono.size() != y.mono.size()) return x.mono.size() < y.mono.size();
    if (x.kv.grade() != y.kv.grade()) return x.kv.grade() < y.kv.grade();
    if (x.mono != y.mono) return x.mono < y.mono;
    return a < b;  // stable merge order
  });

  double thr = kPruneRel * maxRaw;
  std::vector<ChainElement> elems;
  size_t i = 0;
  while (i < order.size()) {
    Flat& head = flat[order[i]];
    KVector acc = std::move(head.kv);
    size_t j = i + 1;
    while (j < order.size()) {
      Flat& f = flat[order[j]];
      if (f.pointIdx != head.pointIdx || f.mono != head.mono || f.kv.grade() != acc.grade()) break;
      acc += f.kv;
      ++j;
    }
    acc.prune(thr);
    if (!acc.isZero())
      elems.emplace_back(*pts[head.pointIdx], SymTensor::monomial(dim, head.mono), std::move(acc));
    i = j;
  }
  DiracChain res(dim);
  res.elems_ = std::move(elems);
  return res;
}

DiracChain::DiracChain(int dim, std::vector<ChainElement> raw) : DiracChain(canonicalize(dim, std::move(raw))) {}

DiracChain DiracChain::single(ChainElement e) {
  int n = e.dim();
  std::vector<ChainElement> v;
  v.push_back(std::move(e));
  return DiracChain(n, std::move(v));
}

int DiracChain::maxOrder() const {
  int s = 0;
  for (auto& e : elems_) s = std::max(s, e.order());
  return s;
}

double DiracChain::maxCoeff() const {
  double m = 0;
  for (auto& e : elems_) m = std::max(m, e.kv.maxAbs());
  return m;
}

DiracChain DiracChain::gradeView(int k) const {
  DiracChain out(dim_);
  for (auto& e : elems_)
    if (e.grade() == k) out.elems_.push_back(e);
  return out;
}

DiracChain& DiracChain::operator+=(const DiracChain& o) {
  if (o.empty()) return *this;
  if (empty() && dim_ == 0) {
    *this = o;
    return *this;
  }
  if (dim_ != o.dim_) throw DimensionError("DiracChain +: dimension mismatch");
  std::vector<ChainElement> all = elems_;
  all.insert(all.end(), o.elems_.begin(), o.elems_.end());
  *this = canonicalize(dim_, std::move(all));
  return *this;
}

DiracChain& DiracChain::operator-=(const DiracChain& o) { return *this += o.scaled(-1.0); }

DiracChain DiracChain::scaled(double s) const {
  if (s == 0.0) return DiracChain(dim_);
  DiracChain out = *this;
  for (auto& e : out.elems_) e.kv *= s;
  return out;
}

double maxDifference(const DiracChain& a, const DiracChain& b) {
  int n = a.dim() ? a.dim() : b.dim();
  std::vector<ChainElement> all = a.elements();
  for (auto& e : b.elements()) all.emplace_back(e.point, e.sym, -e.kv);
  // No relative pruning here: the caller asks about absolute size.
  DiracChain d = canonicalize(n, std::move(all));
  return d.maxCoeff();
}

bool approxEqual(const DiracChain& a, const DiracChain& b, double tol) { return maxDifference(a, b) <= tol; }

std::vector<Point> parallelepipedVertices(const SymTensor& sigma, std::span<const double> p) {
  int j = sigma.order();
  std::vector<Point> out;
  for (unsigned mask = 0; mask < (1u << j); ++mask) {
    Point q(p.begin(), p.end());
    for (int i = 0; i < j; ++i)
      if (mask & (1u << i))
        for (size_t c = 0; c < q.size(); ++c) q[c] += sigma.factors()[i][c];
    out.push_back(std::move(q));
  }
  return out;
}

DiracChain differenceChain(const SymTensor& sigma, const ChainElement& base) {
  if (base.order() != 0) throw std::invalid_argument("differenceChain: base must have order 0");
  if (sigma.dim() != base.dim()) throw DimensionError("differenceChain: dimension mismatch");
  int j = sigma.order();
  auto verts = parallelepipedVertices(sigma, base.point);
  std::vector<ChainElement> raw;
  for (unsigned mask = 0; mask < verts.size(); ++mask) {
    int ones = __builtin_popcount(mask);
    double s = ((j - ones) & 1) ? -1.0 : 1.0;
    raw.emplace_back(std::move(verts[mask]), base.kv * s);
  }
  return DiracChain(base.dim(), std::move(raw));
}

DiracChain translate(std::span<const double> u, const DiracChain& a) {
  if (a.empty()) return a;
  if (static_cast<int>(u.size()) != a.dim()) throw DimensionError("translate: dimension mismatch");
  std::vector<ChainElement> raw = a.elements();
  for (auto& e : raw)
    for (size_t i = 0; i < u.size(); ++i) e.point[i] += u[i];
  return DiracChain(a.dim(), std::move(raw));
}

std::vector<Point> support(const DiracChain& a) {
  std::vector<Point> out;
  for (auto& e : a.elements())
    if (out.empty() || out.back() != e.point) out.push_back(e.point);
  return out;
}

// ---------------------------------------------------------------- regions

bool OpenRegion::contains(std::span<const double> p) const {
  if (static_cast<int>(p.size()) != dim) throw DimensionError("OpenRegion: dimension mismatch");
  for (int i = 0; i < dim; ++i)
    if (!(p[i] > lo[i] && p[i] < hi[i])) return false;
  return member ? member(p) : true;
}

bool OpenRegion::bounded() const {
  for (int i = 0; i < dim; ++i)
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i])) return false;
  return true;
}

OpenRegion OpenRegion::whole(int n) {
  OpenRegion u;
  u.dim = n;
  u.lo.assign(n, -std::numeric_limits<double>::infinity());
  u.hi.assign(n, std::numeric_limits<double>::infinity());
  u.signedDistance = [](std::span<const double>) { return -std::numeric_limits<double>::infinity(); };
  u.convex = true;
  u.description = "R^" + std::to_string(n);
  u.params = {{"kind", "whole"}, {"n", n}};
  return u;
}

OpenRegion OpenRegion::box(Vec lo, Vec hi) {
  if (lo.size() != hi.size()) throw DimensionError("box: corner dimensions differ");
  OpenRegion u;
  u.dim = static_cast<int>(lo.size());
  for (size_t i = 0; i < lo.size(); ++i)
    if (!(hi[i] > lo[i])) throw std::invalid_argument("box: degenerate extent");
  u.lo = lo;
  u.hi = hi;
  u.signedDistance = [lo, hi](std::span<const double> p) {
    double d = std::numeric_limits<double>::infinity();
    bool in = true;
    double out2 = 0;
    for (size_t i = 0; i < lo.size(); ++i) {
      d = std::min({d, p[i] - lo[i], hi[i] - p[i]});
      double e = std::max({lo[i] - p[i], p[i] - hi[i], 0.0});
      if (e > 0) in = false;
      out2 += e * e;
    }
    return in ? -d : std::sqrt(out2);
  };
  u.convex = true;
  u.description = "box";
  u.params = {{"kind", "box"}, {"lo", lo}, {"hi", hi}};
  return u;
}

OpenRegion OpenRegion::ball(Vec c, double r) {
  if (!(r > 0)) throw std::invalid_argument("ball: radius must be positive");
  OpenRegion u;
  u.dim = static_cast<int>(c.size());
  u.lo = c;
  u.hi = c;
  for (auto& x : u.lo) x -= r;
  for (auto& x : u.hi) x += r;
  auto dist = [c](std::span<const double> p) {
    double s = 0;
    for (size_t i = 0; i < c.size(); ++i) s += (p[i] - c[i]) * (p[i] - c[i]);
    return std::sqrt(s);
  };
  u.member = [dist, r](std::span<const double> p) { return dist(p) < r; };
  u.signedDistance = [dist, r](std::span<const double> p) { return dist(p) - r; };
  u.convex = true;
  u.description = "ball";
  u.params = {{"kind", "ball"}, {"center", c}, {"radius", r}};
  return u;
}

OpenRegion OpenRegion::slitDisk() {
  OpenRegion u = ball({0.0, 0.0}, 1.0);
  u.member = [](std::span<const double> p) {
    if (p[0] * p[0] + p[1] * p[1] >= 1.0) return false;
    return !(p[1] == 0.0 && p[0] >= 0.0);
  };
  u.signedDistance = [](std::span<const double> p) {
    double r = std::hypot(p[0], p[1]);
    if (r >= 1.0) return r - 1.0;
    double sx = std::clamp(p[0], 0.0, 1.0);
    double ds = std::hypot(p[0] - sx, p[1]);
    return -std::min(1.0 - r, ds);
  };
  u.convex = false;
  u.description = "slit disk";
  u.params = {{"kind", "slit-disk"}};
  return u;
}

DiracChain restrict(const DiracChain& a, const OpenRegion& w) {
  std::vector<ChainElement> keep;
  for (auto& e : a.elements())
    if (w.contains(e.point)) keep.push_back(e);
  return DiracChain(a.dim(), std::move(keep));
}

bool insideRegion(const SymTensor& sigma, std::span<const double> p, const OpenRegion& u) {
  auto verts = parallelepipedVertices(sigma, p);
  for (auto& v : verts)
    if (!u.contains(v)) return false;
  if (verts.size() == 1 || u.convex) return true;
  if (u.signedDistance) {
    Point c(p.size(), 0.0);
    for (auto& v : verts)
      for (size_t i = 0; i < c.size(); ++i) c[i] += v[i] / verts.size();
    double rad = 0;
    for (auto& v : verts) {
      double s = 0;
      for (size_t i = 0; i < c.size(); ++i) s += (v[i] - c[i]) * (v[i] - c[i]);
      rad = std::max(rad, std::sqrt(s));
    }
    return u.signedDistance(c) < -rad;
  }
  // No distance evaluator: sample the hull along vertex-to-vertex segments.
  for (size_t a = 0; a < verts.size(); ++a)
    for (size_t b = a + 1; b < verts.size(); ++b)
      for (int t = 1; t < 16; ++t) {
        Point q(p.size());
        for (size_t i = 0; i < q.size(); ++i) q[i] = verts[a][i] + (verts[b][i] - verts[a][i]) * t / 16.0;
        if (!u.contains(q)) return false;
      }
  return true;
}

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const DiracChain& a) {
  nlohmann::json els = nlohmann::json::array();
  for (auto& e : a.elements()) els.push_back({{"p", e.point}, {"sym", e.sym.factors()}, {"kv", e.kv}});
  j = {{"n", a.dim()}, {"elements", els}};
}

DiracChain chainFromJson(const nlohmann::json& j) {
  for (auto& [key, _] : j.items())
    if (key != "n" && key != "elements") throw std::invalid_argument("chain JSON: unknown key '" + key + "'");
  int n = j.at("n").get<int>();
  std::vector<ChainElement> raw;
  for (auto& e : j.at("elements")) {
    for (auto& [key, _] : e.items())
      if (key != "p" && key != "sym" && key != "kv")
        throw std::invalid_argument("chain JSON element: unknown key '" + key + "'");
    Point p = e.at("p").get<Point>();
    std::vector<Vec> f = e.contains("sym") ? e.at("sym").get<std::vector<Vec>>() : std::vector<Vec>{};
    KVector kv = e.at("kv").get<KVector>();
    if (static_cast<int>(p.size()) != n || kv.dim() != n) throw DimensionError("chain JSON: dimension mismatch");
    raw.emplace_back(std::move(p), SymTensor(n, std::move(f)), std::move(kv));
  }
  return DiracChain(n, std::move(raw));
}

void to_json(nlohmann::json& j, const OpenRegion& u) { j = u.params; }

OpenRegion regionFromJson(const nlohmann::json& j) {
  std::string kind = j.at("kind").get<std::string>();
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (auto& [key, _] : j.items()) {
      bool ok = key == "kind";
      for (auto* k : keys) ok = ok || key == k;
      if (!ok) throw std::invalid_argument("region JSON: unknown key '" + key + "'");
    }
  };
  if (kind == "whole") {
    allow({"n"});
    return OpenRegion::whole(j.at("n").get<int>());
  }
  if (kind == "box") {
    allow({"lo", "hi"});
    return OpenRegion::box(j.at("lo").get<Vec>(), j.at("hi").get<Vec>());
  }
  if (kind == "ball") {
    allow({"center", "radius"});
    return OpenRegion::ball(j.at("center").get<Vec>(), j.at("radius").get<double>());
  }
  if (kind == "slit-disk") {
    allow({});
    return OpenRegion::slitDisk();
  }
  throw std::invalid_argument("region JSON: unknown kind '" + kind + "'");
}

}  // namespace chaincalc

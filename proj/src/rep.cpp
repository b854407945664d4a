#include "chaincalc/rep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace chaincalc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void checkKeys(const nlohmann::json& j, std::initializer_list<const char*> keys, const char* what) {
  for (auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto* k : keys) ok = ok || key == k;
    if (!ok) throw std::invalid_argument(std::string(what) + ": unknown key '" + key + "'");
  }
}

// Contiguous range [a, b) of 0..total for part `part` of `nparts`.
std::pair<long long, long long> partRange(long long total, int part, int nparts) {
  return {total * part / nparts, total * (part + 1) / nparts};
}

bool inHalfOpen(std::span<const double> p, const Vec& lo, const Vec& hi) {
  for (size_t i = 0; i < p.size(); ++i)
    if (!(p[i] >= lo[i] && p[i] < hi[i])) return false;
  return true;
}

Box unionBox(const Box& a, const Box& b) {
  if (a.lo.empty()) return b;
  Box r = a;
  for (size_t i = 0; i < r.lo.size(); ++i) r.lo[i] = std::min(r.lo[i], b.lo[i]), r.hi[i] = std::max(r.hi[i], b.hi[i]);
  return r;
}

double vnorm(const Vec& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Odometer over a box of integer indices, calling f(index) in row-major
// order with axis 0 outermost.
template <class F>
void forEachIndex(const std::vector<long long>& lo, const std::vector<long long>& hi, F&& f) {
  size_t n = lo.size();
  for (size_t i = 0; i < n; ++i)
    if (lo[i] >= hi[i]) return;
  std::vector<long long> idx = lo;
  while (true) {
    f(idx);
    size_t d = n;
    while (d > 0) {
      --d;
      if (++idx[d] < hi[d]) break;
      idx[d] = lo[d];
      if (d == 0) return;
    }
    if (n == 0) return;
  }
}

}  // namespace

int threadCount(int requested) {
  int hw = std::max(1u, std::thread::hardware_concurrency());
  int cap = hw;
  if (const char* env = std::getenv("CHAINCALC_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) cap = std::min(cap, v);
  }
  if (requested > 0) return std::min(requested, cap);
  return cap;
}

void ChainStream::visitBox(int j, const Vec& lo, const Vec& hi, const ElementVisitor& f) const {
  if (genBox) return genBox(j, lo, hi, f);
  gen(j, 0, 1, [&](std::span<const double> p, const SymTensor& s, const KVector& kv, double w) {
    if (inHalfOpen(p, lo, hi)) f(p, s, kv, w);
  });
}

DiracChain ChainStream::snapshot(int j) const {
  std::vector<ChainElement> raw;
  visit(j, [&](std::span<const double> p, const SymTensor& s, const KVector& kv, double w) {
    raw.emplace_back(Point(p.begin(), p.end()), s, kv * w);
  });
  return DiracChain(dim, std::move(raw));
}

double ChainStream::tailBound(int j) const {
  if (!cauchyRate) return kInf;
  double s = 0;
  for (int i = j; i < j + 200; ++i) {
    double c = cauchyRate(i);
    s += c;
    if (c < 1e-300 || c < 1e-17 * s) break;
  }
  return s;
}

// ---------------------------------------------------------------- cubes and cells

ChainStream cubeStream(Vec lo, Vec hi) {
  int n = static_cast<int>(lo.size());
  if (n == 0 || hi.size() != lo.size()) throw DimensionError("cubeStream: bad corners");
  double vol = 1, side = 0;
  for (int i = 0; i < n; ++i) {
    if (!(hi[i] > lo[i])) throw std::invalid_argument("cubeStream: degenerate cube");
    vol *= hi[i] - lo[i];
    side = std::max(side, hi[i] - lo[i]);
  }
  ChainStream s;
  s.dim = n;
  s.grade = n;
  s.normOrder = 1;
  s.description = "cube";
  s.params = {{"kind", "cube"}, {"lo", lo}, {"hi", hi}};
  s.domain = {lo, hi};
  s.cauchyRate = [vol, side](int j) { return std::ldexp(vol * side, -j + 1); };
  auto kv = std::make_shared<KVector>(KVector::volume(n));
  auto sym = std::make_shared<SymTensor>(n);
  auto coord = [lo, hi](int i, long long k, long long M) { return lo[i] + (hi[i] - lo[i]) * ((k + 0.5) / M); };
  s.gen = [n, vol, kv, sym, coord](int j, int part, int nparts, const ElementVisitor& f) {
    long long M = 1LL << j;
    double w = std::ldexp(vol, -n * j);
    auto [a, b] = partRange(M, part, nparts);
    std::vector<long long> ilo(n, 0), ihi(n, M);
    ilo[0] = a, ihi[0] = b;
    Point p(n);
    forEachIndex(ilo, ihi, [&](const std::vector<long long>& idx) {
      for (int i = 0; i < n; ++i) p[i] = coord(i, idx[i], M);
      f(p, *sym, *kv, w);
    });
  };
  s.genBox = [n, vol, kv, sym, coord, lo, hi](int j, const Vec& blo, const Vec& bhi, const ElementVisitor& f) {
    long long M = 1LL << j;
    double w = std::ldexp(vol, -n * j);
    std::vector<long long> ilo(n), ihi(n);
    for (int i = 0; i < n; ++i) {
      double h = (hi[i] - lo[i]) / M;
      double a = std::isfinite(blo[i]) ? std::ceil((blo[i] - lo[i]) / h - 0.5) : 0;
      double b = std::isfinite(bhi[i]) ? std::ceil((bhi[i] - lo[i]) / h - 0.5) : M;
      ilo[i] = static_cast<long long>(std::clamp(a, 0.0, static_cast<double>(M)));
      ihi[i] = static_cast<long long>(std::clamp(b, 0.0, static_cast<double>(M)));
      // Guard the rounding at the box faces against the exact coordinate formula.
      while (ilo[i] > 0 && coord(i, ilo[i] - 1, M) >= blo[i]) --ilo[i];
      while (ilo[i] < M && coord(i, ilo[i], M) < blo[i]) ++ilo[i];
      while (ihi[i] < M && coord(i, ihi[i], M) < bhi[i]) ++ihi[i];
      while (ihi[i] > 0 && coord(i, ihi[i] - 1, M) >= bhi[i]) --ihi[i];
    }
    Point p(n);
    forEachIndex(ilo, ihi, [&](const std::vector<long long>& idx) {
      for (int i = 0; i < n; ++i) p[i] = coord(i, idx[i], M);
      f(p, *sym, *kv, w);
    });
  };
  return s;
}

ChainStream cellStream(Point p0, std::vector<Vec> edges, double orientation) {
  int n = static_cast<int>(p0.size());
  int k = static_cast<int>(edges.size());
  if (k > n) throw DimensionError("cellStream: more edges than dimensions");
  KVector vol = KVector::scalar(n, 1.0);
  double side = 0;
  for (auto& e : edges) {
    if (static_cast<int>(e.size()) != n) throw DimensionError("cellStream: edge dimension");
    vol = wedge(vol, KVector::vector(e));
    side = std::max(side, vnorm(e));
  }
  vol *= orientation;
  if (vol.isZero() || norm(vol) < 1e-14 * std::pow(std::max(side, 1e-300), k))
    throw std::invalid_argument("cellStream: degenerate cell");
  ChainStream s;
  s.dim = n;
  s.grade = k;
  s.normOrder = 1;
  s.description = "cell";
  s.params = {{"kind", "cell"}, {"p0", p0}, {"edges", edges}, {"orientation", orientation}};
  Box b{p0, p0};
  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    Point v = p0;
    for (int a = 0; a < k; ++a)
      if (mask & (1u << a))
        for (int i = 0; i < n; ++i) v[i] += edges[a][i];
    b = unionBox(b, Box{v, v});
  }
  s.domain = b;
  double m = massBound(vol);
  s.cauchyRate = [m, side, k](int j) { return k == 0 ? 0.0 : std::ldexp(m * side, -j + 1); };
  auto kv = std::make_shared<KVector>(vol);
  auto sym = std::make_shared<SymTensor>(n);
  s.gen = [n, k, p0, edges, kv, sym](int j, int part, int nparts, const ElementVisitor& f) {
    long long M = 1LL << j;
    double w = std::ldexp(1.0, -k * j);
    Point p(n);
    if (k == 0) {
      if (part == 0) f(p0, *sym, *kv, 1.0);
      return;
    }
    auto [a, b] = partRange(M, part, nparts);
    std::vector<long long> ilo(k, 0), ihi(k, M);
    ilo[0] = a, ihi[0] = b;
    forEachIndex(ilo, ihi, [&](const std::vector<long long>& idx) {
      for (int i = 0; i < n; ++i) {
        double x = p0[i];
        for (int e = 0; e < k; ++e) x += edges[e][i] * ((idx[e] + 0.5) / M);
        p[i] = x;
      }
      f(p, *sym, *kv, w);
    });
  };
  return s;
}

ChainStream simplexStream(std::vector<Point> vertices, double orientation) {
  if (vertices.empty()) throw std::invalid_argument("simplexStream: no vertices");
  int k = static_cast<int>(vertices.size()) - 1;
  int n = static_cast<int>(vertices[0].size());
  if (k <= 1) {
    std::vector<Vec> edges;
    if (k == 1) {
      Vec e(n);
      for (int i = 0; i < n; ++i) e[i] = vertices[1][i] - vertices[0][i];
      edges.push_back(e);
    }
    ChainStream s = cellStream(vertices[0], edges, orientation);
    s.description = "simplex";
    s.params = {{"kind", "simplex"}, {"vertices", vertices}, {"orientation", orientation}};
    return s;
  }
  if (k != 2) throw std::invalid_argument("simplexStream: only segments and triangles are supported");
  Vec e1(n), e2(n);
  for (int i = 0; i < n; ++i) e1[i] = vertices[1][i] - vertices[0][i], e2[i] = vertices[2][i] - vertices[0][i];
  KVector area = wedge(KVector::vector(e1), KVector::vector(e2)) * (0.5 * orientation);
  double side = std::max({vnorm(e1), vnorm(e2)});
  if (area.isZero() || norm(area) < 1e-14 * side * side) throw std::invalid_argument("simplexStream: degenerate triangle");
  ChainStream s;
  s.dim = n;
  s.grade = 2;
  s.normOrder = 1;
  s.description = "simplex";
  s.params = {{"kind", "simplex"}, {"vertices", vertices}, {"orientation", orientation}};
  Box b{vertices[0], vertices[0]};
  for (auto& v : vertices) b = unionBox(b, Box{v, v});
  s.domain = b;
  double m = massBound(area);
  for (int i = 0; i < n; ++i) side = std::max(side, std::abs(vertices[2][i] - vertices[1][i]));
  s.cauchyRate = [m, side](int j) { return std::ldexp(m * side, -j + 1); };
  auto kv = std::make_shared<KVector>(area);
  auto sym = std::make_shared<SymTensor>(n);
  s.gen = [n, vertices, kv, sym](int j, int part, int nparts, const ElementVisitor& f) {
    long long total = 1LL << (2 * j);
    double w = std::ldexp(1.0, -2 * j);
    auto [a, b] = partRange(total, part, nparts);
    std::vector<Point> tri(3, Point(n)), nxt(3, Point(n));
    Point c(n);
    for (long long t = a; t < b; ++t) {
      tri = vertices;
      for (int d = j - 1; d >= 0; --d) {
        int digit = static_cast<int>((t >> (2 * d)) & 3);
        const Point &A = tri[0], &B = tri[1], &C = tri[2];
        for (int i = 0; i < n; ++i) {
          double ab = (A[i] + B[i]) / 2, bc = (B[i] + C[i]) / 2, ca = (C[i] + A[i]) / 2;
          switch (digit) {
            case 0: nxt[0][i] = A[i], nxt[1][i] = ab, nxt[2][i] = ca; break;
            case 1: nxt[0][i] = ab, nxt[1][i] = B[i], nxt[2][i] = bc; break;
            case 2: nxt[0][i] = ca, nxt[1][i] = bc, nxt[2][i] = C[i]; break;
            default: nxt[0][i] = bc, nxt[1][i] = ca, nxt[2][i] = ab; break;
          }
        }
        std::swap(tri, nxt);
      }
      for (int i = 0; i < n; ++i) c[i] = (tri[0][i] + tri[1][i] + tri[2][i]) / 3;
      f(c, *sym, *kv, w);
    }
  };
  return s;
}

ChainStream polyhedral(std::vector<std::pair<double, ChainStream>> cells) {
  if (cells.empty()) throw std::invalid_argument("polyhedral: no cells");
  ChainStream s;
  s.dim = cells[0].second.dim;
  s.grade = cells[0].second.grade;
  s.normOrder = 0;
  s.description = "polyhedral";
  nlohmann::json list = nlohmann::json::array();
  bool rates = true;
  for (auto& [a, c] : cells) {
    if (c.dim != s.dim || c.grade != s.grade) throw DimensionError("polyhedral: cells of different shape");
    s.normOrder = std::max(s.normOrder, c.normOrder);
    s.domain = unionBox(s.domain, c.domain);
    rates = rates && static_cast<bool>(c.cauchyRate);
    list.push_back({{"weight", a}, {"cell", c.params}});
  }
  s.params = {{"kind", "polyhedral"}, {"cells", list}};
  auto shared = std::make_shared<std::vector<std::pair<double, ChainStream>>>(std::move(cells));
  if (rates)
    s.cauchyRate = [shared](int j) {
      double t = 0;
      for (auto& [a, c] : *shared) t += std::abs(a) * c.cauchyRate(j);
      return t;
    };
  s.gen = [shared](int j, int part, int nparts, const ElementVisitor& f) {
    for (auto& [a, c] : *shared) {
      double wa = a;
      c.gen(j, part, nparts, [&](std::span<const double> p, const SymTensor& sy, const KVector& kv, double w) {
        f(p, sy, kv, w * wa);
      });
    }
  };
  s.genBox = [shared](int j, const Vec& lo, const Vec& hi, const ElementVisitor& f) {
    for (auto& [a, c] : *shared) {
      double wa = a;
      c.visitBox(j, lo, hi, [&](std::span<const double> p, const SymTensor& sy, const KVector& kv, double w) {
        f(p, sy, kv, w * wa);
      });
    }
  };
  return s;
}

ChainStream boxBoundaryStream(const Vec& lo, const Vec& hi) {
  int n = static_cast<int>(lo.size());
  std::vector<std::pair<double, ChainStream>> faces;
  for (int i = 0; i < n; ++i) {
    std::vector<Vec> edges;
    for (int a = 0; a < n; ++a)
      if (a != i) {
        Vec e(n, 0.0);
        e[a] = hi[a] - lo[a];
        edges.push_back(e);
      }
    double sgn = (i % 2 == 0) ? 1.0 : -1.0;
    Point top = lo, bottom = lo;
    top[i] = hi[i];
    faces.emplace_back(sgn, cellStream(top, edges));
    faces.emplace_back(-sgn, cellStream(bottom, edges));
  }
  ChainStream s = polyhedral(std::move(faces));
  s.description = "box boundary";
  s.params = {{"kind", "box-boundary"}, {"lo", lo}, {"hi", hi}};
  return s;
}

// ---------------------------------------------------------------- open sets

// Dyadic cubes of the level-j grid over the region's bounding cube whose
// 3x dilate lies in U.
ChainStream openSetStream(const OpenRegion& u) {
  if (!u.bounded()) throw std::invalid_argument("openSetStream: unbounded region");
  int n = u.dim;
  double side = 0;
  for (int i = 0; i < n; ++i) side = std::max(side, u.hi[i] - u.lo[i]);
  Vec lo = u.lo;
  ChainStream s;
  s.dim = n;
  s.grade = n;
  s.normOrder = 1;
  s.description = "open set (" + u.description + ")";
  s.params = {{"kind", "open"}, {"region", u.params}};
  Vec hi(n);
  for (int i = 0; i < n; ++i) hi[i] = lo[i] + side;
  s.domain = {lo, hi};
  auto region = std::make_shared<OpenRegion>(u);
  auto kv = std::make_shared<KVector>(KVector::volume(n));
  auto sym = std::make_shared<SymTensor>(n);

  // Dilate test for the cube of side h centered at c.
  auto keep = [region, n](const Point& c, double h) {
    const OpenRegion& U = *region;
    if (U.convex) {
      Point q(n);
      for (unsigned mask = 0; mask < (1u << n); ++mask) {
        for (int i = 0; i < n; ++i) q[i] = c[i] + ((mask >> i) & 1 ? 1.5 : -1.5) * h;
        if (!U.contains(q)) return false;
      }
      return true;
    }
    if (U.signedDistance) return U.signedDistance(c) <= -1.5 * h * std::sqrt(static_cast<double>(n));
    // Sample the dilate on its 4^n grid points.
    std::vector<int> d(n, 0);
    Point q(n);
    while (true) {
      for (int i = 0; i < n; ++i) q[i] = c[i] + (-1.5 + d[i]) * h;
      if (!U.contains(q)) return false;
      int i = 0;
      while (i < n && d[i] == 3) d[i++] = 0;
      if (i == n) return true;
      ++d[i];
    }
  };
  auto outside = [region, n](const Point& c, double h) {
    if (!region->signedDistance) return false;
    return region->signedDistance(c) >= 0.5 * h * std::sqrt(static_cast<double>(n));
  };

  s.gen = [n, lo, side, kv, sym, keep, outside](int j, int part, int nparts, const ElementVisitor& f) {
    long long M = 1LL << j;
    double hj = side / M;
    double w = std::pow(hj, n);
    auto [a0, b0] = partRange(M, part, nparts);
    Point p(n), c(n);
    auto emitAll = [&](const std::vector<long long>& idx, int level) {
      long long scale = 1LL << (j - level);
      std::vector<long long> ilo(n), ihi(n);
      for (int i = 0; i < n; ++i) ilo[i] = idx[i] * scale, ihi[i] = (idx[i] + 1) * scale;
      ilo[0] = std::max(ilo[0], a0), ihi[0] = std::min(ihi[0], b0);
      forEachIndex(ilo, ihi, [&](const std::vector<long long>& k) {
        for (int i = 0; i < n; ++i) p[i] = lo[i] + (k[i] + 0.5) * hj;
        f(p, *sym, *kv, w);
      });
    };
    std::function<void(std::vector<long long>&, int)> rec = [&](std::vector<long long>& idx, int level) {
      long long scale = 1LL << (j - level);
      if ((idx[0] + 1) * scale <= a0 || idx[0] * scale >= b0) return;
      double h = side / (1LL << level);
      for (int i = 0; i < n; ++i) c[i] = lo[i] + (idx[i] + 0.5) * h;
      if (keep(c, h)) return emitAll(idx, level);
      if (level == j || outside(c, h)) return;
      std::vector<long long> child(n);
      for (unsigned mask = 0; mask < (1u << n); ++mask) {
        for (int i = 0; i < n; ++i) child[i] = 2 * idx[i] + ((mask >> (n - 1 - i)) & 1);
        rec(child, level + 1);
      }
    };
    std::vector<long long> root(n, 0);
    rec(root, 0);
  };
  return s;
}

// ---------------------------------------------------------------- fractals

namespace {

double pow3(int n) {
  double x = 1;
  for (int i = 0; i < n; ++i) x *= 3;
  return x;
}

// Left endpoint numerator of the t-th stage-n interval over 3^n.
long long cantorNumerator(long long t, int n) {
  long long num = 0, p = 1;
  for (int d = 0; d < n; ++d) {
    if ((t >> d) & 1) num += 2 * p;
    p *= 3;
  }
  return num;
}

}  // namespace

ChainStream cantorStream() {
  ChainStream s;
  s.dim = 1;
  s.grade = 1;
  s.normOrder = 1;
  s.description = "Cantor set";
  s.params = {{"kind", "cantor"}};
  s.domain = {{0.0}, {1.0}};
  // (2/3)^n (3/2)^n bookkeeping: each interval is paired with its two children.
  s.cauchyRate = [](int n) { return 1.0 / pow3(n); };
  auto kv = std::make_shared<KVector>(KVector::volume(1));
  auto sym = std::make_shared<SymTensor>(1);
  s.gen = [kv, sym](int n, int part, int nparts, const ElementVisitor& f) {
    long long total = 1LL << n;
    double den = pow3(n);
    // (3/2)^n * 3^-n, exactly 2^-n
    double w = std::ldexp(1.0, -n);
    auto [a, b] = partRange(total, part, nparts);
    Point p(1);
    for (long long t = a; t < b; ++t) {
      p[0] = (2.0 * cantorNumerator(t, n) + 1.0) / (2.0 * den);
      f(p, *sym, *kv, w);
    }
  };
  return s;
}

ChainStream cantorBoundaryStream() {
  ChainStream s;
  s.dim = 1;
  s.grade = 0;
  s.normOrder = 2;
  s.description = "Cantor boundary";
  s.params = {{"kind", "cantor-boundary"}};
  s.domain = {{0.0}, {1.0}};
  s.cauchyRate = [](int n) { return 1.0 / pow3(n); };
  auto kv = std::make_shared<KVector>(KVector::scalar(1, 1.0));
  auto sym = std::make_shared<SymTensor>(1);
  s.gen = [kv, sym](int n, int part, int nparts, const ElementVisitor& f) {
    long long total = 1LL << n;
    double den = pow3(n);
    double w = std::pow(1.5, n);
    auto [a, b] = partRange(total, part, nparts);
    Point p(1);
    for (long long t = a; t < b; ++t) {
      long long num = cantorNumerator(t, n);
      p[0] = static_cast<double>(num) / den;
      f(p, *sym, *kv, -w);
      p[0] = static_cast<double>(num + 1) / den;
      f(p, *sym, *kv, w);
    }
  };
  return s;
}

DiracChain cantorStage(int n) {
  std::vector<ChainElement> raw;
  double den = pow3(n);
  for (long long t = 0; t < (1LL << n); ++t) {
    long long num = cantorNumerator(t, n);
    raw.emplace_back(Point{(2.0 * num + 1.0) / (2.0 * den)}, KVector::volume(1) * (1.0 / den));
  }
  return DiracChain(1, std::move(raw));
}

ChainStream sierpinskiStream() {
  const std::vector<Point> V{{0.0, 0.0}, {1.0, 0.0}, {0.5, std::sqrt(3.0) / 2}};
  const double area0 = std::sqrt(3.0) / 4;
  ChainStream s;
  s.dim = 2;
  s.grade = 2;
  s.normOrder = 1;
  s.description = "Sierpinski triangle";
  s.params = {{"kind", "sierpinski"}};
  s.domain = {{0.0, 0.0}, {1.0, std::sqrt(3.0) / 2}};
  s.cauchyRate = [area0](int k) { return std::ldexp(area0, -k); };
  auto kv = std::make_shared<KVector>(KVector::volume(2));
  auto sym = std::make_shared<SymTensor>(2);
  s.gen = [V, area0, kv, sym](int k, int part, int nparts, const ElementVisitor& f) {
    long long total = 1;
    for (int i = 0; i < k; ++i) total *= 3;
    // (4/3)^k times the stage-k triangle area 4^-k area0
    double w = area0 / static_cast<double>(total);
    auto [a, b] = partRange(total, part, nparts);
    Point c(2);
    for (long long t = a; t < b; ++t) {
      c[0] = 0.5, c[1] = std::sqrt(3.0) / 6;
      long long r = t;
      // Innermost map first: digits are read least significant first.
      for (int d = 0; d < k; ++d) {
        int digit = static_cast<int>(r % 3);
        r /= 3;
        c[0] = (c[0] + V[digit][0]) / 2;
        c[1] = (c[1] + V[digit][1]) / 2;
      }
      f(c, *sym, *kv, w);
    }
  };
  return s;
}

// ---------------------------------------------------------------- derived streams

ChainStream vectorFieldRep(int grade, std::vector<std::pair<Blade, Expr>> field, const OpenRegion& u) {
  ChainStream base = openSetStream(u);
  int n = u.dim;
  ChainStream s;
  s.dim = n;
  s.grade = grade;
  s.normOrder = 1;
  s.description = "vector field on " + u.description;
  nlohmann::json comps = nlohmann::json::array();
  for (auto& [b, e] : field) {
    if (bladeGrade(b) != grade) throw std::invalid_argument("vectorFieldRep: component of wrong grade");
    if (b >> n) throw DimensionError("vectorFieldRep: blade index out of range");
    comps.push_back({{"idx", bladeIndices(b)}, {"f", e.str()}});
  }
  s.params = {{"kind", "field"}, {"grade", grade}, {"components", comps}, {"region", u.params}};
  s.domain = base.domain;
  struct Comp {
    KVector blade;
    Expr f;
  };
  auto cs = std::make_shared<std::vector<Comp>>();
  for (auto& [b, e] : field) cs->push_back({KVector::blade(n, b), e});
  auto bs = std::make_shared<ChainStream>(std::move(base));
  s.gen = [cs, bs](int j, int part, int nparts, const ElementVisitor& f) {
    bs->gen(j, part, nparts, [&](std::span<const double> p, const SymTensor& sy, const KVector&, double w) {
      for (auto& c : *cs) {
        double v = c.f.eval(p.data());
        if (v != 0.0) f(p, sy, c.blade, w * v);
      }
    });
  };
  return s;
}

ChainStream algebraicStream(const SmoothMap& F, ChainStream base) {
  if (F.n != base.dim) throw DimensionError("algebraicStream: map domain dimension");
  ChainStream s;
  s.dim = F.m;
  s.grade = base.grade;
  s.normOrder = base.normOrder;
  s.description = "pushforward of " + base.description;
  s.params = {{"kind", "pushforward"}, {"base", base.params}};
  Box img{Vec(F.m, -kInf), Vec(F.m, kInf)};
  bool cert = true;
  for (auto& c : F.coords) cert = cert && c.certifiable();
  if (cert && base.domain.finite()) {
    auto iv = base.domain.intervals();
    for (int i = 0; i < F.m; ++i) {
      Interval b = F.coords[i].bound(iv);
      img.lo[i] = b.lo, img.hi[i] = b.hi;
    }
  }
  s.domain = img;
  auto map = std::make_shared<SmoothMap>(F);
  auto bs = std::make_shared<ChainStream>(std::move(base));
  s.gen = [map, bs](int j, int part, int nparts, const ElementVisitor& f) {
    int m = map->m;
    bs->gen(j, part, nparts, [&](std::span<const double> p, const SymTensor& sy, const KVector& kv, double w) {
      if (sy.order() > 0) throw std::invalid_argument("algebraicStream: base must have order 0");
      Point q = map->at(p);
      KVector a = pushKV(map->jacobianAt(p), m, kv);
      if (!a.isZero()) f(q, SymTensor(m), a, w);
    });
  };
  return s;
}

ChainStream dipoleCell(const Vec& v, ChainStream base) {
  if (static_cast<int>(v.size()) != base.dim) throw DimensionError("dipoleCell: vector dimension");
  ChainStream s = base;
  s.normOrder = base.normOrder + 1;
  s.description = "dipole of " + base.description;
  s.params = {{"kind", "dipole"}, {"v", v}, {"base", base.params}};
  double nv = vnorm(v);
  if (base.cauchyRate) {
    auto r = base.cauchyRate;
    s.cauchyRate = [r, nv](int j) { return nv * r(j); };
  }
  auto bs = std::make_shared<ChainStream>(std::move(base));
  s.gen = [bs, v](int j, int part, int nparts, const ElementVisitor& f) {
    bs->gen(j, part, nparts, [&](std::span<const double> p, const SymTensor& sy, const KVector& kv, double w) {
      f(p, sy.withFactor(v), kv, w);
    });
  };
  s.genBox = nullptr;
  return s;
}

ChainStream applyToStream(const ChainOperator& op, ChainStream base) {
  ChainStream s = base;
  s.grade = op.name == "perp" ? base.dim - base.grade : base.grade + op.dk;
  s.normOrder = base.normOrder + op.ds;
  s.description = op.name + " of " + base.description;
  s.params = {{"kind", "op"}, {"op", op.name}, {"base", base.params}};
  // The boundary operator is bounded by 1 from B^r to B^{r+1} and perp is an
  // isometry; other rates are not tracked.
  if (op.name != "boundary" && op.name != "perp") s.cauchyRate = nullptr;
  auto bs = std::make_shared<ChainStream>(std::move(base));
  auto el = op.element;
  bool pointFree = op.pointFree;
  s.gen = [bs, el, pointFree](int j, int part, int nparts, const ElementVisitor& f) {
    ElementSink sink;
    // Point-free operators are applied once per distinct (sigma, alpha, w).
    SymTensor lastSym;
    KVector lastKv;
    double lastW = 0;
    bool have = false;
    bs->gen(j, part, nparts, [&](std::span<const double> p, const SymTensor& sy, const KVector& kv, double w) {
      if (pointFree) {
        if (!(have && w == lastW && kv == lastKv && sy.sameMultiset(lastSym, 0.0))) {
          sink.clear();
          el(ChainElement(Point(p.begin(), p.end()), sy, kv * w), sink);
          lastSym = sy, lastKv = kv, lastW = w, have = true;
        }
        for (auto& e : sink) f(p, e.sym, e.kv, 1.0);
        return;
      }
      sink.clear();
      el(ChainElement(Point(p.begin(), p.end()), sy, kv * w), sink);
      for (auto& e : sink) f(e.point, e.sym, e.kv, 1.0);
    });
  };
  s.genBox = nullptr;
  return s;
}

ChainStream scaleStream(double a, ChainStream base) {
  ChainStream s = polyhedral({{a, std::move(base)}});
  s.description = "scaled " + s.description;
  return s;
}

// ---------------------------------------------------------------- JSON

ChainStream streamFromJson(const nlohmann::json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "cube") {
    checkKeys(j, {"kind", "lo", "hi"}, "domain");
    return cubeStream(j.at("lo").get<Vec>(), j.at("hi").get<Vec>());
  }
  if (kind == "cell") {
    checkKeys(j, {"kind", "p0", "edges", "orientation"}, "domain");
    return cellStream(j.at("p0").get<Vec>(), j.at("edges").get<std::vector<Vec>>(), j.value("orientation", 1.0));
  }
  if (kind == "simplex") {
    checkKeys(j, {"kind", "vertices", "orientation"}, "domain");
    return simplexStream(j.at("vertices").get<std::vector<Point>>(), j.value("orientation", 1.0));
  }
  if (kind == "polyhedral") {
    checkKeys(j, {"kind", "cells"}, "domain");
    std::vector<std::pair<double, ChainStream>> cells;
    for (auto& c : j.at("cells")) {
      checkKeys(c, {"weight", "cell"}, "polyhedral cell");
      cells.emplace_back(c.value("weight", 1.0), streamFromJson(c.at("cell")));
    }
    return polyhedral(std::move(cells));
  }
  if (kind == "box-boundary") {
    checkKeys(j, {"kind", "lo", "hi"}, "domain");
    return boxBoundaryStream(j.at("lo").get<Vec>(), j.at("hi").get<Vec>());
  }
  if (kind == "open") {
    checkKeys(j, {"kind", "region"}, "domain");
    return openSetStream(regionFromJson(j.at("region")));
  }
  if (kind == "cantor") {
    checkKeys(j, {"kind"}, "domain");
    return cantorStream();
  }
  if (kind == "cantor-boundary") {
    checkKeys(j, {"kind"}, "domain");
    return cantorBoundaryStream();
  }
  if (kind == "sierpinski") {
    checkKeys(j, {"kind"}, "domain");
    return sierpinskiStream();
  }
  if (kind == "pushforward") {
    checkKeys(j, {"kind", "map", "base"}, "domain");
    ChainStream base = streamFromJson(j.at("base"));
    ChainStream s = algebraicStream(mapFromJson(j.at("map")), base);
    s.params = j;
    return s;
  }
  if (kind == "dipole") {
    checkKeys(j, {"kind", "v", "base"}, "domain");
    return dipoleCell(j.at("v").get<Vec>(), streamFromJson(j.at("base")));
  }
  if (kind == "field") {
    checkKeys(j, {"kind", "grade", "components", "region"}, "domain");
    OpenRegion u = regionFromJson(j.at("region"));
    std::vector<std::pair<Blade, Expr>> comps;
    for (auto& c : j.at("components")) {
      checkKeys(c, {"idx", "f"}, "field component");
      auto idx = c.at("idx").get<std::vector<int>>();
      comps.emplace_back(bladeFromIndices(idx), exprFromJson(c.at("f"), u.dim));
    }
    ChainStream s = vectorFieldRep(j.at("grade").get<int>(), std::move(comps), u);
    s.params = j;
    return s;
  }
  throw std::invalid_argument("domain: unknown kind '" + kind + "'");
}

// ---------------------------------------------------------------- integration

namespace {

double pairElement(const Form& w, std::span<const double> p, const SymTensor& s, const KVector& kv) {
  if (s.order() == 0) return w.evalMono(p, {}, kv);
  if (auto& b = s.basisIndices()) return w.evalMono(p, *b, kv);
  double v = 0;
  for (auto& [mono, c] : s.expand()) v += c * w.evalMono(p, mono, kv);
  return v;
}

struct Neumaier {
  double s = 0, c = 0;
  void add(double x) {
    double t = s + x;
    if (std::abs(s) >= std::abs(x)) c += (s - t) + x;
    else c += (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

}  // namespace

double pairStream(const Form& w, const ChainStream& s, int j, int threads) {
  if (w.grade() != s.grade) throw std::invalid_argument("integrate: form grade does not match the stream");
  if (w.dim() != s.dim) throw DimensionError("integrate: dimension mismatch");
  // The part count is fixed so that results do not depend on the thread count.
  const int nparts = 16;
  std::vector<Neumaier> sums(nparts);
  auto run = [&](int part) {
    Neumaier acc;
    s.gen(j, part, nparts, [&](std::span<const double> p, const SymTensor& sy, const KVector& kv, double wt) {
      acc.add(wt * pairElement(w, p, sy, kv));
    });
    sums[part] = acc;
  };
  int t = threadCount(threads);
  if (t <= 1) {
    for (int part = 0; part < nparts; ++part) run(part);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(t);
    for (int id = 0; id < t; ++id)
      pool.emplace_back([&, id] {
        try {
          for (int part = id; part < nparts; part += t) run(part);
        } catch (...) {
          errs[id] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  }
  Neumaier total;
  for (auto& x : sums) total.add(x.value());
  return total.value();
}

double aitken(double v0, double v1, double v2) {
  double d1 = v1 - v0, d2 = v2 - v1;
  if (d1 == 0.0 || d2 == 0.0) return v2;
  double ratio = d2 / d1;
  if (!(ratio > 0.1 && ratio < 0.9)) return v2;
  return v2 - d2 * d2 / (d2 - d1);
}

double richardson(std::span<const double> vals, std::span<const int> orders) {
  if (vals.size() < orders.size() + 1) throw std::invalid_argument("richardson: not enough values");
  std::vector<double> t(vals.end() - static_cast<long>(orders.size()) - 1, vals.end());
  for (int p : orders) {
    double f = std::ldexp(1.0, p) - 1.0;
    for (size_t i = 0; i + 1 < t.size(); ++i) t[i] = t[i + 1] + (t[i + 1] - t[i]) / f;
    t.pop_back();
  }
  return t[0];
}

IntegrateResult integrateStream(const Form& w, const ChainStream& s, const IntegrateConfig& cfg) {
  if (cfg.jmax < cfg.jmin) throw std::invalid_argument("integrate: empty depth range");
  if (s.normOrder > w.order() + 1)
    throw std::invalid_argument("integrate: form is not smooth enough for the stream's norm order");
  IntegrateResult res;
  double normBound = kInf;
  if (w.certifiable() && s.cauchyRate && s.domain.finite()) {
    int r = std::min(s.normOrder, w.order());
    normBound = certifiedNorm(w, r, s.domain);
  }
  std::vector<double> vals;
  int contracting = 0, expanding = 0;
  for (int j = cfg.jmin; j <= cfg.jmax; ++j) {
    double v = pairStream(w, s, j, cfg.threads);
    ConvRow row{j, v, std::nan(""), v, std::nan("")};
    if (!vals.empty()) row.diff = v - vals.back();
    if (!cfg.richardson.empty()) {
      if (vals.size() >= cfg.richardson.size()) {
        std::vector<double> tail(vals);
        tail.push_back(v);
        row.accelerated = richardson(tail, cfg.richardson);
      }
    } else if (vals.size() >= 2) {
      row.accelerated = aitken(vals[vals.size() - 2], vals.back(), v);
    }
    if (std::isfinite(normBound)) row.certified = normBound * s.tailBound(j);
    if (vals.size() >= 2) {
      double prev = vals.back() - vals[vals.size() - 2];
      if (std::abs(row.diff) > std::abs(prev) * 1.01 && std::abs(row.diff) > 1e-13 * std::max(1.0, std::abs(v)))
        ++expanding;
      else
        ++contracting;
    }
    vals.push_back(v);
    res.rows.push_back(row);
  }
  res.raw = vals.back();
  res.value = res.rows.back().accelerated;
  res.errorBound = std::isfinite(res.rows.back().certified) ? res.rows.back().certified : kInf;
  res.diverging = expanding > contracting;
  return res;
}

std::string convergenceCsv(const std::vector<ConvRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "j,value,diff,accelerated,certified_bound\n";
  auto num = [&](double x) {
    if (std::isnan(x)) os << "nan";
    else os << x;
  };
  for (auto& r : rows) {
    os << r.j << ',';
    num(r.value);
    os << ',';
    num(r.diff);
    os << ',';
    num(r.accelerated);
    os << ',';
    num(r.certified);
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------- blockwise norm bound

double streamDifferenceUB(const ChainStream& s, int j, int r) {
  if (!s.domain.finite()) throw std::invalid_argument("streamDifferenceUB: stream domain is unbounded");
  int n = s.dim;
  long long M = 1LL << j;
  const Vec& lo = s.domain.lo;
  const Vec& hi = s.domain.hi;
  Vec h(n);
  std::vector<long long> cells(n);
  for (int i = 0; i < n; ++i) {
    h[i] = (hi[i] - lo[i]) / M;
    cells[i] = h[i] > 0 ? M : 1;
  }
  Vec hinv(n);
  for (int i = 0; i < n; ++i) hinv[i] = h[i] > 0 ? 1.0 / h[i] : 0.0;
  auto cellCoord = [&](int i, double x) -> long long {
    double t = (x - lo[i]) * hinv[i];
    if (!(t > 0)) return 0;
    long long c = static_cast<long long>(t);
    return c < cells[i] ? c : cells[i] - 1;
  };

  struct Item {
    long long cell;
    int kv;
    double w;
    size_t off;
  };
  std::vector<KVector> kvs;  // interned k-vectors
  auto intern = [&](const KVector& a) {
    for (size_t i = kvs.size(); i-- > 0;)
      if (kvs[i] == a) return static_cast<int>(i);
    kvs.push_back(a);
    return static_cast<int>(kvs.size() - 1);
  };

  struct KeyHash {
    size_t operator()(const std::vector<long long>& k) const {
      unsigned long long h = 1469598103934665603ULL;
      for (long long v : k) {
        h ^= static_cast<unsigned long long>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 1099511628211ULL;
      }
      return static_cast<size_t>(h);
    }
  };
  std::unordered_map<std::vector<long long>, double, KeyHash> cache;
  NormOptions opt;
  opt.keepDecomposition = false;
  double total = 0;
  std::vector<Item> items, sorted;
  std::vector<double> coords;
  Vec origin(n);
  std::vector<long long> key;
  auto quant = [](double x) { return static_cast<long long>(x >= 0 ? x + 0.5 : x - 0.5); };

  for (long long slab = 0; slab < cells[0]; ++slab) {
    Vec blo(n, -kInf), bhi(n, kInf);
    if (cells[0] > 1) {
      if (slab > 0) blo[0] = lo[0] + slab * h[0];
      if (slab + 1 < cells[0]) bhi[0] = lo[0] + (slab + 1) * h[0];
    }
    items.clear();
    coords.clear();
    auto collect = [&](int level, double sign) {
      s.visitBox(level, blo, bhi, [&](std::span<const double> p, const SymTensor& sy, const KVector& kv, double w) {
        if (sy.order() > 0) throw std::invalid_argument("streamDifferenceUB: stream has order > 0 elements");
        long long c = 0;
        for (int i = 0; i < n; ++i) c = c * cells[i] + cellCoord(i, p[i]);
        items.push_back({c, intern(kv), sign * w, coords.size()});
        coords.insert(coords.end(), p.begin(), p.end());
      });
    };
    collect(j, 1.0);
    collect(j + 1, -1.0);
    if (items.empty()) continue;
    // Counting sort by cell (stable).
    long long cmin = items[0].cell, cmax = items[0].cell;
    for (auto& it : items) cmin = std::min(cmin, it.cell), cmax = std::max(cmax, it.cell);
    if (cmax - cmin < 64 * static_cast<long long>(items.size()) + 1024) {
      std::vector<size_t> start(cmax - cmin + 2, 0);
      for (auto& it : items) ++start[it.cell - cmin + 1];
      for (size_t i = 1; i < start.size(); ++i) start[i] += start[i - 1];
      sorted.resize(items.size());
      for (auto& it : items) sorted[start[it.cell - cmin]++] = it;
      items.swap(sorted);
    } else {
      std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.cell < b.cell; });
    }
    for (size_t a = 0; a < items.size();) {
      size_t b = a;
      while (b < items.size() && items[b].cell == items[a].cell) ++b;
      // Cell origin from the cell index.
      long long c = items[a].cell;
      for (int i = n - 1; i >= 0; --i) {
        origin[i] = lo[i] + (c % cells[i]) * h[i];
        c /= cells[i];
      }
      double wmax = 0;
      for (size_t t = a; t < b; ++t) wmax = std::max(wmax, std::abs(items[t].w));
      if (wmax == 0) {
        a = b;
        continue;
      }
      // Translation- and scale-invariant signature of the block.
      key.clear();
      auto put = [&](long long v) { key.push_back(v); };
      for (size_t t = a; t < b; ++t) {
        put(items[t].kv);
        put(quant(items[t].w / wmax * 1e12));
        for (int i = 0; i < n; ++i) {
          double rel = h[i] > 0 ? (coords[items[t].off + i] - origin[i]) * hinv[i] : coords[items[t].off + i];
          put(quant(rel * 1e9));
        }
      }
      auto it = cache.find(key);
      if (it == cache.end()) {
        std::vector<ChainElement> raw;
        for (size_t t = a; t < b; ++t) {
          Point p(coords.begin() + items[t].off, coords.begin() + items[t].off + n);
          raw.emplace_back(std::move(p), kvs[items[t].kv] * items[t].w);
        }
        double cost = normUB(DiracChain(n, std::move(raw)), r, std::nullopt, opt).upper;
        it = cache.emplace(key, cost / wmax).first;
      }
      total += it->second * wmax;
      a = b;
    }
  }
  // Blocks sharing a signature agree in relative geometry to 1e-9 of a cell;
  // the margin covers the resulting change in cost.
  return total * (1.0 + 1e-7);
}

}  // namespace chaincalc

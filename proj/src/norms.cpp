#include "chaincalc/norms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <tuple>

namespace chaincalc {

double DecompTerm::cost() const { return symNorm(sigma) * massBound(base.kv); }

// Neumaier summation: stage chains of fractals have millions of equal masses.
double massNorm(const DiracChain& a) {
  double s = 0, comp = 0;
  for (auto& e : a.elements()) {
    if (e.order() > 0) throw std::invalid_argument("massNorm: chain has elements of order > 0");
    double x = massBound(e.kv), t = s + x;
    comp += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  return s + comp;
}

std::vector<int> hungarian(const std::vector<double>& cost, int rows, int cols) {
  if (rows > cols) throw std::invalid_argument("hungarian: rows > cols");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0), minv(cols + 1);
  std::vector<int> p(cols + 1, 0), way(cols + 1, 0);
  std::vector<char> used(cols + 1);
  for (int i = 1; i <= rows; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        double cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) minv[j] = cur, way[j] = j0;
        if (minv[j] < delta) delta = minv[j], j1 = j;
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) u[p[j]] += delta, v[j] -= delta;
        else minv[j] -= delta;
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> ans(rows, -1);
  for (int j = 1; j <= cols; ++j)
    if (p[j]) ans[p[j] - 1] = j - 1;
  return ans;
}

namespace {

// c * Delta_sig(p; dirs[dir])
struct Term {
  std::vector<Vec> sig;
  Point p;
  double c;
  int dir;
};

double dist(const Point& a, const Point& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double vnorm(const Vec& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool firstNonzeroNegative(const Vec& u) {
  for (double x : u)
    if (x != 0.0) return x < 0;
  return false;
}

// Quantized key for grouping equal factor multisets.
using SigKey = std::vector<long long>;

SigKey sigKey(const std::vector<Vec>& sig, int dir) {
  std::vector<std::vector<long long>> fs;
  for (auto& u : sig) {
    std::vector<long long> q;
    for (double x : u) q.push_back(std::llround(x * 1e12));
    fs.push_back(std::move(q));
  }
  std::sort(fs.begin(), fs.end());
  SigKey k{dir};
  for (auto& f : fs) k.insert(k.end(), f.begin(), f.end());
  return k;
}

class Directions {
 public:
  // Returns (index, scale) with alpha = scale * dirs[index].
  std::pair<int, double> add(const KVector& a) {
    double s = a.terms().front().c;
    KVector d = a * (1.0 / s);
    std::vector<long long> key{d.grade()};
    for (auto& t : d.terms()) {
      key.push_back(t.blade);
      key.push_back(std::llround(t.c * 1e10));
    }
    auto it = index_.find(key);
    if (it != index_.end()) return {it->second, s};
    int id = static_cast<int>(dirs.size());
    dirs.push_back(d);
    mass.push_back(massBound(d));
    index_.emplace(std::move(key), id);
    return {id, s};
  }
  std::vector<KVector> dirs;
  std::vector<double> mass;

 private:
  std::map<std::vector<long long>, int> index_;
};

struct Cand {
  double d;
  int a, b;
};

struct Pairing {
  int a, b;  // indices into the group's positive / negative lists
  double flow;
};

struct Matcher {
  const std::optional<OpenRegion>* region;
  const NormOptions* opt;

  bool allowed(const Term& base, const std::vector<Vec>& sig, const Vec& u) const {
    if (!region->has_value()) return true;
    std::vector<Vec> f = sig;
    f.push_back(u);
    return insideRegion(SymTensor(static_cast<int>(u.size()), std::move(f)), base.p, **region);
  }

  Vec diff(const Term& a, const Term& b) const {
    Vec u(a.p.size());
    for (size_t i = 0; i < u.size(); ++i) u[i] = a.p[i] - b.p[i];
    return u;
  }

  // Pairing between a positive term a and negative term b is profitable when
  // |q_a - q_b| < 2: pair cost f*|u| vs keep cost 2f (per unit sigma-mass).
  bool candidate(const Term& a, const Term& b, double& d) const {
    d = dist(a.p, b.p);
    if (!(d < 2.0) || d == 0.0) return false;
    return allowed(b, a.sig, diff(a, b));
  }

  std::vector<Pairing> exact(const std::vector<const Term*>& pos, const std::vector<const Term*>& neg, double unit,
                             const std::vector<int>& pu, const std::vector<int>& nu) const {
    std::vector<int> rowOf, colOf;
    for (size_t i = 0; i < pos.size(); ++i)
      for (int k = 0; k < pu[i]; ++k) rowOf.push_back(static_cast<int>(i));
    for (size_t i = 0; i < neg.size(); ++i)
      for (int k = 0; k < nu[i]; ++k) colOf.push_back(static_cast<int>(i));
    bool flip = rowOf.size() > colOf.size();
    if (flip) std::swap(rowOf, colOf);
    int R = static_cast<int>(rowOf.size()), C = static_cast<int>(colOf.size());
    // Element-level savings, computed once per element pair.
    std::vector<double> save(pos.size() * neg.size(), 0.0);
    for (size_t i = 0; i < pos.size(); ++i)
      for (size_t k = 0; k < neg.size(); ++k) {
        double d;
        if (candidate(*pos[i], *neg[k], d)) save[i * neg.size() + k] = d - 2.0;
      }
    std::vector<double> cost(static_cast<size_t>(R) * C);
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) {
        int i = flip ? colOf[c] : rowOf[r], k = flip ? rowOf[r] : colOf[c];
        cost[static_cast<size_t>(r) * C + c] = save[i * neg.size() + k];
      }
    auto asg = hungarian(cost, R, C);
    std::map<std::pair<int, int>, int> count;
    for (int r = 0; r < R; ++r) {
      int c = asg[r];
      if (c < 0 || cost[static_cast<size_t>(r) * C + c] >= 0.0) continue;
      int i = flip ? colOf[c] : rowOf[r], k = flip ? rowOf[r] : colOf[c];
      ++count[{i, k}];
    }
    std::vector<Pairing> out;
    for (auto& [ik, n] : count) out.push_back({ik.first, ik.second, n * unit});
    return out;
  }

  std::vector<Pairing> greedy(const std::vector<const Term*>& pos, const std::vector<const Term*>& neg) const {
    std::vector<Cand> cands;
    const size_t brute = 4'000'000;
    if (pos.size() * neg.size() <= brute) {
      for (size_t i = 0; i < pos.size(); ++i)
        for (size_t k = 0; k < neg.size(); ++k) {
          double d;
          if (candidate(*pos[i], *neg[k], d)) cands.push_back({d, static_cast<int>(i), static_cast<int>(k)});
        }
    } else {
      cands = gridCandidates(pos, neg);
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
      if (x.d != y.d) return x.d < y.d;
      if (x.a != y.a) return x.a < y.a;
      return x.b < y.b;
    });
    std::vector<double> ra, rb;
    for (auto* t : pos) ra.push_back(std::abs(t->c));
    for (auto* t : neg) rb.push_back(std::abs(t->c));
    std::vector<int> sa(pos.size(), 0), sb(neg.size(), 0);
    std::vector<Pairing> out;
    for (auto& c : cands) {
      if (ra[c.a] <= 0 || rb[c.b] <= 0) continue;
      if (sa[c.a] >= opt->maxSplit || sb[c.b] >= opt->maxSplit) continue;
      double f = std::min(ra[c.a], rb[c.b]);
      ra[c.a] -= f, rb[c.b] -= f;
      if (ra[c.a] < 1e-15 * std::abs(pos[c.a]->c)) ra[c.a] = 0;
      if (rb[c.b] < 1e-15 * std::abs(neg[c.b]->c)) rb[c.b] = 0;
      ++sa[c.a], ++sb[c.b];
      out.push_back({c.a, c.b, f});
    }
    return out;
  }

  // Nearest candidates through a uniform grid: each positive term looks at
  // rings of cells until it has a handful of partners or the ring exceeds
  // the profitable radius.
  std::vector<Cand> gridCandidates(const std::vector<const Term*>& pos, const std::vector<const Term*>& neg) const {
    int n = static_cast<int>(pos.front()->p.size());
    Vec lo(n, std::numeric_limits<double>::infinity()), hi(n, -std::numeric_limits<double>::infinity());
    for (auto* t : neg)
      for (int i = 0; i < n; ++i) lo[i] = std::min(lo[i], t->p[i]), hi[i] = std::max(hi[i], t->p[i]);
    double vol = 1;
    int live = 0;
    for (int i = 0; i < n; ++i)
      if (hi[i] > lo[i]) vol *= hi[i] - lo[i], ++live;
    double h = live ? std::pow(vol / std::max<size_t>(1, neg.size() / 2), 1.0 / live) : 1.0;
    if (!(h > 0)) h = 1.0;
    auto cellOf = [&](const Point& p) {
      std::vector<long long> c(n);
      for (int i = 0; i < n; ++i) c[i] = static_cast<long long>(std::floor((p[i] - lo[i]) / h));
      return c;
    };
    std::map<std::vector<long long>, std::vector<int>> grid;
    for (size_t k = 0; k < neg.size(); ++k) grid[cellOf(neg[k]->p)].push_back(static_cast<int>(k));
    std::vector<Cand> out;
    const int want = 8;
    int maxRing = static_cast<int>(std::ceil(2.0 / h)) + 1;
    for (size_t i = 0; i < pos.size(); ++i) {
      auto c0 = cellOf(pos[i]->p);
      int found = 0;
      for (int ring = 0; ring <= maxRing && found < want; ++ring) {
        // Enumerate cells on the surface of the ring cube.
        std::vector<long long> off(n, -ring);
        while (true) {
          bool surface = false;
          for (int d = 0; d < n; ++d)
            if (std::llabs(off[d]) == ring) surface = true;
          if (surface || ring == 0) {
            std::vector<long long> c(n);
            for (int d = 0; d < n; ++d) c[d] = c0[d] + off[d];
            auto it = grid.find(c);
            if (it != grid.end())
              for (int k : it->second) {
                double dd;
                if (candidate(*pos[i], *neg[k], dd)) {
                  out.push_back({dd, static_cast<int>(i), k});
                  ++found;
                }
              }
          }
          int d = 0;
          while (d < n && off[d] == ring) off[d] = -ring, ++d;
          if (d == n) break;
          ++off[d];
        }
      }
    }
    return out;
  }
};

// Exact-shift pairing: a positive term at q pairs with a negative term of the
// same group at q - u or q + u. Tried next to the matching step so that a
// translated copy of a chain is recognized as a whole.
struct ShiftIndex {
  static constexpr double kRes = 1e-9;
  std::map<std::pair<SigKey, std::vector<long long>>, std::vector<int>> cells;

  static std::vector<long long> cell(const Point& p) {
    std::vector<long long> c;
    for (double x : p) c.push_back(std::llround(x / kRes));
    return c;
  }
};

struct Search {
  Matcher m;
  const NormOptions* opt;
  const Directions* dirs;
  int r;

  double cost(const Term& t) const {
    double s = 1;
    for (auto& f : t.sig) s *= vnorm(f);
    return s * std::abs(t.c) * dirs->mass[t.dir];
  }

  // Turns pairs (i, k, flow) into next-level terms and moves what is left to `done`.
  void finish(const std::vector<Term>& cur, const std::vector<std::tuple<int, int, double>>& pairs,
              std::vector<double>& left, std::vector<Term>& next, std::vector<Term>& done) const {
    for (auto& [i, k, flow] : pairs) {
      const Term& ta = cur[i];
      const Term& tb = cur[k];
      double f = std::min(flow, std::min(left[i], -left[k]));
      if (!(f > 0)) continue;
      left[i] -= f;
      left[k] += f;
      Vec du = m.diff(ta, tb);
      Term t{ta.sig, tb.p, f, ta.dir};
      if (firstNonzeroNegative(du)) {
        for (double& x : du) x = -x;
        t.p = ta.p;
        t.c = -f;
      }
      t.sig.push_back(std::move(du));
      next.push_back(std::move(t));
    }
    for (size_t i = 0; i < cur.size(); ++i) {
      double rel = std::abs(left[i]) / std::abs(cur[i].c);
      if (rel <= 1e-13) continue;
      Term t = cur[i];
      t.c = left[i];
      done.push_back(std::move(t));
    }
  }

  using Groups = std::map<SigKey, std::pair<std::vector<int>, std::vector<int>>>;

  Groups group(const std::vector<Term>& cur) const {
    Groups groups;
    for (size_t i = 0; i < cur.size(); ++i) {
      auto& g = groups[sigKey(cur[i].sig, cur[i].dir)];
      (cur[i].c > 0 ? g.first : g.second).push_back(static_cast<int>(i));
    }
    return groups;
  }

  // Optimal (unit split) or greedy matching inside each group.
  std::vector<std::tuple<int, int, double>> matching(const std::vector<Term>& cur, const Groups& groups,
                                                     const std::vector<double>& left) const {
    std::vector<std::tuple<int, int, double>> out;
    for (auto& [key, g0] : groups) {
      std::pair<std::vector<int>, std::vector<int>> g;
      for (int i : g0.first)
        if (std::abs(left[i]) > 1e-13 * std::abs(cur[i].c)) g.first.push_back(i);
      for (int i : g0.second)
        if (std::abs(left[i]) > 1e-13 * std::abs(cur[i].c)) g.second.push_back(i);
      if (g.first.empty() || g.second.empty()) continue;
      std::vector<Term> pv, nv;
      for (int i : g.first) pv.push_back(Term{cur[i].sig, cur[i].p, left[i], cur[i].dir});
      for (int i : g.second) nv.push_back(Term{cur[i].sig, cur[i].p, left[i], cur[i].dir});
      std::vector<const Term*> pos, neg;
      for (auto& t : pv) pos.push_back(&t);
      for (auto& t : nv) neg.push_back(&t);
      // Unit splitting when every mass is a small integer multiple of the smallest.
      double unit = std::numeric_limits<double>::infinity();
      for (auto* t : pos) unit = std::min(unit, std::abs(t->c));
      for (auto* t : neg) unit = std::min(unit, std::abs(t->c));
      std::vector<int> pu, nu;
      bool integral = true;
      int units = 0;
      auto split = [&](const std::vector<const Term*>& ts, std::vector<int>& o) {
        for (auto* t : ts) {
          double q = std::abs(t->c) / unit;
          long long k = std::llround(q);
          if (k < 1 || k > opt->maxSplit || std::abs(q - k) > 1e-9 * q) integral = false;
          o.push_back(static_cast<int>(k));
          units += static_cast<int>(k);
        }
      };
      split(pos, pu);
      split(neg, nu);
      std::vector<Pairing> pairs;
      if (integral && units <= opt->hungarianLimit) {
        pairs = m.exact(pos, neg, unit, pu, nu);
        for (auto& p : pairs) {
          double fa = pos[p.a]->c / pu[p.a], fb = -neg[p.b]->c / nu[p.b];
          p.flow = std::min(fa, fb) * std::llround(p.flow / unit);
        }
      } else {
        pairs = m.greedy(pos, neg);
      }
      for (auto& p : pairs) out.emplace_back(g.first[p.a], g.second[p.b], p.flow);
    }
    return out;
  }

  // Up to two shift vectors pairing the most mass, oriented like the
  // difference factors.
  std::vector<Vec> shiftCandidates(const std::vector<Term>& cur, const Groups& groups) const {
    std::map<std::vector<long long>, Vec> cands;
    for (auto& [key, g] : groups) {
      if (g.first.empty() || g.second.empty()) continue;
      // Both sides seed candidates so that negating the chain changes nothing.
      auto seed = [&](const std::vector<int>& few, const std::vector<int>& all) {
        for (size_t a = 0; a < std::min<size_t>(few.size(), 3); ++a)
          for (int k : all) {
            Vec u = m.diff(cur[few[a]], cur[k]);
            if (firstNonzeroNegative(u))
              for (double& x : u) x = -x;
            double d = vnorm(u);
            if (!(d > 0) || !(d < 2.0)) continue;
            cands.emplace(ShiftIndex::cell(u), u);
          }
      };
      seed(g.first, g.second);
      seed(g.second, g.first);
    }
    if (cands.empty()) return {};
    ShiftIndex idx;
    for (size_t i = 0; i < cur.size(); ++i)
      if (cur[i].c < 0)
        idx.cells[{sigKey(cur[i].sig, cur[i].dir), ShiftIndex::cell(cur[i].p)}].push_back(static_cast<int>(i));
    std::vector<std::pair<double, Vec>> scored;
    for (auto& [q, u] : cands) {
      std::vector<double> left(cur.size());
      for (size_t i = 0; i < cur.size(); ++i) left[i] = cur[i].c;
      double matched = shiftPairs(cur, idx, u, left).second;
      if (matched > 0) scored.emplace_back(matched, u);
      if (scored.size() > 64) break;
    }
    std::stable_sort(scored.begin(), scored.end(), [](auto& x, auto& y) { return x.first > y.first; });
    std::vector<Vec> out;
    for (size_t i = 0; i < std::min<size_t>(scored.size(), 2); ++i) out.push_back(scored[i].second);
    return out;
  }

  std::pair<std::vector<std::tuple<int, int, double>>, double> shiftPairs(const std::vector<Term>& cur,
                                                                          const ShiftIndex& idx, const Vec& u,
                                                                          std::vector<double>& left) const {
    std::vector<std::tuple<int, int, double>> out;
    double matched = 0;
    for (size_t i = 0; i < cur.size(); ++i) {
      if (!(cur[i].c > 0)) continue;
      SigKey key = sigKey(cur[i].sig, cur[i].dir);
      for (double s : {-1.0, 1.0}) {
        if (!(left[i] > 0)) break;
        Point q = cur[i].p;
        for (size_t d = 0; d < q.size(); ++d) q[d] += s * u[d];
        auto it = idx.cells.find({key, ShiftIndex::cell(q)});
        if (it == idx.cells.end()) continue;
        for (int k : it->second) {
          if (!(left[k] < 0) || dist(cur[k].p, q) > ShiftIndex::kRes) continue;
          double d;
          if (!m.candidate(cur[i], cur[k], d)) continue;
          double f = std::min(left[i], -left[k]);
          left[i] -= f;
          left[k] += f;
          matched += f * dirs->mass[cur[i].dir];
          out.emplace_back(static_cast<int>(i), k, f);
          if (!(left[i] > 0)) break;
        }
      }
    }
    return {out, matched};
  }

  // Best decomposition from level j on; returns its cost and fills `done`.
  double run(const std::vector<Term>& cur, int j, std::vector<Term>& done) const {
    if (j > r || cur.empty()) {
      double c = 0;
      for (auto& t : cur) c += cost(t);
      done.insert(done.end(), cur.begin(), cur.end());
      return c;
    }
    Groups groups = group(cur);
    std::vector<std::optional<Vec>> options{std::nullopt};
    if (static_cast<int>(cur.size()) <= opt->shiftLimit)
      for (auto& u : shiftCandidates(cur, groups)) options.emplace_back(u);
    double best = std::numeric_limits<double>::infinity();
    std::vector<Term> bestDone;
    for (auto& o : options) {
      std::vector<double> left(cur.size());
      for (size_t i = 0; i < cur.size(); ++i) left[i] = cur[i].c;
      std::vector<std::tuple<int, int, double>> pairs;
      if (o) {
        ShiftIndex idx;
        for (size_t i = 0; i < cur.size(); ++i)
          if (cur[i].c < 0)
            idx.cells[{sigKey(cur[i].sig, cur[i].dir), ShiftIndex::cell(cur[i].p)}].push_back(static_cast<int>(i));
        std::vector<double> scratch = left;
        pairs = shiftPairs(cur, idx, *o, scratch).first;
        // The remainder goes through the ordinary matching.
        auto rest = matching(cur, groups, scratch);
        pairs.insert(pairs.end(), rest.begin(), rest.end());
      } else {
        pairs = matching(cur, groups, left);
      }
      std::vector<Term> next, d;
      finish(cur, pairs, left, next, d);
      double c = 0;
      for (auto& t : d) c += cost(t);
      if (c >= best) continue;
      c += run(next, j + 1, d);
      if (c < best) {
        best = c;
        bestDone = std::move(d);
      }
    }
    done.insert(done.end(), std::make_move_iterator(bestDone.begin()), std::make_move_iterator(bestDone.end()));
    return best;
  }
};

}  // namespace

// Level-by-level decomposition search. Step j pairs opposite (j-1)-difference
// terms with equal factors and equal k-vector direction into j-difference
// terms; unpaired terms stay in the decomposition at their level. Small
// inputs also try exact-shift pairings at each level and keep the cheapest.
NormEstimate normUB(const DiracChain& a, int r, const std::optional<OpenRegion>& u, const NormOptions& opt) {
  if (r < 0) throw std::invalid_argument("normUB: negative order");
  NormEstimate est;
  est.r = r;
  int n = a.dim();
  Directions dirs;
  std::vector<Term> cur;
  for (auto& e : a.elements()) {
    if (e.order() > 0) throw std::invalid_argument("normUB: chain has elements of order > 0");
    if (e.kv.isZero()) continue;
    auto [id, s] = dirs.add(e.kv);
    cur.push_back({{}, e.point, s, id});
  }
  Search search{Matcher{&u, &opt}, &opt, &dirs, r};
  std::vector<Term> done;
  est.upper = search.run(cur, 1, done);
  if (opt.keepDecomposition)
    for (auto& t : done)
      est.decomposition.push_back({SymTensor(n, t.sig), ChainElement(t.p, dirs.dirs[t.dir] * t.c)});
  return est;
}

DiracChain decompositionChain(int dim, const std::vector<DecompTerm>& d) {
  std::vector<ChainElement> raw;
  for (auto& t : d) {
    auto verts = parallelepipedVertices(t.sigma, t.base.point);
    int j = t.sigma.order();
    for (unsigned mask = 0; mask < verts.size(); ++mask) {
      int ones = __builtin_popcount(mask);
      double s = ((j - ones) & 1) ? -1.0 : 1.0;
      raw.emplace_back(std::move(verts[mask]), t.base.kv * s);
    }
  }
  return DiracChain(dim, std::move(raw));
}

std::vector<Form> defaultDictionary(const DiracChain& a) {
  std::vector<Form> out;
  if (a.empty()) return out;
  int n = a.dim();
  Vec lo(n, std::numeric_limits<double>::infinity()), hi(n, -std::numeric_limits<double>::infinity());
  std::vector<int> grades;
  for (auto& e : a.elements()) {
    for (int i = 0; i < n; ++i) lo[i] = std::min(lo[i], e.point[i]), hi[i] = std::max(hi[i], e.point[i]);
    if (std::find(grades.begin(), grades.end(), e.grade()) == grades.end()) grades.push_back(e.grade());
  }
  double half = 0;
  for (int i = 0; i < n; ++i) half = std::max(half, (hi[i] - lo[i]) / 2);
  if (!(half > 0)) half = 1;
  Box box{lo, hi};
  // y_i = (x_i - c_i) / half, so |y_i| <= 1 on the box.
  std::vector<Expr> y;
  for (int i = 0; i < n; ++i) y.push_back((Expr::var(i, n) - Expr((lo[i] + hi[i]) / 2)) * Expr(1.0 / half));
  std::vector<Expr> mult{Expr(1.0)};
  for (int i = 0; i < n; ++i) mult.push_back(y[i]);
  for (int i = 0; i < n; ++i)
    for (int l = i; l < n; ++l) mult.push_back(y[i] * y[l]);
  std::sort(grades.begin(), grades.end());
  for (int k : grades)
    for (Blade b = 0; b < (Blade{1} << n); ++b) {
      if (bladeGrade(b) != k) continue;
      for (auto& f : mult) out.push_back(Form(n, k, {{b, f}}).withDomain(box));
    }
  return out;
}

NormEstimate normLB(const DiracChain& a, int r, const std::vector<Form>& dict) {
  if (dict.empty()) throw std::invalid_argument("normLB: empty dictionary");
  NormEstimate est;
  est.r = r;
  if (a.empty()) return est;
  std::map<int, DiracChain> byGrade;
  for (auto& w : dict) {
    if (!w.certifiable()) throw std::invalid_argument("normLB: dictionary form without certified bound");
    if (!byGrade.count(w.grade())) byGrade.emplace(w.grade(), a.gradeView(w.grade()));
    const DiracChain& part = byGrade.at(w.grade());
    if (part.empty()) continue;
    std::optional<Box> box = w.domain();
    if (!box) box = Box::around(a);
    double bound = certifiedNorm(w, r, box);
    if (!(bound > 0)) continue;
    double v = std::abs(evalChain(w, part)) / bound;
    // A lower bound for the full chain needs the other grades to vanish on w,
    // which holds since w only sees its own grade.
    if (v > est.lower) {
      est.lower = v;
      est.witness = w;
    }
  }
  return est;
}

NormEstimate estimateNorm(const DiracChain& a, int r, const std::optional<OpenRegion>& u) {
  NormEstimate up = normUB(a, r, u);
  NormEstimate lo = normLB(a, r, defaultDictionary(a));
  up.lower = lo.lower;
  up.witness = lo.witness;
  return up;
}

}  // namespace chaincalc

#include "chaincalc/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace chaincalc {

// ---------------------------------------------------------------- random inputs

std::uint64_t Rng::next() {
  std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform(double a, double b) { return a + (b - a) * static_cast<double>(next() >> 11) * 0x1.0p-53; }

int Rng::integer(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }

Vec Rng::vector(int n, double a, double b) {
  Vec v(n);
  for (auto& x : v) x = uniform(a, b);
  return v;
}

KVector randomKVector(Rng& g, int n, int k) {
  KVector a(n, k);
  for (Blade b = 0; b < (1u << n); ++b)
    if (bladeGrade(b) == k) a.add(b, g.uniform(-1, 1));
  return a;
}

DiracChain randomChain(Rng& g, int n, int k, int maxOrder, int size, double spread) {
  std::vector<ChainElement> raw;
  for (int i = 0; i < size; ++i) {
    Point p = g.vector(n, -spread, spread);
    int s = g.integer(0, maxOrder);
    std::vector<Vec> f;
    bool basis = g.integer(0, 1) == 0;
    for (int t = 0; t < s; ++t) {
      if (basis) {
        Vec e(n, 0.0);
        e[g.integer(0, n - 1)] = 1.0;
        f.push_back(e);
      } else {
        f.push_back(g.vector(n));
      }
    }
    raw.emplace_back(std::move(p), SymTensor(n, std::move(f)), randomKVector(g, n, k));
  }
  return DiracChain(n, std::move(raw));
}

namespace {

Expr randomPoly(Rng& g, int n, int degree, int terms) {
  Polynomial p = Polynomial::constant(g.uniform(-1, 1), n);
  for (int t = 0; t < terms; ++t) {
    std::vector<int> e(n, 0);
    int d = g.integer(1, std::max(1, degree));
    for (int i = 0; i < d; ++i) ++e[g.integer(0, n - 1)];
    p = p + Polynomial::monomial(e, g.uniform(-1, 1));
  }
  return Expr(p);
}

Expr var(int i, int n) { return Expr::var(i, n); }

double seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Form randomPolyForm(Rng& g, int n, int k, int degree, int terms) {
  std::vector<std::pair<Blade, Expr>> c;
  for (Blade b = 0; b < (1u << n); ++b)
    if (bladeGrade(b) == k) c.emplace_back(b, randomPoly(g, n, degree, terms));
  return Form(n, k, std::move(c));
}

VectorFieldB randomPolyField(Rng& g, int n, int degree, int terms) {
  std::vector<Expr> c;
  for (int i = 0; i < n; ++i) c.push_back(randomPoly(g, n, degree, terms));
  return VectorFieldB(std::move(c));
}

SmoothMap randomQuadraticMap(Rng& g, int n) {
  std::vector<Expr> c;
  for (int i = 0; i < n; ++i) {
    Expr e = var(i, n);
    for (int t = 0; t < 2; ++t) {
      int a = g.integer(0, n - 1), b = g.integer(0, n - 1);
      e = e + Expr(0.3 * g.uniform(-1, 1)) * var(a, n) * var(b, n);
    }
    c.push_back(e + Expr(0.2 * g.uniform(-1, 1)) * var(g.integer(0, n - 1), n));
  }
  return SmoothMap(n, std::move(c));
}

double boxIntegral(const Polynomial& p, const Vec& lo, const Vec& hi) {
  int n = static_cast<int>(lo.size());
  double total = 0;
  for (size_t t = 0; t < p.termCount(); ++t) {
    double v = p.coeff(t);
    for (int i = 0; i < n; ++i) {
      int e = i < p.nvars() ? p.exps(t)[i] : 0;
      v *= (std::pow(hi[i], e + 1) - std::pow(lo[i], e + 1)) / (e + 1);
    }
    total += v;
  }
  return total;
}

// ---------------------------------------------------------------- results

void SuiteResult::add(CheckLine c) {
  pass = pass && c.pass;
  checks.push_back(std::move(c));
}

nlohmann::json toJson(const SuiteResult& r) {
  nlohmann::json j = {{"suite", r.name}, {"title", r.title}, {"pass", r.pass}, {"seconds", r.seconds}};
  auto& cs = j["checks"] = nlohmann::json::array();
  for (auto& c : r.checks) {
    nlohmann::json x = {{"name", c.name}, {"value", c.value}, {"limit", c.limit}, {"pass", c.pass}};
    if (!c.note.empty()) x["note"] = c.note;
    cs.push_back(x);
  }
  return j;
}

namespace {

// Running maximum of residuals for one named identity.
struct MaxRes {
  std::string name;
  double limit;
  double worst = 0;
  int count = 0;
  void see(double r) {
    ++count;
    if (!(r <= worst)) worst = r;  // NaN sticks
  }
  CheckLine line() const {
    return {name, worst, limit, worst <= limit, std::to_string(count) + " cases"};
  }
};

std::vector<int> dims(const SuiteOptions& o, int lo, int hi) {
  if (o.n > 0) return {o.n};
  std::vector<int> d;
  for (int n = lo; n <= hi; ++n) d.push_back(n);
  return d;
}

double vnorm(const Vec& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Certified |limit - value_j| for a stream, infinite when unavailable.
double certifiedTail(const Form& w, const ChainStream& s, int j) {
  if (!w.certifiable() || !s.cauchyRate || !s.domain.finite()) return std::numeric_limits<double>::infinity();
  return certifiedNorm(w, std::min(s.normOrder, w.order()), s.domain) * s.tailBound(j);
}

// ---------------------------------------------------------------- criterion 1

SuiteResult suiteStokes(const SuiteOptions& o) {
  SuiteResult r{"stokes", "exact Stokes on Dirac chains"};
  Rng g(o.seed);
  MaxRes m{"|w(dJ) - dw(J)|", 1e-10};
  auto ns = dims(o, 1, 4);
  int cases = 0;
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; cases < 200; ++i) {
    int n = ns[i % ns.size()];
    int k = o.grade >= 0 ? o.grade : g.integer(1, n);
    if (k < 1 || k > n) throw std::invalid_argument("verify stokes: grade must lie in 1..n");
    int s = i % 3;
    DiracChain J = randomChain(g, n, k, s, g.integer(2, 6));
    Form w = randomPolyForm(g, n, k - 1, 3);
    m.see(std::abs(evalChain(w, boundary(J)) - evalChain(exteriorD(w), J)));
    ++cases;
  }
  r.add(m.line());
  double t = seconds(t0);
  r.add({"runtime seconds", t, 5.0, t < 5.0, ""});
  return r;
}

// ---------------------------------------------------------------- criterion 2

SuiteResult suiteDuality(const SuiteOptions& o) {
  SuiteResult r{"duality", "operator duality"};
  Rng g(o.seed + 1);
  const double tol = 1e-10;
  MaxRes ext{"E_v / i_v", tol}, ret{"E_v^dagger / v-flat wedge", tol}, pre{"P_v / L_v", tol}, bd{"boundary / d", tol},
      pp{"perp / star", tol}, cob{"coboundary / codifferential", tol}, lap{"laplace / laplacian", tol},
      dirb{"dirBoundary / d_v", tol}, mul{"m_f / f", tol}, push{"F_* / F^*", tol}, lap1{"laplace^1 / Delta^1", 1e-9},
      lap2{"laplace^2 / Delta^2", 1e-9};
  auto ns = dims(o, 1, 4);
  for (int i = 0; i < 40; ++i) {
    int n = ns[i % ns.size()];
    int k = o.grade >= 0 ? o.grade : g.integer(0, n);
    if (k < 0 || k > n) throw std::invalid_argument("verify duality: grade must lie in 0..n");
    int s = i % 3;
    DiracChain A = randomChain(g, n, k, s, g.integer(2, 5));
    Vec v = g.vector(n);
    auto res = [&](const Form& w, const DiracChain& chainSide, const Form& formSide) {
      return std::abs(evalChain(w, chainSide) - evalChain(formSide, A));
    };
    if (k < n) {
      Form w = randomPolyForm(g, n, k + 1, 3);
      ext.see(res(w, extrude(v, A), interior(VectorFieldB::constant(v), w)));
      Form w2 = randomPolyForm(g, n, k + 1, 3);
      cob.see(res(w2, coboundary(A), codifferential(w2)));
    }
    if (k > 0) {
      Form w = randomPolyForm(g, n, k - 1, 3);
      ret.see(res(w, retract(v, A), flatWedge(VectorFieldB::constant(v), w)));
      bd.see(res(w, boundary(A), exteriorD(w)));
      dirb.see(res(w, dirBoundary(v, A), dirExteriorD(v, w)));
    }
    {
      Form w = randomPolyForm(g, n, k, 3);
      pre.see(res(w, prederiv(v, A), lie(VectorFieldB::constant(v), w)));
      lap.see(res(w, geomLaplace(A), laplacian(w)));
      Form f = Form::scalar(n, randomPoly(g, n, 2, 2));
      mul.see(res(w, multiplyChain(f, A), multiplyForm(f, w)));
      Form wp = randomPolyForm(g, n, n - k, 3);
      pp.see(res(wp, perp(A), hodge(wp)));
    }
    {
      // Non-affine maps act on order-0 chains; affine maps at every order.
      DiracChain A0 = randomChain(g, n, k, 0, 3);
      SmoothMap F = randomQuadraticMap(g, n);
      Form w = randomPolyForm(g, n, k, 3);
      push.see(std::abs(evalChain(w, pushforward(F, A0)) - evalChain(pullback(F, w), A0)));
      std::vector<double> M(n * n);
      for (auto& x : M) x = g.uniform(-1, 1);
      SmoothMap L = SmoothMap::linear(n, n, M, g.vector(n));
      push.see(res(w, pushforward(L, A), pullback(L, w)));
    }
    {
      // Higher order divergence theorem, s = 1, 2.
      Form w = randomPolyForm(g, n, k, 4);
      DiracChain L1 = geomLaplace(A);
      Form d1 = laplacian(w);
      lap1.see(std::abs(evalChain(w, L1) - evalChain(d1, A)));
      lap2.see(std::abs(evalChain(w, geomLaplace(L1)) - evalChain(laplacian(d1), A)));
    }
  }
  for (auto* m : {&ext, &ret, &pre, &bd, &pp, &cob, &lap, &dirb, &mul, &push, &lap1, &lap2})
    if (m->count > 0) r.add(m->line());
  return r;
}

// ---------------------------------------------------------------- criterion 3

SuiteResult suiteAlgebra(const SuiteOptions& o) {
  SuiteResult r{"algebra", "algebraic identities"};
  Rng g(o.seed + 2);
  const double tol = 1e-12;
  MaxRes dd{"boundary o boundary = 0", tol}, cartan{"{boundary, E_v} = P_v", tol}, pvw{"[P_v, P_w] = 0", tol},
      evw{"[E_v, P_w] = 0", tol}, rvw{"[E_v^dagger, P_w] = 0", tol}, car{"{E_v, E_w^dagger} = <v,w> I", tol},
      cl{"C_v^2 = <v,v> I", tol}, pp{"perp perp = (-1)^{k(n-k)} I", tol}, ppEven{"  (even n only)", tol},
      ppRel{"perp perp = (-1)^{n+k(n-k)} I, implied by a ^ perp a = (-1)^k |a|^2 vol", tol};
  auto ns = dims(o, 1, 4);
  for (int i = 0; i < 500; ++i) {
    int n = ns[i % ns.size()];
    int k = o.grade >= 0 ? o.grade : g.integer(0, n);
    if (k < 0 || k > n) throw std::invalid_argument("verify algebra: grade must lie in 0..n");
    DiracChain A = randomChain(g, n, k, i % 3, g.integer(1, 4));
    DiracChain A0 = randomChain(g, n, k, 0, g.integer(1, 4));
    Vec v = g.vector(n), w = g.vector(n);
    double vw = 0, vv = 0;
    for (int t = 0; t < n; ++t) vw += v[t] * w[t], vv += v[t] * v[t];
    dd.see(boundary(boundary(A)).maxCoeff());
    if (k < n) {
      DiracChain lhs = boundary(extrude(v, A)) + (k > 0 ? extrude(v, boundary(A)) : DiracChain(n));
      cartan.see(maxDifference(lhs, prederiv(v, A)));
      evw.see(maxDifference(extrude(v, prederiv(w, A)), prederiv(w, extrude(v, A))));
    }
    pvw.see(maxDifference(prederiv(v, prederiv(w, A)), prederiv(w, prederiv(v, A))));
    if (k > 0) rvw.see(maxDifference(retract(v, prederiv(w, A)), prederiv(w, retract(v, A))));
    if (k > 0 && k < n) car.see(maxDifference(extrude(v, retract(w, A0)) + retract(w, extrude(v, A0)), vw * A0));
    cl.see(maxDifference(clifford(v, clifford(v, A0)), vv * A0));
    double sg = (k * (n - k)) % 2 ? -1.0 : 1.0;
    double d = maxDifference(perp(perp(A)), sg * A);
    pp.see(d);
    if (n % 2 == 0) ppEven.see(d);
    ppRel.see(maxDifference(perp(perp(A)), (n % 2 ? -sg : sg) * A));
  }
  for (auto* m : {&dd, &cartan, &pvw, &evw, &rvw, &car, &cl, &pp, &ppEven, &ppRel})
    if (m->count > 0) r.add(m->line());
  // Informational: where the star fixed by perp departs from w ^ *w = |w|^2 vol.
  for (int n : ns) {
    int off = 0, total = 0;
    std::string where;
    for (auto& row : hodgeConventionTable(n)) {
      ++total;
      if (row.sign == 1) continue;
      ++off;
      if (where.size() < 60) {
        where += " [";
        for (int i : row.idx) where += std::to_string(i);
        where += row.sign < 0 ? "]-" : "]0";
      }
    }
    r.add({"star convention report, n=" + std::to_string(n), double(off), double(total), true,
           std::to_string(off) + " of " + std::to_string(total) + " blades have dx_I ^ *dx_I = -vol" + where});
  }
  return r;
}

// ---------------------------------------------------------------- criterion 4

SuiteResult suiteCommutators(const SuiteOptions& o) {
  SuiteResult r{"commutators", "vector-field commutators, bracket [V1,V2] = DV2 V1 - DV1 V2"};
  Rng g(o.seed + 3);
  const double tol = 1e-8;
  MaxRes pp{"[P_V1, P_V2] = P_[V1,V2]", tol}, ep{"[E_V2, P_V1] = E_[V1,V2]", tol},
      rp{"[E_V2^dagger, P_V1] = E^dagger_[V1,V2]", tol};
  auto ns = o.n > 0 ? std::vector<int>{o.n} : std::vector<int>{2, 3};
  for (int i = 0; i < 60; ++i) {
    int n = ns[i % ns.size()];
    int k = o.grade >= 0 ? o.grade : g.integer(0, n);
    VectorFieldB V1 = randomPolyField(g, n, 2, 2), V2 = randomPolyField(g, n, 2, 2);
    VectorFieldB B = bracket(V1, V2);
    DiracChain A = randomChain(g, n, k, i % 2, 3);
    {
      Form w = randomPolyForm(g, n, k, 3);
      double lhs = evalChain(w, prederiv(V1, prederiv(V2, A))) - evalChain(w, prederiv(V2, prederiv(V1, A)));
      pp.see(std::abs(lhs - evalChain(w, prederiv(B, A))));
    }
    if (k < n) {
      Form w = randomPolyForm(g, n, k + 1, 3);
      double lhs = evalChain(w, extrude(V2, prederiv(V1, A))) - evalChain(w, prederiv(V1, extrude(V2, A)));
      ep.see(std::abs(lhs - evalChain(w, extrude(B, A))));
    }
    if (k > 0) {
      Form w = randomPolyForm(g, n, k - 1, 3);
      double lhs = evalChain(w, retract(V2, prederiv(V1, A))) - evalChain(w, prederiv(V1, retract(V2, A)));
      rp.see(std::abs(lhs - evalChain(w, retract(B, A))));
    }
  }
  for (auto* m : {&pp, &ep, &rp})
    if (m->count > 0) r.add(m->line());
  return r;
}

// ---------------------------------------------------------------- criterion 5

SuiteResult suiteCubeRate(const SuiteOptions& o) {
  SuiteResult r{"cuberate", "cube-stream Cauchy rate"};
  auto t0 = std::chrono::steady_clock::now();
  auto ns = o.n > 0 ? std::vector<int>{o.n} : std::vector<int>{2, 3};
  for (int n : ns) {
    ChainStream s = cubeStream(Vec(n, 0.0), Vec(n, 1.0));
    for (int j = 1; j <= 8; ++j) {
      double ub = streamDifferenceUB(s, j, 1);
      double lim = std::ldexp(1.0, -j + 1);
      r.add({"n=" + std::to_string(n) + " j=" + std::to_string(j) + " normUB(P_j - P_{j+1}, 1)", ub, lim, ub <= lim, ""});
    }
  }
  double t = seconds(t0);
  r.add({"runtime seconds", t, 30.0, t < 30.0, ""});
  return r;
}

// ---------------------------------------------------------------- criterion 6

struct RiemannCase {
  int n;
  Polynomial f;
  std::string label;
};

std::vector<RiemannCase> riemannCases() {
  auto P = [](std::vector<std::pair<std::vector<int>, double>> t) {
    Polynomial p(static_cast<int>(t[0].first.size()));
    for (auto& [e, c] : t) p = p + Polynomial::monomial(e, c);
    return p;
  };
  return {
      {2, P({{{1, 1}, 1}}), "xy"},
      {2, P({{{2, 1}, 1}}), "x^2 y"},
      {2, P({{{3, 0}, 1}, {{0, 3}, 1}}), "x^3 + y^3"},
      {2, P({{{2, 2}, 1}, {{1, 1}, -3}, {{0, 0}, 1}}), "x^2 y^2 - 3xy + 1"},
      {2, P({{{4, 1}, 2}, {{0, 5}, -1}, {{1, 0}, 0.5}}), "2x^4 y - y^5 + x/2"},
      {3, P({{{1, 1, 1}, 1}}), "xyz"},
      {3, P({{{2, 1, 0}, 1}, {{0, 0, 3}, 1}}), "x^2 y + z^3"},
      {3, P({{{2, 2, 2}, 1}}), "x^2 y^2 z^2"},
      {3, P({{{0, 0, 0}, 1}, {{1, 0, 0}, 1}, {{0, 1, 2}, 1}}), "1 + x + y z^2"},
      {3, P({{{3, 1, 1}, 1}, {{0, 2, 0}, -1}}), "x^3 y z - y^2"},
  };
}

SuiteResult suiteRiemann(const SuiteOptions&) {
  SuiteResult r{"riemann", "Riemann agreement on the unit square and cube"};
  for (auto& c : riemannCases()) {
    Vec lo(c.n, 0.0), hi(c.n, 1.0);
    double exact = boxIntegral(c.f, lo, hi);
    Form w(c.n, c.n, {{static_cast<Blade>((1u << c.n) - 1), Expr(c.f)}});
    // Squares reach depth 10 directly; cubes stop at 7 and rely on extrapolation.
    IntegrateConfig cfg;
    cfg.jmin = c.n == 2 ? 6 : 3;
    cfg.jmax = c.n == 2 ? 10 : 7;
    IntegrateResult res = integrateStream(w, cubeStream(lo, hi), cfg);
    double err = std::abs(res.value - exact);
    std::ostringstream note;
    note << std::setprecision(6) << "j=" << cfg.jmax << " raw error " << std::abs(res.raw - exact)
         << ", certified tail bound " << res.errorBound;
    r.add({"n=" + std::to_string(c.n) + " " + c.label, err, 1e-6, err <= 1e-6, note.str()});
  }
  return r;
}

// ---------------------------------------------------------------- criterion 7

SuiteResult suiteCantor(const SuiteOptions&) {
  SuiteResult r{"cantor", "Cantor set boundary and stage mass"};
  Form x = Form::scalar(1, var(0, 1));
  ChainStream gamma = cantorStream();
  ChainStream endpoints = cantorBoundaryStream();
  double worst = 0, worstMass = 0, worstEnd = 0;
  for (int n = 0; n <= 20; ++n) {
    double v = evalChain(x, boundary(gamma.snapshot(n)));
    worst = std::max(worst, std::abs(v - 1.0));
    double m = massNorm(cantorStage(n)), ex = std::pow(2.0 / 3.0, n);
    worstMass = std::max(worstMass, std::abs(m - ex) / ex);
    worstEnd = std::max(worstEnd, std::abs(pairStream(x, endpoints, n) - 1.0));
  }
  r.add({"max_n<=20 |int_{boundary Gamma_n} x - 1|", worst, 1e-12, worst <= 1e-12, ""});
  r.add({"max_n<=20 |mass(E_n) - (2/3)^n| / (2/3)^n", worstMass, 1e-14, worstMass <= 1e-14, ""});
  std::ostringstream note;
  note << "endpoint stream, weights (3/2)^n at rounded endpoints: max error " << std::setprecision(3) << worstEnd;
  r.add({"endpoint stream error (reported)", worstEnd, 1e-8, worstEnd <= 1e-8, note.str()});
  return r;
}

// ---------------------------------------------------------------- criterion 8

// Two-sided stream computation |lhs - rhs| with the combined certified bound.
void twoSided(SuiteResult& r, const std::string& name, const Form& wl, const ChainStream& sl, const Form& wr,
              const ChainStream& sr, int j, const std::string& extra = "") {
  double lhs = pairStream(wl, sl, j), rhs = pairStream(wr, sr, j);
  double bound = certifiedTail(wl, sl, j) + certifiedTail(wr, sr, j);
  double d = std::abs(lhs - rhs);
  std::ostringstream note;
  note << std::setprecision(12) << "lhs " << lhs << ", rhs " << rhs << std::setprecision(4) << ", combined bound "
       << bound << extra;
  r.add({name + " |lhs - rhs|", d, 1e-4, d <= 1e-4 && d <= bound, note.str()});
}

SuiteResult suiteDivergence(const SuiteOptions& o) {
  SuiteResult r{"divergence", "divergence and curl theorems"};
  const int j = 9;
  auto ns = o.n > 0 ? std::vector<int>{o.n} : std::vector<int>{2, 3};
  for (int n : ns) {
    Vec lo(n, 0.0), hi(n, 1.0);
    ChainStream J = cubeStream(lo, hi);
    ChainStream dJ = boxBoundaryStream(lo, hi);
    Expr x = var(0, n), y = var(1, n);
    Expr z = n > 2 ? var(2, n) : Expr(0.0);
    std::string tag = n == 2 ? "square" : "cube";
    // Divergence: int_J d*w = int_{perp dJ} w for a 1-form w.
    std::vector<std::pair<Blade, Expr>> c1 = {{1u, x * x * y}, {2u, x * y * y * y + Expr(1.0)}};
    if (n > 2) c1.emplace_back(4u, x * z * z + y);
    Form w1(n, 1, c1);
    twoSided(r, "divergence " + tag, exteriorD(hodge(w1)), J, w1, applyToStream(opPerp(), dJ), j);
    // Curl: int_{dJ} w = int_{perp J} *dw for an (n-1)-form w.
    Form wc = n == 2 ? Form(n, 1, {{1u, x * y * y}, {2u, x * x * x + y}})
                     : Form(n, 2, {{3u, x * y * z}, {5u, x * x + z * y * y}, {6u, y * z * z}});
    // int_{perp J} *dw = int_{perp perp J} dw, so the sign of perp perp on grade n enters.
    twoSided(r, "curl " + tag, wc, dJ, hodge(exteriorD(wc)), applyToStream(opPerp(), J), j,
             n % 2 ? "; perp perp = -I on grade n here" : "");
  }
  return r;
}

// ---------------------------------------------------------------- criterion 9

SuiteResult suiteFlow(const SuiteOptions&) {
  SuiteResult r{"flow", "fundamental theorem for chains in a flow"};
  Expr x = var(0, 2), y = var(1, 2);
  VectorFieldB rot({-y, x}), dil({x, y});
  ChainStream seg = simplexStream({{0.2, 0.1}, {1.1, 0.3}});
  ChainStream sq = cubeStream({0, 0}, {1, 1});
  Form w1(2, 1, {{2u, x}});                                        // x dy
  Form w2(2, 2, {{3u, Expr(1.0) + x * x + y}});                    // (1 + x^2 + y) dx dy
  Form wb(2, 1, {{1u, x * y}, {2u, x * x}});                       // xy dx + x^2 dy
  for (auto& [fname, V] : {std::pair<std::string, VectorFieldB>{"rotation", rot}, {"dilation", dil}}) {
    for (auto& [cname, J0, w] : {std::tuple<std::string, ChainStream, Form>{"segment", seg, w1}, {"square", sq, w2}}) {
      std::vector<double> res;
      for (int m = 8; m <= 10; ++m) res.push_back(ftcCheck(J0, V, w, 0.0, 1.0, m, 8).residual);
      std::string tag = fname + " " + cname;
      r.add({"ftc " + tag + " residual (j=8, m=10)", res[2], 1e-4, res[2] <= 1e-4, ""});
      for (int i = 0; i + 1 < 3; ++i) {
        double ratio = res[i] / res[i + 1];
        std::ostringstream note;
        note << "residuals " << std::setprecision(4) << res[i] << " -> " << res[i + 1] << "; value is the ratio";
        r.add({"ftc " + tag + " reduction m=" + std::to_string(8 + i) + "->" + std::to_string(9 + i), ratio, 3.5,
               ratio >= 3.5, note.str() + " (must be >= limit)"});
      }
    }
    double s = stokesEvolvingCheck(sq, V, wb, 0.0, 1.0, 10, 8).residual;
    r.add({"stokes evolving " + fname + " square residual", s, 1e-3, s <= 1e-3, ""});
  }
  // Reynolds transport for the dilation of the unit square: area(t) = e^{2t}.
  const double t = 0.5, h = 1e-3;
  TimeForm area = TimeForm::constant(Form(2, 2, {{3u, Expr(1.0)}}));
  FlowCheck rc = reynoldsCheck(sq, dil, area, t, h, 8);
  double e2t = std::exp(2 * t);
  r.add({"reynolds residual", rc.residual, 1e-4, rc.residual <= 1e-4, ""});
  double value = rc.terms[0].second, flux = rc.terms[2].second + rc.terms[3].second;
  r.add({"reynolds |area(t) - e^{2t}|", std::abs(value - e2t), 1e-4, std::abs(value - e2t) <= 1e-4, ""});
  r.add({"reynolds |flux terms - 2e^{2t}|", std::abs(flux - 2 * e2t), 1e-4, std::abs(flux - 2 * e2t) <= 1e-4, ""});
  r.add({"reynolds |d/dt area - 2e^{2t}|", std::abs(rc.lhs - 2 * e2t), 1e-4, std::abs(rc.lhs - 2 * e2t) <= 1e-4, ""});
  return r;
}

// ---------------------------------------------------------------- criterion 10

SuiteResult suiteNorms(const SuiteOptions& o) {
  SuiteResult r{"norms", "norm sandwich and monotonicity"};
  Rng g(o.seed + 10);
  int sandwich = 0, mono = 0, trans = 0, openMono = 0;
  double worstSandwich = 0, worstMono = 0, worstTrans = 0, worstOpen = 0;
  NormOptions fast;
  fast.keepDecomposition = false;
  auto ns = dims(o, 1, 3);
  for (int i = 0; i < 200; ++i) {
    int n = ns[i % ns.size()];
    int k = o.grade >= 0 ? o.grade : g.integer(0, n);
    int size = g.integer(2, 8);
    // Clustered chains so that difference decompositions matter.
    std::vector<ChainElement> raw;
    Point c = g.vector(n, -0.5, 0.5);
    for (int e = 0; e < size; ++e) {
      Point p = c;
      for (auto& xx : p) xx += g.uniform(-0.2, 0.2);
      KVector a = randomKVector(g, n, k);
      raw.emplace_back(p, e % 2 ? a : -1.0 * a);
    }
    DiracChain A(n, std::move(raw));
    if (A.empty()) continue;
    std::vector<double> ub;
    auto dict = defaultDictionary(A);
    for (int rr = 0; rr <= 3; ++rr) {
      ub.push_back(normUB(A, rr, std::nullopt, fast).upper);
      double lb = normLB(A, rr, dict).lower;
      worstSandwich = std::max(worstSandwich, lb - ub.back());
      sandwich += lb <= ub.back() + 1e-12;
    }
    for (int rr = 0; rr < 3; ++rr) {
      worstMono = std::max(worstMono, ub[rr + 1] - ub[rr]);
      mono += ub[rr + 1] <= ub[rr] + 1e-12;
    }
    Vec v = g.vector(n, -0.3, 0.3);
    int rr = i % 3;
    double lhs = normUB(translate(v, A) - A, rr + 1, std::nullopt, fast).upper;
    double rhs = vnorm(v) * ub[rr] + 1e-12;
    worstTrans = std::max(worstTrans, lhs - rhs);
    trans += lhs <= rhs;
    OpenRegion u1 = OpenRegion::ball(c, 0.6), u2 = OpenRegion::ball(c, 1.5);
    double a1 = normUB(A, rr + 1, u1, fast).upper, a2 = normUB(A, rr + 1, u2, fast).upper;
    double aw = normUB(A, rr + 1, std::nullopt, fast).upper;
    worstOpen = std::max({worstOpen, a2 - a1, aw - a2});
    openMono += a2 <= a1 + 1e-12 && aw <= a2 + 1e-12;
  }
  auto line = [](std::string name, int ok, int total, double worst) {
    std::ostringstream note;
    note << ok << "/" << total << " hold; worst excess " << std::setprecision(3) << worst;
    return CheckLine{name, static_cast<double>(total - ok), 0.0, ok == total, note.str()};
  };
  r.add(line("normLB <= normUB (r = 0..3)", sandwich, 800, worstSandwich));
  r.add(line("normUB decreasing in r", mono, 600, worstMono));
  r.add(line("normUB(translate(v,A) - A, r+1) <= |v| normUB(A, r)", trans, 200, worstTrans));
  r.add(line("U1 in U2 => normUB(A, r, U2) <= normUB(A, r, U1)", openMono, 200, worstOpen));
  return r;
}

// ---------------------------------------------------------------- criterion 11

SuiteResult suiteChangeVars(const SuiteOptions& o) {
  SuiteResult r{"changevars", "change of variables"};
  Rng g(o.seed + 11);
  MaxRes m{"|w(F_* A) - F^*w(A)| quadratic F", 1e-10};
  auto ns = dims(o, 1, 4);
  for (int i = 0; i < 200; ++i) {
    int n = ns[i % ns.size()];
    int k = o.grade >= 0 ? o.grade : g.integer(0, n);
    DiracChain A = randomChain(g, n, k, 0, g.integer(1, 5));
    SmoothMap F = randomQuadraticMap(g, n);
    Form w = randomPolyForm(g, n, k, 3);
    m.see(std::abs(evalChain(w, pushforward(F, A)) - evalChain(pullback(F, w), A)));
  }
  r.add(m.line());
  // Circle as an algebraic chain over [0, 2 pi]: int x dy - y dx = 2 pi.
  const double tau = 2 * M_PI;
  Expr t = var(0, 1);
  SmoothMap circle(1, {cos(t), sin(t)});
  ChainStream c = algebraicStream(circle, cellStream({0.0}, {{tau}}));
  Expr x = var(0, 2), y = var(1, 2);
  Form w(2, 1, {{1u, -y}, {2u, x}});
  double v = pairStream(w, c, 10);
  r.add({"circle |int x dy - y dx - 2 pi| (j=10)", std::abs(v - tau), 1e-4, std::abs(v - tau) <= 1e-4, ""});
  return r;
}

}  // namespace

const std::vector<Suite>& suites() {
  static const std::vector<Suite> all = {
      {"stokes", 1, "exact Stokes on Dirac chains", suiteStokes},
      {"duality", 2, "operator duality", suiteDuality},
      {"algebra", 3, "algebraic identities", suiteAlgebra},
      {"commutators", 4, "vector-field commutators", suiteCommutators},
      {"cuberate", 5, "cube-stream Cauchy rate", suiteCubeRate},
      {"riemann", 6, "Riemann agreement", suiteRiemann},
      {"cantor", 7, "Cantor set", suiteCantor},
      {"divergence", 8, "divergence and curl theorems", suiteDivergence},
      {"flow", 9, "fundamental theorem for chains in a flow", suiteFlow},
      {"norms", 10, "norm sandwich and monotonicity", suiteNorms},
      {"changevars", 11, "change of variables", suiteChangeVars},
  };
  return all;
}

const Suite* findSuite(const std::string& name) {
  for (auto& s : suites())
    if (s.name == name) return &s;
  return nullptr;
}

int verifySuites(const std::vector<std::string>& names, const SuiteOptions& opt, std::ostream& out,
                 nlohmann::json* report) {
  std::vector<const Suite*> run;
  if (names.empty()) {
    for (auto& s : suites()) run.push_back(&s);
  } else {
    for (auto& n : names) {
      const Suite* s = findSuite(n);
      if (!s) throw std::invalid_argument("verify: unknown suite '" + n + "'");
      run.push_back(s);
    }
  }
  bool all = true;
  nlohmann::json rep = nlohmann::json::array();
  for (auto* s : run) {
    auto t0 = std::chrono::steady_clock::now();
    SuiteResult res;
    try {
      res = s->run(opt);
    } catch (const std::exception& e) {
      res = SuiteResult{s->name, s->title};
      res.add({"error", 0, 0, false, e.what()});
    }
    res.seconds = seconds(t0);
    all = all && res.pass;
    out << (res.pass ? "PASS " : "FAIL ") << std::left << std::setw(12) << s->name << ' ' << s->title << " ("
        << std::fixed << std::setprecision(2) << res.seconds << " s)\n";
    out.unsetf(std::ios::floatfield);
    for (auto& c : res.checks) {
      out << "  " << (c.pass ? "ok   " : "FAIL ") << c.name << ": " << std::setprecision(4) << c.value
          << " (limit " << c.limit << ")";
      if (!c.note.empty()) out << "  " << c.note;
      out << '\n';
    }
    rep.push_back(toJson(res));
  }
  if (report) *report = rep;
  return all ? 0 : 1;
}

}  // namespace chaincalc

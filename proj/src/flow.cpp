#include "chaincalc/flow.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace chaincalc {

namespace {

// Affine polynomial fields: fills A (row-major) and b and returns true.
bool affineParts(const VectorFieldB& v, std::vector<double>& A, std::vector<double>& b) {
  int n = v.dim;
  A.assign(n * n, 0.0);
  b.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const Polynomial* p = v.comps[i].poly();
    if (!p) return false;
    for (size_t t = 0; t < p->termCount(); ++t) {
      const int* e = p->exps(t);
      int deg = 0, var = -1;
      for (int k = 0; k < p->nvars(); ++k)
        if (e[k]) deg += e[k], var = k;
      if (deg > 1 || var >= n) return false;
      if (deg == 0) b[i] += p->coeff(t);
      else A[i * n + var] += p->coeff(t);
    }
  }
  return true;
}

std::vector<double> identity(int n) {
  std::vector<double> m(n * n, 0.0);
  for (int i = 0; i < n; ++i) m[i * n + i] = 1.0;
  return m;
}

std::vector<double> midpoints(double a, double b, int m) {
  if (m < 0 || m > 24) throw std::invalid_argument("evolving chain: time depth out of range");
  long long N = 1LL << m;
  double dt = (b - a) / static_cast<double>(N);
  std::vector<double> t(N);
  for (long long q = 0; q < N; ++q) t[q] = a + (static_cast<double>(q) + 0.5) * dt;
  return t;
}

// Probe points for step calibration: the corners of a finite domain, or the
// coarsest snapshot otherwise.
std::vector<Point> probesOf(const ChainStream& s) {
  std::vector<Point> out;
  if (s.domain.finite()) {
    int n = s.dim;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      Point p(n);
      for (int i = 0; i < n; ++i) p[i] = (mask >> i & 1) ? s.domain.hi[i] : s.domain.lo[i];
      out.push_back(p);
    }
    return out;
  }
  s.visit(0, [&](std::span<const double> p, const SymTensor&, const KVector&, double) {
    if (out.size() < 64) out.emplace_back(p.begin(), p.end());
  });
  return out;
}

// Pushforward of k-vectors under a matrix that depends only on time; caches
// the images of the few distinct k-vectors a stream carries.
struct PushCache {
  std::vector<std::pair<KVector, std::vector<KVector>>> entries;
  const std::vector<KVector>& get(const KVector& kv, const std::vector<std::vector<double>>& mats, int n) {
    for (auto& [k, v] : entries)
      if (k == kv) return v;
    std::vector<KVector> imgs;
    imgs.reserve(mats.size());
    for (auto& M : mats) imgs.push_back(pushKV(M, n, kv));
    entries.emplace_back(kv, std::move(imgs));
    return entries.back().second;
  }
};

}  // namespace

// ---------------------------------------------------------------- FlowMap

FlowMap::FlowMap(VectorFieldB v, FlowOptions opt) : field_(std::move(v)), opt_(opt) {
  if (field_.dim <= 0) throw DimensionError("FlowMap: empty field");
  affine_ = affineParts(field_, A_, b_);
}

void FlowMap::rhs(const double* y, double* dy) const {
  int n = field_.dim;
  bool jac = opt_.jacobian || affine_;
  if (affine_) {
    for (int i = 0; i < n; ++i) {
      double s = b_[i];
      for (int k = 0; k < n; ++k) s += A_[i * n + k] * y[k];
      dy[i] = s;
    }
  } else {
    field_.at(y, dy);
  }
  if (!jac) return;
  thread_local std::vector<double> D;
  const double* dv = A_.data();
  if (!affine_) {
    D.resize(n * n);
    field_.jacobianAt(y, D.data());
    dv = D.data();
  }
  const double* J = y + n;
  double* dJ = dy + n;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < n; ++c) {
      double s = 0;
      for (int k = 0; k < n; ++k) s += dv[i * n + k] * J[k * n + c];
      dJ[i * n + c] = s;
    }
}

std::vector<FlowState> FlowMap::integrate(std::span<const double> p, std::span<const double> times, double h) const {
  int n = field_.dim;
  bool jac = opt_.jacobian || affine_;
  size_t sz = n + (jac ? n * n : 0);
  std::vector<FlowState> out(times.size());
  std::vector<size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return std::abs(times[a]) < std::abs(times[b]); });
  std::vector<double> y0(sz), y(sz), k1(sz), k2(sz), k3(sz), k4(sz), tmp(sz);
  // The affine path integrates the origin and its Jacobian, then maps p.
  for (int i = 0; i < n; ++i) y0[i] = affine_ ? 0.0 : p[i];
  if (jac) {
    auto I = identity(n);
    std::copy(I.begin(), I.end(), y0.begin() + n);
  }
  for (int dir : {1, -1}) {
    y = y0;
    double tcur = 0;
    for (size_t idx : order) {
      double target = times[idx];
      if ((dir > 0 && target < 0) || (dir < 0 && target >= 0)) continue;
      double span = target - tcur;
      long long steps = static_cast<long long>(std::ceil(std::abs(span) / h - 1e-9));
      if (steps > 0) {
        double dt = span / static_cast<double>(steps);
        for (long long s = 0; s < steps; ++s) {
          rhs(y.data(), k1.data());
          for (size_t i = 0; i < sz; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
          rhs(tmp.data(), k2.data());
          for (size_t i = 0; i < sz; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
          rhs(tmp.data(), k3.data());
          for (size_t i = 0; i < sz; ++i) tmp[i] = y[i] + dt * k3[i];
          rhs(tmp.data(), k4.data());
          for (size_t i = 0; i < sz; ++i) y[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        }
      }
      tcur = target;
      FlowState& st = out[idx];
      st.x.assign(n, 0.0);
      if (affine_) {
        for (int i = 0; i < n; ++i) {
          double s = y[i];
          for (int k = 0; k < n; ++k) s += y[n + i * n + k] * p[k];
          st.x[i] = s;
        }
      } else {
        std::copy(y.begin(), y.begin() + n, st.x.begin());
      }
      if (jac) st.jac.assign(y.begin() + n, y.begin() + n + n * n);
    }
  }
  return out;
}

void FlowMap::calibrate(const std::vector<Point>& probes, double tmin, double tmax) {
  double T = std::max(std::abs(tmin), std::abs(tmax));
  double h = std::min(opt_.maxStep, T > 0 ? T : opt_.maxStep);
  if (T == 0) {
    h_ = h;
    return;
  }
  std::vector<Point> pts = probes;
  if (affine_ || pts.empty()) pts = {Point(field_.dim, 0.0)};
  std::vector<double> ends{tmin, tmax};
  auto measure = [](const FlowState& s) {
    double m = 1;
    for (double x : s.x) m = std::max(m, std::abs(x));
    for (double x : s.jac) m = std::max(m, std::abs(x));
    return m;
  };
  for (int k = 0; k <= opt_.maxHalvings; ++k) {
    bool ok = true;
    for (auto& p : pts) {
      auto c = integrate(p, ends, h), f = integrate(p, ends, h / 2);
      for (size_t e = 0; e < ends.size() && ok; ++e) {
        double scale = measure(f[e]), d = 0;
        for (size_t i = 0; i < c[e].x.size(); ++i) d = std::max(d, std::abs(c[e].x[i] - f[e].x[i]));
        for (size_t i = 0; i < c[e].jac.size(); ++i) d = std::max(d, std::abs(c[e].jac[i] - f[e].jac[i]));
        if (!(d <= opt_.tol * scale)) ok = false;
      }
      if (!ok) break;
    }
    if (ok) {
      h_ = h / 2;
      return;
    }
    h /= 2;
  }
  throw FlowError("flow: step halving did not reach the point tolerance (stiff or blowing-up field)");
}

std::vector<FlowState> FlowMap::trajectory(std::span<const double> p, std::span<const double> times) const {
  if (h_ <= 0) throw FlowError("flow: integrator not calibrated");
  if (static_cast<int>(p.size()) != field_.dim) throw DimensionError("flow: point dimension");
  return integrate(p, times, h_);
}

FlowState FlowMap::state(double t, std::span<const double> p) const {
  double ts[1] = {t};
  return trajectory(p, ts)[0];
}

Point flowPoint(const VectorFieldB& v, double t, std::span<const double> p) {
  FlowMap fm(v, FlowOptions{.jacobian = false});
  fm.calibrate({Point(p.begin(), p.end())}, std::min(0.0, t), std::max(0.0, t));
  return fm.state(t, p).x;
}

std::vector<double> flowJacobian(const VectorFieldB& v, double t, std::span<const double> p) {
  FlowMap fm(v);
  fm.calibrate({Point(p.begin(), p.end())}, std::min(0.0, t), std::max(0.0, t));
  return fm.state(t, p).jac;
}

DiracChain pushforwardFlow(const VectorFieldB& v, double t, const DiracChain& a) {
  if (a.dim() != v.dim) throw DimensionError("pushforwardFlow: dimension mismatch");
  if (a.maxOrder() > 0) throw std::invalid_argument("pushforwardFlow: chain must have order 0");
  FlowMap fm(v);
  std::vector<Point> probes;
  for (auto& e : a.elements())
    if (probes.size() < 64) probes.push_back(e.point);
  fm.calibrate(probes, std::min(0.0, t), std::max(0.0, t));
  std::vector<ChainElement> raw;
  raw.reserve(a.size());
  for (auto& e : a.elements()) {
    FlowState s = fm.state(t, e.point);
    raw.emplace_back(std::move(s.x), pushKV(s.jac, v.dim, e.kv));
  }
  return DiracChain(a.dim(), std::move(raw));
}

// ---------------------------------------------------------------- streams

namespace {

// Shared generator: visits the elements of J0 at depth j0Depth, each
// transported to every time in `times` with weight `wt`.
void visitTransported(const ChainStream& j0, const FlowMap& fm, int j0Depth, const std::vector<double>& times,
                      double wt, int part, int nparts, const ElementVisitor& f) {
  int n = fm.dim();
  SymTensor zero(n);
  if (fm.affine()) {
    std::vector<FlowState> origin = fm.trajectory(Point(n, 0.0), times);
    std::vector<std::vector<double>> mats;
    mats.reserve(times.size());
    for (auto& s : origin) mats.push_back(s.jac);
    PushCache cache;
    Point q(n);
    j0.gen(j0Depth, part, nparts, [&](std::span<const double> p, const SymTensor& sy, const KVector& kv, double w) {
      if (sy.order() > 0) throw std::invalid_argument("flow: J0 must have order 0");
      const auto& imgs = cache.get(kv, mats, n);
      for (size_t q_ = 0; q_ < times.size(); ++q_) {
        const auto& M = mats[q_];
        for (int i = 0; i < n; ++i) {
          double s = origin[q_].x[i];
          for (int k = 0; k < n; ++k) s += M[i * n + k] * p[k];
          q[i] = s;
        }
        if (!imgs[q_].isZero()) f(q, zero, imgs[q_], w * wt);
      }
    });
    return;
  }
  j0.gen(j0Depth, part, nparts, [&](std::span<const double> p, const SymTensor& sy, const KVector& kv, double w) {
    if (sy.order() > 0) throw std::invalid_argument("flow: J0 must have order 0");
    auto states = fm.trajectory(p, times);
    for (auto& s : states) {
      KVector img = pushKV(s.jac, n, kv);
      if (!img.isZero()) f(s.x, zero, img, w * wt);
    }
  });
}

}  // namespace

ChainStream flowedStream(const ChainStream& j0, const VectorFieldB& v, double t) {
  if (j0.dim != v.dim) throw DimensionError("flowedStream: dimension mismatch");
  auto fm = std::make_shared<FlowMap>(v);
  fm->calibrate(probesOf(j0), std::min(0.0, t), std::max(0.0, t));
  ChainStream s;
  s.dim = j0.dim;
  s.grade = j0.grade;
  s.normOrder = j0.normOrder;
  s.description = "flow of " + j0.description;
  s.params = {{"kind", "flowed"}, {"t", t}, {"base", j0.params}};
  s.domain = Box::unbounded(j0.dim);
  auto base = std::make_shared<ChainStream>(j0);
  s.gen = [fm, base, t](int j, int part, int nparts, const ElementVisitor& f) {
    visitTransported(*base, *fm, j, {t}, 1.0, part, nparts, f);
  };
  return s;
}

ChainStream evolvingChain(const ChainStream& j0, const VectorFieldB& v, double a, double b, int spaceDepth) {
  if (j0.dim != v.dim) throw DimensionError("evolvingChain: dimension mismatch");
  if (!(b >= a)) throw std::invalid_argument("evolvingChain: need a <= b");
  auto fm = std::make_shared<FlowMap>(v);
  fm->calibrate(probesOf(j0), std::min(0.0, a), std::max(0.0, b));
  ChainStream s;
  s.dim = j0.dim;
  s.grade = j0.grade;
  s.normOrder = j0.normOrder;
  s.description = "evolving " + j0.description;
  s.params = {{"kind", "evolving"}, {"a", a}, {"b", b}, {"space_depth", spaceDepth}, {"base", j0.params}};
  s.domain = Box::unbounded(j0.dim);
  auto base = std::make_shared<ChainStream>(j0);
  s.gen = [fm, base, a, b, spaceDepth](int m, int part, int nparts, const ElementVisitor& f) {
    auto times = midpoints(a, b, m);
    double dt = (b - a) / static_cast<double>(times.size());
    visitTransported(*base, *fm, spaceDepth, times, dt, part, nparts, f);
  };
  return s;
}

DiracChain evolvingChainLiteral(const DiracChain& j0, const VectorFieldB& v, double a, double b, int m) {
  int n = j0.dim();
  if (n != v.dim) throw DimensionError("evolvingChainLiteral: dimension mismatch");
  if (j0.maxOrder() > 0) throw std::invalid_argument("evolvingChainLiteral: chain must have order 0");
  auto times = midpoints(a, b, m);
  double dt = (b - a) / static_cast<double>(times.size());
  std::vector<ChainElement> iv;
  for (double t : times) iv.emplace_back(Point{t}, KVector::basis(1, {1}, dt));
  DiracChain prod = cartesian(DiracChain(1, std::move(iv)), j0);
  Vec e1(n + 1, 0.0);
  e1[0] = 1.0;
  DiracChain slice = retract(e1, prod);
  // theta(t, p) = phi_t(p); D theta = [V(phi_t p) | D phi_t].
  FlowMap fm(v);
  std::vector<Point> probes;
  for (auto& e : j0.elements())
    if (probes.size() < 64) probes.push_back(e.point);
  fm.calibrate(probes, std::min(0.0, a), std::max(0.0, b));
  std::vector<ChainElement> raw;
  for (auto& e : slice.elements()) {
    FlowState s = fm.state(e.point[0], std::span<const double>(e.point).subspan(1));
    Vec vx = v.at(s.x);
    std::vector<double> D(n * (n + 1));
    for (int i = 0; i < n; ++i) {
      D[i * (n + 1)] = vx[i];
      for (int k = 0; k < n; ++k) D[i * (n + 1) + 1 + k] = s.jac[i * n + k];
    }
    raw.emplace_back(s.x, pushKV(D, n, e.kv));
  }
  return DiracChain(n, std::move(raw));
}

ChainStream boundaryStreamOf(const ChainStream& s) {
  const auto& p = s.params;
  std::string kind = p.value("kind", "");
  if (kind == "cube") return boxBoundaryStream(p.at("lo").get<Vec>(), p.at("hi").get<Vec>());
  auto cellBoundary = [](const Point& p0, const std::vector<Vec>& edges, double o) {
    int k = static_cast<int>(edges.size());
    if (k == 0) throw std::invalid_argument("boundaryStreamOf: a point has no boundary stream");
    std::vector<std::pair<double, ChainStream>> faces;
    for (int a = 0; a < k; ++a) {
      std::vector<Vec> rest;
      for (int c = 0; c < k; ++c)
        if (c != a) rest.push_back(edges[c]);
      Point top = p0;
      for (size_t i = 0; i < top.size(); ++i) top[i] += edges[a][i];
      double sg = (a % 2 == 0) ? 1.0 : -1.0;
      faces.emplace_back(sg * o, cellStream(top, rest));
      faces.emplace_back(-sg * o, cellStream(p0, rest));
    }
    return polyhedral(std::move(faces));
  };
  if (kind == "cell")
    return cellBoundary(p.at("p0").get<Point>(), p.at("edges").get<std::vector<Vec>>(), p.value("orientation", 1.0));
  if (kind == "simplex") {
    auto v = p.at("vertices").get<std::vector<Point>>();
    double o = p.value("orientation", 1.0);
    if (v.size() == 2) {
      Vec e(v[1].size());
      for (size_t i = 0; i < e.size(); ++i) e[i] = v[1][i] - v[0][i];
      return cellBoundary(v[0], {e}, o);
    }
    if (v.size() == 3)
      return polyhedral({{o, simplexStream({v[1], v[2]})}, {-o, simplexStream({v[0], v[2]})}, {o, simplexStream({v[0], v[1]})}});
  }
  throw std::invalid_argument("boundaryStreamOf: no boundary stream for kind '" + kind + "'");
}

// ---------------------------------------------------------------- time-dependent forms

TimeForm::TimeForm(int dim, Form spaceTime) : dim_(dim), st_(std::move(spaceTime)) {
  if (st_.dim() != dim + 1) throw DimensionError("TimeForm: form must live on R^{n+1} with t last");
  std::vector<std::pair<Blade, Expr>> d;
  for (auto& [b, e] : st_.coeffs()) {
    if (b >> dim) throw std::invalid_argument("TimeForm: blades may not involve dt");
    d.emplace_back(b, e.partial(dim));
  }
  dst_ = Form(dim + 1, st_.grade(), std::move(d), st_.order());
}

TimeForm TimeForm::constant(const Form& w) {
  int n = w.dim();
  std::vector<std::pair<Blade, Expr>> c;
  std::vector<Expr> subs;
  for (int i = 0; i < n; ++i) subs.push_back(Expr::var(i, n + 1));
  for (auto& [b, e] : w.coeffs()) c.emplace_back(b, e.substitute(subs));
  return TimeForm(n, Form(n + 1, w.grade(), std::move(c), w.order()));
}

Form TimeForm::slice(const Form& st, int n, double t) {
  std::vector<Expr> subs;
  for (int i = 0; i < n; ++i) subs.push_back(Expr::var(i, n));
  subs.push_back(Expr(t));
  std::vector<std::pair<Blade, Expr>> c;
  for (auto& [b, e] : st.coeffs()) c.emplace_back(b, e.substitute(subs));
  return Form(n, st.grade(), std::move(c), st.order());
}

Form TimeForm::at(double t) const { return slice(st_, dim_, t); }
Form TimeForm::dt(double t) const { return slice(dst_, dim_, t); }

// ---------------------------------------------------------------- checks

FlowCheck ftcCheck(const ChainStream& j0, const VectorFieldB& v, const Form& w, double a, double b, int m,
                   int spaceDepth) {
  if (w.order() < 2) throw std::invalid_argument("ftcCheck: form needs order >= 2");
  FlowCheck c;
  c.name = "ftc";
  double Jb = pairStream(w, flowedStream(j0, v, b), spaceDepth);
  double Ja = pairStream(w, flowedStream(j0, v, a), spaceDepth);
  c.lhs = Jb - Ja;
  c.rhs = pairStream(lie(v, w), evolvingChain(j0, v, a, b, spaceDepth), m);
  c.residual = std::abs(c.lhs - c.rhs);
  c.terms = {{"int_Jb", Jb}, {"int_Ja", Ja}, {"int_evolving_LV", c.rhs}};
  return c;
}

FlowCheck stokesEvolvingCheck(const ChainStream& j0, const VectorFieldB& v, const Form& w, double a, double b,
                              int m, int spaceDepth) {
  return stokesEvolvingCheck(j0, boundaryStreamOf(j0), v, w, a, b, m, spaceDepth);
}

FlowCheck stokesEvolvingCheck(const ChainStream& j0, const ChainStream& dj0, const VectorFieldB& v, const Form& w,
                              double a, double b, int m, int spaceDepth) {
  if (w.grade() + 1 != j0.grade || dj0.grade != w.grade())
    throw std::invalid_argument("stokesEvolvingCheck: form grade must be one below the chain grade");
  FlowCheck c;
  c.name = "stokes";
  c.lhs = pairStream(exteriorD(lie(v, w)), evolvingChain(j0, v, a, b, spaceDepth), m);
  double Bb = pairStream(w, flowedStream(dj0, v, b), spaceDepth);
  double Ba = pairStream(w, flowedStream(dj0, v, a), spaceDepth);
  c.rhs = Bb - Ba;
  c.residual = std::abs(c.lhs - c.rhs);
  c.terms = {{"int_evolving_dLV", c.lhs}, {"int_dJb", Bb}, {"int_dJa", Ba}};
  return c;
}

namespace {

double centralDifference(const ChainStream& j0, const VectorFieldB& v, const TimeForm& w, double t, double h,
                         int j) {
  double fp = pairStream(w.at(t + h), flowedStream(j0, v, t + h), j);
  double fm = pairStream(w.at(t - h), flowedStream(j0, v, t - h), j);
  return (fp - fm) / (2 * h);
}

}  // namespace

FlowCheck leibnizCheck(const ChainStream& j0, const VectorFieldB& v, const TimeForm& w, double t, double h,
                       int spaceDepth) {
  if (!(h > 0)) throw std::invalid_argument("leibnizCheck: step must be positive");
  FlowCheck c;
  c.name = "leibniz";
  ChainStream jt = flowedStream(j0, v, t);
  DiracChain At = jt.snapshot(spaceDepth);
  Form wt = w.at(t);
  double ddt = centralDifference(j0, v, w, t, h, spaceDepth);
  double pv = evalChain(wt, prederiv(v, At));
  double pt = evalChain(w.dt(t), At);
  c.lhs = ddt;
  c.rhs = pv + pt;
  c.residual = std::abs(c.lhs - c.rhs);
  c.terms = {{"value", evalChain(wt, At)}, {"ddt", ddt}, {"int_PV_Jt", pv}, {"int_Jt_dtw", pt}};
  return c;
}

FlowCheck reynoldsCheck(const ChainStream& j0, const VectorFieldB& v, const TimeForm& w, double t, double h,
                        int spaceDepth) {
  return reynoldsCheck(j0, boundaryStreamOf(j0), v, w, t, h, spaceDepth);
}

FlowCheck reynoldsCheck(const ChainStream& j0, const ChainStream& dj0, const VectorFieldB& v, const TimeForm& w,
                        double t, double h, int spaceDepth) {
  if (j0.grade != j0.dim) throw std::invalid_argument("reynoldsCheck: chain must have top grade");
  if (!(h > 0)) throw std::invalid_argument("reynoldsCheck: step must be positive");
  FlowCheck c;
  c.name = "reynolds";
  Form wt = w.at(t);
  double value = pairStream(wt, flowedStream(j0, v, t), spaceDepth);
  double ddt = centralDifference(j0, v, w, t, h, spaceDepth);
  double pt = pairStream(w.dt(t), flowedStream(j0, v, t), spaceDepth);
  double bd = pairStream(interior(v, wt), flowedStream(dj0, v, t), spaceDepth);
  c.lhs = ddt;
  c.rhs = pt + bd;
  c.residual = std::abs(c.lhs - c.rhs);
  c.terms = {{"value", value}, {"ddt", ddt}, {"int_Jt_dtw", pt}, {"int_dJt_iVw", bd}};
  return c;
}

}  // namespace chaincalc

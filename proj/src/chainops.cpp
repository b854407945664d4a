#include "chaincalc/chainops.hpp"

#include <cmath>

namespace chaincalc {

namespace {

Vec unit(int n, int i) {
  Vec e(n, 0.0);
  e[i] = 1.0;
  return e;
}

void requireDim(int a, int b, const char* what) {
  if (a != b) throw DimensionError(std::string(what) + ": dimension mismatch");
}

void wedgeInto(const Vec& v, const ChainElement& e, ElementSink& out) {
  KVector w = wedge(KVector::vector(v), e.kv);
  if (!w.isZero()) out.emplace_back(e.point, e.sym, std::move(w));
}

void retractInto(const Vec& v, const ChainElement& e, ElementSink& out) {
  if (e.grade() == 0) return;
  KVector w = retractKV(v, e.kv);
  if (!w.isZero()) out.emplace_back(e.point, e.sym, std::move(w));
}

// L_{u_S} f at p for the factors selected by mask.
double subsetDerivative(const ScalarField& f, const ChainElement& e, unsigned mask) {
  const auto& fac = e.sym.factors();
  std::vector<Vec> sel;
  for (size_t i = 0; i < fac.size(); ++i)
    if (mask & (1u << i)) sel.push_back(fac[i]);
  SymTensor s(e.dim(), std::move(sel));
  KVector unitScalar = KVector::scalar(e.dim(), 1.0);
  double v = 0;
  for (auto& [mono, w] : s.expand()) v += w * f.evalMono(e.point, mono, unitScalar);
  return v;
}

void multiplyInto(const ScalarField& f, const ChainElement& e, ElementSink& out) {
  int s = e.order();
  if (s > f.order()) throw std::invalid_argument("multiplyChain: insufficient smoothness of f");
  const auto& fac = e.sym.factors();
  for (unsigned mask = 0; mask < (1u << s); ++mask) {
    double d = subsetDerivative(f, e, mask);
    if (d == 0.0) continue;
    std::vector<Vec> rest;
    for (int i = 0; i < s; ++i)
      if (!(mask & (1u << i))) rest.push_back(fac[i]);
    out.emplace_back(e.point, SymTensor(e.dim(), std::move(rest)), e.kv * d);
  }
}

DiracChain collect(int n, ElementSink raw) { return DiracChain(n, std::move(raw)); }

}  // namespace

DiracChain ChainOperator::operator()(const DiracChain& a) const { return applyElementwise(element, a); }

DiracChain applyElementwise(const ElementOp& op, const DiracChain& a) {
  ElementSink out;
  for (auto& e : a.elements()) op(e, out);
  int n = a.dim();
  if (!out.empty()) n = out.front().dim();
  return DiracChain(n, std::move(out));
}

ElementOp composeOps(std::vector<ElementOp> ops) {
  return [ops = std::move(ops)](const ChainElement& e, ElementSink& out) {
    ElementSink cur{e};
    for (auto& op : ops) {
      ElementSink next;
      for (auto& x : cur) op(x, next);
      cur = std::move(next);
    }
    out.insert(out.end(), std::make_move_iterator(cur.begin()), std::make_move_iterator(cur.end()));
  };
}

ElementOp extrudeOp(const Vec& v) {
  return [v](const ChainElement& e, ElementSink& out) {
    requireDim(static_cast<int>(v.size()), e.dim(), "extrude");
    if (e.grade() >= e.dim()) throw std::invalid_argument("extrude: top grade input");
    wedgeInto(v, e, out);
  };
}

ElementOp retractOp(const Vec& v) {
  return [v](const ChainElement& e, ElementSink& out) {
    requireDim(static_cast<int>(v.size()), e.dim(), "retract");
    if (e.grade() == 0) throw std::invalid_argument("retract: grade 0 input");
    retractInto(v, e, out);
  };
}

ElementOp prederivOp(const Vec& v) {
  return [v](const ChainElement& e, ElementSink& out) {
    requireDim(static_cast<int>(v.size()), e.dim(), "prederiv");
    out.emplace_back(e.point, e.sym.withFactor(v), e.kv);
  };
}

ElementOp boundaryOp() {
  return [](const ChainElement& e, ElementSink& out) {
    if (e.grade() == 0) return;
    int n = e.dim();
    for (int i = 0; i < n; ++i) {
      Vec ei = unit(n, i);
      KVector r = retractKV(ei, e.kv);
      if (r.isZero()) continue;
      out.emplace_back(e.point, e.sym.withBasisFactor(i + 1), std::move(r));
    }
  };
}

ElementOp perpOp() {
  return [](const ChainElement& e, ElementSink& out) { out.emplace_back(e.point, e.sym, perpKV(e.kv)); };
}

ElementOp multiplyOp(const ScalarField& f) {
  if (f.grade() != 0) throw std::invalid_argument("multiplyChain: expected a 0-form");
  return [f](const ChainElement& e, ElementSink& out) {
    requireDim(f.dim(), e.dim(), "multiplyChain");
    multiplyInto(f, e, out);
  };
}

ElementOp extrudeFieldOp(const VectorFieldB& V) {
  std::vector<ScalarField> comps;
  for (int i = 0; i < V.dim; ++i) comps.push_back(V.component(i));
  return [comps, n = V.dim](const ChainElement& e, ElementSink& out) {
    requireDim(n, e.dim(), "extrude");
    if (e.grade() >= n) throw std::invalid_argument("extrude: top grade input");
    for (int i = 0; i < n; ++i) {
      if (comps[i].coeffs().empty()) continue;
      ElementSink tmp;
      wedgeInto(unit(n, i), e, tmp);
      for (auto& x : tmp) multiplyInto(comps[i], x, out);
    }
  };
}

ElementOp retractFieldOp(const VectorFieldB& V) {
  std::vector<ScalarField> comps;
  for (int i = 0; i < V.dim; ++i) comps.push_back(V.component(i));
  return [comps, n = V.dim](const ChainElement& e, ElementSink& out) {
    requireDim(n, e.dim(), "retract");
    if (e.grade() == 0) throw std::invalid_argument("retract: grade 0 input");
    for (int i = 0; i < n; ++i) {
      if (comps[i].coeffs().empty()) continue;
      ElementSink tmp;
      retractInto(unit(n, i), e, tmp);
      for (auto& x : tmp) multiplyInto(comps[i], x, out);
    }
  };
}

ElementOp pushforwardOp(const SmoothMap& F) {
  bool affine = F.isAffine();
  return [F, affine](const ChainElement& e, ElementSink& out) {
    requireDim(F.n, e.dim(), "pushforward");
    if (e.order() > 0 && !affine)
      throw std::invalid_argument("pushforward: order >= 1 elements require an affine map");
    Point q = F.at(e.point);
    auto J = F.jacobianAt(e.point);
    KVector a = pushKV(J, F.m, e.kv);
    if (a.isZero()) return;
    std::vector<Vec> fac;
    for (auto& u : e.sym.factors()) {
      Vec w(F.m, 0.0);
      for (int i = 0; i < F.m; ++i)
        for (int j = 0; j < F.n; ++j) w[i] += J[i * F.n + j] * u[j];
      fac.push_back(std::move(w));
    }
    out.emplace_back(std::move(q), SymTensor(F.m, std::move(fac)), std::move(a));
  };
}

DiracChain extrude(const Vec& v, const DiracChain& a) { return applyElementwise(extrudeOp(v), a); }
DiracChain retract(const Vec& v, const DiracChain& a) { return applyElementwise(retractOp(v), a); }
DiracChain prederiv(const Vec& v, const DiracChain& a) { return applyElementwise(prederivOp(v), a); }
DiracChain extrude(const VectorFieldB& V, const DiracChain& a) { return applyElementwise(extrudeFieldOp(V), a); }
DiracChain retract(const VectorFieldB& V, const DiracChain& a) { return applyElementwise(retractFieldOp(V), a); }

DiracChain prederiv(const VectorFieldB& V, const DiracChain& a) {
  // E_V of a top-grade element is zero, so only E_V d contributes there.
  std::vector<ChainElement> low;
  for (auto& e : a.elements())
    if (e.grade() < e.dim()) low.push_back(e);
  DiracChain x = low.empty() ? DiracChain(a.dim()) : boundary(extrude(V, DiracChain(a.dim(), std::move(low))));
  DiracChain ba = boundary(a);
  DiracChain y = ba.empty() ? DiracChain(a.dim()) : extrude(V, ba);
  return x + y;
}

DiracChain boundary(const DiracChain& a) {
  DiracChain out = applyElementwise(boundaryOp(), a);
  return out.dim() ? out : DiracChain(a.dim());
}

DiracChain dirBoundary(const Vec& v, const DiracChain& a) { return prederiv(v, retract(v, a)); }

DiracChain perp(const DiracChain& a) { return applyElementwise(perpOp(), a); }

DiracChain clifford(const Vec& v, const DiracChain& a) {
  ElementSink out;
  for (auto& e : a.elements()) {
    requireDim(static_cast<int>(v.size()), e.dim(), "clifford");
    if (e.grade() < e.dim()) wedgeInto(v, e, out);
    retractInto(v, e, out);
  }
  return collect(a.dim(), std::move(out));
}

DiracChain coboundary(const DiracChain& a) { return perp(boundary(perp(a))); }

DiracChain geomLaplace(const DiracChain& a) { return coboundary(boundary(a)) + boundary(coboundary(a)); }

DiracChain geomDirac(const DiracChain& a) { return boundary(a) + coboundary(a); }

DiracChain multiplyChain(const ScalarField& f, const DiracChain& a) { return applyElementwise(multiplyOp(f), a); }

DiracChain pushforward(const SmoothMap& F, const DiracChain& a) {
  DiracChain out = applyElementwise(pushforwardOp(F), a);
  return out.dim() ? out : DiracChain(F.m);
}

DiracChain cartesian(const DiracChain& a, const DiracChain& b) {
  int n = a.dim(), m = b.dim(), N = n + m;
  ElementSink out;
  for (auto& x : a.elements())
    for (auto& y : b.elements()) {
      Point p = x.point;
      p.insert(p.end(), y.point.begin(), y.point.end());
      SymTensor s = symCompose(x.sym.shifted(N, 0), y.sym.shifted(N, n));
      KVector kv = wedge(x.kv.shifted(N, 0), y.kv.shifted(N, n));
      out.emplace_back(std::move(p), std::move(s), std::move(kv));
    }
  return collect(N, std::move(out));
}

// ---------------------------------------------------------------- named operators

namespace {
ChainOperator pointFree(ChainOperator c) {
  c.pointFree = true;
  return c;
}
}  // namespace

ChainOperator opExtrude(const Vec& v) {
  return pointFree({"extrude", 1, 0, extrudeOp(v), [v](const Form& w) { return interior(VectorFieldB::constant(v), w); }});
}
ChainOperator opRetract(const Vec& v) {
  return pointFree({"retract", -1, 0, retractOp(v), [v](const Form& w) { return flatWedge(VectorFieldB::constant(v), w); }});
}
ChainOperator opPrederiv(const Vec& v) {
  return pointFree({"prederiv", 0, 1, prederivOp(v), [v](const Form& w) { return lie(VectorFieldB::constant(v), w); }});
}
ChainOperator opBoundary() { return pointFree({"boundary", -1, 1, boundaryOp(), [](const Form& w) { return exteriorD(w); }}); }
ChainOperator opDirBoundary(const Vec& v) {
  return pointFree({"dirBoundary", -1, 1, composeOps({retractOp(v), prederivOp(v)}),
          [v](const Form& w) { return dirExteriorD(v, w); }});
}
ChainOperator opPerp() { return pointFree({"perp", 0, 0, perpOp(), [](const Form& w) { return hodge(w); }}); }
ChainOperator opCoboundary() {
  return pointFree({"coboundary", 1, 1, composeOps({perpOp(), boundaryOp(), perpOp()}),
          [](const Form& w) { return codifferential(w); }});
}
ChainOperator opGeomLaplace() {
  ElementOp cob = composeOps({perpOp(), boundaryOp(), perpOp()});
  // composeOps applies left to right: these are (cob o bd) and (bd o cob).
  ElementOp cobBd = composeOps({boundaryOp(), cob});
  ElementOp bdCob = composeOps({cob, boundaryOp()});
  return pointFree({"laplace", 0, 2,
          [cobBd, bdCob](const ChainElement& e, ElementSink& out) {
            cobBd(e, out);
            if (e.grade() < e.dim()) bdCob(e, out);
          },
          [](const Form& w) { return laplacian(w); }});
}
ChainOperator opGeomDirac() {
  ElementOp cob = composeOps({perpOp(), boundaryOp(), perpOp()});
  ElementOp bd = boundaryOp();
  return pointFree({"dirac", 0, 1,
          [cob, bd](const ChainElement& e, ElementSink& out) {
            bd(e, out);
            cob(e, out);
          },
          {}});
}
ChainOperator opClifford(const Vec& v) {
  return pointFree({"clifford", 0, 0,
          [v](const ChainElement& e, ElementSink& out) {
            if (e.grade() < e.dim()) wedgeInto(v, e, out);
            retractInto(v, e, out);
          },
          {}});
}
ChainOperator opMultiply(const ScalarField& f) {
  return {"multiply", 0, 0, multiplyOp(f), [f](const Form& w) { return multiplyForm(f, w); }};
}
ChainOperator opPushforward(const SmoothMap& F) {
  return {"pushforward", 0, 0, pushforwardOp(F), [F](const Form& w) { return pullback(F, w); }};
}
ChainOperator opExtrudeField(const VectorFieldB& V) {
  return {"extrudeField", 1, 0, extrudeFieldOp(V), [V](const Form& w) { return interior(V, w); }};
}
ChainOperator opRetractField(const VectorFieldB& V) {
  return {"retractField", -1, 0, retractFieldOp(V), [V](const Form& w) { return flatWedge(V, w); }};
}
ChainOperator opPrederivField(const VectorFieldB& V) {
  ElementOp ev = extrudeFieldOp(V);
  ElementOp bd = boundaryOp();
  ElementOp a = composeOps({ev, bd});
  ElementOp b = composeOps({bd, ev});
  return {"prederivField", 0, 1,
          [a, b](const ChainElement& e, ElementSink& out) {
            if (e.grade() < e.dim()) a(e, out);
            if (e.grade() > 0) b(e, out);
          },
          [V](const Form& w) { return lie(V, w); }};
}

// ---------------------------------------------------------------- diagnostics

std::vector<PerpSignRow> perpOperatorProductTable(int n) {
  std::vector<PerpSignRow> rows;
  for (Blade b = 0; b < (Blade{1} << n); ++b) {
    DiracChain c = DiracChain::single(ChainElement(Point(n, 0.0), KVector::blade(n, b)));
    for (int i = 0; i < n; ++i) c = clifford(unit(n, i), c);
    KVector expect = perpKV(KVector::blade(n, b));
    int sign = 0;
    if (c.size() == 1 && c.elements()[0].kv.grade() == expect.grade()) {
      const KVector& got = c.elements()[0].kv;
      if (got == expect) sign = 1;
      else if (got == -expect) sign = -1;
    }
    rows.push_back({bladeIndices(b), sign});
  }
  return rows;
}

std::vector<TimeOrderRow> timeOrderingTable(int n) {
  std::vector<TimeOrderRow> rows;
  int N = n + 1;
  for (int k = 0; k <= n; ++k) {
    Blade a = (Blade{1} << k) - 1;
    KVector alpha = KVector::blade(n, a);
    Vec eLast = unit(N, n), eFirst = unit(N, 0);
    KVector last = retractKV(eLast, wedge(alpha.shifted(N, 0), KVector::blade(N, Blade{1} << n)));
    KVector first = retractKV(eFirst, wedge(KVector::blade(N, 1), alpha.shifted(N, 1)));
    int sl = last.coeff(a) > 0 ? 1 : -1;
    int sf = first.coeff(a << 1) > 0 ? 1 : -1;
    rows.push_back({k, sl, sf});
  }
  return rows;
}

}  // namespace chaincalc

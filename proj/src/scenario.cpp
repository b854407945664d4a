#include "chaincalc/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace chaincalc {

namespace {

using nlohmann::json;

void allow(const json& j, std::initializer_list<const char*> keys, const std::string& what) {
  if (!j.is_object()) throw SchemaError(what + ": expected an object");
  for (auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto* k : keys) ok = ok || key == k;
    if (!ok) throw SchemaError(what + ": unknown key '" + key + "'");
  }
}

Vec vecArg(const json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(what + ": missing '" + key + "'");
  return j.at(key).get<Vec>();
}

// Keys accepted by each check kind.
const std::map<std::string, std::vector<const char*>>& checkKeys() {
  static const std::map<std::string, std::vector<const char*>> k = {
      {"integrate", {"kind", "jmin", "jmax", "expect", "tol", "richardson"}},
      {"stokes", {"kind", "depth", "tol"}},
      {"divergence", {"kind", "depth", "tol"}},
      {"curl", {"kind", "depth", "tol"}},
      {"ftc", {"kind", "a", "b", "depthTime", "depthSpace", "tol"}},
      {"stokes-evolving", {"kind", "a", "b", "depthTime", "depthSpace", "tol"}},
      {"leibniz", {"kind", "t", "h", "depthSpace", "tol"}},
      {"reynolds", {"kind", "t", "h", "depthSpace", "tol"}},
      {"norm", {"kind", "depth", "r", "region"}},
      {"suite", {"kind", "names", "n", "grade"}},
  };
  return k;
}

void validateCheck(const json& c) {
  if (!c.is_object()) throw SchemaError("check: expected an object");
  std::string kind = c.value("kind", "integrate");
  auto it = checkKeys().find(kind);
  if (it == checkKeys().end()) throw SchemaError("check: unknown kind '" + kind + "'");
  for (auto& [key, v] : c.items()) {
    bool ok = false;
    for (auto* k : it->second) ok = ok || key == k;
    if (!ok) throw SchemaError("check " + kind + ": unknown key '" + key + "'");
    if (key == "kind" || key == "region") continue;
    if (key == "names") {
      for (auto& n : v.get<std::vector<std::string>>())
        if (!findSuite(n)) throw SchemaError("check suite: unknown suite '" + n + "'");
    } else if (key == "richardson") {
      v.get<std::vector<int>>();
    } else if (!v.is_number()) {
      throw SchemaError("check " + kind + ": '" + key + "' must be a number");
    }
  }
}

bool needsForm(const std::string& kind) { return kind != "suite" && kind != "norm"; }
bool needsField(const std::string& kind) {
  return kind == "ftc" || kind == "stokes-evolving" || kind == "leibniz" || kind == "reynolds";
}

}  // namespace

ChainOperator operatorFromJson(const json& j) {
  if (j.is_string()) {
    std::string n = j.get<std::string>();
    if (n == "boundary") return opBoundary();
    if (n == "perp") return opPerp();
    if (n == "coboundary") return opCoboundary();
    if (n == "laplace") return opGeomLaplace();
    if (n == "dirac") return opGeomDirac();
    throw SchemaError("ops: unknown operator '" + n + "'");
  }
  if (!j.is_object() || j.size() != 1) throw SchemaError("ops: each step is a name or a one-key object");
  auto& [name, a] = *j.items().begin();
  std::string what = "ops " + name;
  if (name == "extrude" || name == "retract" || name == "prederiv" || name == "dirBoundary" || name == "clifford") {
    allow(a, {"v"}, what);
    Vec v = vecArg(a, "v", what);
    if (name == "extrude") return opExtrude(v);
    if (name == "retract") return opRetract(v);
    if (name == "prederiv") return opPrederiv(v);
    if (name == "dirBoundary") return opDirBoundary(v);
    return opClifford(v);
  }
  if (name == "multiply") {
    allow(a, {"f", "n"}, what);
    int n = a.at("n").get<int>();
    return opMultiply(Form::scalar(n, exprFromJson(a.at("f"), n)));
  }
  if (name == "pushforward") {
    allow(a, {"map"}, what);
    return opPushforward(mapFromJson(a.at("map")));
  }
  if (name == "extrudeField" || name == "retractField" || name == "prederivField") {
    allow(a, {"field"}, what);
    VectorFieldB V = fieldFromJson(a.at("field"));
    if (name == "extrudeField") return opExtrudeField(V);
    if (name == "retractField") return opRetractField(V);
    return opPrederivField(V);
  }
  throw SchemaError("ops: unknown operator '" + name + "'");
}

Scenario scenarioFromJson(const json& j) {
  try {
    allow(j, {"name", "seed", "domain", "ops", "form", "field", "check", "output"}, "scenario");
    Scenario s;
    if (!j.contains("name") || !j.at("name").is_string()) throw SchemaError("scenario: 'name' must be a string");
    s.name = j.at("name").get<std::string>();
    if (j.contains("seed")) {
      const json& sd = j.at("seed");
      if (!sd.is_number_integer() || (!sd.is_number_unsigned() && sd.get<long long>() < 0))
        throw SchemaError("scenario: 'seed' must be a non-negative integer");
      s.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("check")) {
      validateCheck(j.at("check"));
      s.check = j.at("check");
    }
    std::string kind = s.checkKind();
    if (!j.contains("domain") && kind != "suite") throw SchemaError("scenario: missing 'domain'");
    if (j.contains("domain")) {
      s.domain = j.at("domain");
      streamFromJson(s.domain);
    }
    if (j.contains("ops")) {
      if (!j.at("ops").is_array()) throw SchemaError("scenario: 'ops' must be an array");
      for (auto& o : j.at("ops")) operatorFromJson(o);
      s.ops = j.at("ops");
    }
    if (j.contains("form")) {
      formFromJson(j.at("form"));
      s.form = j.at("form");
    } else if (needsForm(kind)) {
      throw SchemaError("scenario: check '" + kind + "' needs a 'form'");
    }
    if (j.contains("field")) {
      fieldFromJson(j.at("field"));
      s.field = j.at("field");
    } else if (needsField(kind)) {
      throw SchemaError("scenario: check '" + kind + "' needs a 'field'");
    }
    if (j.contains("output")) {
      allow(j.at("output"), {"csv", "json"}, "output");
      for (auto& [k, v] : j.at("output").items())
        if (!v.is_string()) throw SchemaError("output: '" + k + "' must be a path string");
      s.output = j.at("output");
    }
    return s;
  } catch (const SchemaError&) {
    throw;
  } catch (const std::exception& e) {
    throw SchemaError(e.what());
  }
}

json toJson(const Scenario& s) {
  json j = {{"name", s.name}};
  if (s.seed) j["seed"] = *s.seed;
  if (!s.domain.is_null()) j["domain"] = s.domain;
  if (s.ops) j["ops"] = *s.ops;
  if (s.form) j["form"] = *s.form;
  if (s.field) j["field"] = *s.field;
  if (s.check) j["check"] = *s.check;
  if (s.output) j["output"] = *s.output;
  return j;
}

Scenario loadScenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open scenario '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenarioFromJson(j);
}

ChainStream scenarioStream(const Scenario& s) {
  ChainStream st = streamFromJson(s.domain);
  if (s.ops)
    for (auto& o : *s.ops) st = applyToStream(operatorFromJson(o), std::move(st));
  return st;
}

namespace {

double tailOf(const Form& w, const ChainStream& s, int j) {
  if (!w.certifiable() || !s.cauchyRate || !s.domain.finite()) return std::numeric_limits<double>::infinity();
  return certifiedNorm(w, std::min(s.normOrder, w.order()), s.domain) * s.tailBound(j);
}

// Geometric boundary when the stream is a plain cell, else the Dirac boundary.
ChainStream boundaryOf(const ChainStream& s) {
  std::string kind = s.params.value("kind", "");
  if (kind == "cube" || kind == "cell" || kind == "simplex") return boundaryStreamOf(s);
  return applyToStream(opBoundary(), s);
}

json numberOrNull(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

TimeForm timeForm(const Form& f, int n) {
  if (f.dim() == n) return TimeForm::constant(f);
  if (f.dim() == n + 1) return TimeForm(n, f);
  throw SchemaError("form: expected dimension n or n+1 (time last)");
}

}  // namespace

ScenarioReport runScenario(const Scenario& s, const RunOptions& opt) {
  ScenarioReport rep;
  const json c = s.check.value_or(json{{"kind", "integrate"}});
  std::string kind = s.checkKind();
  json& out = rep.json;
  out = {{"scenario", s.name}, {"check", kind}, {"seed", opt.seed.value_or(s.effectiveSeed())}};

  if (kind == "suite") {
    SuiteOptions so;
    so.seed = opt.seed.value_or(s.effectiveSeed());
    so.n = c.value("n", 0);
    so.grade = c.value("grade", -1);
    std::ostringstream text;
    json detail;
    int code = verifySuites(c.value("names", std::vector<std::string>{}), so, text, &detail);
    rep.pass = code == 0;
    out["suites"] = detail;
    out["text"] = text.str();
    out["pass"] = rep.pass;
    return rep;
  }

  ChainStream J = scenarioStream(s);
  int n = J.dim;
  std::optional<Form> w;
  if (s.form) w = formFromJson(*s.form, n);

  auto finishResidual = [&](double residual, double tol, json values) {
    rep.pass = residual <= tol;
    out["values"] = std::move(values);
    out["residual"] = residual;
    out["tolerance"] = tol;
    out["pass"] = rep.pass;
  };

  if (kind == "integrate") {
    IntegrateConfig cfg;
    cfg.jmin = c.value("jmin", 0);
    cfg.jmax = opt.depth.value_or(c.value("jmax", 6));
    cfg.jmin = std::min(cfg.jmin, cfg.jmax);
    if (c.contains("richardson")) cfg.richardson = c.at("richardson").get<std::vector<int>>();
    IntegrateResult r = integrateStream(*w, J, cfg);
    rep.csv = convergenceCsv(r.rows);
    json values = {{"value", r.value}, {"raw", r.raw}, {"errorBound", numberOrNull(r.errorBound)},
                   {"diverging", r.diverging}};
    if (c.contains("expect")) {
      double expect = c.at("expect").get<double>();
      double tol = opt.tol.value_or(c.value("tol", 1e-6));
      values["expect"] = expect;
      finishResidual(std::abs(r.value - expect), tol, values);
      rep.pass = rep.pass && !r.diverging;
      out["pass"] = rep.pass;
    } else {
      rep.pass = !r.diverging;
      out["values"] = values;
      out["pass"] = rep.pass;
    }
    json rows = json::array();
    for (auto& row : r.rows)
      rows.push_back({{"j", row.j}, {"value", row.value}, {"diff", numberOrNull(row.diff)},
                      {"accelerated", row.accelerated}, {"certified", numberOrNull(row.certified)}});
    out["rows"] = rows;
    return rep;
  }

  if (kind == "stokes") {
    int j = opt.depth.value_or(c.value("depth", 4));
    double lhs = pairStream(*w, applyToStream(opBoundary(), J), j);
    double rhs = pairStream(exteriorD(*w), J, j);
    double tol = opt.tol.value_or(c.value("tol", 1e-10 * std::max(1.0, std::abs(rhs))));
    finishResidual(std::abs(lhs - rhs), tol, {{"int_boundary_w", lhs}, {"int_dw", rhs}, {"depth", j}});
    return rep;
  }

  if (kind == "divergence" || kind == "curl") {
    int j = opt.depth.value_or(c.value("depth", 7));
    ChainStream dJ = boundaryOf(J);
    Form wl, wr;
    ChainStream sl, sr;
    if (kind == "divergence") {
      wl = exteriorD(hodge(*w)), sl = J;
      wr = *w, sr = applyToStream(opPerp(), dJ);
    } else {
      wl = *w, sl = dJ;
      wr = hodge(exteriorD(*w)), sr = applyToStream(opPerp(), J);
    }
    double lhs = pairStream(wl, sl, j), rhs = pairStream(wr, sr, j);
    double bound = tailOf(wl, sl, j) + tailOf(wr, sr, j);
    double tol = opt.tol.value_or(c.value("tol", 1e-4));
    finishResidual(std::abs(lhs - rhs), tol,
                   {{"lhs", lhs}, {"rhs", rhs}, {"combinedBound", numberOrNull(bound)}, {"depth", j}});
    rep.pass = rep.pass && std::abs(lhs - rhs) <= bound;
    out["pass"] = rep.pass;
    return rep;
  }

  if (needsField(kind)) {
    VectorFieldB V = fieldFromJson(*s.field);
    int space = opt.depth.value_or(c.value("depthSpace", 6));
    double tol = opt.tol.value_or(c.value("tol", kind == "stokes-evolving" ? 1e-3 : 1e-4));
    FlowCheck fc;
    if (kind == "ftc" || kind == "stokes-evolving") {
      double a = c.value("a", 0.0), b = c.value("b", 1.0);
      int m = opt.depthTime.value_or(c.value("depthTime", 8));
      fc = kind == "ftc" ? ftcCheck(J, V, *w, a, b, m, space) : stokesEvolvingCheck(J, V, *w, a, b, m, space);
    } else {
      double t = c.value("t", 0.5), h = c.value("h", 1e-3);
      TimeForm tf = timeForm(*w, n);
      fc = kind == "leibniz" ? leibnizCheck(J, V, tf, t, h, space) : reynoldsCheck(J, V, tf, t, h, space);
    }
    json values = {{"lhs", fc.lhs}, {"rhs", fc.rhs}};
    for (auto& [name, v] : fc.terms) values[name] = v;
    finishResidual(fc.residual, tol, values);
    return rep;
  }

  if (kind == "norm") {
    int j = opt.depth.value_or(c.value("depth", 3));
    int r = c.value("r", 1);
    std::optional<OpenRegion> u;
    if (c.contains("region")) u = regionFromJson(c.at("region"));
    NormEstimate e = estimateNorm(J.snapshot(j), r, u);
    rep.pass = e.lower <= e.upper + 1e-12;
    out["values"] = {{"upper", e.upper}, {"lower", e.lower}, {"r", r}, {"depth", j}};
    out["pass"] = rep.pass;
    return rep;
  }
  throw SchemaError("check: unknown kind '" + kind + "'");
}

namespace {

std::string placed(const std::string& path, const RunOptions& opt) {
  if (!opt.outDir) return path;
  return (std::filesystem::path(*opt.outDir) / std::filesystem::path(path).filename()).string();
}

void writeFile(const std::string& path, const std::string& text) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

}  // namespace

int runScenarioFile(const std::string& path, const RunOptions& opt, std::ostream& out, std::ostream& err) {
  Scenario s;
  try {
    s = loadScenario(path);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return 2;
  }
  return runAndWrite(s, opt, out, err);
}

int runAndWrite(const Scenario& s, const RunOptions& opt, std::ostream& out, std::ostream& err) {
  ScenarioReport rep;
  try {
    rep = runScenario(s, opt);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  json o = s.output.value_or(json::object());
  if (opt.outDir && o.empty()) o = {{"json", s.name + ".json"}, {"csv", s.name + ".csv"}};
  if (o.contains("json")) writeFile(placed(o.at("json").get<std::string>(), opt), rep.json.dump(2) + "\n");
  if (o.contains("csv") && !rep.csv.empty()) writeFile(placed(o.at("csv").get<std::string>(), opt), rep.csv);
  json summary = rep.json;
  summary.erase("rows");
  summary.erase("text");
  out << summary.dump(2) << '\n';
  if (rep.json.contains("text")) out << rep.json.at("text").get<std::string>();
  return rep.exitCode();
}

}  // namespace chaincalc

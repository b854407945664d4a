// chaincalc command-line front end.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "chaincalc/scenario.hpp"

using namespace chaincalc;
using nlohmann::json;

namespace {

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  auto parent = std::filesystem::path(out).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + out + "'");
  f << text;
}

json readJsonArg(const std::string& arg) {
  if (!arg.empty() && (arg[0] == '{' || arg[0] == '[')) return json::parse(arg);
  std::ifstream in(arg);
  if (!in) throw SchemaError("cannot open '" + arg + "'");
  return json::parse(in);
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

int demoCantor(int depth, const std::string& out) {
  Form x = Form::scalar(1, Expr::var(0, 1));
  ChainStream g = cantorStream();
  std::string csv = "n,int_boundary_x,stage_mass,two_thirds_pow_n\n";
  for (int n = 0; n <= depth; ++n)
    csv += std::to_string(n) + "," + num(evalChain(x, boundary(g.snapshot(n)))) + "," +
           num(massNorm(cantorStage(n))) + "," + num(std::pow(2.0 / 3.0, n)) + "\n";
  emit(csv, out);
  return 0;
}

int demoIntegral(const Form& w, const ChainStream& s, int depth, const std::string& out) {
  IntegrateConfig cfg;
  cfg.jmax = depth;
  emit(convergenceCsv(integrateStream(w, s, cfg).rows), out);
  return 0;
}

int demoDivergence(int depth, const std::string& out) {
  Expr x = Expr::var(0, 2), y = Expr::var(1, 2);
  Form w(2, 1, {{1u, x * x * y}, {2u, x * y * y * y + Expr(1.0)}});
  ChainStream J = cubeStream({0, 0}, {1, 1});
  ChainStream pdJ = applyToStream(opPerp(), boxBoundaryStream({0, 0}, {1, 1}));
  Form dstar = exteriorD(hodge(w));
  std::string csv = "j,int_J_dstar_w,int_perp_boundary_J_w,difference\n";
  for (int j = 0; j <= depth; ++j) {
    double a = pairStream(dstar, J, j), b = pairStream(w, pdJ, j);
    csv += std::to_string(j) + "," + num(a) + "," + num(b) + "," + num(a - b) + "\n";
  }
  emit(csv, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Operator calculus on Dirac chains"};
  app.require_subcommand(1);

  // verify
  auto* verify = app.add_subcommand("verify", "Run the verification suites");
  std::vector<std::string> suiteNames;
  bool list = false;
  int vn = 0, vgrade = -1;
  std::uint64_t seed = kDefaultSeed;
  std::string vout;
  verify->add_option("suites", suiteNames, "Suites to run (default: all)");
  verify->add_flag("--list", list, "List the suites without running them");
  verify->add_option("--n", vn, "Ambient dimension filter");
  verify->add_option("--grade", vgrade, "Grade filter");
  verify->add_option("--seed", seed, "Random seed")->capture_default_str();
  verify->add_option("--out", vout, "Write a JSON report here");

  // integrate
  auto* integrate = app.add_subcommand("integrate", "Run a scenario file");
  std::string scenarioPath, outDir;
  std::optional<int> depth, depthTime;
  std::optional<double> tol;
  std::optional<std::uint64_t> runSeed;
  integrate->add_option("--scenario", scenarioPath, "Scenario JSON")->required();
  integrate->add_option("--depth", depth, "Override the depth");
  integrate->add_option("--tol", tol, "Override the tolerance");
  integrate->add_option("--seed", runSeed, "Override the scenario seed");
  integrate->add_option("--out", outDir, "Directory for the output files");

  // norm
  auto* norm = app.add_subcommand("norm", "Estimate B^r norms of a Dirac chain");
  std::string chainArg, regionArg, normOut;
  int r = 1;
  norm->add_option("--chain", chainArg, "Chain JSON file or inline JSON")->required();
  norm->add_option("--r", r, "Norm order")->capture_default_str();
  norm->add_option("--region", regionArg, "Open region JSON file or inline JSON");
  norm->add_option("--out", normOut, "Write the JSON result here");

  // flow
  auto* flow = app.add_subcommand("flow", "Run a flow check from a scenario");
  std::string flowScenario, flowCheck;
  flow->add_option("--scenario", flowScenario, "Scenario JSON")->required();
  flow->add_option("--depth-space", depth, "Space depth");
  flow->add_option("--depth-time", depthTime, "Time depth");
  flow->add_option("--check", flowCheck, "ftc, stokes-evolving, leibniz or reynolds")
      ->check(CLI::IsMember({"ftc", "stokes-evolving", "leibniz", "reynolds"}));
  flow->add_option("--tol", tol, "Override the tolerance");
  flow->add_option("--out", outDir, "Directory for the output files");

  // demo
  auto* demo = app.add_subcommand("demo", "Print a convergence table for a classic example");
  std::string demoName, demoOut;
  int demoDepth = 8;
  demo->add_option("name", demoName, "cantor, sierpinski, divergence or quadrifolium")
      ->required()
      ->check(CLI::IsMember({"cantor", "sierpinski", "divergence", "quadrifolium"}));
  demo->add_option("--depth", demoDepth, "Largest depth")->capture_default_str();
  demo->add_option("--out", demoOut, "Write the CSV here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) {
      if (list) {
        for (auto& s : suites()) std::cout << s.criterion << "\t" << s.name << "\t" << s.title << "\n";
        return 0;
      }
      SuiteOptions opt;
      opt.seed = seed;
      opt.n = vn;
      opt.grade = vgrade;
      json report;
      int code = verifySuites(suiteNames, opt, std::cout, &report);
      if (!vout.empty()) emit(json{{"seed", seed}, {"suites", report}}.dump(2) + "\n", vout);
      return code;
    }
    if (*integrate || *flow) {
      RunOptions opt;
      opt.depth = depth;
      opt.depthTime = depthTime;
      opt.tol = tol;
      opt.seed = runSeed;
      if (!outDir.empty()) opt.outDir = outDir;
      std::string path = *integrate ? scenarioPath : flowScenario;
      if (*flow && !flowCheck.empty()) {
        // Rewrite the check kind, keeping the parameters the new kind accepts.
        Scenario s;
        try {
          s = loadScenario(path);
          json c = s.check.value_or(json::object());
          json nc = {{"kind", flowCheck}};
          bool timeKind = flowCheck == "leibniz" || flowCheck == "reynolds";
          std::vector<std::string> keys = timeKind ? std::vector<std::string>{"t", "h", "depthSpace", "tol"}
                                                   : std::vector<std::string>{"a", "b", "depthTime", "depthSpace", "tol"};
          for (auto& k : keys)
            if (c.contains(k)) nc[k] = c[k];
          json j = toJson(s);
          j["check"] = nc;
          s = scenarioFromJson(j);
        } catch (const SchemaError& e) {
          std::cerr << "schema error: " << e.what() << '\n';
          return 2;
        }
        return runAndWrite(s, opt, std::cout, std::cerr);
      }
      return runScenarioFile(path, opt, std::cout, std::cerr);
    }
    if (*norm) {
      DiracChain a = chainFromJson(readJsonArg(chainArg));
      std::optional<OpenRegion> u;
      if (!regionArg.empty()) u = regionFromJson(readJsonArg(regionArg));
      NormEstimate e = estimateNorm(a, r, u);
      json out = {{"r", r}, {"upper", e.upper}, {"lower", e.lower}, {"terms", e.decomposition.size()}};
      emit(out.dump(2) + "\n", normOut);
      return 0;
    }
    if (*demo) {
      if (demoName == "cantor") return demoCantor(demoDepth, demoOut);
      if (demoName == "divergence") return demoDivergence(demoDepth, demoOut);
      if (demoName == "sierpinski") {
        // x dx dy over the Sierpinski triangle: the centroid (1/2) times the area.
        Form w(2, 2, {{3u, Expr::var(0, 2)}});
        return demoIntegral(w, sierpinskiStream(), demoDepth, demoOut);
      }
      // Quadrifolium r = cos 2t: (1/2) int x dy - y dx = pi / 2.
      Expr t = Expr::var(0, 1);
      SmoothMap F(1, {cos(Expr(2.0) * t) * cos(t), cos(Expr(2.0) * t) * sin(t)});
      ChainStream c = algebraicStream(F, cellStream({0.0}, {{2 * M_PI}}));
      Expr x = Expr::var(0, 2), y = Expr::var(1, 2);
      Form w(2, 1, {{1u, Expr(-0.5) * y}, {2u, Expr(0.5) * x}});
      return demoIntegral(w, c, demoDepth, demoOut);
    }
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#include <filesystem>
#include <fstream>
#include <sstream>

#include "chaincalc/scenario.hpp"
#include "doctest.h"

using namespace chaincalc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = fs::path(CHAINCALC_SOURCE_DIR) / "scenarios";

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("chaincalc_test_scenario_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json squareArea() {
  return json::parse(R"({
    "name": "unit-area",
    "domain": {"kind": "cube", "lo": [0, 0], "hi": [1, 1]},
    "form": {"family": "poly", "terms": [{"idx": [1, 2], "monomial": {"exps": [0, 0]}}]},
    "check": {"kind": "integrate", "jmin": 0, "jmax": 3, "expect": 1.0, "tol": 1e-12}
  })");
}

}  // namespace

TEST_CASE("every bundled scenario loads and round-trips") {
  int count = 0;
  for (auto& entry : fs::directory_iterator(kScenarios)) {
    if (entry.path().extension() != ".json") continue;
    ++count;
    Scenario s = loadScenario(entry.path().string());
    json j = toJson(s);
    CHECK(toJson(scenarioFromJson(j)) == j);
    std::ifstream in(entry.path());
    CHECK(j == json::parse(in));
  }
  CHECK(count >= 5);
}

TEST_CASE("unknown keys and bad payloads are schema errors") {
  json j = squareArea();
  j["colour"] = "blue";
  CHECK_THROWS_AS(scenarioFromJson(j), SchemaError);
  json k = squareArea();
  k["check"]["jmaxx"] = 4;
  CHECK_THROWS_AS(scenarioFromJson(k), SchemaError);
  json d = squareArea();
  d["domain"] = {{"kind", "hexagon"}};
  CHECK_THROWS_AS(scenarioFromJson(d), SchemaError);
  json o = squareArea();
  o["ops"] = json::array({"boundary", {{"spin", {{"v", {1, 0}}}}}});
  CHECK_THROWS_AS(scenarioFromJson(o), SchemaError);
  CHECK_THROWS_AS(scenarioFromJson(json::array()), SchemaError);
}

TEST_CASE("pipeline operators parse") {
  CHECK(operatorFromJson("boundary").name == "boundary");
  CHECK(operatorFromJson("perp").name == "perp");
  CHECK(operatorFromJson(json{{"extrude", {{"v", {0, 1}}}}}).dk == 1);
  CHECK_THROWS_AS(operatorFromJson("twist"), SchemaError);
}

TEST_CASE("exit codes") {
  fs::path dir = scratch("codes");
  std::ostringstream out, err;
  RunOptions opt;
  opt.outDir = dir.string();

  fs::path good = dir / "good.json";
  std::ofstream(good) << squareArea().dump();
  CHECK(runScenarioFile(good.string(), opt, out, err) == 0);

  json wrong = squareArea();
  wrong["check"]["expect"] = 2.0;
  fs::path bad = dir / "wrong.json";
  std::ofstream(bad) << wrong.dump();
  CHECK(runScenarioFile(bad.string(), opt, out, err) == 1);

  json unknown = squareArea();
  unknown["extra"] = 1;
  fs::path schema = dir / "schema.json";
  std::ofstream(schema) << unknown.dump();
  CHECK(runScenarioFile(schema.string(), opt, out, err) == 2);

  fs::path broken = dir / "broken.json";
  std::ofstream(broken) << "{ not json";
  CHECK(runScenarioFile(broken.string(), opt, out, err) == 2);
  CHECK(runScenarioFile((dir / "missing.json").string(), opt, out, err) == 2);
}

TEST_CASE("convergence tables are byte-identical across runs") {
  Scenario s = loadScenario((kScenarios / "square-moment.json").string());
  fs::path a = scratch("run_a"), b = scratch("run_b");
  std::ostringstream out, err;
  RunOptions oa, ob;
  oa.outDir = a.string();
  ob.outDir = b.string();
  CHECK(runAndWrite(s, oa, out, err) == 0);
  CHECK(runAndWrite(s, ob, out, err) == 0);
  std::string csv = s.output->at("csv").get<std::string>();
  std::string ca = slurp(a / csv), cb = slurp(b / csv);
  CHECK_FALSE(ca.empty());
  CHECK(ca == cb);
  CHECK(ca.rfind("j,value,diff,accelerated,certified_bound", 0) == 0);
}

TEST_CASE("integrate report") {
  ScenarioReport r = runScenario(scenarioFromJson(squareArea()));
  CHECK(r.pass);
  CHECK(r.exitCode() == 0);
  CHECK(r.json.at("values").at("value").get<double>() == doctest::Approx(1.0));
  RunOptions deeper;
  deeper.depth = 5;
  ScenarioReport d = runScenario(scenarioFromJson(squareArea()), deeper);
  CHECK(d.json.at("rows").size() == 6);
}

TEST_CASE("the seed comes from the scenario, then the default") {
  Scenario s = scenarioFromJson(squareArea());
  CHECK(s.effectiveSeed() == kDefaultSeed);
  json j = squareArea();
  j["seed"] = 99;
  CHECK(scenarioFromJson(j).effectiveSeed() == 99u);
  j["seed"] = -1;
  CHECK_THROWS_AS(scenarioFromJson(j), SchemaError);
}

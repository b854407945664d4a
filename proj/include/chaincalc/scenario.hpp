#pragma once
// JSON scenarios: a domain stream, an operator pipeline, a form or field and
// one check. Parsing is strict; running returns a report and an exit code.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "chaincalc/verify.hpp"

namespace chaincalc {

class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Scenario {
  std::string name;
  std::optional<std::uint64_t> seed;
  nlohmann::json domain;
  // Absent keys stay absent so that serialization round-trips.
  std::optional<nlohmann::json> ops, form, field, check, output;

  std::uint64_t effectiveSeed() const { return seed.value_or(kDefaultSeed); }
  std::string checkKind() const { return check ? check->value("kind", "integrate") : "integrate"; }
};

// Throws SchemaError on unknown keys, wrong types or payloads that do not build.
Scenario scenarioFromJson(const nlohmann::json& j);
nlohmann::json toJson(const Scenario& s);
Scenario loadScenario(const std::string& path);

// One pipeline step: "boundary" or {"extrude": {"v": [...]}} and so on.
ChainOperator operatorFromJson(const nlohmann::json& j);

// Domain stream with the pipeline applied.
ChainStream scenarioStream(const Scenario& s);

struct RunOptions {
  std::optional<int> depth;       // overrides the check's depth (jmax for integrate)
  std::optional<int> depthTime;   // flow checks
  std::optional<double> tol;
  std::optional<std::string> outDir;  // output files are placed here
  std::optional<std::uint64_t> seed;
};

struct ScenarioReport {
  bool pass = false;
  nlohmann::json json;
  std::string csv;  // convergence table when the check produces one
  int exitCode() const { return pass ? 0 : 1; }
};

ScenarioReport runScenario(const Scenario& s, const RunOptions& opt = {});

// Load, run, write the outputs and a summary to `out`. Returns 0 on pass,
// 1 on a numerical failure and 2 on a schema error.
int runScenarioFile(const std::string& path, const RunOptions& opt, std::ostream& out, std::ostream& err);
int runAndWrite(const Scenario& s, const RunOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace chaincalc

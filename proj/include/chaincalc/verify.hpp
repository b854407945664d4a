#pragma once
// Seeded random inputs and the verification suites run by `chaincalc verify`
// and the acceptance binary.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "chaincalc/flow.hpp"

#ifndef CHAINCALC_DEFAULT_SEED
#define CHAINCALC_DEFAULT_SEED 20240611ULL
#endif

namespace chaincalc {

constexpr std::uint64_t kDefaultSeed = CHAINCALC_DEFAULT_SEED;

// splitmix64; the derived doubles do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : s_(seed) {}
  std::uint64_t next();
  double uniform(double a = 0.0, double b = 1.0);
  int integer(int lo, int hi);  // inclusive
  Vec vector(int n, double a = -1.0, double b = 1.0);

 private:
  std::uint64_t s_;
};

KVector randomKVector(Rng& g, int n, int k);
// `size` elements with points in [-spread, spread]^n and orders 0..maxOrder.
DiracChain randomChain(Rng& g, int n, int k, int maxOrder, int size, double spread = 1.0);
// Each coefficient gets `terms` random monomials of total degree <= degree.
Form randomPolyForm(Rng& g, int n, int k, int degree, int terms = 3);
VectorFieldB randomPolyField(Rng& g, int n, int degree, int terms = 3);
// Random quadratic map R^n -> R^n close to the identity.
SmoothMap randomQuadraticMap(Rng& g, int n);

// Exact integral of a polynomial over an axis box.
double boxIntegral(const Polynomial& p, const Vec& lo, const Vec& hi);

struct SuiteOptions {
  std::uint64_t seed = kDefaultSeed;
  int n = 0;       // 0: every supported dimension
  int grade = -1;  // -1: every grade
};

struct CheckLine {
  std::string name;
  double value = 0;  // measured residual or quantity
  double limit = 0;  // pass threshold (value <= limit unless noted)
  bool pass = false;
  std::string note;
};

struct SuiteResult {
  SuiteResult() = default;
  SuiteResult(std::string n, std::string t) : name(std::move(n)), title(std::move(t)) {}
  std::string name;
  std::string title;
  bool pass = true;
  double seconds = 0;
  std::vector<CheckLine> checks;
  void add(CheckLine c);
};

struct Suite {
  std::string name;
  int criterion;
  std::string title;
  std::function<SuiteResult(const SuiteOptions&)> run;
};

const std::vector<Suite>& suites();
const Suite* findSuite(const std::string& name);

// Runs the suites whose names are listed (all when empty), printing a
// pass/fail matrix. Returns 0 when every suite passes.
int verifySuites(const std::vector<std::string>& names, const SuiteOptions& opt, std::ostream& out,
                 nlohmann::json* report = nullptr);

nlohmann::json toJson(const SuiteResult& r);

}  // namespace chaincalc

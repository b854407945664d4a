#pragma once
// Two-sided estimates of B^r norms. Upper bounds come from explicit
// difference-chain decompositions, lower bounds from witness forms with
// certified norm bounds.

#include <optional>
#include <vector>

#include "chaincalc/chain.hpp"
#include "chaincalc/form.hpp"

namespace chaincalc {

// c * Delta_sigma(p; alpha) is stored with the coefficient folded into base.kv.
struct DecompTerm {
  SymTensor sigma;
  ChainElement base;
  double cost() const;
};

struct NormEstimate {
  int r = 0;
  double upper = 0;
  double lower = 0;
  std::vector<DecompTerm> decomposition;
  std::optional<Form> witness;
};

double massNorm(const DiracChain& a);

struct NormOptions {
  bool keepDecomposition = true;
  int hungarianLimit = 64;  // units per matching group
  int maxSplit = 8;         // pieces one element may be split into
  int shiftLimit = 256;     // levels with at most this many terms also try shift pairings
};

NormEstimate normUB(const DiracChain& a, int r, const std::optional<OpenRegion>& u = std::nullopt,
                    const NormOptions& opt = {});

// Forms used by normLB when no dictionary is given: constant blade forms and
// centered polynomial multiples of degree <= 2 over the support's bounding box.
std::vector<Form> defaultDictionary(const DiracChain& a);

NormEstimate normLB(const DiracChain& a, int r, const std::vector<Form>& dict);
NormEstimate estimateNorm(const DiracChain& a, int r, const std::optional<OpenRegion>& u = std::nullopt);

// Sum of c * Delta_sigma(p; alpha) over a decomposition.
DiracChain decompositionChain(int dim, const std::vector<DecompTerm>& d);

// Minimum-cost assignment of rows to columns (rows <= cols), returns the
// column of each row. Costs are row-major.
std::vector<int> hungarian(const std::vector<double>& cost, int rows, int cols);

}  // namespace chaincalc

#pragma once
// Chain-side operators. Element-level appliers write raw (uncanonicalized)
// output so streams can apply them lazily; chain-level versions canonicalize.

#include <functional>
#include <optional>
#include <string>

#include "chaincalc/chain.hpp"
#include "chaincalc/form.hpp"

namespace chaincalc {

using ElementSink = std::vector<ChainElement>;
using ElementOp = std::function<void(const ChainElement&, ElementSink&)>;

struct ChainOperator {
  std::string name;
  int dk = 0;  // grade shift
  int ds = 0;  // order shift
  ElementOp element;
  std::function<Form(const Form&)> dual;  // empty when no single dual exists
  // Output elements sit at the input point and do not otherwise depend on it.
  bool pointFree = false;

  DiracChain operator()(const DiracChain& a) const;
};

// Apply an element op to every element and canonicalize.
DiracChain applyElementwise(const ElementOp& op, const DiracChain& a);

// Constant-vector primitives.
DiracChain extrude(const Vec& v, const DiracChain& a);
DiracChain retract(const Vec& v, const DiracChain& a);
DiracChain prederiv(const Vec& v, const DiracChain& a);
// Vector-field versions.
DiracChain extrude(const VectorFieldB& V, const DiracChain& a);
DiracChain retract(const VectorFieldB& V, const DiracChain& a);
DiracChain prederiv(const VectorFieldB& V, const DiracChain& a);

DiracChain boundary(const DiracChain& a);
DiracChain dirBoundary(const Vec& v, const DiracChain& a);
DiracChain perp(const DiracChain& a);
DiracChain clifford(const Vec& v, const DiracChain& a);
DiracChain coboundary(const DiracChain& a);
DiracChain geomLaplace(const DiracChain& a);
DiracChain geomDirac(const DiracChain& a);
DiracChain multiplyChain(const ScalarField& f, const DiracChain& a);
DiracChain pushforward(const SmoothMap& F, const DiracChain& a);
DiracChain cartesian(const DiracChain& a, const DiracChain& b);

// The element-level appliers.
ElementOp extrudeOp(const Vec& v);
ElementOp retractOp(const Vec& v);
ElementOp prederivOp(const Vec& v);
ElementOp extrudeFieldOp(const VectorFieldB& V);
ElementOp retractFieldOp(const VectorFieldB& V);
ElementOp boundaryOp();
ElementOp perpOp();
ElementOp multiplyOp(const ScalarField& f);
ElementOp pushforwardOp(const SmoothMap& F);
ElementOp composeOps(std::vector<ElementOp> ops);  // applied left to right

// Named operators with their form duals, for suites and scenario pipelines.
ChainOperator opExtrude(const Vec& v);
ChainOperator opRetract(const Vec& v);
ChainOperator opPrederiv(const Vec& v);
ChainOperator opBoundary();
ChainOperator opDirBoundary(const Vec& v);
ChainOperator opPerp();
ChainOperator opCoboundary();
ChainOperator opGeomLaplace();
ChainOperator opGeomDirac();
ChainOperator opClifford(const Vec& v);
ChainOperator opMultiply(const ScalarField& f);
ChainOperator opPushforward(const SmoothMap& F);
ChainOperator opExtrudeField(const VectorFieldB& V);
ChainOperator opRetractField(const VectorFieldB& V);
ChainOperator opPrederivField(const VectorFieldB& V);

// Sign table of the operator product prod_i (E_{e_i} + E_{e_i}^dagger)
// against perp on each basis blade: entries are +1, -1 or 0 (not a multiple).
struct PerpSignRow {
  std::vector<int> idx;
  int sign;
};
std::vector<PerpSignRow> perpOperatorProductTable(int n);

// Retraction sign through the time coordinate for the two orderings of the
// evolving-chain product: {grade k, sign with time last, sign with time first}.
struct TimeOrderRow {
  int k;
  int timeLast;
  int timeFirst;
};
std::vector<TimeOrderRow> timeOrderingTable(int n);

}  // namespace chaincalc

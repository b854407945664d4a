#pragma once
// Chain representatives as lazily generated streams A_0, A_1, ... and
// integration of forms along them.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chaincalc/chainops.hpp"
#include "chaincalc/norms.hpp"

namespace chaincalc {

// One generated element (p; s (x) w*kv). References are only valid during the call.
using ElementVisitor = std::function<void(std::span<const double> p, const SymTensor& s, const KVector& kv, double w)>;

struct ChainStream {
  int dim = 0;
  int grade = 0;
  int normOrder = 1;
  std::string description;
  nlohmann::json params;  // how the stream was built (for scenarios and reports)
  Box domain;             // contains every generated point
  // Certified c_j >= |A_j - A_{j+1}|_{B^normOrder}; empty when unknown.
  std::function<double(int)> cauchyRate;
  // Visits part `part` of `nparts` of A_j; the parts partition A_j.
  std::function<void(int j, int part, int nparts, const ElementVisitor&)> gen;
  // Optional fast path: elements with point in the half-open box [lo, hi).
  std::function<void(int j, const Vec& lo, const Vec& hi, const ElementVisitor&)> genBox;

  void visit(int j, const ElementVisitor& f) const { gen(j, 0, 1, f); }
  void visitBox(int j, const Vec& lo, const Vec& hi, const ElementVisitor& f) const;
  DiracChain snapshot(int j) const;
  // Sum of c_i for i >= j (infinite when no rate is known).
  double tailBound(int j) const;
};

ChainStream cubeStream(Vec lo, Vec hi);
// Parallelepiped p0 + sum t_a edges[a], t in [0,1]^k, oriented by edge order.
ChainStream cellStream(Point p0, std::vector<Vec> edges, double orientation = 1.0);
// Segment or triangle by its vertices (k <= 2), 4-way midpoint subdivision for triangles.
ChainStream simplexStream(std::vector<Point> vertices, double orientation = 1.0);
ChainStream polyhedral(std::vector<std::pair<double, ChainStream>> cells);
ChainStream openSetStream(const OpenRegion& u);
ChainStream cantorStream();          // (3/2)^n-weighted stage chains
ChainStream cantorBoundaryStream();  // endpoint chains with weights +-(3/2)^n
ChainStream sierpinskiStream();      // (4/3)^k-weighted triangle chains
// Unscaled Cantor stage E_n: 2^n intervals of length 3^-n.
DiracChain cantorStage(int n);
// X = sum_I f_I e_I supported in U: elements m_{f_I} E_{e_I} applied to the
// 0-vector representative of U.
ChainStream vectorFieldRep(int grade, std::vector<std::pair<Blade, Expr>> field, const OpenRegion& u);
ChainStream algebraicStream(const SmoothMap& f, ChainStream base);
ChainStream dipoleCell(const Vec& v, ChainStream base);
// Elementwise chain operator applied to every snapshot.
ChainStream applyToStream(const ChainOperator& op, ChainStream base);
ChainStream scaleStream(double s, ChainStream base);
// Boundary faces of an axis box as a polyhedral (n-1)-stream.
ChainStream boxBoundaryStream(const Vec& lo, const Vec& hi);

ChainStream streamFromJson(const nlohmann::json& j);

struct ConvRow {
  int j;
  double value;
  double diff;         // value_j - value_{j-1} (nan at the first row)
  double accelerated;  // extrapolated estimate, or value when unstable
  double certified;    // certified |limit - value_j|, nan when unavailable
};

struct IntegrateConfig {
  int jmin = 0;
  int jmax = 6;
  int threads = 0;  // 0: CHAINCALC_THREADS or 1
  // Error orders p (error ~ 2^{-p j}) removed by repeated Richardson steps.
  // Empty selects Aitken.
  std::vector<int> richardson;
};

struct IntegrateResult {
  double value = 0;      // best estimate (accelerated when stable)
  double raw = 0;        // omega(A_jmax)
  double errorBound = 0; // certified bound for raw; infinite when unavailable
  bool diverging = false;
  std::vector<ConvRow> rows;
};

double pairStream(const Form& w, const ChainStream& s, int j, int threads = 0);
IntegrateResult integrateStream(const Form& w, const ChainStream& s, const IntegrateConfig& cfg);
std::string convergenceCsv(const std::vector<ConvRow>& rows);

// Aitken delta-squared on the last three values; falls back to the last value
// when the difference ratio leaves (0.1, 0.9).
double aitken(double v0, double v1, double v2);

// Richardson extrapolation of the last orders.size()+1 values of a dyadic
// sequence, eliminating error terms 2^{-p j} for each p in turn.
double richardson(std::span<const double> vals, std::span<const int> orders);

// Certified upper bound of |A_j - A_{j+1}|_{B^r}, summing decomposition costs
// over the cells of the level-j grid of the stream's domain box.
double streamDifferenceUB(const ChainStream& s, int j, int r);

int threadCount(int requested = 0);

}  // namespace chaincalc

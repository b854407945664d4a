#pragma once
// Dirac chains: finite sums of elements (p; sigma (x) alpha).

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chaincalc/multivec.hpp"

namespace chaincalc {

using Point = Vec;

constexpr double kPointTol = 1e-12;
constexpr double kPruneRel = 1e-14;

struct ChainElement {
  Point point;
  SymTensor sym;
  KVector kv;

  ChainElement() = default;
  ChainElement(Point p, KVector a);
  ChainElement(Point p, SymTensor s, KVector a);

  int dim() const { return static_cast<int>(point.size()); }
  int order() const { return sym.order(); }
  int grade() const { return kv.grade(); }
};

class DiracChain {
 public:
  DiracChain() = default;
  explicit DiracChain(int dim) : dim_(dim) {}
  // Canonicalizes.
  DiracChain(int dim, std::vector<ChainElement> raw);
  static DiracChain single(ChainElement e);

  int dim() const { return dim_; }
  const std::vector<ChainElement>& elements() const { return elems_; }
  size_t size() const { return elems_.size(); }
  bool empty() const { return elems_.empty(); }
  int maxOrder() const;
  double maxCoeff() const;

  // Elements of a single grade.
  DiracChain gradeView(int k) const;

  DiracChain& operator+=(const DiracChain& o);
  DiracChain& operator-=(const DiracChain& o);
  friend DiracChain operator+(DiracChain a, const DiracChain& b) { return a += b; }
  friend DiracChain operator-(DiracChain a, const DiracChain& b) { return a -= b; }
  friend DiracChain operator*(double s, const DiracChain& a) { return a.scaled(s); }
  friend DiracChain operator*(const DiracChain& a, double s) { return a.scaled(s); }
  DiracChain scaled(double s) const;
  DiracChain operator-() const { return scaled(-1.0); }

 private:
  friend DiracChain canonicalize(int dim, std::vector<ChainElement> raw);
  int dim_ = 0;
  std::vector<ChainElement> elems_;
};

DiracChain canonicalize(int dim, std::vector<ChainElement> raw);
// max coefficient of canonicalize(A - B) <= tol
bool approxEqual(const DiracChain& a, const DiracChain& b, double tol);
double maxDifference(const DiracChain& a, const DiracChain& b);

DiracChain differenceChain(const SymTensor& sigma, const ChainElement& base);
DiracChain translate(std::span<const double> u, const DiracChain& a);
std::vector<Point> support(const DiracChain& a);

struct OpenRegion {
  int dim = 0;
  std::function<bool(std::span<const double>)> member;
  Vec lo, hi;  // bounding box; may be infinite
  // Negative inside; |value| is a lower bound of the distance to the boundary.
  std::function<double(std::span<const double>)> signedDistance;
  std::string description;
  nlohmann::json params;  // serialized form
  bool convex = false;    // lets hull tests stop at the vertices

  bool contains(std::span<const double> p) const;
  bool bounded() const;

  static OpenRegion whole(int n);
  static OpenRegion box(Vec lo, Vec hi);
  static OpenRegion ball(Vec center, double radius);
  // Open unit disk less [0,1] x {0}.
  static OpenRegion slitDisk();
};

DiracChain restrict(const DiracChain& a, const OpenRegion& w);
// Convex hull of the 2^j vertices p + sum eps_i u_i lies in U.
bool insideRegion(const SymTensor& sigma, std::span<const double> p, const OpenRegion& u);
std::vector<Point> parallelepipedVertices(const SymTensor& sigma, std::span<const double> p);

void to_json(nlohmann::json& j, const DiracChain& a);
DiracChain chainFromJson(const nlohmann::json& j);
void to_json(nlohmann::json& j, const OpenRegion& u);
OpenRegion regionFromJson(const nlohmann::json& j);

}  // namespace chaincalc

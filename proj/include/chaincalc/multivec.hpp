#pragma once
// Exterior algebra of R^n over the standard orthonormal basis, and symmetric
// products of vectors (the dipole directions of higher-order chain elements).

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace chaincalc {

using Vec = std::vector<double>;

// A basis blade e_I as a bitmask: bit i set <=> index i+1 in I.
using Blade = std::uint32_t;

constexpr int kMaxDim = 24;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline int bladeGrade(Blade b) { return __builtin_popcount(b); }

// Lexicographic order of the increasing index tuples of two blades of equal
// grade.
inline bool bladeLess(Blade a, Blade b) {
  Blade x = a ^ b;
  if (x == 0) return false;
  return (a & (x & (~x + 1))) != 0;
}

// Sign of the permutation sorting the concatenation (a, b); 0 if they share
// an index.
int wedgeSign(Blade a, Blade b);

// 1-based indices of a blade, increasing.
std::vector<int> bladeIndices(Blade b);
Blade bladeFromIndices(std::span<const int> idx);  // 1-based, any order, no repeats

struct BladeTerm {
  Blade blade;
  double c;
};

class KVector {
 public:
  KVector() = default;
  KVector(int dim, int grade);

  static KVector scalar(int dim, double c);
  static KVector blade(int dim, Blade b, double c = 1.0);
  static KVector basis(int dim, std::initializer_list<int> idx, double c = 1.0);
  static KVector vector(std::span<const double> v);
  // The unit n-vector e_1 ^ ... ^ e_n.
  static KVector volume(int dim);

  int dim() const { return dim_; }
  int grade() const { return grade_; }
  const std::vector<BladeTerm>& terms() const { return terms_; }
  bool isZero() const { return terms_.empty(); }
  double coeff(Blade b) const;
  double maxAbs() const;

  // Drops coefficients with |c| <= threshold.
  void prune(double threshold);
  void add(Blade b, double c);  // accumulate, keeps order, drops exact zeros

  KVector& operator+=(const KVector& o);
  KVector& operator-=(const KVector& o);
  KVector& operator*=(double s);
  friend KVector operator+(KVector a, const KVector& b) { return a += b; }
  friend KVector operator-(KVector a, const KVector& b) { return a -= b; }
  friend KVector operator*(KVector a, double s) { return a *= s; }
  friend KVector operator*(double s, KVector a) { return a *= s; }
  KVector operator-() const { return *this * -1.0; }
  bool operator==(const KVector& o) const;

  // Total order used for canonical sorting (grade, then blades, then values).
  static int compare(const KVector& a, const KVector& b);

  // Embeds into R^{dim+shift} by shifting indices up.
  KVector shifted(int newDim, int shift) const;

  std::string str() const;

 private:
  int dim_ = 0;
  int grade_ = 0;
  std::vector<BladeTerm> terms_;  // sorted by bladeLess, no zeros
};

KVector wedge(const KVector& a, const KVector& b);
double inner(const KVector& a, const KVector& b);
double norm(const KVector& a);

// Exact mass when alpha is known to be simple (always the case for grades
// 0, 1, n-1, n; otherwise decided by a rank test).
std::optional<double> mass(const KVector& a);
// Sum of norms of a greedy decomposition into simple pieces.
double massUpper(const KVector& a);
// mass() when available, massUpper() otherwise.
double massBound(const KVector& a);
bool isSimple(const KVector& a, double tol = 1e-12);

KVector retractKV(std::span<const double> v, const KVector& a);
KVector perpKV(const KVector& a);

// Linear map on k-vectors induced by a matrix (rows x cols = m x n):
// (M v_1) ^ ... ^ (M v_k). M is row-major.
KVector pushKV(std::span<const double> M, int rows, const KVector& a);

class SymTensor {
 public:
  SymTensor() = default;
  explicit SymTensor(int dim) : dim_(dim) {}
  SymTensor(int dim, std::vector<Vec> factors);
  // e_{i1} o ... o e_{is}, indices 1-based.
  static SymTensor monomial(int dim, std::vector<int> idx);

  int dim() const { return dim_; }
  int order() const { return static_cast<int>(factors_.size()); }
  const std::vector<Vec>& factors() const { return factors_; }
  // Sorted 1-based indices when every factor is a standard basis vector.
  const std::optional<std::vector<int>>& basisIndices() const { return basis_; }

  // Expansion in the monomial basis of S^s: sorted index tuples with weights.
  std::vector<std::pair<std::vector<int>, double>> expand() const;

  SymTensor withFactor(const Vec& u) const;
  SymTensor withBasisFactor(int i) const;  // 1-based
  SymTensor shifted(int newDim, int shift) const;

  // Multiset equality of factors up to tolerance.
  bool sameMultiset(const SymTensor& o, double tol = 1e-12) const;

 private:
  int dim_ = 0;
  std::vector<Vec> factors_;
  std::optional<std::vector<int>> basis_ = std::vector<int>{};
};

SymTensor symCompose(const SymTensor& a, const SymTensor& b);
double symNorm(const SymTensor& s);

void to_json(nlohmann::json& j, const KVector& v);
void from_json(const nlohmann::json& j, KVector& v);
void to_json(nlohmann::json& j, const SymTensor& s);
void from_json(const nlohmann::json& j, SymTensor& s);

}  // namespace chaincalc

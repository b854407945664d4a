#pragma once
// Flows of vector fields, chains transported by them, evolving chains
// {J_t}_a^b and numerical checks of the flow integral theorems.

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chaincalc/chainops.hpp"
#include "chaincalc/rep.hpp"

namespace chaincalc {

class FlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FlowOptions {
  double tol = 1e-10;     // step halving stops when h and h/2 agree to this
  double maxStep = 0.05;  // starting step
  int maxHalvings = 24;
  bool jacobian = true;   // integrate the variational equation too
};

// State of a trajectory: the point and Dphi_t (row-major n x n).
struct FlowState {
  Point x;
  std::vector<double> jac;
};

// phi_t for an autonomous field, by fixed-step RK4 on x' = V(x) together with
// J' = DV(x) J. Fields whose components are affine polynomials take a fast
// path: the flow is x -> M(t) x + c(t) with (M, c) integrated once.
class FlowMap {
 public:
  FlowMap() = default;
  explicit FlowMap(VectorFieldB v, FlowOptions opt = {});

  int dim() const { return field_.dim; }
  const VectorFieldB& field() const { return field_; }
  const FlowOptions& options() const { return opt_; }
  bool affine() const { return affine_; }
  double step() const { return h_; }

  // Picks the step by halving until the states at the extreme times agree
  // to tol for every probe. Throws FlowError when halving does not settle.
  void calibrate(const std::vector<Point>& probes, double tmin, double tmax);

  // States at the given times (any order, either sign). Requires calibrate.
  std::vector<FlowState> trajectory(std::span<const double> p, std::span<const double> times) const;
  FlowState state(double t, std::span<const double> p) const;

 private:
  std::vector<FlowState> integrate(std::span<const double> p, std::span<const double> times, double h) const;
  void rhs(const double* y, double* dy) const;

  VectorFieldB field_;
  FlowOptions opt_;
  bool affine_ = false;
  std::vector<double> A_, b_;  // affine fields: V(x) = A x + b
  double h_ = 0;               // 0 until calibrated
};

Point flowPoint(const VectorFieldB& v, double t, std::span<const double> p);
std::vector<double> flowJacobian(const VectorFieldB& v, double t, std::span<const double> p);

// (p; alpha) -> (phi_t(p); Dphi_t alpha) for an order-0 chain.
DiracChain pushforwardFlow(const VectorFieldB& v, double t, const DiracChain& a);

// J_t = phi_{t*} J_0 as a stream indexed by the space depth of J0.
ChainStream flowedStream(const ChainStream& j0, const VectorFieldB& v, double t);

// {J_t}_a^b as a stream indexed by the time depth m: the 2^m midpoints t_q
// with weight dt each carry (phi_{t_q}(p); dt Dphi_{t_q} alpha) for every
// element of J0 at the fixed space depth. The time factor is placed first,
// so no orientation sign enters at any grade.
ChainStream evolvingChain(const ChainStream& j0, const VectorFieldB& v, double a, double b, int spaceDepth);

// The same snapshot built literally: interval chain times J0 with time first,
// retraction of e_1, then pushforward by theta(t, p) = phi_t(p).
DiracChain evolvingChainLiteral(const DiracChain& j0, const VectorFieldB& v, double a, double b, int m);

// Geometric boundary of a cube, cell or simplex stream (for the Stokes check).
ChainStream boundaryStreamOf(const ChainStream& s);

// Forms with explicit time dependence: a form on R^{n+1} whose last
// variable is t and whose blades only involve the first n indices.
class TimeForm {
 public:
  TimeForm() = default;
  TimeForm(int dim, Form spaceTime);
  static TimeForm constant(const Form& w);

  int dim() const { return dim_; }
  int grade() const { return st_.grade(); }
  Form at(double t) const;
  Form dt(double t) const;  // partial derivative in t
  const Form& spaceTime() const { return st_; }

 private:
  static Form slice(const Form& st, int n, double t);
  int dim_ = 0;
  Form st_, dst_;
};

struct FlowCheck {
  std::string name;
  double lhs = 0, rhs = 0, residual = 0;
  std::vector<std::pair<std::string, double>> terms;  // named intermediate values
};

// |int_{J_b} w - int_{J_a} w - int_{{J_t}} L_V w|
FlowCheck ftcCheck(const ChainStream& j0, const VectorFieldB& v, const Form& w, double a, double b, int m,
                   int spaceDepth);
// |int_{{J_t}} d L_V w - (int_{dJ_b} w - int_{dJ_a} w)|; dj0 defaults to boundaryStreamOf(j0).
FlowCheck stokesEvolvingCheck(const ChainStream& j0, const VectorFieldB& v, const Form& w, double a, double b,
                              int m, int spaceDepth);
FlowCheck stokesEvolvingCheck(const ChainStream& j0, const ChainStream& dj0, const VectorFieldB& v, const Form& w,
                              double a, double b, int m, int spaceDepth);
// |d/dt int_{J_t} w_t - int_{P_V J_t} w_t - int_{J_t} d_t w_t|, d/dt by central difference.
FlowCheck leibnizCheck(const ChainStream& j0, const VectorFieldB& v, const TimeForm& w, double t, double h,
                       int spaceDepth);
// Top grade: |d/dt int_{J_t} w_t - int_{J_t} d_t w_t - int_{dJ_t} i_V w_t|.
FlowCheck reynoldsCheck(const ChainStream& j0, const VectorFieldB& v, const TimeForm& w, double t, double h,
                        int spaceDepth);
FlowCheck reynoldsCheck(const ChainStream& j0, const ChainStream& dj0, const VectorFieldB& v, const TimeForm& w,
                        double t, double h, int spaceDepth);

}  // namespace chaincalc

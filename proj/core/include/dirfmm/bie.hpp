#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "dirfmm/curve.hpp"
#include "dirfmm/driver.hpp"
#include "dirfmm/lowrank.hpp"
#include "dirfmm/quadrature.hpp"

namespace dirfmm {

// How the log singularity of the single layer is integrated.
enum class SingularRule {
  corrected_trapezoid,  // sixth-order corrected trapezoidal rule (default)
  kress,                // spectral log splitting; dense operator only
};

// Nystrom discretization of
//   1/2 phi(x) + int (dG/dn(y) - i eta G(x,y)) phi(y) ds(y) = -u_inc(x)
// on a closed curve, with n uniform nodes in the parameter.
struct BIESystem {
  CurveKind kind = CurveKind::circle;
  double K = 0.0;
  double eta = kPi;
  SingularRule rule = SingularRule::corrected_trapezoid;
  std::vector<double> t;
  std::vector<Point2> nodes;
  std::vector<Point2> normals;  // outward
  std::vector<double> speed;    // |gamma'(t_j)|
  std::vector<double> weights;  // (2 pi / n) |gamma'(t_j)|
  std::vector<double> curvature;
  std::array<double, 6> correction{};  // stencil weights for the corrected rule
  std::vector<double> kress;           // log weights by node distance (kress rule only)

  int size() const { return static_cast<int>(nodes.size()); }
};

// n = round(ppw * length), rounded up to even.
BIESystem discretize(const ParamCurve &curve, double ppw = 20.0, double eta = kPi,
                     SingularRule rule = SingularRule::corrected_trapezoid);
BIESystem discretize_nodes(const ParamCurve &curve, int n, double eta = kPi,
                           SingularRule rule = SingularRule::corrected_trapezoid);

// Dense matrix entry (i, j) of the discrete operator, without the 1/2 identity.
Complex operator_entry(const BIESystem &sys, int i, int j);

struct FastOperatorOptions {
  const RepTable *reps = nullptr;  // built for (reps->K(), reps->eps()); K must enclose the curve
  double near_radius = 0.5;        // pairs closer than this are corrected directly
  int threads = 0;
  int leaf_capacity = 50;
  // Rows compared against the dense operator on the first application; a
  // deviation above 10 eps is reported through `warn`.
  int spot_checks = 4;
  std::function<void(const std::string &)> warn;  // defaults to stderr
};

// The discrete operator phi -> 1/2 phi + (D - i eta S) phi.
class BIEOperator {
 public:
  // Dense: the matrix is assembled when n <= assemble_limit, otherwise rows
  // are recomputed on every application.
  explicit BIEOperator(const BIESystem &sys, int assemble_limit = 4096, int threads = 0);
  // Fast: smooth far pairs go through the multilevel evaluator.
  BIEOperator(const BIESystem &sys, const FastOperatorOptions &fast);

  CVector apply(const CVector &phi) const;
  CVector operator()(const CVector &phi) const { return apply(phi); }
  bool fast() const { return fast_.has_value(); }
  int size() const { return sys_.size(); }

 private:
  CVector apply_dense(const CVector &phi) const;
  CVector apply_fast(const CVector &phi) const;

  BIESystem sys_;
  int threads_ = 0;
  CMatrix matrix_;  // empty unless assembled
  std::optional<FastOperatorOptions> fast_;
  Eigen::SparseMatrix<Complex, Eigen::RowMajor> near_;  // exact minus evaluator model
  mutable bool checked_ = false;
};

// Convenience wrapper: dense when fast == nullptr.
CVector apply_operator(const BIESystem &sys, const CVector &phi, const RepTable *fast = nullptr);

// u_inc(x) = exp(2 pi i x . d) at the nodes.
CVector incident_wave(const std::vector<Point2> &x, Point2 d);

struct ScatterOptions {
  double ppw = 20.0;
  double eta = kPi;
  double tol = 1e-4;
  Point2 direction{1.0, 0.0};
  int restart = 80;
  int max_iterations = 3000;
  bool dense = false;
  int threads = 0;
  std::uint64_t seed = 1;
  SingularRule rule = SingularRule::corrected_trapezoid;
  // Evaluator accuracy for the fast path; 0 means tol / 10.
  double eps = 0.0;
  // Supplies the rep table for (K, eps); defaults to RepTable::build.
  std::function<RepTable(double K, double eps)> reps;
};

struct ScatterStats {
  int N = 0;
  int iterations = 0;     // N_i
  double T_i = 0.0;       // seconds per iteration
  double T_t = 0.0;       // total solve time, excluding rep construction
  double setup = 0.0;     // rep table and operator setup
  bool converged = false;
  double residual = 0.0;  // final relative GMRES residual
  bool fast = false;
  double eps = 0.0;
};

struct ScatterSolution {
  BIESystem system;
  CVector phi;
  ScatterStats stats;
  std::vector<double> history;
};

// Sound-soft scattering of u_inc = exp(2 pi i x . d) by the curve. Non-convergence
// is reported in stats.converged, not thrown.
ScatterSolution solve_scattering(const ParamCurve &curve, const ScatterOptions &opts = {});

// Relative l2 residual of the boundary condition at the midpoints between
// nodes: phi is resampled to 2n nodes and the equation is applied there with
// the dense operator of the refined discretization.
double boundary_residual(const ParamCurve &curve, const BIESystem &sys, const CVector &phi, Point2 direction,
                         int threads = 0);

struct FieldGrid {
  double x0 = 0.0, y0 = 0.0, spacing = 0.0;
  int nx = 0, ny = 0;
  std::vector<Complex> values;  // scattered field, row-major in y; NaN inside the tube
  int flagged = 0;
  Point2 point(int ix, int iy) const { return {x0 + ix * spacing, y0 + iy * spacing}; }
  Complex at(int ix, int iy) const { return values[static_cast<std::size_t>(iy) * nx + ix]; }
};

// Scattered field on the square of side `side` centered at `center`, sampled
// at `spw` points per wavelength. Samples closer than `tube` to the curve are
// NaN and counted in `flagged`.
FieldGrid evaluate_field(const BIESystem &sys, const CVector &phi, Point2 center, double side, double spw = 8.0,
                         double tube = 0.2, int threads = 0);

// Scattered field at arbitrary points (no tube check).
CVector scattered_field(const BIESystem &sys, const CVector &phi, const std::vector<Point2> &x, int threads = 0);

}  // namespace dirfmm

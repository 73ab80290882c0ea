#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dirfmm/geometry.hpp"
#include "dirfmm/kernel.hpp"
#include "dirfmm/sampling.hpp"

namespace dirfmm {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// G(x, y) ~ sum_{q,p} G(x, b_q) D(q,p) G(a_p, y) for x in the far region and y
// in the source disk. Points are relative to the box center.
struct SeparatedRep {
  double width = 0.0;
  int direction = 0;
  Point2 dir_vec;
  double eps = 0.0;
  std::vector<Point2> a_points;  // check points (outgoing) / equivalent points (incoming)
  std::vector<Point2> b_points;  // equivalent points (outgoing) / check points (incoming)
  CMatrix D;                     // |b| x |a|
  double residual = 0.0;         // max relative error seen in validation
  double residual_p99 = 0.0;     // 99th percentile of the same

  int rank() const { return static_cast<int>(b_points.size()); }
};

enum class RepGeometry {
  cone,  // disk radius sqrt(2) w, cone of opening 1/r at distance >= r^2
  fmm,   // disk radius 0.75 w, region covering the tree's interaction geometry
};

struct RepOptions {
  RepGeometry geometry = RepGeometry::fmm;
  double ppw = 3.0;           // source disk sampling
  double eps_factor = 0.2;    // truncation at eps_factor * eps
  int initial_rank = 0;       // 0: a priori guess from eps
  int max_retries = 3;
  int validation_pairs = 500;
  // Accept when the 99th percentile is <= p99_factor * eps and the max <= max_factor * eps.
  double p99_factor = 10.0;
  double max_factor = 100.0;
  bool validate = true;
  double cone_outer = 100.0;  // cone geometry: rho_max = cone_outer * r^2
};

// Pivot columns of a column-pivoted QR, truncated at the first |R_kk| < threshold.
std::vector<int> select_skeleton_columns(const CMatrix &A1, double threshold);

// Truncated-SVD pseudoinverse; singular values below rel_cutoff * sigma_1 dropped.
CMatrix pseudo_inverse(const CMatrix &A, double rel_cutoff);

// Dense kernel matrix G(x_i, y_j).
CMatrix kernel_matrix(const std::vector<Point2> &x, const std::vector<Point2> &y,
                      KernelAccuracy acc = KernelAccuracy::precise);

// A priori rank guess used to size the random row and column subsets.
int rank_guess(double eps);

// Far region used by build_rep for the given geometry.
WedgeRegion rep_region(double width, int direction, double K, const RepOptions &opts);
double rep_disk_radius(double width, const RepOptions &opts);

SeparatedRep build_rep(double width, int direction, double K, double eps, Rng &rng,
                       const RepOptions &opts = {});

struct RepResidual {
  double max = 0.0;
  double p99 = 0.0;
};
// Pointwise relative error of the representation on fresh random pairs.
RepResidual validate_rep(const SeparatedRep &rep, double K, int pairs, Rng &rng, const RepOptions &opts);

// Rotate a representation to another direction of the same width.
SeparatedRep rotate_rep(const SeparatedRep &rep, int direction);

struct RepTableOptions {
  RepOptions rep;
  bool rotation_reuse = true;
};

class RepTable {
 public:
  RepTable() = default;
  static RepTable build(double K, double eps, std::uint64_t seed, const RepTableOptions &opts = {});

  const SeparatedRep &get(double width, int direction) const;
  bool has_width(double width) const { return reps_.count(width) != 0; }
  std::vector<double> widths() const;

  double K() const { return K_; }
  double eps() const { return eps_; }
  std::uint64_t seed() const { return seed_; }
  bool rotation_reuse() const { return reuse_; }
  RepGeometry geometry() const { return geometry_; }
  // Reps computed from scratch (one per width with rotation reuse).
  const std::vector<SeparatedRep> &built() const { return built_; }
  int total_reps() const;

  // Assemble from built reps, expanding rotations when reuse is on.
  static RepTable from_built(double K, double eps, std::uint64_t seed, bool reuse, RepGeometry geometry,
                             std::vector<SeparatedRep> built);

 private:
  double K_ = 0.0, eps_ = 0.0;
  std::uint64_t seed_ = 0;
  bool reuse_ = true;
  RepGeometry geometry_ = RepGeometry::fmm;
  std::vector<SeparatedRep> built_;
  std::map<double, std::vector<SeparatedRep>> reps_;
};

// Separation ranks on the cone geometry (source disk radius sqrt(2) w) with
// truncation at eps itself; ranks[e][k] is for eps[e] and widths[k].
struct RankTable {
  std::vector<double> widths;
  std::vector<double> eps;
  std::vector<std::vector<int>> ranks;
};
RankTable rank_table(const std::vector<double> &widths, const std::vector<double> &eps, std::uint64_t seed);

// Versioned little-endian binary cache.
inline constexpr std::uint32_t kRepCacheVersion = 1;
void save_rep_table(const RepTable &table, const std::string &path);
RepTable load_rep_table(const std::string &path);

}  // namespace dirfmm

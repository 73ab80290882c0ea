#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dirfmm/curve.hpp"
#include "dirfmm/geometry.hpp"
#include "dirfmm/kernel.hpp"
#include "dirfmm/lowrank.hpp"
#include "dirfmm/sampling.hpp"
#include "dirfmm/tree.hpp"

namespace dirfmm {

// u(x_i) = sum_j G(x_i, y_j) q_j + dG/dn(y_j) mu_j over j != i. The dipole
// part is optional: leave `dipoles` and `normals` empty for monopoles only.
struct NBodyProblem {
  std::vector<Point2> points;
  std::vector<Complex> charges;
  std::vector<Complex> dipoles;
  std::vector<Point2> normals;  // unit vectors
  double K = 16.0;
  double eps = 1e-4;
  std::uint64_t seed = 1;
};

struct PhaseTimings {
  double tree = 0.0;
  double setup = 0.0;  // low-frequency basis and per-box storage
  double upward_low = 0.0;
  double upward_high = 0.0;
  double downward_high = 0.0;
  double downward_low = 0.0;
  double near_field = 0.0;
  double total = 0.0;
};

struct NBodyStats {
  int boxes = 0;
  int leaves = 0;
  int levels = 0;
  int high_boxes = 0;
  int low_boxes = 0;
  int reps = 0;           // reps in the table
  int reps_built = 0;     // reps computed from scratch
  int low_freq_points = 0;
  long high_m2l = 0;      // directional M2L pairs
  long low_m2l = 0;       // V-list pairs
  long near_pairs = 0;    // U-list leaf pairs
  std::vector<LevelStats> per_level;
};

struct NBodyResult {
  std::vector<Complex> potentials;
  PhaseTimings timings;
  NBodyStats stats;
};

struct EvaluateOptions {
  int threads = 0;  // 0: OpenMP default; 1 gives bit-reproducible results
  int leaf_capacity = 50;
  int low_freq_points = 0;  // 0: calibrated for eps
  KernelAccuracy accuracy = KernelAccuracy::precise;
};

// u_i = sum_{j != i} G(p_i, p_j) f_j. Throws InputError if the table was built
// for a different (K, eps) or the sizes disagree.
NBodyResult evaluate(const NBodyProblem &problem, const RepTable &reps, const EvaluateOptions &opts = {});

// Exact sums at the given targets (point indices), diagonal skipped.
std::vector<Complex> direct_evaluate(const NBodyProblem &problem, const std::vector<int> &targets, int threads = 0);

// Relative l2 error of `result` on `sample_size` random targets. Empty if all
// sampled exact potentials vanish.
std::optional<double> estimate_error(const NBodyProblem &problem, const NBodyResult &result, Rng &rng,
                                     int sample_size = 200);

// Complex standard normal per component.
std::vector<Complex> random_charges(std::size_t n, Rng &rng);

struct BenchmarkRow {
  double K = 0.0;
  int N = 0;
  double T_a = 0.0;
  double T_d = 0.0;
  bool T_d_extrapolated = true;
  double speedup = 0.0;
  double eps_a = 0.0;
  double rep_seconds = 0.0;  // rep table build or load, not part of T_a
  PhaseTimings phases;
  NBodyStats stats;
};

struct BenchmarkOptions {
  double ppw = 20.0;
  std::uint64_t seed = 1;
  bool full_direct = false;  // measure T_d over all N (K <= 512 only)
  int sample_size = 200;
  EvaluateOptions evaluate;
  // Supplies the rep table for (K, eps); defaults to RepTable::build.
  std::function<RepTable(double K, double eps)> reps;
};

// One row for a prepared problem: fast evaluation, then the direct sum on
// `sample_size` random targets (or all of them with full_direct). rep_seconds
// is left to the caller.
BenchmarkRow measure(const NBodyProblem &problem, const RepTable &reps, Rng &rng, const BenchmarkOptions &opts = {});

std::vector<BenchmarkRow> benchmark(CurveKind geometry, const std::vector<double> &Ks, double eps,
                                    const BenchmarkOptions &opts = {});

// Fixed-width text table of benchmark rows.
std::string format_benchmark(const std::vector<BenchmarkRow> &rows);

}  // namespace dirfmm

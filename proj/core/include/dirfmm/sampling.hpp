#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dirfmm/geometry.hpp"

namespace dirfmm {

// Deterministic random stream. Doubles are built from raw 64-bit draws so the
// sequence does not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal();
  std::uint64_t next() { return engine_(); }
  // k distinct indices from [0, n), in increasing order. Returns all if k >= n.
  std::vector<int> choose(int n, int k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// round(ppw^2 pi r^2) uniform samples of the disk B(0, r).
std::vector<Point2> sample_disk(double r, double ppw, Rng &rng);

// Far region of a directional representation, in the frame of the source box.
// A point at radius rho belongs if rho in [rho_min, rho_max] and its angle is
// within half_angle(rho) of the center direction.
struct WedgeRegion {
  double rho_min = 0.0;
  double rho_max = 0.0;
  double center_angle = 0.0;
  // Cone geometry: constant half angle. Otherwise half_wedge + gamma(rho).
  bool cone = true;
  double cone_half_angle = 0.0;
  double half_wedge = 0.0;
  double width = 0.0;
  double spread = 2.2;  // gamma(rho) = spread / sqrt(rho) - shrink * width / rho
  double shrink = 1.15;

  double half_angle(double rho) const;
  bool contains(Point2 x, double tol = 1e-12) const;
};

// The truncated cone {theta(x, l) <= 1/(2r), r^2 <= |x| <= rho_max} of total
// opening 1/r.
WedgeRegion cone_region(double r, double center_angle, double rho_max);

// Region covering every target a box of width w meets through its direction
// `l`: interaction-list check circles and the nested regions of its ancestors.
WedgeRegion fmm_region(double width, int direction, double K);

// Smallest center distance of a same-level box outside the near field, in the
// parent-near range; in wavelengths.
double min_far_center_distance(double width);

// Radius of the disk holding a directional box's sources and check points.
double fmm_disk_radius(double width);

// Radii uniform in 1/rho, angles uniform within the region, about `density`
// samples per unit of angular oscillation for sources in a disk of radius
// disk_radius. Capped at max_samples by uniform subsampling.
std::vector<Point2> sample_region(const WedgeRegion &region, double disk_radius, Rng &rng, int radii = 60,
                                  double density = 4.0, int max_samples = 50000);

// The sampler used for the cone geometry: {theta(x,l) <= 1/(2r), r^2 <= |x| <= K}.
// Throws InputError when K < r^2.
std::vector<Point2> sample_wedge(double r, Point2 ell, double K, double ppw_boundary, Rng &rng);

}  // namespace dirfmm

#include "dirfmm/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "dirfmm/directions.hpp"
#include "dirfmm/error.hpp"

namespace dirfmm {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::vector<int> Rng::choose(int n, int k) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  if (k >= n) return idx;
  // Partial Fisher-Yates.
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(next() % std::uint64_t(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto splitmix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

std::vector<Point2> sample_disk(double r, double ppw, Rng &rng) {
  const int n = static_cast<int>(std::lround(ppw * ppw * kPi * r * r));
  std::vector<Point2> pts(n);
  for (auto &p : pts) {
    const double rho = r * std::sqrt(rng.uniform());
    const double t = 2.0 * kPi * rng.uniform();
    p = {rho * std::cos(t), rho * std::sin(t)};
  }
  return pts;
}

double WedgeRegion::half_angle(double rho) const {
  if (cone) return cone_half_angle;
  const double gamma = std::clamp(spread / std::sqrt(rho) - shrink * width / rho, 0.0, kPi);
  return std::min(kPi, half_wedge + gamma);
}

bool WedgeRegion::contains(Point2 x, double tol) const {
  const double rho = norm(x);
  if (rho < rho_min * (1 - tol) || rho > rho_max * (1 + tol)) return false;
  return angle_distance(polar_angle(x), center_angle) <= half_angle(rho) + tol;
}

WedgeRegion cone_region(double r, double center_angle, double rho_max) {
  WedgeRegion g;
  g.rho_min = r * r;
  g.rho_max = rho_max;
  g.center_angle = center_angle;
  g.cone = true;
  g.cone_half_angle = 0.5 / r;
  return g;
}

double fmm_disk_radius(double width) { return 0.75 * width; }

double min_far_center_distance(double width) {
  const int n = static_cast<int>(width);
  double best = 1e300;
  for (int k = 0; k <= n + 3; ++k)
    for (int m = 0; m <= n + 3; ++m) {
      const int a = std::max(k - 1, 0), b = std::max(m - 1, 0);
      if (a * a + b * b > n * n) best = std::min(best, width * std::hypot(double(k), double(m)));
    }
  return best;
}

WedgeRegion fmm_region(double width, int direction, double K) {
  const double top = top_directional_width(K);
  const int count = direction_count(width);
  const double dt = 2.0 * kPi / count;
  WedgeRegion g;
  g.cone = false;
  g.width = width;
  g.rho_min = min_far_center_distance(width) - fmm_disk_radius(width);
  // Each coarser level may shift the region outward by at most 0.75 w.
  g.rho_max = std::sqrt(2.0) * K + 1.5 * (2.0 * top - width);
  g.center_angle = (direction + 0.5) * dt;
  g.half_wedge = 0.5 * dt;
  return g;
}

std::vector<Point2> sample_region(const WedgeRegion &region, double disk_radius, Rng &rng, int radii,
                                  double density, int max_samples) {
  std::vector<Point2> pts;
  const double u0 = 1.0 / region.rho_max, u1 = 1.0 / region.rho_min;
  const double c = std::cos(region.center_angle), s = std::sin(region.center_angle);
  for (int j = 0; j < radii; ++j) {
    const double u = u0 + (u1 - u0) * (j + rng.uniform()) / radii;
    const double rho = 1.0 / u;
    const double half = region.half_angle(rho);
    const int n = std::max(8, static_cast<int>(std::ceil(2.0 * half * density * disk_radius * 2.0)));
    for (int i = 0; i < n; ++i) {
      const double t = rng.uniform(-half, half);
      pts.push_back(rotate(Point2{rho * std::cos(t), rho * std::sin(t)}, c, s));
    }
  }
  if (static_cast<int>(pts.size()) > max_samples) {
    std::vector<Point2> sub;
    for (int i : rng.choose(static_cast<int>(pts.size()), max_samples)) sub.push_back(pts[i]);
    pts.swap(sub);
  }
  return pts;
}

std::vector<Point2> sample_wedge(double r, Point2 ell, double K, double ppw_boundary, Rng &rng) {
  if (K < r * r) throw InputError("sample_wedge: K < r^2, the wedge lies outside the domain");
  return sample_region(cone_region(r, polar_angle(ell), K), r, rng, 60, ppw_boundary);
}

}  // namespace dirfmm

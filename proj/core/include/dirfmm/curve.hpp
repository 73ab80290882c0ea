#pragma once

#include <string>
#include <vector>

#include "dirfmm/geometry.hpp"
#include "dirfmm/sampling.hpp"

namespace dirfmm {

enum class CurveKind { circle, kite, airfoil };

CurveKind parse_curve_kind(const std::string &name);  // throws InputError
std::string to_string(CurveKind kind);

// Closed counter-clockwise curve t in [0, 2pi) scaled to a size-K problem:
// the largest extent of the bounding box is 0.9 K and the box is centered at
// the origin.
//   circle:  r (cos t, sin t), r = 0.45 K
//   kite:    c (cos t + 0.65 cos 2t - 0.65, 1.5 sin t)
//   airfoil: c (cos t, sin t (d + s (1 - cos t))), rounded edges, 12% thick
class ParamCurve {
 public:
  ParamCurve(CurveKind kind, double K);

  CurveKind kind() const { return kind_; }
  double scale() const { return K_; }

  Point2 position(double t) const;
  Point2 derivative(double t) const;
  Point2 second_derivative(double t) const;
  double speed(double t) const { return norm(derivative(t)); }
  Point2 tangent(double t) const;
  Point2 normal(double t) const;  // outward unit normal
  double curvature(double t) const;

  // Perimeter by the trapezoidal rule on `n` nodes (spectrally accurate).
  double length(int n = 4096) const;

 private:
  Point2 raw(double t, int derivative) const;

  CurveKind kind_;
  double K_;
  double c_ = 1.0;
  Point2 shift_;
};

ParamCurve make_curve(CurveKind kind, double K);

// round(ppw * length) points placed uniformly at random in arc length.
std::vector<Point2> sample_curve(const ParamCurve &curve, double ppw, Rng &rng);

}  // namespace dirfmm

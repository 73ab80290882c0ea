#include "dirfmm/curve.hpp"

#include <algorithm>
#include <cmath>

#include "dirfmm/error.hpp"

namespace dirfmm {

namespace {

constexpr double kKiteA = 0.65;
constexpr double kKiteB = 1.5;
constexpr double kFoilNose = 0.05;
constexpr double kFoilCamber = 0.0577765000809572;  // max |y| = 0.12 for chord 2

}  // namespace

CurveKind parse_curve_kind(const std::string &name) {
  if (name == "circle") return CurveKind::circle;
  if (name == "kite") return CurveKind::kite;
  if (name == "airfoil") return CurveKind::airfoil;
  throw InputError("unknown curve kind: " + name);
}

std::string to_string(CurveKind kind) {
  switch (kind) {
    case CurveKind::circle: return "circle";
    case CurveKind::kite: return "kite";
    case CurveKind::airfoil: return "airfoil";
  }
  return "?";
}

ParamCurve::ParamCurve(CurveKind kind, double K) : kind_(kind), K_(K) {
  if (!(K > 0.0)) throw InputError("curve scale must be positive");
  // Bounding box of the unit-scale curve on a fine grid, refined at the extremes.
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  const int n = 1 << 16;
  for (int j = 0; j < n; ++j) {
    const Point2 p = raw(2.0 * kPi * j / n, 0);
    lo_x = std::min(lo_x, p.x), hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y), hi_y = std::max(hi_y, p.y);
  }
  c_ = 0.9 * K / std::max(hi_x - lo_x, hi_y - lo_y);
  shift_ = {-0.5 * c_ * (lo_x + hi_x), -0.5 * c_ * (lo_y + hi_y)};
}

Point2 ParamCurve::raw(double t, int d) const {
  const double c = std::cos(t), s = std::sin(t);
  switch (kind_) {
    case CurveKind::circle:
      if (d == 0) return {c, s};
      if (d == 1) return {-s, c};
      return {-c, -s};
    case CurveKind::kite: {
      const double c2 = std::cos(2 * t), s2 = std::sin(2 * t);
      if (d == 0) return {c + kKiteA * c2 - kKiteA, kKiteB * s};
      if (d == 1) return {-s - 2 * kKiteA * s2, kKiteB * c};
      return {-c - 4 * kKiteA * c2, -kKiteB * s};
    }
    case CurveKind::airfoil: {
      // y = s (d + k (1 - c)) = d s + k s - k s c = d s + k s - (k/2) sin 2t
      const double k = kFoilCamber, a = kFoilNose + k;
      if (d == 0) return {c, a * s - 0.5 * k * std::sin(2 * t)};
      if (d == 1) return {-s, a * c - k * std::cos(2 * t)};
      return {-c, -a * s + 2 * k * std::sin(2 * t)};
    }
  }
  return {};
}

Point2 ParamCurve::position(double t) const { return c_ * raw(t, 0) + shift_; }
Point2 ParamCurve::derivative(double t) const { return c_ * raw(t, 1); }
Point2 ParamCurve::second_derivative(double t) const { return c_ * raw(t, 2); }

Point2 ParamCurve::tangent(double t) const {
  const Point2 d = derivative(t);
  return (1.0 / norm(d)) * d;
}

Point2 ParamCurve::normal(double t) const {
  const Point2 u = tangent(t);
  return {u.y, -u.x};
}

double ParamCurve::curvature(double t) const {
  const Point2 d = derivative(t), dd = second_derivative(t);
  const double sp = norm(d);
  return (d.x * dd.y - d.y * dd.x) / (sp * sp * sp);
}

double ParamCurve::length(int n) const {
  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += speed(2.0 * kPi * j / n);
  return sum * 2.0 * kPi / n;
}

ParamCurve make_curve(CurveKind kind, double K) { return ParamCurve(kind, K); }

std::vector<Point2> sample_curve(const ParamCurve &curve, double ppw, Rng &rng) {
  const double L = curve.length();
  const int n = static_cast<int>(std::lround(ppw * L));
  // Cumulative arc length on a grid fine enough for linear inversion.
  const int m = std::max(4096, 16 * n);
  std::vector<double> s(m + 1, 0.0);
  const double dt = 2.0 * kPi / m;
  double prev = curve.speed(0.0);
  for (int j = 1; j <= m; ++j) {
    const double cur = curve.speed(j * dt);
    s[j] = s[j - 1] + 0.5 * dt * (prev + cur);
    prev = cur;
  }
  std::vector<Point2> pts(n);
  for (int i = 0; i < n; ++i) {
    const double target = rng.uniform() * s[m];
    const auto it = std::upper_bound(s.begin(), s.end(), target);
    const int j = std::clamp(static_cast<int>(it - s.begin()) - 1, 0, m - 1);
    const double frac = (target - s[j]) / (s[j + 1] - s[j]);
    pts[i] = curve.position((j + frac) * dt);
  }
  return pts;
}

}  // namespace dirfmm

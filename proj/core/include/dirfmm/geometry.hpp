#pragma once

#include <cmath>
#include <complex>
#include <vector>

namespace dirfmm {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2 &operator+=(Point2 o) { x += o.x; y += o.y; return *this; }
  Point2 &operator-=(Point2 o) { x -= o.x; y -= o.y; return *this; }
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
inline bool operator==(Point2 a, Point2 b) { return a.x == b.x && a.y == b.y; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }

// Counter-clockwise rotation by angle (radians).
inline Point2 rotate(Point2 p, double c, double s) { return {c * p.x - s * p.y, s * p.x + c * p.y}; }
inline Point2 rotate(Point2 p, double angle) { return rotate(p, std::cos(angle), std::sin(angle)); }

// Angle in [0, 2*pi).
inline double polar_angle(Point2 p) {
  double a = std::atan2(p.y, p.x);
  if (a < 0.0) a += 2.0 * kPi;
  if (a >= 2.0 * kPi) a -= 2.0 * kPi;
  return a;
}

// Angular distance in [0, pi] between two angles.
inline double angle_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0 * kPi);
  return d > kPi ? 2.0 * kPi - d : d;
}

}  // namespace dirfmm

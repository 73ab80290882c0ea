#include "dirfmm/kernel.hpp"

#include <cmath>
#include <string>

#include "dirfmm/error.hpp"

namespace dirfmm {
namespace {

constexpr double kEulerGamma = 0.57721566490153286061;
constexpr double kTwoOverPi = 2.0 / kPi;
constexpr double kTwoOverPiLo = -3.935735335036497e-17;  // 2/pi - kTwoOverPi

// Below this the Maclaurin/log series is used. Rounding in the alternating
// sums grows like I0(x) * 2^-53, about 1e-14 at x = 6.
constexpr double kSeriesLimit = 6.0;
// Above this the Hankel expansion converges far enough for each accuracy mode:
// its smallest term is of order exp(-2x).
constexpr double kAsymptoticPrecise = 20.0;
constexpr double kAsymptoticFast = 12.0;

struct Bessel01 {
  double j0, y0, j1, y1;
};

Bessel01 series(double x) {
  const double z = 0.25 * x * x;
  const double log_term = std::log(0.5 * x) + kEulerGamma;

  double t = 1.0, j0 = 1.0, sy0 = 0.0;
  double u = 1.0, sj1 = 1.0, sy1 = 1.0;  // H_0 + H_1 = 1
  double hk = 0.0;
  for (int k = 1; k < 200; ++k) {
    t *= -z / (double(k) * k);
    u *= -z / (double(k) * (k + 1));
    const double hk1 = hk + 1.0 / k;
    const double hk2 = hk1 + 1.0 / (k + 1);
    j0 += t;
    sy0 += hk1 * t;
    sj1 += u;
    sy1 += (hk1 + hk2) * u;
    hk = hk1;
    if (std::abs(t) < 1e-18 && std::abs(u) < 1e-18) break;
  }
  Bessel01 b;
  b.j0 = j0;
  b.y0 = kTwoOverPi * (log_term * j0 - sy0);
  b.j1 = 0.5 * x * sj1;
  // -2/(pi x) dominates for small x; carry its rounding error into the sum
  // so that the result is rounded once.
  const double q = kTwoOverPi / x;
  const double q_lo = (std::fma(-q, x, kTwoOverPi) + kTwoOverPiLo) / x;
  b.y1 = -q + ((kTwoOverPi * log_term * b.j1 - (0.5 * x / kPi) * sy1) - q_lo);
  return b;
}

// Miller backward recurrence for J_n, normalized by J0 + 2 sum J_2k = 1, then
// the Neumann expansions for Y0 and Y1.
Bessel01 miller(double x) {
  constexpr int kMaxOrder = 160;
  int m = static_cast<int>(1.2 * x) + 32;
  m += m % 2;
  if (m > kMaxOrder) m = kMaxOrder;

  double jn[kMaxOrder + 2];
  jn[m + 1] = 0.0;
  jn[m] = 1e-30;
  for (int n = m; n >= 1; --n) jn[n - 1] = (2.0 * n / x) * jn[n] - jn[n + 1];

  double norm = jn[0];
  for (int k = 2; k <= m; k += 2) norm += 2.0 * jn[k];
  const double scale = 1.0 / norm;
  for (int n = 0; n <= m + 1; ++n) jn[n] *= scale;

  double s0 = 0.0, s1 = 0.0;
  for (int k = 1; 2 * k + 1 <= m + 1; ++k) {
    const double sign = (k % 2) ? -1.0 : 1.0;
    s0 += sign * jn[2 * k] / k;
    s1 += sign * (jn[2 * k - 1] - jn[2 * k + 1]) / k;
  }
  const double log_term = std::log(0.5 * x) + kEulerGamma;
  Bessel01 b;
  b.j0 = jn[0];
  b.j1 = jn[1];
  b.y0 = kTwoOverPi * log_term * jn[0] - 2.0 * kTwoOverPi * s0;
  b.y1 = kTwoOverPi * (log_term * jn[1] - jn[0] / x) + kTwoOverPi * s1;
  return b;
}

// Large-argument expansion: H_nu(x) = sqrt(2/(pi x)) (P + iQ) exp(i chi).
void asymptotic(double x, double tol, Complex &h0, Complex &h1, bool need_h1 = true) {
  const double inv8x = 1.0 / (8.0 * x);
  double pq[2][2] = {{1.0, 0.0}, {1.0, 0.0}};
  for (int nu = 0; nu < (need_h1 ? 2 : 1); ++nu) {
    const double mu = 4.0 * nu * nu;
    double p = 1.0, q = 0.0, a = 1.0, prev = 1.0;
    for (int k = 1; k < 100; ++k) {
      const double odd = 2.0 * k - 1.0;
      a *= (mu - odd * odd) * inv8x / k;
      const double mag = std::abs(a);
      if (mag > prev) break;  // divergent tail
      const double term = (k % 4 == 0 || k % 4 == 1) ? a : -a;
      if (k % 2) q += term; else p += term;
      if (mag < tol) break;
      prev = mag;
    }
    pq[nu][0] = p;
    pq[nu][1] = q;
  }
  const double s = std::sin(x), c = std::cos(x);
  const double amp = std::sqrt(1.0 / (kPi * x));  // sqrt(2/(pi x)) / sqrt(2)
  const Complex e0(amp * (c + s), amp * (s - c));   // sqrt(2/(pi x)) exp(i(x - pi/4))
  const Complex e1(e0.imag(), -e0.real());          // times exp(-i pi/2)
  h0 = Complex(pq[0][0], pq[0][1]) * e0;
  h1 = Complex(pq[1][0], pq[1][1]) * e1;
}

void check_argument(double x) {
  if (!(x > 0.0)) throw SingularityError("Hankel function argument must be positive, got " + std::to_string(x));
}

inline void eval01(double x, Complex &h0, Complex &h1, KernelAccuracy acc, bool need_h1 = true) {
  const bool fast = acc == KernelAccuracy::fast;
  const double asym = fast ? kAsymptoticFast : kAsymptoticPrecise;
  if (x >= asym) {
    asymptotic(x, fast ? 1e-12 : 1e-17, h0, h1, need_h1);
    return;
  }
  const Bessel01 b = x < kSeriesLimit ? series(x) : miller(x);
  h0 = Complex(b.j0, b.y0);
  h1 = Complex(b.j1, b.y1);
}

}  // namespace

void hankel01(double x, Complex &h0, Complex &h1, KernelAccuracy acc) {
  check_argument(x);
  eval01(x, h0, h1, acc);
}

Complex hankel0(double x, KernelAccuracy acc) {
  Complex h0, h1;
  hankel01(x, h0, h1, acc);
  return h0;
}

Complex hankel1(double x, KernelAccuracy acc) {
  Complex h0, h1;
  hankel01(x, h0, h1, acc);
  return h1;
}

namespace detail {
Complex green_r(double r, KernelAccuracy acc) {
  Complex h0, h1;
  eval01(kWaveNumber * r, h0, h1, acc, false);
  return Complex(-0.25 * h0.imag(), 0.25 * h0.real());
}

Complex source_r(Point2 d, double r, Complex q, Complex mu, Point2 n, KernelAccuracy acc) {
  Complex h0, h1;
  eval01(kWaveNumber * r, h0, h1, acc);
  return Complex(0.0, 0.25) * (h0 * q + kWaveNumber * dot(d, n) / r * h1 * mu);
}
}  // namespace detail

Complex helmholtz_g(Point2 x, Point2 y, KernelAccuracy acc) {
  const double r = norm(x - y);
  if (r == 0.0) throw SingularityError("helmholtz_g evaluated at coincident points");
  return detail::green_r(r, acc);
}

Complex combined_kernel(Point2 x, Point2 y, Point2 ny, double eta, KernelAccuracy acc) {
  const Point2 d = x - y;
  const double r = norm(d);
  if (r == 0.0) throw SingularityError("combined_kernel evaluated at coincident points");
  Complex h0, h1;
  eval01(kWaveNumber * r, h0, h1, acc);
  const Complex g = Complex(0.0, 0.25) * h0;
  const Complex dg = Complex(0.0, 0.25 * kWaveNumber) * h1 * (dot(d, ny) / r);
  return dg - Complex(0.0, eta) * g;
}

}  // namespace dirfmm

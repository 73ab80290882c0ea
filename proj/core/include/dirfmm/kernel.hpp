#pragma once

#include "dirfmm/geometry.hpp"

namespace dirfmm {

// Wavenumber is fixed: all lengths are measured in wavelengths.
inline constexpr double kWaveNumber = 2.0 * kPi;

enum class KernelAccuracy {
  precise,  // absolute error <= 1e-12
  fast,     // absolute error <= 1e-10, cheaper for mid-range arguments
};

// H0(x) = J0(x) + i Y0(x). Throws SingularityError for x <= 0.
Complex hankel0(double x, KernelAccuracy acc = KernelAccuracy::precise);
// H1(x) = J1(x) + i Y1(x). Throws SingularityError for x <= 0.
Complex hankel1(double x, KernelAccuracy acc = KernelAccuracy::precise);
// Both at once; shares the expensive parts.
void hankel01(double x, Complex &h0, Complex &h1, KernelAccuracy acc = KernelAccuracy::precise);

// G(x,y) = (i/4) H0(2 pi |x-y|).
Complex helmholtz_g(Point2 x, Point2 y, KernelAccuracy acc = KernelAccuracy::precise);

// dG/dn(y) - i eta G.
Complex combined_kernel(Point2 x, Point2 y, Point2 ny, double eta,
                        KernelAccuracy acc = KernelAccuracy::precise);

namespace detail {
// No argument checks; r > 0 assumed. Used by the inner loops.
Complex green_r(double r, KernelAccuracy acc);
// G q + dG/dn(y) mu with d = x - y, r = |d|, n the unit normal at y.
Complex source_r(Point2 d, double r, Complex q, Complex mu, Point2 n, KernelAccuracy acc);
}  // namespace detail

}  // namespace dirfmm

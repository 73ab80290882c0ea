#pragma once

#include <array>
#include <functional>
#include <vector>

#include "dirfmm/lowrank.hpp"

namespace dirfmm {

// Sixth-order corrected trapezoidal rule for a periodic integrand with a
// ln|t - t_i| singularity at node i: drop the node itself and scale the
// values at i +- k by (1 + gamma_k), k = 1..6 (Kapur & Rokhlin 1997).
const std::array<double, 6> &log_correction_weights();

// Spectral weights for ln(4 sin^2((t - s)/2)) f(s) on n equispaced nodes
// (n even): the integral at t = t_i is sum_j R[|i - j|] f(t_j).
std::vector<double> kress_weights(int n);

// phi on n equispaced nodes of [0, 2pi) resampled to m >= n nodes by
// trigonometric interpolation. The Nyquist mode is split evenly.
CVector fourier_resample(const CVector &phi, int m);

struct GmresResult {
  CVector x;
  int iterations = 0;   // total inner steps
  bool converged = false;
  double residual = 0.0;  // final ||b - A x|| / ||b||, recomputed explicitly
  std::vector<double> history;  // estimated relative residual after each inner step
};

using LinearOperator = std::function<CVector(const CVector &)>;

// Restarted GMRES with modified Gram-Schmidt and Givens rotations, x0 = 0.
// Stops when ||b - A x|| <= tol ||b|| or after max_iterations inner steps; in
// the latter case the last iterate is returned with converged = false.
GmresResult gmres(const LinearOperator &apply, const CVector &b, int restart = 80, double tol = 1e-4,
                  int max_iterations = 2000);

}  // namespace dirfmm

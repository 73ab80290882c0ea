#include "dirfmm/quadrature.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>

#include "dirfmm/error.hpp"

namespace dirfmm {

const std::array<double, 6> &log_correction_weights() {
  static const std::array<double, 6> gamma{4.967362978287758,  -16.20501504859126, 25.85153761832639,
                                           -22.22599466791883, 9.930104998037538,  -1.817995878141594};
  return gamma;
}

std::vector<double> kress_weights(int n) {
  if (n < 4 || n % 2 != 0) throw InputError("kress_weights needs an even node count >= 4");
  const int half = n / 2;
  std::vector<double> R(n);
  for (int d = 0; d < n; ++d) {
    double s = 0.0;
    for (int m = 1; m < half; ++m) s += std::cos(2.0 * kPi * m * d / n) / m;
    R[d] = -4.0 * kPi / n * s - 4.0 * kPi / (double(n) * n) * (d % 2 == 0 ? 1.0 : -1.0);
  }
  return R;
}

CVector fourier_resample(const CVector &phi, int m) {
  const int n = static_cast<int>(phi.size());
  if (m < n) throw InputError("fourier_resample only refines");
  Eigen::FFT<double> fft;
  std::vector<Complex> in(phi.data(), phi.data() + n), spec, fine(m, 0.0), out;
  fft.fwd(spec, in);
  const int half = n / 2;
  for (int k = 0; k < n; ++k) {
    if (n % 2 == 0 && k == half) {
      fine[half] += 0.5 * spec[k];
      fine[m - half] += 0.5 * spec[k];
    } else if (k < half || (n % 2 == 1 && k == half)) {
      fine[k] = spec[k];
    } else {
      fine[m - (n - k)] = spec[k];
    }
  }
  fft.inv(out, fine);
  CVector res(m);
  const double scale = double(m) / n;
  for (int j = 0; j < m; ++j) res[j] = out[j] * scale;
  return res;
}

namespace {

void givens(Complex a, Complex b, Complex &c, Complex &s) {
  const double na = std::abs(a), nb = std::abs(b);
  if (nb == 0.0) {
    c = 1.0;
    s = 0.0;
  } else if (na == 0.0) {
    c = 0.0;
    s = std::conj(b) / nb;
  } else {
    const double r = std::hypot(na, nb);
    c = na / r;
    s = (a / na) * std::conj(b) / r;
  }
}

}  // namespace

GmresResult gmres(const LinearOperator &apply, const CVector &b, int restart, double tol, int max_iterations) {
  if (restart < 1) throw InputError("gmres restart must be positive");
  GmresResult res;
  const Eigen::Index n = b.size();
  res.x = CVector::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  CVector r = b;
  double rel = 1.0;
  while (res.iterations < max_iterations) {
    const double beta = r.norm();
    const int m = restart;
    CMatrix V(n, m + 1);
    CMatrix H = CMatrix::Zero(m + 1, m);
    std::vector<Complex> cs(m), sn(m);
    CVector g = CVector::Zero(m + 1);
    g[0] = beta;
    V.col(0) = r / beta;
    int k = 0;
    for (; k < m && res.iterations < max_iterations; ++k) {
      CVector w = apply(V.col(k));
      for (int j = 0; j <= k; ++j) {
        H(j, k) = V.col(j).dot(w);
        w -= H(j, k) * V.col(j);
      }
      H(k + 1, k) = w.norm();
      if (std::abs(H(k + 1, k)) > 0.0) V.col(k + 1) = w / H(k + 1, k);
      for (int j = 0; j < k; ++j) {
        const Complex t = cs[j] * H(j, k) + sn[j] * H(j + 1, k);
        H(j + 1, k) = -std::conj(sn[j]) * H(j, k) + std::conj(cs[j]) * H(j + 1, k);
        H(j, k) = t;
      }
      givens(H(k, k), H(k + 1, k), cs[k], sn[k]);
      H(k, k) = cs[k] * H(k, k) + sn[k] * H(k + 1, k);
      H(k + 1, k) = 0.0;
      g[k + 1] = -std::conj(sn[k]) * g[k];
      g[k] = cs[k] * g[k];
      ++res.iterations;
      rel = std::abs(g[k + 1]) / bnorm;
      res.history.push_back(rel);
      if (rel <= tol) {
        ++k;
        break;
      }
    }
    // Solve the k x k triangular system and update x.
    const CVector y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    res.x += V.leftCols(k) * y;
    r = b - apply(res.x);
    rel = r.norm() / bnorm;
    if (rel <= tol) {
      res.converged = true;
      break;
    }
  }
  res.residual = rel;
  return res;
}

}  // namespace dirfmm

#include "dirfmm/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "dirfmm/directions.hpp"
#include "dirfmm/error.hpp"

namespace dirfmm {

std::vector<int> select_skeleton_columns(const CMatrix &A1, double threshold) {
  if (A1.size() == 0 || A1.cwiseAbs().maxCoeff() == 0.0) return {};
  Eigen::ColPivHouseholderQR<CMatrix> qr(A1);
  const auto &R = qr.matrixQR();
  const auto &perm = qr.colsPermutation().indices();
  const int n = static_cast<int>(std::min(A1.rows(), A1.cols()));
  std::vector<int> cols;
  for (int k = 0; k < n; ++k) {
    if (std::abs(R(k, k)) < threshold) break;
    cols.push_back(perm(k));
  }
  return cols;
}

CMatrix pseudo_inverse(const CMatrix &A, double rel_cutoff) {
  if (A.size() == 0) return CMatrix(A.cols(), A.rows());
  Eigen::BDCSVD<CMatrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto &s = svd.singularValues();
  CMatrix out = CMatrix::Zero(A.cols(), A.rows());
  if (s.size() == 0 || s(0) == 0.0) return out;
  const double cut = rel_cutoff * s(0);
  for (int k = 0; k < s.size(); ++k) {
    if (s(k) < cut) break;
    out.noalias() += (svd.matrixV().col(k) / s(k)) * svd.matrixU().col(k).adjoint();
  }
  return out;
}

CMatrix kernel_matrix(const std::vector<Point2> &x, const std::vector<Point2> &y, KernelAccuracy acc) {
  CMatrix A(x.size(), y.size());
  const long nx = static_cast<long>(x.size()), ny = static_cast<long>(y.size());
#pragma omp parallel for schedule(static) if (nx * ny > 20000)
  for (long j = 0; j < ny; ++j)
    for (long i = 0; i < nx; ++i) A(i, j) = detail::green_r(norm(x[i] - y[j]), acc);
  return A;
}

int rank_guess(double eps) {
  const double d = -std::log10(eps);
  if (d <= 4) return 20;
  if (d <= 6) return static_cast<int>(std::lround(20 + 2.5 * (d - 4)));
  return static_cast<int>(std::lround(25 + 5.0 * (d - 6)));
}

WedgeRegion rep_region(double width, int direction, double K, const RepOptions &opts) {
  if (opts.geometry == RepGeometry::cone) {
    const double r = std::sqrt(2.0) * width;
    const double dt = 2.0 * kPi / direction_count(width);
    return cone_region(r, (direction + 0.5) * dt, opts.cone_outer * r * r);
  }
  return fmm_region(width, direction, K);
}

double rep_disk_radius(double width, const RepOptions &opts) {
  return opts.geometry == RepGeometry::cone ? std::sqrt(2.0) * width : fmm_disk_radius(width);
}

namespace {

// Interior samples at the requested density, at least 400 of them, plus a ring
// on the boundary where the kernel varies fastest relative to X.
std::vector<Point2> sample_sources(double R, double ppw, Rng &rng) {
  std::vector<Point2> y = sample_disk(R, ppw, rng);
  while (y.size() < 400) {
    const double rho = R * std::sqrt(rng.uniform());
    const double t = 2.0 * kPi * rng.uniform();
    y.push_back({rho * std::cos(t), rho * std::sin(t)});
  }
  const int ring = std::max(64, static_cast<int>(std::ceil(2.0 * kPi * R * ppw)));
  const double t0 = rng.uniform() * 2.0 * kPi / ring;
  for (int i = 0; i < ring; ++i) {
    const double t = t0 + 2.0 * kPi * i / ring;
    y.push_back({R * std::cos(t), R * std::sin(t)});
  }
  return y;
}

template <class T>
std::vector<T> pick(const std::vector<T> &v, const std::vector<int> &idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace

RepResidual validate_rep(const SeparatedRep &rep, double K, int pairs, Rng &rng, const RepOptions &opts) {
  const WedgeRegion region = rep_region(rep.width, rep.direction, K, opts);
  const double R = rep_disk_radius(rep.width, opts);
  const std::vector<Point2> xs = sample_region(region, R, rng, 40);
  std::vector<double> errs;
  errs.reserve(pairs);
  CVector gb(rep.b_points.size()), ga(rep.a_points.size());
  for (int k = 0; k < pairs; ++k) {
    const Point2 x = xs[rng.next() % xs.size()];
    const double rho = R * std::sqrt(rng.uniform()), t = 2.0 * kPi * rng.uniform();
    const Point2 y{rho * std::cos(t), rho * std::sin(t)};
    for (int q = 0; q < gb.size(); ++q) gb(q) = detail::green_r(norm(x - rep.b_points[q]), KernelAccuracy::precise);
    for (int p = 0; p < ga.size(); ++p) ga(p) = detail::green_r(norm(rep.a_points[p] - y), KernelAccuracy::precise);
    const Complex approx = gb.transpose() * rep.D * ga;
    const Complex exact = helmholtz_g(x, y);
    errs.push_back(std::abs(approx - exact) / std::abs(exact));
  }
  RepResidual res;
  if (errs.empty()) return res;
  std::sort(errs.begin(), errs.end());
  res.max = errs.back();
  res.p99 = errs[static_cast<std::size_t>(0.99 * (errs.size() - 1))];
  return res;
}

SeparatedRep build_rep(double width, int direction, double K, double eps, Rng &rng, const RepOptions &opts) {
  if (!(width >= 1.0)) throw InputError("build_rep: width must be >= 1");
  if (opts.geometry == RepGeometry::fmm && K < width * width) throw InputError("build_rep: K < width^2");
  const WedgeRegion region = rep_region(width, direction, K, opts);
  const double R = rep_disk_radius(width, opts);
  const std::vector<Point2> Y = sample_sources(R, opts.ppw, rng);
  const std::vector<Point2> X = sample_region(region, R, rng);
  const int nx = static_cast<int>(X.size()), ny = static_cast<int>(Y.size());
  const double trunc = eps * opts.eps_factor;
  // A_cS has singular values down to about trunc * sigma_1 by construction; cutting
  // exactly there drops real directions and amplifies the residual.
  const double cutoff = std::max(0.1 * trunc, 1e-13);

  int T = opts.initial_rank > 0 ? opts.initial_rank : rank_guess(eps);
  double residual = 0.0;
  for (int attempt = 0; attempt <= opts.max_retries; ++attempt, T *= 2) {
    // Step 2: columns of Y from a random subset of rows.
    const CMatrix A1 = kernel_matrix(pick(X, rng.choose(nx, 3 * T)), Y);
    const std::vector<int> cols = select_skeleton_columns(A1, trunc * A1.colwise().norm().maxCoeff());
    // Step 3: rows of X from a random subset of columns.
    const CMatrix A2 = kernel_matrix(X, pick(Y, rng.choose(ny, 3 * T)));
    const std::vector<int> rows = select_skeleton_columns(A2.adjoint(), trunc * A2.rowwise().norm().maxCoeff());

    SeparatedRep rep;
    rep.width = width;
    rep.direction = direction;
    rep.dir_vec = {std::cos(region.center_angle), std::sin(region.center_angle)};
    rep.eps = eps;
    rep.b_points = pick(Y, cols);
    rep.a_points = pick(X, rows);
    // Step 4: D = pinv(A_cS) A_3 pinv(A_rT).
    const std::vector<Point2> xs = pick(X, rng.choose(nx, 10 * T));
    const std::vector<Point2> ys = pick(Y, rng.choose(ny, 10 * T));
    rep.D = pseudo_inverse(kernel_matrix(xs, rep.b_points), cutoff) * kernel_matrix(xs, ys) *
            pseudo_inverse(kernel_matrix(rep.a_points, ys), cutoff);
    // Step 5.
    if (!opts.validate) return rep;
    const RepResidual res = validate_rep(rep, K, opts.validation_pairs, rng, opts);
    rep.residual = residual = res.max;
    rep.residual_p99 = res.p99;
    if (res.p99 <= opts.p99_factor * eps && res.max <= opts.max_factor * eps) return rep;
  }
  throw ConstructionError("separated representation failed validation at width " + std::to_string(width) +
                              ", direction " + std::to_string(direction) + ": residual " + std::to_string(residual),
                          residual);
}

SeparatedRep rotate_rep(const SeparatedRep &rep, int direction) {
  SeparatedRep out = rep;
  const double dt = 2.0 * kPi / direction_count(rep.width);
  const double angle = (direction - rep.direction) * dt;
  const double c = std::cos(angle), s = std::sin(angle);
  out.direction = direction;
  out.dir_vec = rotate(rep.dir_vec, c, s);
  for (auto &p : out.a_points) p = rotate(p, c, s);
  for (auto &p : out.b_points) p = rotate(p, c, s);
  return out;
}

RepTable RepTable::build(double K, double eps, std::uint64_t seed, const RepTableOptions &opts) {
  struct Task {
    double width;
    int direction;
  };
  std::vector<Task> tasks;
  for (const DirectionSet &ds : build_direction_sets(K)) {
    const int n = opts.rotation_reuse ? 1 : ds.count;
    for (int l = 0; l < n; ++l) tasks.push_back({ds.width, l});
  }
  std::vector<SeparatedRep> built(tasks.size());
  std::string failure;
  double failure_residual = 0.0;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(tasks.size()); ++i) {
    std::uint64_t wbits;
    std::memcpy(&wbits, &tasks[i].width, sizeof wbits);
    Rng rng(mix_seed(seed, wbits, static_cast<std::uint64_t>(tasks[i].direction)));
    try {
      built[i] = build_rep(tasks[i].width, tasks[i].direction, K, eps, rng, opts.rep);
    } catch (const ConstructionError &e) {
#pragma omp critical
      {
        failure = e.what();
        failure_residual = e.residual();
      }
    }
  }
  if (!failure.empty()) throw ConstructionError(failure, failure_residual);
  return from_built(K, eps, seed, opts.rotation_reuse, opts.rep.geometry, std::move(built));
}

RepTable RepTable::from_built(double K, double eps, std::uint64_t seed, bool reuse, RepGeometry geometry,
                              std::vector<SeparatedRep> built) {
  RepTable t;
  t.K_ = K;
  t.eps_ = eps;
  t.seed_ = seed;
  t.reuse_ = reuse;
  t.geometry_ = geometry;
  for (const SeparatedRep &rep : built) {
    const int n = direction_count(rep.width);
    auto &slot = t.reps_[rep.width];
    slot.resize(n);
    if (reuse) {
      for (int l = 0; l < n; ++l) slot[l] = rotate_rep(rep, l);
    } else {
      slot.at(rep.direction) = rep;
    }
  }
  t.built_ = std::move(built);
  return t;
}

const SeparatedRep &RepTable::get(double width, int direction) const {
  auto it = reps_.find(width);
  if (it == reps_.end() || direction < 0 || direction >= static_cast<int>(it->second.size()))
    throw InputError("rep table has no entry for width " + std::to_string(width) + ", direction " +
                     std::to_string(direction));
  return it->second[direction];
}

std::vector<double> RepTable::widths() const {
  std::vector<double> w;
  for (const auto &kv : reps_) w.push_back(kv.first);
  return w;
}

int RepTable::total_reps() const {
  int n = 0;
  for (const auto &kv : reps_) n += static_cast<int>(kv.second.size());
  return n;
}

RankTable rank_table(const std::vector<double> &widths, const std::vector<double> &eps, std::uint64_t seed) {
  for (double w : widths)
    if (!(w >= 1.0) || std::exp2(std::round(std::log2(w))) != w)
      throw InputError("rank_table widths must be powers of two >= 1");
  RankTable t{widths, eps, {}};
  RepOptions o;
  o.geometry = RepGeometry::cone;
  o.eps_factor = 1.0;
  for (double e : eps) {
    if (!(e > 0.0 && e < 1.0)) throw InputError("rank_table eps must lie in (0, 1)");
    std::vector<int> row;
    for (double w : widths) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(w), static_cast<std::uint64_t>(-std::log10(e))));
      row.push_back(build_rep(w, 0, 1024, e, rng, o).rank());
    }
    t.ranks.push_back(std::move(row));
  }
  return t;
}

}  // namespace dirfmm

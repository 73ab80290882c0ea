#include "dirfmm/bie.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "dirfmm/error.hpp"
#include "dirfmm/kernel.hpp"

namespace dirfmm {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kEuler = 0.57721566490153286061;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int thread_count(int requested) { return requested > 0 ? requested : omp_get_max_threads(); }

int cyclic_distance(int i, int j, int n) {
  const int d = std::abs(i - j);
  return std::min(d, n - d);
}

// (i/4) H0(k r) and dG/dn(y) = (i k / 4) H1(k r) ((x - y) . n) / r.
void layer_kernels(Point2 x, Point2 y, Point2 ny, Complex &single, Complex &dbl) {
  const Point2 d = x - y;
  const double r = norm(d);
  Complex h0, h1;
  hankel01(kWaveNumber * r, h0, h1);
  single = Complex(0.0, 0.25) * h0;
  dbl = Complex(0.0, 0.25 * kWaveNumber) * h1 * (dot(d, ny) / r);
}

}  // namespace

BIESystem discretize_nodes(const ParamCurve &curve, int n, double eta, SingularRule rule) {
  if (n < 16) throw InputError("discretization needs at least 16 nodes");
  if (n % 2 != 0) ++n;
  BIESystem s;
  s.kind = curve.kind();
  s.K = curve.scale();
  s.eta = eta;
  s.rule = rule;
  s.correction = log_correction_weights();
  s.t.resize(n);
  s.nodes.resize(n);
  s.normals.resize(n);
  s.speed.resize(n);
  s.weights.resize(n);
  s.curvature.resize(n);
  for (int j = 0; j < n; ++j) {
    const double t = 2.0 * kPi * j / n;
    s.t[j] = t;
    s.nodes[j] = curve.position(t);
    s.normals[j] = curve.normal(t);
    s.speed[j] = curve.speed(t);
    s.weights[j] = 2.0 * kPi / n * s.speed[j];
    s.curvature[j] = curve.curvature(t);
  }
  if (rule == SingularRule::kress) s.kress = kress_weights(n);
  return s;
}

BIESystem discretize(const ParamCurve &curve, double ppw, double eta, SingularRule rule) {
  const int n = static_cast<int>(std::lround(ppw * curve.length()));
  return discretize_nodes(curve, n + (n % 2), eta, rule);
}

Complex operator_entry(const BIESystem &sys, int i, int j) {
  const int n = sys.size();
  const Complex ieta(0.0, sys.eta);
  if (sys.rule == SingularRule::kress) {
    // Both layers in the parameter as M1 ln(4 sin^2((t - s)/2)) + M2, times |gamma'(s)|.
    // M1 vanishes on the diagonal for the double layer.
    if (i == j) {
      const Complex m2 = Complex(0.0, 0.25) - (std::log(kWaveNumber * sys.speed[i] / 2.0) + kEuler) / (2.0 * kPi);
      const Complex single = -sys.kress[0] / (4.0 * kPi) + 2.0 * kPi / n * m2;
      return -sys.curvature[i] / (4.0 * kPi) * sys.weights[i] - ieta * single * sys.speed[j];
    }
    Complex g, dg;
    layer_kernels(sys.nodes[i], sys.nodes[j], sys.normals[j], g, dg);
    const Point2 d = sys.nodes[i] - sys.nodes[j];
    const double r = norm(d);
    Complex h0, h1;
    hankel01(kWaveNumber * r, h0, h1);
    const double s = std::sin(0.5 * (sys.t[i] - sys.t[j]));
    const double lg = std::log(4.0 * s * s);
    const double R = sys.kress[std::abs(i - j)], h = 2.0 * kPi / n;
    const double s1 = -h0.real() / (4.0 * kPi);
    const double d1 = -kWaveNumber / (4.0 * kPi) * h1.real() * dot(d, sys.normals[j]) / r;
    const Complex single = R * s1 + h * (g - s1 * lg);
    const Complex dbl = R * d1 + h * (dg - d1 * lg);
    return (dbl - ieta * single) * sys.speed[j];
  }
  // Stencil on the log-singular single layer; the double layer is smooth up
  // to an r^2 ln r term and keeps the plain rule with its diagonal limit.
  if (i == j) return -sys.curvature[i] / (4.0 * kPi) * sys.weights[i];
  Complex g, dg;
  layer_kernels(sys.nodes[i], sys.nodes[j], sys.normals[j], g, dg);
  const int d = cyclic_distance(i, j, n);
  const double corr = d <= 6 ? 1.0 + sys.correction[d - 1] : 1.0;
  return sys.weights[j] * (dg - ieta * g * corr);
}

BIEOperator::BIEOperator(const BIESystem &sys, int assemble_limit, int threads) : sys_(sys), threads_(threads) {
  const int n = sys_.size();
  if (n <= assemble_limit) {
    matrix_.resize(n, n);
#pragma omp parallel for schedule(dynamic, 8) num_threads(thread_count(threads_))
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) matrix_(i, j) = operator_entry(sys_, i, j);
  }
}

BIEOperator::BIEOperator(const BIESystem &sys, const FastOperatorOptions &fast)
    : sys_(sys), threads_(fast.threads), fast_(fast) {
  if (fast.reps == nullptr) throw InputError("fast operator needs a rep table");
  if (sys.rule != SingularRule::corrected_trapezoid) throw InputError("fast operator supports the corrected rule only");
  const int n = sys_.size();
  const double lim = 0.5 * fast.reps->K();
  for (const Point2 &p : sys_.nodes)
    if (std::abs(p.x) >= lim || std::abs(p.y) >= lim) throw InputError("curve does not fit the rep table's domain");

  // Pairs treated directly: within near_radius, or inside the correction stencil.
  // The evaluator contributes w_j (dG/dn - i eta G) for every j != i; the
  // sparse part replaces that with the exact entry.
  const double R = fast.near_radius;
  auto cell_of = [R](Point2 p) {
    return std::pair<std::int64_t, std::int64_t>(std::floor(p.x / R), std::floor(p.y / R));
  };
  auto key = [](std::int64_t a, std::int64_t b) { return (a << 32) ^ (b & 0xffffffff); };
  std::unordered_map<std::int64_t, std::vector<int>> cells;
  for (int j = 0; j < n; ++j) {
    const auto [cx, cy] = cell_of(sys_.nodes[j]);
    cells[key(cx, cy)].push_back(j);
  }
  std::vector<std::vector<std::pair<int, Complex>>> rows(n);
  const Complex ieta(0.0, sys_.eta);
#pragma omp parallel for schedule(dynamic, 16) num_threads(thread_count(threads_))
  for (int i = 0; i < n; ++i) {
    const Point2 x = sys_.nodes[i];
    const auto [cx, cy] = cell_of(x);
    std::vector<int> js;
    for (std::int64_t a = cx - 1; a <= cx + 1; ++a)
      for (std::int64_t b = cy - 1; b <= cy + 1; ++b) {
        auto it = cells.find(key(a, b));
        if (it == cells.end()) continue;
        for (int j : it->second)
          if (norm(sys_.nodes[j] - x) < R) js.push_back(j);
      }
    for (int d = -6; d <= 6; ++d) js.push_back(((i + d) % n + n) % n);
    std::sort(js.begin(), js.end());
    js.erase(std::unique(js.begin(), js.end()), js.end());
    for (int j : js) {
      Complex model = 0.0;
      if (j != i) {
        const Point2 d = x - sys_.nodes[j];
        model = sys_.weights[j] * detail::source_r(d, norm(d), -ieta, 1.0, sys_.normals[j], KernelAccuracy::precise);
      }
      rows[i].emplace_back(j, operator_entry(sys_, i, j) - model);
    }
  }
  std::vector<Eigen::Triplet<Complex>> trip;
  for (int i = 0; i < n; ++i)
    for (const auto &[j, v] : rows[i]) trip.emplace_back(i, j, v);
  near_.resize(n, n);
  near_.setFromTriplets(trip.begin(), trip.end());
}

CVector BIEOperator::apply(const CVector &phi) const {
  if (phi.size() != sys_.size()) throw InputError("density length does not match the discretization");
  return fast_ ? apply_fast(phi) : apply_dense(phi);
}

CVector BIEOperator::apply_dense(const CVector &phi) const {
  if (matrix_.size() > 0) return 0.5 * phi + matrix_ * phi;
  const int n = sys_.size();
  CVector out(n);
#pragma omp parallel for schedule(dynamic, 8) num_threads(thread_count(threads_))
  for (int i = 0; i < n; ++i) {
    Complex sum = 0.5 * phi[i];
    for (int j = 0; j < n; ++j) sum += operator_entry(sys_, i, j) * phi[j];
    out[i] = sum;
  }
  return out;
}

CVector BIEOperator::apply_fast(const CVector &phi) const {
  const int n = sys_.size();
  const FastOperatorOptions &f = *fast_;
  NBodyProblem prob;
  prob.K = f.reps->K();
  prob.eps = f.reps->eps();
  prob.points = sys_.nodes;
  prob.normals = sys_.normals;
  prob.charges.resize(n);
  prob.dipoles.resize(n);
  const Complex ieta(0.0, sys_.eta);
  for (int j = 0; j < n; ++j) {
    prob.dipoles[j] = sys_.weights[j] * phi[j];
    prob.charges[j] = -ieta * prob.dipoles[j];
  }
  EvaluateOptions eo;
  eo.threads = f.threads;
  eo.leaf_capacity = f.leaf_capacity;
  const NBodyResult res = evaluate(prob, *f.reps, eo);
  CVector out = 0.5 * phi + near_ * phi;
  for (int i = 0; i < n; ++i) out[i] += res.potentials[i];

  if (!checked_ && f.spot_checks > 0) {
    checked_ = true;
    double num = 0.0, den = 0.0;
    for (int k = 0; k < f.spot_checks; ++k) {
      const int i = static_cast<int>((static_cast<long>(k) * n) / f.spot_checks);
      Complex exact = 0.5 * phi[i];
      for (int j = 0; j < n; ++j) exact += operator_entry(sys_, i, j) * phi[j];
      num += std::norm(out[i] - exact);
      den += std::norm(exact);
    }
    const double dev = den > 0.0 ? std::sqrt(num / den) : 0.0;
    if (dev > 10.0 * prob.eps) {
      std::ostringstream msg;
      msg << "fast operator deviates from the dense rows by " << dev << " (eps " << prob.eps << ")";
      if (f.warn)
        f.warn(msg.str());
      else
        std::cerr << "warning: " << msg.str() << '\n';
    }
  }
  return out;
}

CVector apply_operator(const BIESystem &sys, const CVector &phi, const RepTable *fast) {
  if (fast == nullptr) return BIEOperator(sys, 0).apply(phi);
  FastOperatorOptions opts;
  opts.reps = fast;
  return BIEOperator(sys, opts).apply(phi);
}

CVector incident_wave(const std::vector<Point2> &x, Point2 d) {
  CVector u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) u[i] = std::exp(Complex(0.0, kWaveNumber * dot(x[i], d)));
  return u;
}

namespace {

double enclosing_power_of_two(double K) {
  double p = 4.0;
  while (p < K) p *= 2.0;
  return p;
}

}  // namespace

ScatterSolution solve_scattering(const ParamCurve &curve, const ScatterOptions &opts) {
  ScatterSolution sol;
  const auto t0 = Clock::now();
  sol.system = discretize(curve, opts.ppw, opts.eta, opts.rule);
  const BIESystem &sys = sol.system;
  const double nd = norm(opts.direction);
  if (!(nd > 0.0)) throw InputError("incident direction must be nonzero");
  const Point2 d = (1.0 / nd) * opts.direction;

  std::unique_ptr<BIEOperator> op;
  RepTable reps;
  sol.stats.fast = !opts.dense;
  if (opts.dense) {
    op = std::make_unique<BIEOperator>(sys, 4096, opts.threads);
  } else {
    const double eps = opts.eps > 0.0 ? opts.eps : opts.tol / 10.0;
    const double K = enclosing_power_of_two(curve.scale());
    reps = opts.reps ? opts.reps(K, eps) : RepTable::build(K, eps, opts.seed);
    FastOperatorOptions f;
    f.reps = &reps;
    f.threads = opts.threads;
    op = std::make_unique<BIEOperator>(sys, f);
    sol.stats.eps = eps;
  }
  sol.stats.setup = seconds_since(t0);

  const CVector rhs = -incident_wave(sys.nodes, d);
  const auto t1 = Clock::now();
  GmresResult g = gmres([&](const CVector &x) { return op->apply(x); }, rhs, opts.restart, opts.tol,
                        opts.max_iterations);
  sol.stats.T_t = seconds_since(t1);
  sol.stats.N = sys.size();
  sol.stats.iterations = g.iterations;
  sol.stats.T_i = g.iterations > 0 ? sol.stats.T_t / g.iterations : 0.0;
  sol.stats.converged = g.converged;
  sol.stats.residual = g.residual;
  sol.phi = std::move(g.x);
  sol.history = std::move(g.history);
  return sol;
}

double boundary_residual(const ParamCurve &curve, const BIESystem &sys, const CVector &phi, Point2 direction,
                         int threads) {
  const BIESystem fine = discretize_nodes(curve, 2 * sys.size(), sys.eta, sys.rule);
  const CVector phi_f = fourier_resample(phi, fine.size());
  const CVector uinc = incident_wave(fine.nodes, (1.0 / norm(direction)) * direction);
  const CVector r = BIEOperator(fine, 0, threads).apply(phi_f) + uinc;
  return r.norm() / uinc.norm();
}

CVector scattered_field(const BIESystem &sys, const CVector &phi, const std::vector<Point2> &x, int threads) {
  const int n = sys.size();
  const int m = static_cast<int>(x.size());
  const Complex ieta(0.0, sys.eta);
  CVector u(m);
#pragma omp parallel for schedule(dynamic, 16) num_threads(thread_count(threads))
  for (int i = 0; i < m; ++i) {
    Complex sum = 0.0;
    for (int j = 0; j < n; ++j) {
      Complex g, dg;
      layer_kernels(x[i], sys.nodes[j], sys.normals[j], g, dg);
      sum += sys.weights[j] * (dg - ieta * g) * phi[j];
    }
    u[i] = sum;
  }
  return u;
}

namespace {

double distance_to_polyline(const std::vector<Point2> &p, Point2 x) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = p.size();
  for (std::size_t j = 0; j < n; ++j) {
    const Point2 a = p[j], b = p[(j + 1) % n];
    const Point2 ab = b - a;
    const double len2 = dot(ab, ab);
    const double s = len2 > 0.0 ? std::clamp(dot(x - a, ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, norm(x - (a + s * ab)));
  }
  return best;
}

}  // namespace

FieldGrid evaluate_field(const BIESystem &sys, const CVector &phi, Point2 center, double side, double spw,
                         double tube, int threads) {
  if (!(side > 0.0) || !(spw > 0.0)) throw InputError("field region and sampling density must be positive");
  FieldGrid grid;
  grid.spacing = 1.0 / spw;
  grid.nx = grid.ny = static_cast<int>(std::floor(side * spw + 1e-9)) + 1;
  grid.x0 = center.x - 0.5 * side;
  grid.y0 = center.y - 0.5 * side;
  const std::size_t total = static_cast<std::size_t>(grid.nx) * grid.ny;
  std::vector<Point2> keep;
  std::vector<std::size_t> where;
  grid.values.assign(total, Complex(std::nan(""), std::nan("")));
  std::vector<char> in_tube(total, 0);
#pragma omp parallel for schedule(dynamic, 64) num_threads(thread_count(threads))
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(total); ++k) {
    const Point2 x = grid.point(static_cast<int>(k % grid.nx), static_cast<int>(k / grid.nx));
    in_tube[k] = distance_to_polyline(sys.nodes, x) < tube;
  }
  for (std::size_t k = 0; k < total; ++k) {
    if (in_tube[k]) {
      ++grid.flagged;
      continue;
    }
    keep.push_back(grid.point(static_cast<int>(k % grid.nx), static_cast<int>(k / grid.nx)));
    where.push_back(k);
  }
  const CVector u = scattered_field(sys, phi, keep, threads);
  for (std::size_t k = 0; k < where.size(); ++k) grid.values[where[k]] = u[k];
  return grid;
}

}  // namespace dirfmm

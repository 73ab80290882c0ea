// Acceptance checks. Prints one PASS/FAIL line per criterion; exits nonzero if
// any fails. Pass criterion numbers as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstring>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bessel_oracle.hpp"
#include "circle_series.hpp"
#include "dirfmm/bie.hpp"
#include "dirfmm/curve.hpp"
#include "dirfmm/driver.hpp"
#include "dirfmm/error.hpp"
#include "dirfmm/kernel.hpp"
#include "dirfmm/lowrank.hpp"
#include "dirfmm/translate.hpp"
#include "dirfmm/tree.hpp"

using namespace dirfmm;

namespace {

constexpr std::uint64_t kSeed = 20080917;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void note(Outcome &o, bool ok, const char *fmt, ...) __attribute__((format(printf, 3, 4)));
void note(Outcome &o, bool ok, const char *fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  o.pass = o.pass && ok;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += buf;
  if (!ok) o.detail += " [x]";
}

NBodyProblem circle_problem(double K, double eps) {
  NBodyProblem p;
  p.K = K;
  p.eps = eps;
  p.seed = kSeed;
  Rng rng(mix_seed(kSeed, static_cast<std::uint64_t>(K)));
  p.points = sample_curve(make_curve(CurveKind::circle, K), 20.0, rng);
  p.charges = random_charges(p.points.size(), rng);
  return p;
}

Outcome rank_plateau() {
  const std::vector<double> widths{1, 2, 4, 8, 16, 32};
  const std::vector<double> eps{1e-4, 1e-6, 1e-8};
  const int table[3][6] = {{14, 11, 11, 10, 9, 9}, {19, 16, 14, 13, 12, 12}, {27, 20, 16, 15, 15, 15}};
  const auto t0 = Clock::now();
  const RankTable t = rank_table(widths, eps, kSeed);
  Outcome o;
  for (std::size_t e = 0; e < eps.size(); ++e) {
    bool in_band = true, monotone = true;
    std::string row;
    for (std::size_t w = 0; w < widths.size(); ++w) {
      const int r = t.ranks[e][w];
      row += (w ? " " : "") + std::to_string(r);
      in_band = in_band && r >= 0.7 * table[e][w] && r <= 1.5 * table[e][w];
      for (std::size_t v = 0; v < w; ++v) monotone = monotone && r <= t.ranks[e][v] + 2;
    }
    note(o, in_band && monotone, "eps %.0e: %s", eps[e], row.c_str());
  }
  const double s = seconds_since(t0);
  note(o, s <= 600.0, "%.0f s", s);
  return o;
}

Outcome kernel_accuracy() {
  double worst0 = 0, worst1 = 0, worst_w = 0, worst_rem = 0;
  for (int i = 0; i < 10000; ++i) {
    const double x = std::pow(10.0, -6.0 + 12.0 * i / 9999.0);
    double rem = 0;
    const testsupport::Ref r = testsupport::bessel_reference(x, &rem);
    worst_rem = std::max(worst_rem, rem);
    const Complex h0 = hankel0(x), h1 = hankel1(x);
    worst0 = std::max(worst0, std::abs(h0 - Complex(r.j0, r.y0)));
    worst1 = std::max(worst1, std::abs(h1 - Complex(r.j1, r.y1)));
    const double w = h1.real() * h0.imag() - h0.real() * h1.imag();
    const double expect = 2 / (kPi * x);
    worst_w = std::max(worst_w, std::abs(w - expect) / expect);
  }
  Outcome o;
  note(o, worst0 <= 1e-12, "H0 abs %.2e", worst0);
  note(o, worst1 <= 1e-12, "H1 abs %.2e", worst1);
  note(o, worst_w <= 1e-10, "Wronskian rel %.2e", worst_w);
  note(o, worst_rem < 1e-15, "oracle remainder %.1e", worst_rem);
  return o;
}

Outcome exact_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  for (double K : {16.0, 64.0})
    for (double eps : {1e-4, 1e-6}) {
      const NBodyProblem p = circle_problem(K, eps);
      const RepTable reps = RepTable::build(K, eps, kSeed);
      const auto u = evaluate(p, reps).potentials;
      std::vector<int> all(p.points.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
      const auto ex = direct_evaluate(p, all);
      double worst = 0;
      for (std::size_t i = 0; i < ex.size(); ++i) worst = std::max(worst, std::abs(u[i] - ex[i]) / std::abs(ex[i]));
      note(o, worst <= 30 * eps, "K=%g eps=%.0e N=%zu max %.1f eps", K, eps, p.points.size(), worst / eps);
    }
  const double s = seconds_since(t0);
  note(o, s <= 300.0, "%.0f s", s);
  return o;
}

// Shared by criteria 4 and 9.
struct PaperScaleRun {
  NBodyProblem problem;
  RepTable reps;
  std::vector<Complex> first;
  double error = NAN;
  double seconds = 0;
};

PaperScaleRun &paper_scale() {
  static PaperScaleRun run = [] {
    PaperScaleRun r;
    const auto t0 = Clock::now();
    r.problem = circle_problem(256, 1e-4);
    r.reps = RepTable::build(256, 1e-4, kSeed);
    const NBodyResult res = evaluate(r.problem, r.reps, {.threads = 1});
    Rng rng(mix_seed(kSeed, 200));
    if (const auto e = estimate_error(r.problem, res, rng, 200)) r.error = *e;
    r.first = res.potentials;
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Outcome paper_scale_accuracy() {
  const PaperScaleRun &r = paper_scale();
  Outcome o;
  note(o, r.error <= 1e-3, "K=256 N=%zu eps_a %.2e", r.problem.points.size(), r.error);
  note(o, r.seconds <= 600.0, "%.0f s", r.seconds);
  return o;
}

Outcome scaling() {
  Outcome o;
  std::vector<double> Ta;
  const auto t0 = Clock::now();
  for (double K : {128.0, 256.0, 512.0}) {
    const NBodyProblem p = circle_problem(K, 1e-4);
    const RepTable reps = RepTable::build(K, 1e-4, kSeed);
    const PhaseTimings t = evaluate(p, reps).timings;
    Ta.push_back(t.total);
    std::printf("  K=%-4g N=%-6zu T_a %.3g s | tree %.3g setup %.3g up_low %.3g up_high %.3g down_high %.3g "
                "down_low %.3g near %.3g\n",
                K, p.points.size(), t.total, t.tree, t.setup, t.upward_low, t.upward_high, t.downward_high,
                t.downward_low, t.near_field);
  }
  for (std::size_t i = 1; i < Ta.size(); ++i) {
    const double ratio = Ta[i] / Ta[i - 1];
    note(o, ratio <= 2.8, "T_a(%d)/T_a(%d) = %.2f", 128 << i, 128 << (i - 1), ratio);
  }
  const double s = seconds_since(t0);
  note(o, s <= 1200.0, "%.0f s", s);
  return o;
}

Outcome translation_properties() {
  Outcome o;
  const auto t0 = Clock::now();
  const double K = 16, eps = 1e-4;
  const RepTable reps = RepTable::build(K, eps, kSeed);
  NBodyProblem p;
  p.K = K;
  p.eps = eps;
  Rng rng(kSeed);
  p.points.resize(1500);
  for (auto &x : p.points) x = {rng.uniform(-7.9, 7.9), rng.uniform(-7.9, 7.9)};
  const int n = static_cast<int>(p.points.size());
  auto unit_run = [&](int j) {
    p.charges.assign(n, 0.0);
    p.charges[j] = 1.0;
    return evaluate(p, reps, {.threads = 1}).potentials;
  };

  double worst = 0;
  for (int j : {0, 777, 1499}) {
    const auto u = unit_run(j);
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      const Complex ex = helmholtz_g(p.points[i], p.points[j]);
      worst = std::max(worst, std::abs(u[i] - ex) / std::abs(ex));
    }
  }
  note(o, worst <= 10 * eps, "single source %.1f eps", worst / eps);

  const int a = 12, b = 1203;
  const auto ua = unit_run(a), ub = unit_run(b);
  const double recip = std::abs(ua[b] - ub[a]) / std::abs(helmholtz_g(p.points[a], p.points[b]));
  note(o, recip <= 20 * eps, "reciprocity %.1f eps", recip / eps);

  const auto f1 = random_charges(n, rng), f2 = random_charges(n, rng);
  std::vector<Complex> f12(n);
  for (int i = 0; i < n; ++i) f12[i] = f1[i] + f2[i];
  p.charges = f1;
  const auto u1 = evaluate(p, reps, {.threads = 1}).potentials;
  p.charges = f2;
  const auto u2 = evaluate(p, reps, {.threads = 1}).potentials;
  p.charges = f12;
  const auto u12 = evaluate(p, reps, {.threads = 1}).potentials;
  double num = 0, den = 0;
  for (int i = 0; i < n; ++i) num += std::norm(u12[i] - u1[i] - u2[i]), den += std::norm(u12[i]);
  const double lin = std::sqrt(num / den);
  note(o, lin <= 1e-12, "linearity %.1e", lin);

  const QuadTree tree(p.points, TreeConfig{K, 4, eps});
  std::vector<double> low;
  for (int l = 0; l < tree.num_levels(); ++l)
    if (tree.level_width(l) < 1.0) low.push_back(tree.level_width(l));
  const LowFreqBasis basis(eps, low);
  Translator tr(tree, &reps, basis, f1);
  int low_parent = -1, high_box = -1;
  for (std::size_t id = 0; id < tree.boxes().size(); ++id) {
    const QuadBox &bx = tree.box(static_cast<int>(id));
    if (bx.regime == Regime::low && !bx.leaf) low_parent = static_cast<int>(id);
    if (bx.regime == Regime::high && bx.width == 1.0 && high_box < 0) high_box = static_cast<int>(id);
  }
  int raised = 0, tried = 0;
  auto expect_throw = [&](const std::function<void()> &f) {
    ++tried;
    try {
      f();
    } catch (const TraversalOrderError &) {
      ++raised;
    }
  };
  if (low_parent >= 0) {
    expect_throw([&] { tr.m2m_low(low_parent); });
    expect_throw([&] { tr.l2l_low(low_parent); });
  }
  if (high_box >= 0) {
    expect_throw([&] { tr.m2m_high(high_box); });
    expect_throw([&] { tr.l2l_high(high_box); });
  }
  note(o, tried == 4 && raised == tried, "order violations raised %d/%d", raised, tried);

  const double s = seconds_since(t0);
  note(o, s <= 120.0, "%.0f s", s);
  return o;
}

double rel_l2(const CVector &a, const CVector &b) { return (a - b).norm() / b.norm(); }

Outcome circle_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto curve = make_curve(CurveKind::circle, 32);
  ScatterOptions opts;
  opts.eps = 1e-4;
  opts.tol = 1e-4;
  opts.seed = kSeed;
  const ScatterSolution sol = solve_scattering(curve, opts);
  note(o, sol.stats.converged, "N=%d N_i=%d", sol.stats.N, sol.stats.iterations);
  note(o, rel_l2(sol.phi, testsupport::circle_density_at(sol.system)) <= 1e-2, "density %.2e",
       rel_l2(sol.phi, testsupport::circle_density_at(sol.system)));

  const double R = norm(sol.system.nodes[0]);
  const FieldGrid g = evaluate_field(sol.system, sol.phi, {0, 0}, 3 * R, 2.0);
  const int modes = static_cast<int>(kWaveNumber * 1.6 * R) + 40;
  std::vector<Complex> got, want;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      const Complex v = g.at(ix, iy);
      const Point2 x = g.point(ix, iy);
      if (std::isnan(v.real()) || norm(x) <= R) continue;
      got.push_back(v);
      want.push_back(testsupport::circle_scattered(R, x, modes));
    }
  const CVector a = Eigen::Map<const CVector>(got.data(), got.size());
  const CVector b = Eigen::Map<const CVector>(want.data(), want.size());
  note(o, rel_l2(a, b) <= 1e-2, "field %.2e on %zu probes", rel_l2(a, b), got.size());

  const double bc = boundary_residual(curve, sol.system, sol.phi, opts.direction);
  note(o, bc <= 5e-2, "BC residual %.2e", bc);
  const double s = seconds_since(t0);
  note(o, s <= 600.0, "%.0f s", s);
  return o;
}

Outcome iteration_trend() {
  Outcome o;
  const auto t0 = Clock::now();
  std::vector<int> circle, kite;
  for (double K : {32.0, 64.0, 128.0}) {
    ScatterOptions opts;
    opts.seed = kSeed;
    std::optional<RepTable> reps;
    opts.reps = [&](double k, double e) {
      if (!reps) reps = RepTable::build(k, e, kSeed);
      return *reps;
    };
    const ScatterSolution c = solve_scattering(make_curve(CurveKind::circle, K), opts);
    const ScatterSolution k = solve_scattering(make_curve(CurveKind::kite, K), opts);
    note(o, c.stats.converged && k.stats.converged, "K=%g circle %d kite %d", K, c.stats.iterations,
         k.stats.iterations);
    note(o, k.stats.iterations > c.stats.iterations, "kite > circle at K=%g", K);
    circle.push_back(c.stats.iterations);
    kite.push_back(k.stats.iterations);
  }
  for (std::size_t i = 1; i < circle.size(); ++i) {
    const double ratio = double(circle[i]) / circle[i - 1];
    note(o, ratio <= 1.6, "doubling ratio %.2f", ratio);
  }
  const double s = seconds_since(t0);
  note(o, s <= 1800.0, "%.0f s", s);
  return o;
}

Outcome determinism() {
  PaperScaleRun &r = paper_scale();
  const auto second = evaluate(r.problem, r.reps, {.threads = 1}).potentials;
  Outcome o;
  const bool same = second.size() == r.first.size() &&
                    std::memcmp(second.data(), r.first.data(), second.size() * sizeof(Complex)) == 0;
  note(o, same, "%zu potentials %s", second.size(), same ? "byte-identical" : "differ");
  return o;
}

}  // namespace

int main(int argc, char **argv) {
  const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
      {"rank plateau", rank_plateau},
      {"kernel accuracy", kernel_accuracy},
      {"small-instance equivalence", exact_equivalence},
      {"paper-scale accuracy", paper_scale_accuracy},
      {"N log N scaling", scaling},
      {"translation properties", translation_properties},
      {"BIE circle oracle", circle_oracle},
      {"BIE iteration trend", iteration_trend},
      {"determinism", determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}

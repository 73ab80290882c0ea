#include "dirfmm/driver.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>

#include "dirfmm/error.hpp"
#include "dirfmm/translate.hpp"
#include "dirfmm/tree.hpp"

namespace dirfmm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int thread_count(int requested) { return requested > 0 ? requested : omp_get_max_threads(); }

template <class F>
void for_each_box(const std::vector<int> &ids, int threads, F &&f) {
  const int n = static_cast<int>(ids.size());
  // Exceptions cannot cross the OpenMP region; keep the first and rethrow.
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int k = 0; k < n; ++k) {
    try {
      f(ids[k]);
    } catch (...) {
#pragma omp critical(dirfmm_driver_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

void check_sizes(const NBodyProblem &problem) {
  const std::size_t n = problem.points.size();
  if (problem.charges.size() != n) throw InputError("points and charges differ in length");
  if (problem.dipoles.size() != problem.normals.size()) throw InputError("dipoles and normals differ in length");
  if (!problem.dipoles.empty() && problem.dipoles.size() != n) throw InputError("points and dipoles differ in length");
}

}  // namespace

NBodyResult evaluate(const NBodyProblem &problem, const RepTable &reps, const EvaluateOptions &opts) {
  check_sizes(problem);
  NBodyResult result;
  if (problem.points.empty()) return result;
  if (reps.K() != problem.K || reps.eps() != problem.eps)
    throw InputError("rep table was built for K=" + std::to_string(reps.K()) + ", eps=" + std::to_string(reps.eps()));
  const int threads = thread_count(opts.threads);
  const auto t_start = Clock::now();

  auto t0 = Clock::now();
  const QuadTree tree(problem.points, TreeConfig{problem.K, opts.leaf_capacity, problem.eps});
  result.timings.tree = seconds_since(t0);

  t0 = Clock::now();
  std::vector<double> low_widths;
  for (int l = 0; l < tree.num_levels(); ++l)
    if (tree.level_width(l) < 1.0) low_widths.push_back(tree.level_width(l));
  const LowFreqBasis basis(problem.eps, low_widths, opts.low_freq_points);
  const bool dip = !problem.dipoles.empty();
  Translator tr(tree, &reps, basis, problem.charges, opts.accuracy, dip ? &problem.dipoles : nullptr,
                dip ? &problem.normals : nullptr);
  result.timings.setup = seconds_since(t0);

  // Level ids split by regime; directional levels are those with w <= top.
  const int L = tree.num_levels();
  std::vector<std::vector<int>> low(L), high(L);
  for (int l = 0; l < L; ++l)
    for (int id : tree.level(l)) {
      const QuadBox &b = tree.box(id);
      if (b.regime == Regime::low) low[l].push_back(id);
      else if (b.width <= tree.top_width()) high[l].push_back(id);
    }

  t0 = Clock::now();
  for (int l = L - 1; l >= 0; --l)
    for_each_box(low[l], threads, [&](int id) {
      if (tree.box(id).leaf) tr.leaf_s2m(id);
      else tr.m2m_low(id);
    });
  result.timings.upward_low = seconds_since(t0);

  t0 = Clock::now();
  for (int l = L - 1; l >= 0; --l) for_each_box(high[l], threads, [&](int id) { tr.m2m_high(id); });
  result.timings.upward_high = seconds_since(t0);

  t0 = Clock::now();
  for (int l = 0; l < L; ++l) {
    for_each_box(high[l], threads, [&](int id) { tr.m2l_high(id); });
    for_each_box(high[l], threads, [&](int id) { tr.l2l_high(id); });
  }
  result.timings.downward_high = seconds_since(t0);

  t0 = Clock::now();
  for (int l = 0; l < L; ++l) {
    for_each_box(low[l], threads, [&](int id) { tr.m2l_low(id); });
    for_each_box(low[l], threads, [&](int id) { tr.l2l_low(id); });
  }
  result.timings.downward_low = seconds_since(t0);

  t0 = Clock::now();
  std::vector<int> leaves;
  for (const auto &lv : low)
    for (int id : lv)
      if (tree.box(id).leaf) leaves.push_back(id);
  for_each_box(leaves, threads, [&](int id) { tr.near_field(id); });
  result.timings.near_field = seconds_since(t0);

  result.potentials = tr.take_potentials();
  result.timings.total = seconds_since(t_start);

  NBodyStats &st = result.stats;
  st.boxes = static_cast<int>(tree.boxes().size());
  st.levels = L;
  for (const QuadBox &b : tree.boxes()) {
    st.leaves += b.leaf;
    if (b.regime == Regime::high) {
      ++st.high_boxes;
      st.high_m2l += static_cast<long>(b.interaction_list.size());
    } else {
      ++st.low_boxes;
      st.low_m2l += static_cast<long>(b.interaction_list.size());
      if (b.leaf) st.near_pairs += static_cast<long>(b.u_list.size());
    }
  }
  st.reps = reps.total_reps();
  st.reps_built = static_cast<int>(reps.built().size());
  st.low_freq_points = basis.points();
  st.per_level = tree.level_stats();
  return result;
}

std::vector<Complex> direct_evaluate(const NBodyProblem &problem, const std::vector<int> &targets, int threads) {
  const auto &p = problem.points;
  const auto &f = problem.charges;
  check_sizes(problem);
  const bool dip = !problem.dipoles.empty();
  const int n = static_cast<int>(p.size());
  const int m = static_cast<int>(targets.size());
  for (int i : targets)
    if (i < 0 || i >= n) throw InputError("target index out of range");
  std::vector<Complex> u(m);
#pragma omp parallel for schedule(static) num_threads(thread_count(threads))
  for (int k = 0; k < m; ++k) {
    const int i = targets[k];
    Complex sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const Point2 d = p[i] - p[j];
      const double r = norm(d);
      if (r == 0.0) continue;
      if (dip)
        sum += detail::source_r(d, r, f[j], problem.dipoles[j], problem.normals[j], KernelAccuracy::precise);
      else
        sum += detail::green_r(r, KernelAccuracy::precise) * f[j];
    }
    u[k] = sum;
  }
  return u;
}

std::optional<double> estimate_error(const NBodyProblem &problem, const NBodyResult &result, Rng &rng,
                                     int sample_size) {
  const int n = static_cast<int>(problem.points.size());
  if (result.potentials.size() != problem.points.size()) throw InputError("result does not match problem");
  if (sample_size > n) throw InputError("sample size exceeds point count");
  const std::vector<int> S = rng.choose(n, sample_size);
  const std::vector<Complex> exact = direct_evaluate(problem, S);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < S.size(); ++k) {
    num += std::norm(exact[k] - result.potentials[S[k]]);
    den += std::norm(exact[k]);
  }
  if (den == 0.0) return std::nullopt;
  return std::sqrt(num / den);
}

std::vector<Complex> random_charges(std::size_t n, Rng &rng) {
  std::vector<Complex> q(n);
  for (auto &c : q) {
    const double re = rng.normal();
    c = {re, rng.normal()};
  }
  return q;
}

BenchmarkRow measure(const NBodyProblem &problem, const RepTable &reps, Rng &rng, const BenchmarkOptions &opts) {
  BenchmarkRow row;
  row.K = problem.K;
  row.N = static_cast<int>(problem.points.size());
  const NBodyResult result = evaluate(problem, reps, opts.evaluate);
  row.T_a = result.timings.total;
  row.phases = result.timings;
  row.stats = result.stats;

  const int s = std::min(opts.sample_size, row.N);
  const std::vector<int> S = rng.choose(row.N, s);
  auto t0 = Clock::now();
  const std::vector<Complex> exact = direct_evaluate(problem, S, opts.evaluate.threads);
  const double t_sample = seconds_since(t0);
  double num = 0.0, den = 0.0;
  for (int k = 0; k < s; ++k) {
    num += std::norm(exact[k] - result.potentials[S[k]]);
    den += std::norm(exact[k]);
  }
  row.eps_a = den > 0.0 ? std::sqrt(num / den) : std::nan("");

  if (opts.full_direct && problem.K <= 512) {
    std::vector<int> all(row.N);
    for (int i = 0; i < row.N; ++i) all[i] = i;
    t0 = Clock::now();
    direct_evaluate(problem, all, opts.evaluate.threads);
    row.T_d = seconds_since(t0);
    row.T_d_extrapolated = false;
  } else {
    row.T_d = s > 0 ? t_sample * row.N / s : 0.0;
  }
  row.speedup = row.T_a > 0.0 ? row.T_d / row.T_a : 0.0;
  return row;
}

std::vector<BenchmarkRow> benchmark(CurveKind geometry, const std::vector<double> &Ks, double eps,
                                    const BenchmarkOptions &opts) {
  std::vector<BenchmarkRow> rows;
  for (double K : Ks) {
    Rng rng(mix_seed(opts.seed, static_cast<std::uint64_t>(K)));
    NBodyProblem problem;
    problem.K = K;
    problem.eps = eps;
    problem.seed = opts.seed;
    problem.points = sample_curve(make_curve(geometry, K), opts.ppw, rng);
    problem.charges = random_charges(problem.points.size(), rng);

    const auto t0 = Clock::now();
    const RepTable reps = opts.reps ? opts.reps(K, eps) : RepTable::build(K, eps, opts.seed);
    const double rep_seconds = seconds_since(t0);
    BenchmarkRow row = measure(problem, reps, rng, opts);
    row.rep_seconds = rep_seconds;
    rows.push_back(row);
  }
  return rows;
}

std::string format_benchmark(const std::vector<BenchmarkRow> &rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%8s %10s %10s %12s %9s %10s\n", "K", "N", "T_a", "T_d", "speedup", "eps_a");
  out += line;
  for (const auto &r : rows) {
    std::snprintf(line, sizeof line, "%8g %10d %10.3g %11.3g%s %9.3g %10.2e\n", r.K, r.N, r.T_a, r.T_d,
                  r.T_d_extrapolated ? "*" : " ", r.speedup, r.eps_a);
    out += line;
  }
  out += "* extrapolated from the sampled direct evaluation\n";
  return out;
}

}  // namespace dirfmm

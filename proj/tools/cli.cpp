#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "dirfmm/bie.hpp"
#include "dirfmm/curve.hpp"
#include "dirfmm/driver.hpp"
#include "dirfmm/error.hpp"
#include "dirfmm/lowrank.hpp"

namespace dirfmm::cli {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kDefaultSeed = 20080917;

struct MissingCache : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Wall-clock fields keep three significant digits.
double sig3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return std::strtod(buf, nullptr);
}

template <class T>
std::vector<T> split_list(const std::string &s) {
  std::vector<T> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw InputError("not a number: '" + item + "'");
    v.push_back(static_cast<T>(x));
  }
  if (v.empty()) throw InputError("empty list");
  return v;
}

std::string version_string() {
  return std::string("dirfmm ") + DIRFMM_VERSION + " (rep cache format " + std::to_string(kRepCacheVersion) + ")";
}

struct Common {
  std::string config;
  std::string output;
  std::string format;
  std::uint64_t seed = kDefaultSeed;
  int threads = 0;
};

void add_common(CLI::App *cmd, Common &c, const std::string &default_format) {
  c.format = default_format;
  cmd->add_option("--config", c.config, "key=value file; flags on the command line take precedence");
  cmd->add_option("-o,--output", c.output, "output path (default: stdout)");
  cmd->add_option("--format", c.format, "output format")->check(CLI::IsMember({"json", "csv", "table"}));
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--threads", c.threads, "worker threads (0: all)")->check(CLI::NonNegativeNumber);
}

class Output {
 public:
  Output(const std::string &path, std::ostream &fallback) : path_(path), out_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw IoError("cannot open output file: " + path);
      out_ = &file_;
    }
  }
  std::ostream &stream() { return *out_; }
  void close() {
    out_->flush();
    if (!*out_) throw IoError("failed writing output" + (path_.empty() ? std::string() : ": " + path_));
  }

 private:
  std::string path_;
  std::ofstream file_;
  std::ostream *out_;
};

struct CacheOptions {
  std::string path;
  bool required = false;
};

RepTable obtain_reps(double K, double eps, std::uint64_t seed, const CacheOptions &cache, std::ostream &err) {
  namespace fs = std::filesystem;
  if (cache.path.empty()) return RepTable::build(K, eps, seed);
  if (fs::exists(cache.path)) {
    RepTable t = load_rep_table(cache.path);
    if (t.K() != K || t.eps() != eps)
      throw InputError("rep cache " + cache.path + " holds K=" + std::to_string(t.K()) +
                       ", eps=" + std::to_string(t.eps()));
    return t;
  }
  if (cache.required) throw MissingCache("rep cache not found: " + cache.path);
  RepTable t = RepTable::build(K, eps, seed);
  save_rep_table(t, cache.path);
  err << "saved rep table to " << cache.path << '\n';
  return t;
}

std::vector<Point2> read_points(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open point file: " + path);
  std::vector<Point2> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ls(line);
    Point2 p;
    std::string rest;
    if (!(ls >> p.x >> p.y) || (ls >> rest))
      throw InputError(path + ":" + std::to_string(lineno) + ": expected 'x y'");
    pts.push_back(p);
  }
  return pts;
}

// rank-table ---------------------------------------------------------------

struct RankArgs {
  Common common;
  std::string eps = "1e-4,1e-6,1e-8";
  std::string widths = "1,2,4,8,16,32";
};

void run_rank_table(const RankArgs &a, std::ostream &out) {
  const RankTable t = rank_table(split_list<double>(a.widths), split_list<double>(a.eps), a.common.seed);
  Output o(a.common.output, out);
  auto &s = o.stream();
  if (a.common.format == "json") {
    json j;
    j["widths"] = t.widths;
    j["eps"] = t.eps;
    j["ranks"] = t.ranks;
    j["seed"] = a.common.seed;
    s << j.dump(2) << '\n';
  } else if (a.common.format == "csv") {
    s << "eps,width,rank\n";
    for (std::size_t e = 0; e < t.eps.size(); ++e)
      for (std::size_t k = 0; k < t.widths.size(); ++k)
        s << t.eps[e] << ',' << t.widths[k] << ',' << t.ranks[e][k] << '\n';
  } else {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-10s", "");
    s << buf;
    for (double w : t.widths) {
      std::snprintf(buf, sizeof buf, " %6s", ("w=" + std::to_string(static_cast<int>(w))).c_str());
      s << buf;
    }
    s << '\n';
    for (std::size_t e = 0; e < t.eps.size(); ++e) {
      std::snprintf(buf, sizeof buf, "eps=%-6.0e", t.eps[e]);
      s << buf;
      for (int r : t.ranks[e]) {
        std::snprintf(buf, sizeof buf, " %6d", r);
        s << buf;
      }
      s << '\n';
    }
  }
  o.close();
}

// nbody --------------------------------------------------------------------

struct NBodyArgs {
  Common common;
  std::string geometry = "circle";
  std::string points;
  double K = 64;
  double eps = 1e-4;
  double ppw = 20;
  CacheOptions cache;
  bool stats = false;
  bool full_direct = false;
  int sample_size = 200;
};

json phases_json(const PhaseTimings &p) {
  return {{"tree", sig3(p.tree)},           {"setup", sig3(p.setup)},
          {"upward_low", sig3(p.upward_low)}, {"upward_high", sig3(p.upward_high)},
          {"downward_high", sig3(p.downward_high)}, {"downward_low", sig3(p.downward_low)},
          {"near_field", sig3(p.near_field)}, {"total", sig3(p.total)}};
}

json tree_json(const NBodyStats &st, bool per_level) {
  json j = {{"boxes", st.boxes},
            {"leaves", st.leaves},
            {"levels", st.levels},
            {"high_boxes", st.high_boxes},
            {"low_boxes", st.low_boxes},
            {"reps", st.reps},
            {"reps_built", st.reps_built},
            {"low_freq_points", st.low_freq_points},
            {"high_m2l", st.high_m2l},
            {"low_m2l", st.low_m2l},
            {"near_pairs", st.near_pairs}};
  if (per_level) {
    json levels = json::array();
    for (const LevelStats &l : st.per_level)
      levels.push_back({{"level", l.level},
                        {"width", l.width},
                        {"regime", l.regime == Regime::high ? "high" : "low"},
                        {"boxes", l.boxes},
                        {"leaves", l.leaves},
                        {"interactions", l.interactions},
                        {"max_interactions", l.max_interactions},
                        {"near_pairs", l.near_pairs},
                        {"active_dirs", l.active_dirs}});
    j["per_level"] = levels;
  }
  return j;
}

void run_nbody(const NBodyArgs &a, std::ostream &out, std::ostream &err) {
  const Common &c = a.common;
  if (!(a.K >= 4) || std::exp2(std::round(std::log2(a.K))) != a.K) throw InputError("--K must be a power of two >= 4");
  if (!(a.eps > 0 && a.eps < 1)) throw InputError("--eps must lie in (0, 1)");
  if (!(a.ppw > 0)) throw InputError("--ppw must be positive");
  if (a.sample_size < 1) throw InputError("--sample-size must be positive");
  Rng rng(mix_seed(c.seed, static_cast<std::uint64_t>(a.K)));
  NBodyProblem p;
  p.K = a.K;
  p.eps = a.eps;
  p.seed = c.seed;
  if (a.geometry == "file") {
    if (a.points.empty()) throw InputError("--geometry file needs --points");
    p.points = read_points(a.points);
  } else {
    p.points = sample_curve(make_curve(parse_curve_kind(a.geometry), a.K), a.ppw, rng);
  }
  p.charges = random_charges(p.points.size(), rng);

  const auto t0 = std::chrono::steady_clock::now();
  const RepTable reps = obtain_reps(a.K, a.eps, c.seed, a.cache, err);
  const double rep_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  BenchmarkOptions bo;
  bo.full_direct = a.full_direct;
  bo.sample_size = a.sample_size;
  bo.evaluate.threads = c.threads;
  BenchmarkRow row = measure(p, reps, rng, bo);
  row.rep_seconds = rep_seconds;

  Output o(c.output, out);
  auto &s = o.stream();
  if (c.format == "table") {
    s << format_benchmark({row});
  } else if (c.format == "csv") {
    s << "geometry,K,N,eps,T_a,T_d,T_d_extrapolated,speedup,eps_a\n"
      << a.geometry << ',' << a.K << ',' << row.N << ',' << a.eps << ',' << sig3(row.T_a) << ',' << sig3(row.T_d) << ','
      << row.T_d_extrapolated << ',' << sig3(row.speedup) << ',' << row.eps_a << '\n';
  } else {
    json j;
    j["version"] = version_string();
    j["geometry"] = a.geometry;
    j["N"] = row.N;
    j["K"] = a.K;
    j["eps"] = a.eps;
    j["seed"] = c.seed;
    j["T_a"] = sig3(row.T_a);
    j["T_d"] = sig3(row.T_d);
    j["T_d_extrapolated"] = row.T_d_extrapolated;
    j["speedup"] = sig3(row.speedup);
    j["eps_a"] = std::isnan(row.eps_a) ? json(nullptr) : json(row.eps_a);
    j["rep_seconds"] = sig3(row.rep_seconds);
    j["phase_timings"] = phases_json(row.phases);
    j["tree_stats"] = tree_json(row.stats, a.stats);
    s << j.dump(2) << '\n';
  }
  o.close();
}

// scatter / field ----------------------------------------------------------

struct ScatterArgs {
  Common common;
  std::string geometry = "circle";
  double K = 32;
  double eps = 0.0;
  double tol = 1e-4;
  double ppw = 20;
  double eta = kPi;
  std::string incident = "1,0";
  int restart = 80;
  int max_iterations = 3000;
  bool dense = false;
  std::string rule = "corrected";
  CacheOptions cache;
  std::string phi_path;
  bool check_residual = false;
  // field only
  std::string region;
  double spw = 8;
  double tube = 0.2;
};

ScatterSolution solve(const ScatterArgs &a, std::ostream &err, ParamCurve &curve_out) {
  if (!(a.K > 0)) throw InputError("--K must be positive");
  if (!(a.tol > 0 && a.tol < 1)) throw InputError("--tol must lie in (0, 1)");
  if (a.eps < 0 || a.eps >= 1) throw InputError("--eps must lie in (0, 1)");
  if (!(a.ppw > 0)) throw InputError("--ppw must be positive");
  if (a.restart < 1) throw InputError("--restart must be positive");
  const auto d = split_list<double>(a.incident);
  if (d.size() != 2) throw InputError("--incident expects dx,dy");
  curve_out = make_curve(parse_curve_kind(a.geometry), a.K);
  ScatterOptions o;
  o.ppw = a.ppw;
  o.eta = a.eta;
  o.tol = a.tol;
  o.eps = a.eps;
  o.direction = {d[0], d[1]};
  o.restart = a.restart;
  o.max_iterations = a.max_iterations;
  o.dense = a.dense;
  o.threads = a.common.threads;
  o.seed = a.common.seed;
  if (a.rule == "kress") {
    o.rule = SingularRule::kress;
    if (!a.dense) throw InputError("--rule kress needs --dense");
  } else if (a.rule != "corrected") {
    throw InputError("--rule must be corrected or kress");
  }
  const CacheOptions cache = a.cache;
  const std::uint64_t seed = a.common.seed;
  o.reps = [&err, cache, seed](double K, double eps) { return obtain_reps(K, eps, seed, cache, err); };
  return solve_scattering(curve_out, o);
}

void write_phi(std::ostream &s, const ScatterSolution &sol) {
  s << "t,re,im\n";
  s.precision(17);
  for (int j = 0; j < sol.system.size(); ++j)
    s << sol.system.t[j] << ',' << sol.phi[j].real() << ',' << sol.phi[j].imag() << '\n';
}

int run_scatter(const ScatterArgs &a, std::ostream &out, std::ostream &err) {
  ParamCurve curve(CurveKind::circle, 1.0);
  const ScatterSolution sol = solve(a, err, curve);
  const ScatterStats &st = sol.stats;
  if (!a.phi_path.empty()) {
    Output po(a.phi_path, out);
    write_phi(po.stream(), sol);
    po.close();
  }
  Output o(a.common.output, out);
  auto &s = o.stream();
  if (a.common.format == "csv") {
    write_phi(s, sol);
  } else {
    json j;
    j["version"] = version_string();
    j["geometry"] = a.geometry;
    j["K"] = a.K;
    j["N"] = st.N;
    j["N_i"] = st.iterations;
    j["T_i"] = sig3(st.T_i);
    j["T_t"] = sig3(st.T_t);
    j["setup"] = sig3(st.setup);
    j["converged"] = st.converged;
    j["residual"] = st.residual;
    j["tol"] = a.tol;
    j["eps"] = st.fast ? json(st.eps) : json(nullptr);
    j["fast"] = st.fast;
    j["eta"] = a.eta;
    j["ppw"] = a.ppw;
    j["seed"] = a.common.seed;
    if (a.check_residual)
      j["boundary_residual"] = boundary_residual(curve, sol.system, sol.phi, {split_list<double>(a.incident)[0],
                                                                              split_list<double>(a.incident)[1]},
                                                 a.common.threads);
    if (a.common.format == "table") {
      for (auto it = j.begin(); it != j.end(); ++it) s << it.key() << ": " << it.value().dump() << '\n';
    } else {
      s << j.dump(2) << '\n';
    }
  }
  o.close();
  if (!st.converged) {
    err << "GMRES did not converge: residual " << st.residual << " after " << st.iterations << " iterations\n";
    return kNotConverged;
  }
  return kOk;
}

int run_field(const ScatterArgs &a, std::ostream &out, std::ostream &err) {
  const auto r = split_list<double>(a.region);
  if (r.size() != 3) throw InputError("--region expects cx,cy,side");
  ParamCurve curve(CurveKind::circle, 1.0);
  const ScatterSolution sol = solve(a, err, curve);
  const FieldGrid g = evaluate_field(sol.system, sol.phi, {r[0], r[1]}, r[2], a.spw, a.tube, a.common.threads);
  Output o(a.common.output, out);
  auto &s = o.stream();
  s << "x,y,re,im\n";
  s.precision(10);
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      const Point2 x = g.point(ix, iy);
      const Complex u = g.at(ix, iy);
      s << x.x << ',' << x.y << ',';
      if (std::isnan(u.real()))
        s << "nan,nan\n";
      else
        s << u.real() << ',' << u.imag() << '\n';
    }
  o.close();
  err << g.nx << 'x' << g.ny << " samples, " << g.flagged << " within " << a.tube << " of the curve\n";
  if (!sol.stats.converged) {
    err << "GMRES did not converge: residual " << sol.stats.residual << '\n';
    return kNotConverged;
  }
  return kOk;
}

void add_scatter_options(CLI::App *cmd, ScatterArgs &a) {
  cmd->add_option("--geometry", a.geometry)->check(CLI::IsMember({"circle", "kite", "airfoil"}));
  cmd->add_option("--K", a.K, "problem size in wavelengths");
  cmd->add_option("--eps", a.eps, "evaluator accuracy (default tol/10)");
  cmd->add_option("--tol", a.tol, "GMRES relative residual");
  cmd->add_option("--ppw", a.ppw, "quadrature nodes per wavelength");
  cmd->add_option("--eta", a.eta, "single-layer coupling");
  cmd->add_option("--incident", a.incident, "plane-wave direction dx,dy");
  cmd->add_option("--restart", a.restart, "GMRES restart length");
  cmd->add_option("--max-iterations", a.max_iterations, "GMRES inner-step limit");
  cmd->add_flag("--dense", a.dense, "dense operator instead of the fast evaluator");
  cmd->add_option("--rule", a.rule, "singular quadrature: corrected or kress (dense only)");
  cmd->add_option("--rep-cache", a.cache.path, "load or save the rep table here");
  cmd->add_flag("--rep-cache-required", a.cache.required, "fail if --rep-cache does not exist");
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_config(std::istream &in) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key=value");
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

int run(const std::vector<std::string> &args_in, std::ostream &out, std::ostream &err) {
  // Config values are spliced in right after the subcommand so that later
  // command-line occurrences win.
  std::vector<std::string> args = args_in;
  for (std::size_t i = 0; i < args_in.size(); ++i) {
    std::string path;
    if (args_in[i] == "--config" && i + 1 < args_in.size())
      path = args_in[i + 1];
    else if (args_in[i].rfind("--config=", 0) == 0)
      path = args_in[i].substr(9);
    else
      continue;
    std::ifstream in(path);
    if (!in) {
      err << "cannot open config file: " << path << '\n';
      return kIoError;
    }
    std::vector<std::pair<std::string, std::string>> kv;
    try {
      kv = parse_config(in);
    } catch (const std::exception &e) {
      err << path << ": " << e.what() << '\n';
      return kUsage;
    }
    std::vector<std::string> spliced;
    for (const auto &[k, v] : kv) spliced.push_back("--" + k + "=" + v);
    if (!args.empty() && args[0].rfind("-", 0) != 0) args.insert(args.begin() + 1, spliced.begin(), spliced.end());
    break;
  }

  CLI::App app("Directional multilevel evaluator for the 2D Helmholtz kernel", "dirfmm");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  RankArgs ra;
  auto *rank_cmd = app.add_subcommand("rank-table", "separation ranks per accuracy and box width");
  add_common(rank_cmd, ra.common, "table");
  rank_cmd->add_option("--eps", ra.eps, "comma-separated accuracies");
  rank_cmd->add_option("--widths", ra.widths, "comma-separated widths (powers of two)");

  NBodyArgs na;
  auto *nbody_cmd = app.add_subcommand("nbody", "fast evaluation on a sampled curve, timed against direct sums");
  add_common(nbody_cmd, na.common, "json");
  nbody_cmd->add_option("--geometry", na.geometry)->check(CLI::IsMember({"circle", "kite", "airfoil", "file"}));
  nbody_cmd->add_option("--points", na.points, "point file for --geometry file (x y per line)");
  nbody_cmd->add_option("--K", na.K, "domain size in wavelengths (power of two)");
  nbody_cmd->add_option("--eps", na.eps, "target relative accuracy");
  nbody_cmd->add_option("--ppw", na.ppw, "points per wavelength along the curve");
  nbody_cmd->add_option("--rep-cache", na.cache.path, "load or save the rep table here");
  nbody_cmd->add_flag("--rep-cache-required", na.cache.required, "fail if --rep-cache does not exist");
  nbody_cmd->add_flag("--stats", na.stats, "per-level tree statistics");
  nbody_cmd->add_flag("--full-direct", na.full_direct, "time the direct sum over all points (K <= 512)");
  nbody_cmd->add_option("--sample-size", na.sample_size, "targets for eps_a and the T_d estimate");

  ScatterArgs sa;
  auto *scatter_cmd = app.add_subcommand("scatter", "sound-soft scattering by a plane wave");
  add_common(scatter_cmd, sa.common, "json");
  add_scatter_options(scatter_cmd, sa);
  scatter_cmd->add_option("--phi", sa.phi_path, "write the density as CSV (t, re, im)");
  scatter_cmd->add_flag("--check-residual", sa.check_residual, "report the boundary-condition residual");

  ScatterArgs fa;
  auto *field_cmd = app.add_subcommand("field", "scattered field on a square grid, CSV (x, y, re, im)");
  add_common(field_cmd, fa.common, "csv");
  add_scatter_options(field_cmd, fa);
  field_cmd->add_option("--region", fa.region, "cx,cy,side")->required();
  field_cmd->add_option("--spw", fa.spw, "samples per wavelength");
  field_cmd->add_option("--tube", fa.tube, "samples closer than this to the curve are nan");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() == 0) {
      // --help or --version
      if (dynamic_cast<const CLI::CallForVersion *>(&e))
        out << version_string() << '\n';
      else
        out << app.help();
      return kOk;
    }
    err << e.what() << '\n' << "run with --help for usage\n";
    return kUsage;
  }

  try {
    if (*rank_cmd) {
      run_rank_table(ra, out);
      return kOk;
    }
    if (*nbody_cmd) {
      run_nbody(na, out, err);
      return kOk;
    }
    if (*scatter_cmd) return run_scatter(sa, out, err);
    if (*field_cmd) return run_field(fa, out, err);
  } catch (const MissingCache &e) {
    err << e.what() << '\n';
    return kMissingCache;
  } catch (const IoError &e) {
    err << e.what() << '\n';
    return kIoError;
  } catch (const CacheError &e) {
    err << e.what() << '\n';
    return kIoError;
  } catch (const InputError &e) {
    err << "invalid input: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace dirfmm::cli

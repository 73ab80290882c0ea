#include "dirfmm/translate.hpp"

#include <algorithm>
#include <exception>
#include <set>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dirfmm/error.hpp"
#include "dirfmm/kernel.hpp"

namespace dirfmm {

namespace {

std::vector<Point2> circle(double radius, int p) {
  std::vector<Point2> pts(p);
  for (int j = 0; j < p; ++j) {
    const double t = 2.0 * kPi * j / p;
    pts[j] = {radius * std::cos(t), radius * std::sin(t)};
  }
  return pts;
}

}  // namespace

double low_freq_error(int p) {
  const auto acc = KernelAccuracy::precise;
  double worst = 0.0;
  for (double w : {0.5, 0.125}) {
    const LowFreqBasis basis(1e-16, {w}, p);
    const LowFreqLevel &lv = basis.level(w);
    auto corner = [w](int k) { return Point2{(k & 1 ? 0.5 : -0.5) * w, (k & 2 ? 0.5 : -0.5) * w}; };
    for (int s = 0; s < 4; ++s) {
      const std::vector<Point2> src{corner(s)};
      const Complex q = 1.0;
      CVector u = CVector::Zero(p);
      accumulate(lv.outer, {}, src, {}, &q, u.data(), acc);
      const CVector f = lv.out_solve * u;
      for (int t = 0; t < 4; ++t) {
        const Point2 x{1.5 * w, (t - 1.5) * w / 3.0};
        Complex v = 0.0;
        accumulate({x}, {}, lv.inner, {}, f.data(), &v, acc);
        const Complex ex = helmholtz_g(x, src[0]);
        worst = std::max(worst, std::abs(v - ex) / std::abs(ex));
      }
      for (Point2 off : {Point2{2 * w, 0}, Point2{2 * w, 2 * w}}) {
        CVector ui = CVector::Zero(p);
        accumulate(lv.inner, off, lv.inner, {}, f.data(), ui.data(), acc);
        const CVector g = lv.in_solve * ui;
        for (int t = 0; t < 4; ++t) {
          const Point2 x = off + corner(t);
          Complex v = 0.0;
          accumulate({x}, {}, lv.outer, off, g.data(), &v, acc);
          const Complex ex = helmholtz_g(x, src[0]);
          worst = std::max(worst, std::abs(v - ex) / std::abs(ex));
        }
      }
    }
  }
  return worst;
}

int low_freq_points(double eps) {
  const double d = -std::log10(eps);
  int p = d <= 4 ? 20 : d <= 6 ? 32 : 48;
  while (p < 96 && low_freq_error(p) > eps) p += 4;
  return p;
}

LowFreqBasis::LowFreqBasis(double eps, const std::vector<double> &widths, int p)
    : p_(p > 0 ? p : low_freq_points(eps)) {
  for (double w : widths) {
    if (!(w < 1.0)) throw InputError("low-frequency basis requires widths < 1");
    LowFreqLevel lv;
    lv.width = w;
    lv.inner = circle(kAlpha * w, p_);
    lv.outer = circle(kBeta * w, p_);
    lv.out_solve = pseudo_inverse(kernel_matrix(lv.outer, lv.inner), 1e-13);
    lv.in_solve = pseudo_inverse(kernel_matrix(lv.inner, lv.outer), 1e-13);
    const std::vector<Point2> child_inner = circle(kAlpha * 0.5 * w, p_);
    for (int c = 0; c < 4; ++c) {
      const Point2 off{(c & 1 ? 0.25 : -0.25) * w, (c & 2 ? 0.25 : -0.25) * w};
      std::vector<Point2> moved(child_inner);
      for (auto &x : moved) x += off;
      lv.m2m[c] = lv.out_solve * kernel_matrix(lv.outer, moved);
      lv.l2l[c] = kernel_matrix(moved, lv.outer) * lv.in_solve;
    }
    constexpr int R = LowFreqLevel::kStencil;
    lv.m2l.resize((2 * R + 1) * (2 * R + 1));
    for (int dx = -R; dx <= R; ++dx)
      for (int dy = -R; dy <= R; ++dy) {
        if (std::abs(dx) <= 1 && std::abs(dy) <= 1) continue;
        std::vector<Point2> src(lv.inner);
        for (auto &x : src) x += Point2{dx * w, dy * w};
        lv.m2l[(dx + R) * (2 * R + 1) + (dy + R)] = kernel_matrix(lv.inner, src);
      }
    levels_.emplace(w, std::move(lv));
  }
}

const LowFreqLevel &LowFreqBasis::level(double width) const {
  auto it = levels_.find(width);
  if (it == levels_.end()) throw InputError("low-frequency basis has no level of width " + std::to_string(width));
  return it->second;
}

void accumulate(const std::vector<Point2> &targets, Point2 target_shift, const std::vector<Point2> &sources,
                Point2 source_shift, const Complex *q, Complex *u, KernelAccuracy acc) {
  const std::size_t ns = sources.size();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Point2 x = targets[i] + target_shift - source_shift;
    Complex sum = 0.0;
    for (std::size_t j = 0; j < ns; ++j) sum += detail::green_r(norm(x - sources[j]), acc) * q[j];
    u[i] += sum;
  }
}

CVector outgoing_from_check(const SeparatedRep &rep, const CVector &u) {
  if (u.size() != static_cast<Eigen::Index>(rep.a_points.size()))
    throw std::invalid_argument("outgoing_from_check: |u| != |a_points|");
  return rep.D * u;
}

CVector incoming_from_check(const SeparatedRep &rep, const CVector &u) {
  if (u.size() != static_cast<Eigen::Index>(rep.b_points.size()))
    throw std::invalid_argument("incoming_from_check: |u| != |b_points|");
  return rep.D.transpose() * u;
}

Translator::Translator(const QuadTree &tree, const RepTable *reps, const LowFreqBasis &basis,
                       const std::vector<Complex> &charges, KernelAccuracy acc,
                       const std::vector<Complex> *dipoles, const std::vector<Point2> *normals)
    : tree_(tree), reps_(reps), basis_(basis), acc_(acc) {
  const auto &order = tree.order();
  if (charges.size() != order.size()) throw InputError("charge count does not match point count");
  if ((dipoles == nullptr) != (normals == nullptr)) throw InputError("dipoles need normals");
  if (dipoles != nullptr && (dipoles->size() != order.size() || normals->size() != order.size()))
    throw InputError("dipole count does not match point count");
  sorted_points_.resize(order.size());
  sorted_charges_.resize(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    sorted_points_[k] = tree.points()[order[k]];
    sorted_charges_[k] = charges[order[k]];
  }
  if (dipoles != nullptr) {
    sorted_dipoles_.resize(order.size());
    sorted_normals_.resize(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      sorted_dipoles_[k] = (*dipoles)[order[k]];
      sorted_normals_[k] = (*normals)[order[k]];
    }
  }
  potentials_.assign(order.size(), Complex(0.0));

  const std::size_t n = tree.boxes().size();
  low_out_.resize(n);
  low_in_.resize(n);
  high_out_.resize(n);
  high_in_.resize(n);
  high_done_.resize(n);
  out_ready_.assign(n, 0);
  in_closed_.assign(n, 0);
  parent_done_.assign(n, 0);
  pushed_.assign(n, 0);
  for (std::size_t id = 0; id < n; ++id) {
    const QuadBox &b = tree.box(static_cast<int>(id));
    if (b.regime == Regime::low) {
      const int p = basis.points();
      low_out_[id] = CVector::Zero(p);
      low_in_[id] = CVector::Zero(p);
    } else if (!b.active_dirs.empty()) {
      if (reps == nullptr) throw InputError("directional boxes present but no rep table given");
      for (int dir : b.active_dirs) {
        const SeparatedRep &rep = reps->get(b.width, dir);
        high_out_[id].push_back(CVector::Zero(rep.b_points.size()));
        high_in_[id].push_back(CVector::Zero(rep.b_points.size()));
      }
      high_done_[id].assign(b.active_dirs.size(), 0);
    }
    // Boxes whose parent carries no incoming data start complete from above.
    const bool parent_has_data = b.parent >= 0 && tree.box(b.parent).width <= tree.top_width();
    parent_done_[id] = parent_has_data ? 0 : 1;
  }
  build_child_ops();
}

namespace {

// D G(a, child sources + child offset) for the four quadrants. The transpose
// maps incoming check potentials to the children because G is symmetric.
std::array<CMatrix, 4> make_child_ops(const SeparatedRep &rep, const std::vector<Point2> &child_sources) {
  std::array<CMatrix, 4> ops;
  const double w = rep.width;
  for (int q = 0; q < 4; ++q) {
    const Point2 off{(q & 1 ? 0.25 : -0.25) * w, (q & 2 ? 0.25 : -0.25) * w};
    std::vector<Point2> src(child_sources);
    for (auto &x : src) x += off;
    ops[q] = rep.D * kernel_matrix(rep.a_points, src);
  }
  return ops;
}

}  // namespace

void Translator::build_child_ops() {
  std::set<std::pair<double, int>> keys;
  for (const QuadBox &b : tree_.boxes())
    if (b.regime == Regime::high)
      for (int dir : b.active_dirs) keys.emplace(b.width, dir);
  const std::vector<std::pair<double, int>> list(keys.begin(), keys.end());
  for (const auto &[w, dir] : list) child_ops_[w].resize(tree_.directions(w)->count);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < list.size(); ++k) {
    try {
      const auto [w, dir] = list[k];
      const SeparatedRep &rep = reps_->get(w, dir);
      if (w == 1.0) {
        child_ops_[w][dir] = make_child_ops(rep, basis_.level(0.5).inner);
      } else {
        const int child_dir = tree_.directions(w)->parent_map[dir];
        child_ops_[w][dir] = make_child_ops(rep, reps_->get(0.5 * w, child_dir).b_points);
      }
    } catch (...) {
#pragma omp critical(dirfmm_child_ops)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

const std::array<CMatrix, 4> &Translator::child_ops(double width, int dir) const {
  return child_ops_.at(width)[dir];
}

int Translator::slot(int box, int dir) const {
  const auto &dirs = tree_.box(box).active_dirs;
  auto it = std::lower_bound(dirs.begin(), dirs.end(), dir);
  if (it == dirs.end() || *it != dir)
    throw TraversalOrderError("direction " + std::to_string(dir) + " is not active on box " + std::to_string(box));
  return static_cast<int>(it - dirs.begin());
}

void Translator::require(bool ok, const char *what, int box) const {
  if (!ok) throw TraversalOrderError(std::string(what) + " (box " + std::to_string(box) + ")");
}

CVector &Translator::mutable_low_out(int box) {
  out_ready_[box] = 1;
  return low_out_[box];
}

CVector &Translator::mutable_high_out(int box, int dir) {
  const int s = slot(box, dir);
  high_done_[box][s] = 1;
  return high_out_[box][s];
}

std::vector<Point2> Translator::box_points(int box) const {
  const QuadBox &b = tree_.box(box);
  return {sorted_points_.begin() + b.begin, sorted_points_.begin() + b.end};
}

void Translator::add_sources(const std::vector<Point2> &targets, Point2 shift, int box, Complex *u) const {
  const QuadBox &b = tree_.box(box);
  if (sorted_dipoles_.empty()) {
    accumulate(targets, shift, box_points(box), {}, sorted_charges_.data() + b.begin, u, acc_);
    return;
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Point2 x = targets[i] + shift;
    Complex sum = 0.0;
    for (int j = b.begin; j < b.end; ++j) {
      const Point2 d = x - sorted_points_[j];
      sum += detail::source_r(d, norm(d), sorted_charges_[j], sorted_dipoles_[j], sorted_normals_[j], acc_);
    }
    u[i] += sum;
  }
}

void Translator::leaf_s2m(int leaf) {
  const QuadBox &b = tree_.box(leaf);
  require(b.leaf && b.regime == Regime::low, "leaf_s2m needs a low-regime leaf", leaf);
  const LowFreqLevel &lv = basis_.level(b.width);
  CVector u = CVector::Zero(lv.outer.size());
  add_sources(lv.outer, b.center, leaf, u.data());
  low_out_[leaf] = lv.out_solve * u;
  out_ready_[leaf] = 1;
}

void Translator::m2m_low(int box) {
  const QuadBox &b = tree_.box(box);
  require(!b.leaf && b.regime == Regime::low, "m2m_low needs a low-regime parent", box);
  const LowFreqLevel &lv = basis_.level(b.width);
  CVector f = CVector::Zero(lv.outer.size());
  for (int q = 0; q < 4; ++q) {
    const int c = b.children[q];
    if (c < 0) continue;
    require(out_ready_[c], "m2m_low before child outgoing data", c);
    f.noalias() += lv.m2m[q] * low_out_[c];
  }
  low_out_[box] = f;
  out_ready_[box] = 1;
}

void Translator::m2m_high(int box, int dir) {
  const QuadBox &b = tree_.box(box);
  const int s = slot(box, dir);
  const auto &ops = child_ops(b.width, dir);
  CVector f = CVector::Zero(high_out_[box][s].size());
  if (b.width == 1.0) {
    for (int q = 0; q < 4; ++q) {
      const int c = b.children[q];
      if (c < 0) continue;
      require(out_ready_[c], "m2m_high before child outgoing data", c);
      f.noalias() += ops[q] * low_out_[c];
    }
  } else {
    const int child_dir = tree_.directions(b.width)->parent_map[dir];
    for (int q = 0; q < 4; ++q) {
      const int c = b.children[q];
      if (c < 0) continue;
      const int cs = slot(c, child_dir);
      require(high_done_[c][cs], "m2m_high before child directional data", c);
      f.noalias() += ops[q] * high_out_[c][cs];
    }
  }
  high_out_[box][s] = f;
  high_done_[box][s] = 1;
}

void Translator::m2m_high(int box) {
  for (int dir : tree_.box(box).active_dirs) m2m_high(box, dir);
  out_ready_[box] = 1;
}

void Translator::m2l_high(int source, int target) {
  const QuadBox &B = tree_.box(target);
  const auto &list = B.interaction_list;
  auto it = std::find_if(list.begin(), list.end(), [&](const Interaction &x) { return x.box == source; });
  if (it == list.end()) throw std::logic_error("m2l_high: source is not in the target's interaction list");
  require(!in_closed_[target], "m2l_high into a box whose incoming data is closed", target);
  const QuadBox &A = tree_.box(source);
  const int so = slot(source, it->dir_other);
  require(high_done_[source][so], "m2l_high before source outgoing data", source);
  const SeparatedRep &out_rep = reps_->get(A.width, it->dir_other);
  const SeparatedRep &in_rep = reps_->get(B.width, it->dir_self);
  CVector &u = high_in_[target][slot(target, it->dir_self)];
  accumulate(in_rep.b_points, B.center, out_rep.b_points, A.center, high_out_[source][so].data(), u.data(), acc_);
}

void Translator::m2l_high(int box) {
  for (const Interaction &it : tree_.box(box).interaction_list) m2l_high(it.box, box);
  close_incoming(box);
}

void Translator::close_incoming(int box) { in_closed_[box] = 1; }

void Translator::l2l_high(int box, int dir) {
  const QuadBox &b = tree_.box(box);
  require(in_closed_[box] && parent_done_[box], "l2l_high before incoming data is complete", box);
  const int s = slot(box, dir);
  const auto &ops = child_ops(b.width, dir);
  const int child_dir = b.width == 1.0 ? -1 : tree_.directions(b.width)->parent_map[dir];
  for (int q = 0; q < 4; ++q) {
    const int c = b.children[q];
    if (c < 0) continue;
    CVector &target = child_dir < 0 ? low_in_[c] : high_in_[c][slot(c, child_dir)];
    target.noalias() += ops[q].transpose() * high_in_[box][s];
  }
}

void Translator::l2l_high(int box) {
  require(!pushed_[box], "l2l_high applied twice", box);
  for (int dir : tree_.box(box).active_dirs) l2l_high(box, dir);
  for (int c : tree_.box(box).children)
    if (c >= 0) parent_done_[c] = 1;
  pushed_[box] = 1;
}

void Translator::m2l_low(int box) {
  const QuadBox &B = tree_.box(box);
  require(B.regime == Regime::low, "m2l_low needs a low-regime box", box);
  const LowFreqLevel &lv = basis_.level(B.width);
  for (const Interaction &it : B.interaction_list) {
    require(out_ready_[it.box], "m2l_low before source outgoing data", it.box);
    const QuadBox &A = tree_.box(it.box);
    const int dx = static_cast<int>(A.ix - B.ix), dy = static_cast<int>(A.iy - B.iy);
    constexpr int R = LowFreqLevel::kStencil;
    require(std::abs(dx) <= R && std::abs(dy) <= R && std::max(std::abs(dx), std::abs(dy)) > 1,
            "m2l_low partner outside the V-list stencil", it.box);
    low_in_[box].noalias() += lv.m2l_at(dx, dy) * low_out_[it.box];
  }
  for (int a : B.x_list) {
    add_sources(lv.inner, B.center, a, low_in_[box].data());
  }
  close_incoming(box);
}

void Translator::l2l_low(int box) {
  const QuadBox &B = tree_.box(box);
  require(B.regime == Regime::low, "l2l_low needs a low-regime box", box);
  require(in_closed_[box] && parent_done_[box], "l2l_low before incoming data is complete", box);
  require(!pushed_[box], "l2l_low applied twice", box);
  const LowFreqLevel &lv = basis_.level(B.width);
  if (B.leaf) {
    const CVector g = lv.in_solve * low_in_[box];
    const auto &order = tree_.order();
    const std::vector<Point2> pts = box_points(box);
    std::vector<Complex> u(pts.size(), Complex(0.0));
    accumulate(pts, {}, lv.outer, B.center, g.data(), u.data(), acc_);
    for (int k = B.begin; k < B.end; ++k) potentials_[order[k]] += u[k - B.begin];
  } else {
    for (int q = 0; q < 4; ++q) {
      const int c = B.children[q];
      if (c < 0) continue;
      low_in_[c].noalias() += lv.l2l[q] * low_in_[box];
      parent_done_[c] = 1;
    }
  }
  pushed_[box] = 1;
}

void Translator::near_field_direct(int target_leaf, int source_leaf) {
  const QuadBox &T = tree_.box(target_leaf), &S = tree_.box(source_leaf);
  const auto &order = tree_.order();
  for (int i = T.begin; i < T.end; ++i) {
    const Point2 x = sorted_points_[i];
    Complex sum = 0.0;
    for (int j = S.begin; j < S.end; ++j) {
      const Point2 d = x - sorted_points_[j];
      const double r = norm(d);
      if (r == 0.0) continue;
      if (sorted_dipoles_.empty())
        sum += detail::green_r(r, acc_) * sorted_charges_[j];
      else
        sum += detail::source_r(d, r, sorted_charges_[j], sorted_dipoles_[j], sorted_normals_[j], acc_);
    }
    potentials_[order[i]] += sum;
  }
}

void Translator::near_field(int leaf) {
  const QuadBox &T = tree_.box(leaf);
  require(T.leaf && T.regime == Regime::low, "near_field needs a low-regime leaf", leaf);
  for (int s : T.u_list) near_field_direct(leaf, s);
  if (T.w_list.empty()) return;
  const auto &order = tree_.order();
  const std::vector<Point2> pts = box_points(leaf);
  std::vector<Complex> u(pts.size(), Complex(0.0));
  for (int d : T.w_list) {
    require(out_ready_[d], "near_field before W-list outgoing data", d);
    const QuadBox &D = tree_.box(d);
    accumulate(pts, {}, basis_.level(D.width).inner, D.center, low_out_[d].data(), u.data(), acc_);
  }
  for (int k = T.begin; k < T.end; ++k) potentials_[order[k]] += u[k - T.begin];
}

}  // namespace dirfmm

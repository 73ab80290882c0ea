#include "dirfmm/tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dirfmm/error.hpp"

namespace dirfmm {
namespace {

constexpr int kMaxLevel = 29;  // key() packs 29-bit grid coordinates

bool is_power_of_two(double K) {
  int e = 0;
  return std::frexp(K, &e) == 0.5;
}

}  // namespace

std::uint64_t QuadTree::key(int level, std::int64_t ix, std::int64_t iy) {
  return (std::uint64_t(level) << 58) | (std::uint64_t(ix) << 29) | std::uint64_t(iy);
}

QuadTree::QuadTree(const std::vector<Point2> &points, const TreeConfig &cfg) : cfg_(cfg), points_(points) {
  if (!(cfg.K >= 4.0) || !is_power_of_two(cfg.K))
    throw InputError("K must be a power of two >= 4, got " + std::to_string(cfg.K));
  if (cfg.leaf_capacity < 1) throw InputError("leaf capacity must be >= 1");
  const double half = 0.5 * cfg.K;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point2 p = points[i];
    if (!(std::abs(p.x) <= half && std::abs(p.y) <= half))
      throw InputError("point " + std::to_string(i) + " lies outside the computational square");
  }
  dir_sets_ = build_direction_sets(cfg.K);
  top_width_ = top_directional_width(cfg.K);

  order_.resize(points.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  add_box(0, 0, 0, -1, 0, static_cast<int>(points.size()));
  build(0);

  for (int id = 0; id < static_cast<int>(boxes_.size()); ++id) {
    const int l = boxes_[id].level;
    if (l >= static_cast<int>(levels_.size())) levels_.resize(l + 1);
    levels_[l].push_back(id);
  }
  build_high_lists();
  build_low_lists();
  build_active_dirs();
}

double QuadTree::level_width(int l) const { return std::ldexp(cfg_.K, -l); }

int QuadTree::add_box(int level, std::int64_t ix, std::int64_t iy, int parent, int begin, int end) {
  QuadBox b;
  b.level = level;
  b.ix = ix;
  b.iy = iy;
  b.width = level_width(level);
  b.center = {-0.5 * cfg_.K + (ix + 0.5) * b.width, -0.5 * cfg_.K + (iy + 0.5) * b.width};
  b.regime = b.width >= 1.0 ? Regime::high : Regime::low;
  b.parent = parent;
  b.begin = begin;
  b.end = end;
  const int id = static_cast<int>(boxes_.size());
  boxes_.push_back(b);
  lookup_[key(level, ix, iy)] = id;
  return id;
}

void QuadTree::build(int id) {
  const QuadBox b = boxes_[id];
  const bool split = b.count() > 0 && b.level < kMaxLevel &&
                     (b.regime == Regime::high || b.count() > cfg_.leaf_capacity);
  if (!split) {
    boxes_[id].leaf = true;
    return;
  }
  auto first = order_.begin() + b.begin, last = order_.begin() + b.end;
  auto right = [&](int i) { return points_[i].x >= b.center.x; };
  auto top = [&](int i) { return points_[i].y >= b.center.y; };
  // Quadrant c = bx + 2*by.
  auto mid = std::stable_partition(first, last, [&](int i) { return !top(i); });
  auto q1 = std::stable_partition(first, mid, [&](int i) { return !right(i); });
  auto q3 = std::stable_partition(mid, last, [&](int i) { return !right(i); });
  const int bounds[5] = {b.begin, int(q1 - order_.begin()), int(mid - order_.begin()), int(q3 - order_.begin()),
                         b.end};
  for (int c = 0; c < 4; ++c) {
    if (bounds[c + 1] == bounds[c]) continue;
    const int child = add_box(b.level + 1, 2 * b.ix + (c & 1), 2 * b.iy + (c >> 1), id, bounds[c], bounds[c + 1]);
    boxes_[id].children[c] = child;
  }
  for (int c = 0; c < 4; ++c)
    if (boxes_[id].children[c] >= 0) build(boxes_[id].children[c]);
}

int QuadTree::find(int level, std::int64_t ix, std::int64_t iy) const {
  const std::int64_t n = std::int64_t(1) << level;
  if (ix < 0 || iy < 0 || ix >= n || iy >= n) return -1;
  auto it = lookup_.find(key(level, ix, iy));
  return it == lookup_.end() ? -1 : it->second;
}

double QuadTree::distance(int a, int b) const {
  const QuadBox &A = boxes_[a], &B = boxes_[b];
  const double h = 0.5 * (A.width + B.width);
  const double gx = std::max(0.0, std::abs(A.center.x - B.center.x) - h);
  const double gy = std::max(0.0, std::abs(A.center.y - B.center.y) - h);
  return std::hypot(gx, gy);
}

bool QuadTree::adjacent(int a, int b) const { return distance(a, b) <= 0.0; }

const DirectionSet *QuadTree::directions(double width) const {
  for (const DirectionSet &s : dir_sets_)
    if (s.width == width) return &s;
  return nullptr;
}

int QuadTree::wedge_of(int box, int other) const {
  const QuadBox &B = boxes_[box], &A = boxes_[other];
  const DirectionSet *ds = directions(B.width);
  if (B.regime != Regime::high || A.level != B.level || ds == nullptr)
    throw std::logic_error("wedge_of requires two same-level directional boxes");
  if (distance(box, other) <= B.width * B.width)
    throw std::logic_error("wedge_of called on a box inside the near field");
  return ds->wedge_of(A.center - B.center);
}

void QuadTree::build_high_lists() {
  for (int l = 0; l < num_levels(); ++l) {
    const double w = level_width(l);
    if (w < 1.0) break;
    const std::int64_t n = static_cast<std::int64_t>(w);
    const std::int64_t cells = std::int64_t(1) << l;
    const DirectionSet *ds = directions(w);
    for (int id : levels_[l]) {
      QuadBox &B = boxes_[id];
      const std::int64_t lo_x = std::max<std::int64_t>(0, B.ix - n - 1), hi_x = std::min(cells - 1, B.ix + n + 1);
      const std::int64_t lo_y = std::max<std::int64_t>(0, B.iy - n - 1), hi_y = std::min(cells - 1, B.iy + n + 1);
      for (std::int64_t jx = lo_x; jx <= hi_x; ++jx) {
        for (std::int64_t jy = lo_y; jy <= hi_y; ++jy) {
          const std::int64_t a = std::max<std::int64_t>(std::abs(jx - B.ix) - 1, 0);
          const std::int64_t b = std::max<std::int64_t>(std::abs(jy - B.iy) - 1, 0);
          if (a * a + b * b > n * n || (jx == B.ix && jy == B.iy)) continue;
          const int other = find(l, jx, jy);
          if (other >= 0) B.near_list.push_back(other);
        }
      }
      if (ds == nullptr || B.parent < 0) continue;
      const QuadBox &P = boxes_[B.parent];
      std::vector<int> parents{B.parent};
      parents.insert(parents.end(), P.near_list.begin(), P.near_list.end());
      for (int pc : parents) {
        for (int child : boxes_[pc].children) {
          if (child < 0 || child == id) continue;
          const QuadBox &A = boxes_[child];
          const std::int64_t a = std::max<std::int64_t>(std::abs(A.ix - B.ix) - 1, 0);
          const std::int64_t b = std::max<std::int64_t>(std::abs(A.iy - B.iy) - 1, 0);
          if (a * a + b * b <= n * n) continue;
          B.interaction_list.push_back({child, ds->wedge_of(A.center - B.center), ds->wedge_of(B.center - A.center)});
        }
      }
    }
  }
}

void QuadTree::build_low_lists() {
  for (int l = 0; l < num_levels(); ++l) {
    if (level_width(l) >= 1.0) continue;
    for (int id : levels_[l]) {
      QuadBox &B = boxes_[id];
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy) {
          if (dx == 0 && dy == 0) continue;
          const int other = find(l, B.ix + dx, B.iy + dy);
          if (other >= 0) B.near_list.push_back(other);
        }
      const QuadBox &P = boxes_[B.parent];
      std::vector<int> parents{B.parent};
      parents.insert(parents.end(), P.near_list.begin(), P.near_list.end());
      for (int pc : parents)
        for (int child : boxes_[pc].children) {
          if (child < 0 || child == id) continue;
          const QuadBox &A = boxes_[child];
          if (std::abs(A.ix - B.ix) > 1 || std::abs(A.iy - B.iy) > 1) B.interaction_list.push_back({child, -1, -1});
        }
    }
  }

  for (int l = 0; l < num_levels(); ++l) {
    if (level_width(l) >= 1.0) continue;
    for (int id : levels_[l]) {
      if (!boxes_[id].leaf) continue;
      std::vector<int> u{id}, wl;
      // Same level and finer.
      std::vector<int> stack(boxes_[id].near_list.rbegin(), boxes_[id].near_list.rend());
      while (!stack.empty()) {
        const int c = stack.back();
        stack.pop_back();
        if (boxes_[c].leaf) {
          u.push_back(c);
          continue;
        }
        for (int d = 3; d >= 0; --d) {
          const int child = boxes_[c].children[d];
          if (child < 0) continue;
          if (adjacent(child, id)) stack.push_back(child);
          else wl.push_back(child);
        }
      }
      // Coarser adjacent leaves, found among the colleagues of each low-regime ancestor.
      for (int anc = boxes_[id].parent; anc >= 0 && boxes_[anc].regime == Regime::low; anc = boxes_[anc].parent)
        for (int c : boxes_[anc].near_list)
          if (boxes_[c].leaf && adjacent(c, id)) u.push_back(c);
      boxes_[id].u_list = std::move(u);
      boxes_[id].w_list = std::move(wl);
    }
  }
  for (int id = 0; id < static_cast<int>(boxes_.size()); ++id)
    for (int d : boxes_[id].w_list) boxes_[d].x_list.push_back(id);
}

void QuadTree::build_active_dirs() {
  for (int l = 0; l < num_levels(); ++l) {
    const double w = level_width(l);
    if (w < 1.0) break;
    if (w > top_width_) continue;
    for (int id : levels_[l]) {
      QuadBox &B = boxes_[id];
      std::vector<int> dirs;
      for (const Interaction &it : B.interaction_list) dirs.push_back(it.dir_self);
      if (B.parent >= 0 && boxes_[B.parent].width <= top_width_) {
        const DirectionSet *pds = directions(boxes_[B.parent].width);
        for (int L : boxes_[B.parent].active_dirs) dirs.push_back(pds->parent_map[L]);
      }
      std::sort(dirs.begin(), dirs.end());
      dirs.erase(std::unique(dirs.begin(), dirs.end()), dirs.end());
      B.active_dirs = std::move(dirs);
    }
  }
}

std::vector<LevelStats> QuadTree::level_stats() const {
  std::vector<LevelStats> out;
  for (int l = 0; l < num_levels(); ++l) {
    LevelStats s;
    s.level = l;
    s.width = level_width(l);
    s.regime = s.width >= 1.0 ? Regime::high : Regime::low;
    for (int id : levels_[l]) {
      const QuadBox &b = boxes_[id];
      ++s.boxes;
      if (b.leaf) ++s.leaves;
      const int n = static_cast<int>(b.interaction_list.size());
      s.interactions += n;
      s.max_interactions = std::max(s.max_interactions, n);
      s.near_pairs += static_cast<long>(b.leaf && b.regime == Regime::low ? b.u_list.size() : b.near_list.size());
      s.active_dirs += static_cast<long>(b.active_dirs.size());
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace dirfmm

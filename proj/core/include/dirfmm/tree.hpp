#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "dirfmm/directions.hpp"
#include "dirfmm/geometry.hpp"

namespace dirfmm {

struct TreeConfig {
  double K = 16.0;        // domain [-K/2, K/2]^2; a power of two >= 4
  int leaf_capacity = 50; // N_p
  double eps = 1e-4;
};

enum class Regime { low, high };

struct Interaction {
  int box = -1;
  int dir_self = -1;   // wedge of `box` as seen from this box (high regime)
  int dir_other = -1;  // wedge of this box as seen from `box`
};

struct QuadBox {
  int level = 0;
  std::int64_t ix = 0, iy = 0;
  Point2 center;
  double width = 0.0;
  Regime regime = Regime::high;
  int parent = -1;
  std::array<int, 4> children{-1, -1, -1, -1};
  bool leaf = false;
  int begin = 0, end = 0;  // range into QuadTree::order()

  // High regime: same-level boxes with dist <= w^2 (self excluded).
  // Low regime: same-level adjacent boxes (self excluded).
  std::vector<int> near_list;
  // High regime: N^P \ N^B on this level, with wedge indices. Low regime: the V list.
  std::vector<Interaction> interaction_list;
  // Low-regime adaptive lists. u: adjacent leaves incl. self (leaves only);
  // w: smaller non-adjacent boxes whose parent is adjacent (leaves only);
  // x: dual of w.
  std::vector<int> u_list, w_list, x_list;
  // High regime, width <= top directional width: wedges that carry data.
  std::vector<int> active_dirs;

  int count() const { return end - begin; }
  bool has_children() const { return !leaf; }
};

struct LevelStats {
  int level = 0;
  double width = 0.0;
  Regime regime = Regime::high;
  int boxes = 0;
  int leaves = 0;
  long interactions = 0;
  int max_interactions = 0;
  long near_pairs = 0;
  long active_dirs = 0;
};

class QuadTree {
 public:
  QuadTree(const std::vector<Point2> &points, const TreeConfig &cfg);

  const TreeConfig &config() const { return cfg_; }
  const std::vector<QuadBox> &boxes() const { return boxes_; }
  const QuadBox &box(int id) const { return boxes_[id]; }
  int root() const { return 0; }
  int num_levels() const { return static_cast<int>(levels_.size()); }
  const std::vector<int> &level(int l) const { return levels_[l]; }
  double level_width(int l) const;
  // Point indices sorted so that every box owns a contiguous range.
  const std::vector<int> &order() const { return order_; }
  const std::vector<Point2> &points() const { return points_; }
  // Direction set for a high-regime width (nullptr if none).
  const DirectionSet *directions(double width) const;
  double top_width() const { return top_width_; }
  // Same-level lookup; -1 if the box does not exist.
  int find(int level, std::int64_t ix, std::int64_t iy) const;

  // Infimum distance between two boxes.
  double distance(int a, int b) const;
  bool adjacent(int a, int b) const;
  // Wedge of `other` seen from `box`; both high regime, same level, other in I^box.
  int wedge_of(int box, int other) const;

  std::vector<LevelStats> level_stats() const;

 private:
  void build(int id);
  void build_high_lists();
  void build_low_lists();
  void build_active_dirs();
  int add_box(int level, std::int64_t ix, std::int64_t iy, int parent, int begin, int end);
  static std::uint64_t key(int level, std::int64_t ix, std::int64_t iy);

  TreeConfig cfg_;
  std::vector<Point2> points_;
  std::vector<int> order_;
  std::vector<QuadBox> boxes_;
  std::vector<std::vector<int>> levels_;
  std::unordered_map<std::uint64_t, int> lookup_;
  std::vector<DirectionSet> dir_sets_;
  double top_width_ = 1.0;
};

}  // namespace dirfmm

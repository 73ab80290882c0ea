#pragma once

#include <vector>

#include "dirfmm/geometry.hpp"

namespace dirfmm {

// Wedge decomposition of the far field of a box of width w >= 1. Wedge l
// covers polar angles [l*dt, (l+1)*dt) measured from the box center.
struct DirectionSet {
  double width = 0.0;
  int count = 0;
  double wedge_angle = 0.0;
  std::vector<Point2> directions;  // unit vectors through the wedge centers
  std::vector<int> parent_map;     // containing wedge at width/2, or -1 at w = 1

  // A direction exactly on a wedge boundary goes to the lower index; the
  // boundary at angle 0 goes to wedge 0.
  int wedge_of_angle(double angle) const;
  int wedge_of(Point2 offset) const { return wedge_of_angle(polar_angle(offset)); }
  double center_angle(int l) const { return (l + 0.5) * wedge_angle; }
};

// Smallest power of two n with 2*pi/n <= 1/(sqrt(2) w).
int direction_count(double width);

// Widest box that can have a nonempty interaction list: largest power of two <= sqrt(K).
double top_directional_width(double K);

// One set per width 1, 2, 4, ..., top_directional_width(K).
std::vector<DirectionSet> build_direction_sets(double K);

DirectionSet make_direction_set(double width);

}  // namespace dirfmm

#include "dirfmm/directions.hpp"

#include <cmath>

#include "dirfmm/error.hpp"

namespace dirfmm {

int DirectionSet::wedge_of_angle(double angle) const {
  const double t = angle / wedge_angle;
  const double k = std::round(t);
  if (std::abs(t - k) < 1e-9) {
    const int ki = static_cast<int>(k);
    return (ki == 0 || ki == count) ? 0 : ki - 1;
  }
  int l = static_cast<int>(std::floor(t));
  if (l < 0) l = 0;
  if (l >= count) l = count - 1;
  return l;
}

int direction_count(double width) {
  const double need = 2.0 * kPi * std::sqrt(2.0) * width;
  int n = 1;
  while (n < need) n *= 2;
  return n;
}

double top_directional_width(double K) {
  double w = 1.0;
  while (4.0 * w * w <= K) w *= 2.0;
  return w;
}

DirectionSet make_direction_set(double width) {
  if (!(width >= 1.0)) throw InputError("direction sets exist only for width >= 1");
  DirectionSet s;
  s.width = width;
  s.count = direction_count(width);
  s.wedge_angle = 2.0 * kPi / s.count;
  s.directions.resize(s.count);
  s.parent_map.resize(s.count);
  // Counts double with the width, so wedge l sits inside wedge l/2 one level down.
  const bool has_finer = width >= 2.0;
  for (int l = 0; l < s.count; ++l) {
    const double a = s.center_angle(l);
    s.directions[l] = {std::cos(a), std::sin(a)};
    s.parent_map[l] = has_finer ? l / 2 : -1;
  }
  return s;
}

std::vector<DirectionSet> build_direction_sets(double K) {
  std::vector<DirectionSet> sets;
  const double top = top_directional_width(K);
  for (double w = 1.0; w <= top; w *= 2.0) sets.push_back(make_direction_set(w));
  return sets;
}

}  // namespace dirfmm

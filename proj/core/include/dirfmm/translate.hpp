#pragma once

#include <array>
#include <map>
#include <vector>

#include "dirfmm/geometry.hpp"
#include "dirfmm/kernel.hpp"
#include "dirfmm/lowrank.hpp"
#include "dirfmm/tree.hpp"

namespace dirfmm {

// Equivalent/check circles for one box width below 1, as offsets from the box
// center. Outgoing: equivalent radius alpha w inside check radius beta w.
// Incoming: the roles of the two radii swap.
struct LowFreqLevel {
  double width = 0.0;
  std::vector<Point2> inner;  // radius alpha * w
  std::vector<Point2> outer;  // radius beta * w
  CMatrix out_solve;          // check potentials on `outer` -> charges on `inner`
  CMatrix in_solve;           // check potentials on `inner` -> charges on `outer`
  // Translation-invariant operators, precomputed. Child quadrant c = bx + 2 by.
  std::array<CMatrix, 4> m2m;  // child outgoing charges -> this box's outgoing charges
  std::array<CMatrix, 4> l2l;  // this box's incoming check potentials -> child check potentials
  // Source at grid offset (dx, dy) with |dx|, |dy| <= kStencil; empty when adjacent.
  // The first low level inherits the wider near field of its w = 1 parents,
  // hence offsets up to 5.
  static constexpr int kStencil = 5;
  std::vector<CMatrix> m2l;

  const CMatrix &m2l_at(int dx, int dy) const {
    return m2l[(dx + kStencil) * (2 * kStencil + 1) + (dy + kStencil)];
  }
};

class LowFreqBasis {
 public:
  static constexpr double kAlpha = 1.05 * 0.70710678118654752;  // encloses the box
  static constexpr double kBeta = 1.2;

  LowFreqBasis() = default;
  // p = 0 picks the calibrated count for eps.
  LowFreqBasis(double eps, const std::vector<double> &widths, int p = 0);

  const LowFreqLevel &level(double width) const;
  int points() const { return p_; }

 private:
  int p_ = 0;
  std::map<double, LowFreqLevel> levels_;
};

// Circle point count for eps: starts at 20/32/48 for 1e-4/1e-6/1e-8 and grows
// in steps of 4 until a unit charge at a box corner is reproduced to eps both
// directly (targets at 1.5w) and through a full s2m -> m2l -> l2t chain
// between boxes two widths apart. Widths 1/2 and 1/8 are checked.
int low_freq_points(double eps);

// Worst relative error of the check above for one (eps, p).
double low_freq_error(int p);

// u += G(targets, sources) q.
void accumulate(const std::vector<Point2> &targets, Point2 target_shift, const std::vector<Point2> &sources,
                Point2 source_shift, const Complex *q, Complex *u, KernelAccuracy acc);

// f = D u (outgoing) or f = D^T u (incoming).
CVector outgoing_from_check(const SeparatedRep &rep, const CVector &u);
CVector incoming_from_check(const SeparatedRep &rep, const CVector &u);

// Translation state for one evaluation. Each operator writes only the data of
// the box it is called on (l2l also writes the children of that box), so calls
// on distinct boxes of one level may run concurrently.
class Translator {
 public:
  // charges are in original point order; potentials are accumulated in the same order.
  // Optional dipoles: strength mu_j along the unit normal n_j, contributing dG/dn(y_j) mu_j.
  Translator(const QuadTree &tree, const RepTable *reps, const LowFreqBasis &basis,
             const std::vector<Complex> &charges, KernelAccuracy acc = KernelAccuracy::precise,
             const std::vector<Complex> *dipoles = nullptr, const std::vector<Point2> *normals = nullptr);

  // Low regime, upward.
  void leaf_s2m(int leaf);
  void m2m_low(int box);
  // High regime, upward. w = 1 boxes read their children's nondirectional data.
  void m2m_high(int box, int dir);
  void m2m_high(int box);
  // High regime, downward.
  void m2l_high(int source, int target);  // source must be in target's interaction list
  void m2l_high(int box);                 // all of box's interaction list
  void close_incoming(int box);           // no further M2L contributions to box
  void l2l_high(int box, int dir);
  void l2l_high(int box);
  // Low regime, downward. m2l_low covers the V and X lists.
  void m2l_low(int box);
  void l2l_low(int box);  // to children, or to the box's targets when it is a leaf
  void leaf_l2t(int leaf) { l2l_low(leaf); }
  // U list by direct summation and W list from outgoing equivalents. Pairs at
  // zero distance (the diagonal) are skipped.
  void near_field(int leaf);
  void near_field_direct(int target_leaf, int source_leaf);

  const std::vector<Complex> &potentials() const { return potentials_; }
  std::vector<Complex> take_potentials() { return std::move(potentials_); }

  // Read access for tests.
  const CVector &low_out(int box) const { return low_out_[box]; }
  const CVector &low_in(int box) const { return low_in_[box]; }
  const CVector &high_out(int box, int dir) const { return high_out_[box][slot(box, dir)]; }
  const CVector &high_in(int box, int dir) const { return high_in_[box][slot(box, dir)]; }
  // Write access for tests. The outgoing variants mark the data as computed.
  CVector &mutable_high_in(int box, int dir) { return high_in_[box][slot(box, dir)]; }
  CVector &mutable_low_in(int box) { return low_in_[box]; }
  CVector &mutable_low_out(int box);
  CVector &mutable_high_out(int box, int dir);

 private:
  void build_child_ops();
  const std::array<CMatrix, 4> &child_ops(double width, int dir) const;
  int slot(int box, int dir) const;
  void require(bool ok, const char *what, int box) const;
  std::vector<Point2> box_points(int box) const;
  // u += field of the sources of `box` at targets + shift.
  void add_sources(const std::vector<Point2> &targets, Point2 shift, int box, Complex *u) const;

  const QuadTree &tree_;
  const RepTable *reps_;
  const LowFreqBasis &basis_;
  KernelAccuracy acc_;
  std::vector<Point2> sorted_points_;   // tree order
  std::vector<Complex> sorted_charges_; // tree order
  std::vector<Complex> sorted_dipoles_; // tree order, empty without dipoles
  std::vector<Point2> sorted_normals_;
  std::vector<Complex> potentials_;     // original order

  std::vector<CVector> low_out_, low_in_;
  std::vector<std::vector<CVector>> high_out_, high_in_;
  std::vector<char> out_ready_, in_closed_, parent_done_, pushed_;
  std::vector<std::vector<char>> high_done_;  // per active direction: outgoing computed
  // Directional M2M operators per (width, direction), for directions active somewhere.
  std::map<double, std::vector<std::array<CMatrix, 4>>> child_ops_;
};

}  // namespace dirfmm

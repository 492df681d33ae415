#ifndef QSGS_POLAR_GRID_HPP
#define QSGS_POLAR_GRID_HPP

#include <Eigen/Dense>
#include <vector>

#include "qsgs/geometry.hpp"

namespace qsgs {

//! Cell-centred polar grid on the disk of radius r0: r_i = (i + 1/2) h_r,
//! theta_j = j h_t. Node index i * nt + j.
struct PolarGrid {
  int nr = 0, nt = 0;
  double r0 = 1.0;
  double hr = 0.0, ht = 0.0;

  PolarGrid() = default;
  PolarGrid(int nr, int nt, double r0);

  int size() const { return nr * nt; }
  int index(int i, int j) const { return i * nt + wrap(j); }
  int wrap(int j) const { return ((j % nt) + nt) % nt; }
  double r(int i) const { return (i + 0.5) * hr; }
  double theta(int j) const { return j * ht; }
  Vec2 point(int i, int j) const;
  // Quadrature weight r h_r h_t of node i.
  double area_weight(int i) const { return r(i) * hr * ht; }
};

using GridValues = Eigen::VectorXd;

//! Outer-ring ghost treatment. Dirichlet and Neumann carry per-angle data.
enum class GhostKind { Dirichlet, Neumann, Extrapolate };

struct GhostRule {
  GhostKind kind = GhostKind::Extrapolate;
  Eigen::VectorXd data;  // size nt for Dirichlet/Neumann

  static GhostRule dirichlet(const Eigen::VectorXd& g) {
    return {GhostKind::Dirichlet, g};
  }
  static GhostRule dirichlet_zero(int nt) {
    return {GhostKind::Dirichlet, Eigen::VectorXd::Zero(nt)};
  }
  static GhostRule neumann(const Eigen::VectorXd& q) {
    return {GhostKind::Neumann, q};
  }
  static GhostRule extrapolate() { return {}; }
};

//! Linear combination of node values plus a multiple of boundary datum j.
struct GhostTerm {
  int terms = 0;
  int idx[4] = {0, 0, 0, 0};
  double w[4] = {0, 0, 0, 0};
  int bc_index = -1;
  double bc_weight = 0.0;
};

// Logical value at ring i in [-1, nr] and angle j, resolved through the
// pole partner or the ghost rule. Weights only; data is applied by callers.
GhostTerm resolve(const PolarGrid& g, GhostKind kind, int i, int j);

//! Second-order derivative bundle at a node in polar form.
struct PolarDerivs {
  double w = 0, r = 0, t = 0, rr = 0, rt = 0, tt = 0;
};

//! Value, gradient and Hessian in the Cartesian (u, v) cross-section frame.
struct CartDerivs {
  double w = 0;
  Vec2 grad = Vec2::Zero();
  Mat2 hess = Mat2::Zero();
};

CartDerivs polar_to_cart(const PolarDerivs& d, double r, double theta);

// Three-point stencil weights on the 3x3 neighbourhood (di, dj in -1..1)
// for each polar derivative; stencil[k][(di+1)*3 + (dj+1)].
struct PolarStencil {
  double rr[9], rt[9], tt[9], r[9], t[9];
};
PolarStencil polar_stencil(const PolarGrid& g);

// Bundles at all nodes.
std::vector<PolarDerivs> polar_bundle(const PolarGrid& g, const GridValues& w,
                                      const GhostRule& ghost);
std::vector<CartDerivs> cart_bundle(const PolarGrid& g, const GridValues& w,
                                    const GhostRule& ghost);

//! Piecewise bicubic Hermite interpolant in (r, theta) with fourth-order
//! nodal derivatives. Cells adjacent to the pole use the partner ring at
//! theta + pi; beyond the last ring the ghost rule extends the data.
class Interpolator {
 public:
  Interpolator() = default;
  Interpolator(const PolarGrid& g, const GridValues& w,
               const GhostRule& ghost);

  double value(const Vec2& p) const;
  // Value with Cartesian gradient and Hessian.
  CartDerivs eval(const Vec2& p) const;
  PolarDerivs eval_polar(double r, double theta) const;
  const PolarGrid& grid() const { return g_; }

 private:
  PolarGrid g_;
  int rings_ = 0;  // extended rings -2 .. nr + 1
  std::vector<double> f_, fr_, ft_, frt_;
  int ext(int i, int j) const { return (i + 2) * g_.nt + g_.wrap(j); }
};

// Area integral with the midpoint rule.
double integrate(const PolarGrid& g, const GridValues& w);

}  // namespace qsgs

#endif

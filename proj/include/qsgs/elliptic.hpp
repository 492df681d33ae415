#ifndef QSGS_ELLIPTIC_HPP
#define QSGS_ELLIPTIC_HPP

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <memory>

#include "qsgs/polar_grid.hpp"

namespace qsgs {

using SpMat = Eigen::SparseMatrix<double>;

//! Node coefficients of L w = A : Hess(w) + B . grad(w) + c w, with A, B in
//! the Cartesian cross-section frame.
struct NodeCoeffs {
  std::vector<Mat2> A;
  std::vector<Vec2> B;
  Eigen::VectorXd c;

  static NodeCoeffs laplacian(const PolarGrid& g);
};

//! Polar form of the coefficients at one node: weights on w_rr, w_rt, w_tt,
//! w_r, w_t (mixed term counted once).
struct PolarWeights {
  double rr, rt, tt, r, t;
};
PolarWeights polar_weights(const Mat2& A, const Vec2& B, double r,
                           double theta);

//! Sparse stencil matrix of a second-order operator with a fixed ghost rule.
//! apply() and the matrix use identical stencils, so they agree to roundoff.
class LinearOperator {
 public:
  LinearOperator(const PolarGrid& g, const NodeCoeffs& coeffs, GhostKind kind);

  const PolarGrid& grid() const { return g_; }
  GhostKind kind() const { return kind_; }
  const SpMat& matrix() const { return M_; }
  // Coupling of node equations to the per-angle boundary data.
  const SpMat& boundary_coupling() const { return Bc_; }

  GridValues apply(const GridValues& w, const Eigen::VectorXd& bc) const;

  // Dirichlet (or Neumann) solve of apply(u, bc) = rhs. Throws
  // SingularOperator if the factorisation fails.
  GridValues solve(const GridValues& rhs, const Eigen::VectorXd& bc) const;
  void factorize() const;

 private:
  PolarGrid g_;
  GhostKind kind_;
  SpMat M_, Bc_;
  mutable std::shared_ptr<Eigen::SparseLU<SpMat>> lu_;
};

// u with u = bc on the boundary and op u = rhs; residual checked against
// 1e-10 |rhs|.
GridValues dirichlet_solve(const LinearOperator& op, const GridValues& rhs,
                           const Eigen::VectorXd& bc);

struct NeumannResult {
  GridValues eta;
  double lambda = 0.0;  // uniform shift removed from rhs
  double defect = 0.0;  // lambda times the disk area
};

//! Laplacian with constant Neumann data and mean-zero gauge, solved as a
//! bordered system so incompatible data are projected instead of failing.
class NeumannSolver {
 public:
  explicit NeumannSolver(const PolarGrid& g);
  NeumannResult solve(const GridValues& rhs, double boundary_const) const;
  const LinearOperator& laplacian() const { return lap_; }

 private:
  PolarGrid g_;
  LinearOperator lap_;
  Eigen::SparseLU<SpMat> lu_;
};

NeumannResult neumann_solve(const PolarGrid& g, const GridValues& rhs,
                            double boundary_const);

struct SpectrumResult {
  double lambda_min = 0.0;  // smallest eigenvalue of -L
  int iterations = 0;
};

// Inverse power iteration on a Dirichlet operator.
SpectrumResult smallest_eigenvalue(const LinearOperator& op,
                                   int max_iter = 1000, double tol = 1e-12);

}  // namespace qsgs

#endif

#ifndef QSGS_DEFORMATION_HPP
#define QSGS_DEFORMATION_HPP

#include <memory>
#include <string>

#include "qsgs/flux_geometry.hpp"

namespace qsgs {

//! Cross-section boundary rho_D(theta) = r0 (1 + a0 + sum_k a_k cos k theta
//! + b_k sin k theta). The offset from the unit-gradient defining function of
//! D0 is delta_b(theta) = r0 - rho_D(theta).
struct BoundarySpec {
  double r0 = 0.5;
  double a0 = 0.0;
  std::vector<double> a, b;  // modes k = 1, 2, ...

  static BoundarySpec circle(double r0) { return BoundarySpec{r0, 0.0, {}, {}}; }
  double rho(double theta) const;
  double drho(double theta) const;
  double area() const;
  // area(D) / area(D0) - 1
  double area_defect() const;
  // Uniform rescale to match the area of D0.
  BoundarySpec autoscaled() const;
  // delta_b at the grid angles.
  Eigen::VectorXd delta_b(const PolarGrid& g) const;
  // Throws DomainViolation unless rho > 0 everywhere.
  void validate() const;
};

struct DeformationPair {
  GridValues eta, phi;
};

//! Displacement gamma - id = grad eta + grad-perp phi = (alpha, beta) with
//! grad-perp phi = (phi_v, -phi_u), and its derivative bundles.
struct Displacement {
  GridValues alpha, beta;
  std::vector<CartDerivs> da, db;  // bundles of alpha and beta
  std::vector<Mat2> jac;           // grad gamma at nodes
  double min_det = 1.0;
  double max_det_defect = 0.0;     // max |det grad gamma - 1|
};

Displacement make_displacement(const PolarGrid& g, const DeformationPair& p,
                               double neumann_const);

// N_eta = -det(grad gamma - I) at nodes.
GridValues eval_N_eta(const Displacement& d);

//! Composed residual E(y) = (L psi + G(., psi))(gamma(y)) with
//! psi = psi0 o gamma^{-1}; derivatives of psi by the chain rule.
GridValues composed_residual(const Displacement& d, const DiscreteBase& b,
                             const CoefficientField& L, const BaseState& prof);

// N_phi = Lin(d_s phi) - E + (L0 psi0 + G0) at nodes; Phi is d_s phi on the
// grid with its boundary trace. Independent of any F profile.
GridValues eval_N_phi(const Displacement& d, const DiscreteBase& b,
                      const CoefficientField& L, const CoefficientField& L0,
                      const BaseState& prof, const LinearOperator& lin,
                      const GridValues& Phi, const Eigen::VectorXd& trace);

// d_s phi = grad-perp psi0 . grad phi at the nodes, and optionally on the
// boundary circle at the grid angles.
GridValues streamline_derivative(const DiscreteBase& b, const GridValues& phi,
                                 Eigen::VectorXd* trace = nullptr);

struct BoundaryRemainder {
  Eigen::VectorXd b1;      // per grid angle
  double mean = 0.0;       // arclength mean of b1
  double neumann_const = 0.0;  // -mean
  Eigen::VectorXd trace;   // Dirichlet data for d_s phi
};

BoundaryRemainder boundary_remainder(const Displacement& d,
                                     const DiscreteBase& b,
                                     const BoundarySpec& spec);

struct SolverOptions {
  double tol_iter = 0.0;  // absolute; 0 means 1e-9 r0
  int max_iter = 200;
  double omega = 0.5;     // relaxation used once damping engages
  bool auto_damp = true;
  double divergence_factor = 1.0;  // abort once |delta| exceeds this * r0
};

struct StepLog {
  int N = 0;
  double d_eta = 0, d_phi = 0, d_disp = 0;
  double ratio = 0;
  double det_defect = 0, min_det = 1;
  double boundary_defect = 0;   // max | |x_b| - rho_D(theta(x_b)) |
  double neumann_mismatch = 0;  // q + mean(b1)
  double loop_defect = 0;       // worst collocation loop integral, relative
  double residual = 0;          // max |E + F(psi0)| before the update
  double omega = 1;
};

struct IterState {
  DeformationPair pair;
  GridValues Phi;
  Eigen::VectorXd trace;
  Eigen::VectorXd F;
  double q = 0.0;
  double omega = 1.0;
  int N = 0;
  std::shared_ptr<const Displacement> disp;  // cached, may be null
};

//! The fixed-point iteration for (eta, phi, F).
class DeformationSolver {
 public:
  DeformationSolver(BaseState prof, const DiscreteBase& base,
                    std::shared_ptr<const CoefficientField> L0,
                    std::shared_ptr<const CoefficientField> L,
                    BoundarySpec boundary, SolverOptions opt = {}, int M = 32);

  IterState initial_state() const;
  IterState iterate_step(const IterState& s, StepLog* log = nullptr) const;

  const DiscreteBase& base() const { return *base_; }
  const SolvabilitySystem& solvability() const { return *sys_; }
  const FluxGeometry& flux() const { return *fg_; }
  const LinearOperator& linearization() const { return *lin_; }
  const BoundarySpec& boundary() const { return boundary_; }
  const CoefficientField& L() const { return *L_; }
  const CoefficientField& L0() const { return *L0_; }
  const BaseState& profiles() const { return prof_; }
  const SolverOptions& options() const { return opt_; }

 private:
  BaseState prof_;
  const DiscreteBase* base_;
  std::shared_ptr<const CoefficientField> L0_, L_;
  BoundarySpec boundary_;
  SolverOptions opt_;
  std::unique_ptr<LinearOperator> lin_;
  std::unique_ptr<FluxGeometry> fg_;
  std::unique_ptr<SolvabilitySystem> sys_;
  std::unique_ptr<PhiRecovery> rec_;
  std::unique_ptr<NeumannSolver> neu_;
};

struct ConvergenceResult {
  IterState state;
  Displacement disp;
  std::vector<StepLog> log;
  bool converged = false;
  std::string failure;        // empty on success
  ErrorCode failure_code = ErrorCode::Divergence;
  double max_ratio = 0.0;     // over steps after the first
  double final_residual = 0.0;
  // P profile from F: nodes in psi, P(0) = 0
  std::vector<double> P_nodes, P_values, dP_values, sqrtg_spread;
  double max_sqrtg_spread = 0.0;
};

ConvergenceResult run_to_convergence(const DeformationSolver& solver);

//! psi = psi0 o gamma^{-1} on D, evaluated through Newton inversion of gamma.
class DeformedFlux {
 public:
  DeformedFlux(const DiscreteBase& b, const Displacement& d);
  Vec2 gamma(const Vec2& y) const;
  Mat2 dgamma(const Vec2& y) const;
  // Throws Extension if Newton fails.
  Vec2 inverse(const Vec2& x) const;
  // Value, gradient and Hessian of psi at x in D.
  CartDerivs eval(const Vec2& x) const;
  CartDerivs eval_preimage(const Vec2& y) const;
  Vec2 axis() const { return gamma(base_->axis); }

 private:
  const DiscreteBase* base_;
  Interpolator ia_, ib_;
};

}  // namespace qsgs

#endif

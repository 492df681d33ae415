#ifndef QSGS_FLUX_GEOMETRY_HPP
#define QSGS_FLUX_GEOMETRY_HPP

#include <functional>

#include "qsgs/ggs.hpp"

namespace qsgs {

using ScalarField2 = std::function<CartDerivs(const Vec2&)>;

//! Closed level curve {psi0 = c}, star-shaped about the axis and sampled at
//! uniform angles. dsdth is the time element of x' = grad-perp psi0 per unit
//! angle, so the loop integral of q ds is a trapezoid sum.
struct LevelCurve {
  double c = 0.0;
  std::vector<Vec2> pts;
  std::vector<double> rho;
  std::vector<double> dsdth;
  double dth = 0.0;

  double integrate(const std::function<double(const Vec2&)>& q) const;
  double period() const;  // loop integral of ds
};

class FluxGeometry {
 public:
  FluxGeometry(ScalarField2 psi, const Vec2& axis, double psi_axis,
               double rmax, int n_angle);
  explicit FluxGeometry(const DiscreteBase& b, int n_angle = 0);

  // Throws Streamline if the ray search fails or the flow turns backwards.
  LevelCurve level(double c) const;
  double travel_time(double c) const { return level(c).period(); }

  const Vec2& axis() const { return axis_; }
  double psi_axis() const { return psi_axis_; }
  int n_angle() const { return n_; }
  double psi(const Vec2& x) const { return psi_(x).w; }

 private:
  ScalarField2 psi_;
  Vec2 axis_;
  double psi_axis_, rmax_;
  int n_;
};

// Loop integral of q ds over {psi0 = c}.
double streamline_integral(const FluxGeometry& fg,
                           const std::function<double(const Vec2&)>& q,
                           double c);

// Collocation levels psi_a (0.05 + 0.9 k / (M - 1)), increasing.
std::vector<double> collocation_levels(double psi_axis, int M = 32);

//! Piecewise-linear hat basis on increasing levels, extended linearly past
//! both ends.
class HatBasis {
 public:
  HatBasis() = default;
  explicit HatBasis(std::vector<double> levels) : c_(std::move(levels)) {}
  int size() const { return static_cast<int>(c_.size()); }
  double eval(int j, double psi) const;
  double combine(const Eigen::VectorXd& F, double psi) const;
  double combine_derivative(const Eigen::VectorXd& F, double psi) const;
  const std::vector<double>& levels() const { return c_; }

 private:
  std::vector<double> c_;
  int segment(double psi) const;
};

//! T F = R with T_kj = loop integral at level k of op^{-1} e_j(psi0).
class SolvabilitySystem {
 public:
  SolvabilitySystem(const LinearOperator& op, const DiscreteBase& b,
                    const FluxGeometry& fg, int M = 32);

  // Loop integrals of a grid function at the collocation levels.
  Eigen::VectorXd loop_integrals(const Interpolator& q) const;
  Eigen::VectorXd loop_integrals(const GridValues& q, const GhostRule& ghost) const;
  // Loop integrals of |q|, for relative checks.
  Eigen::VectorXd abs_loop_integrals(const Interpolator& q) const;
  // F with T F = R; throws Solvability when cond(T) > 1e10.
  Eigen::VectorXd solve(const Eigen::VectorXd& R) const;
  // Sum_j F_j op^{-1} e_j(psi0).
  GridValues response(const Eigen::VectorXd& F) const;
  // Sum_j F_j e_j(psi0) at the nodes.
  GridValues profile_on_grid(const Eigen::VectorXd& F) const;

  const Eigen::MatrixXd& T() const { return T_; }
  double condition() const { return cond_; }
  const HatBasis& basis() const { return hats_; }
  const std::vector<LevelCurve>& curves() const { return curves_; }

 private:
  const DiscreteBase* base_;
  HatBasis hats_;
  std::vector<LevelCurve> curves_;
  std::vector<GridValues> u_;
  Eigen::MatrixXd T_;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_;
  double cond_ = 0.0;
};

// Dense solve of the solvability system.
Eigen::VectorXd solve_profile_F(const SolvabilitySystem& sys,
                                const Eigen::VectorXd& R);

struct PhiRecoveryStats {
  double max_mean_defect = 0.0;  // largest dropped loop integral on a table ring
  double worst_level_loop = 0.0; // relative, over collocation levels
  int worst_level = -1;
};

//! Integrates d_s phi = Phi along level curves on a (sigma, angle) table,
//! sigma = sqrt((psi_a - c)/psi_a), then interpolates back to grid nodes.
class PhiRecovery {
 public:
  PhiRecovery(const DiscreteBase& b, const FluxGeometry& fg);

  // Throws Gauge when a collocation loop integral of Phi exceeds 1e-8
  // relative to the loop integral of |Phi|, or of |ref| when that is larger
  // (ref is the field before the profile was subtracted).
  GridValues recover(const Interpolator& Phi, const SolvabilitySystem* sys,
                     PhiRecoveryStats* stats = nullptr,
                     const Interpolator* ref = nullptr) const;

  const PolarGrid& table() const { return table_; }

 private:
  const DiscreteBase* base_;
  PolarGrid table_;
  std::vector<LevelCurve> rings_;
  std::vector<double> node_sigma_, node_angle_;
};

}  // namespace qsgs

#endif

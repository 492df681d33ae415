#ifndef QSGS_BASE_STATE_HPP
#define QSGS_BASE_STATE_HPP

#include <vector>

#include "qsgs/geometry.hpp"

namespace qsgs {

//! Monotone piecewise-cubic (Fritsch-Carlson) function of a flux label.
//! Outside the node range the value is clamped and a counter bumped.
class ProfileFn {
 public:
  ProfileFn() = default;
  ProfileFn(std::vector<double> nodes, std::vector<double> values);

  double operator()(double c) const;
  double derivative(double c) const;
  const std::vector<double>& nodes() const { return x_; }
  const std::vector<double>& values() const { return y_; }
  long clamp_count() const { return clamps_; }

 private:
  std::vector<double> x_, y_, m_;
  mutable long clamps_ = 0;
  int segment(double c) const;
};

struct BaseParams {
  double psi_bar = 1.0;
  double c_bar = 1.0;
  double r0 = 0.5;
  double R0 = 10.0;
  double eps_reg = 1e-6;  // absolute; default is 1e-6 * psi_bar
};

//! Large-aspect-ratio base state: psi0(r) = psi_bar (1 - (r/r0)^2),
//! C0 = c_bar sqrt(psi_bar - psi + eps), P0 = p_bar psi / (r0 R0)^2.
class BaseState {
 public:
  // Validates 0 < r0 < R0, psi_bar > 0, eps_reg > 0.
  static BaseState build(const BaseParams& p);
  // No validation; used for degenerate reductions such as psi_bar = 0.
  static BaseState unchecked(const BaseParams& p);

  const BaseParams& params() const { return p_; }
  double p_bar() const { return p_bar_; }

  double psi(double r) const;
  double dpsi(double r) const;
  double ddpsi(double r) const;
  // Radius of the level psi0 = c.
  double level_radius(double c) const;

  double C(double c) const;
  double dC(double c) const;
  // C C' and its derivative in c.
  double CdC(double c) const;
  double d_CdC(double c) const;
  double P(double c) const;
  double dP(double c) const;
  double ddP(double) const { return 0.0; }

 private:
  BaseParams p_;
  double p_bar_ = 0.0;
};

struct AxisymResidual {
  double max_toroidal = 0.0;    // full large-R residual, L0 units
  double max_infinite = 0.0;    // r0-scale residual with R = R0
  double max_psi_only = 0.0;    // psi'' + R0^2 P' + C C'
  std::vector<double> toroidal; // per sample
};

// Residuals of the analytic state at points (r, theta).
AxisymResidual axisym_gs_residual(const BaseState& s,
                                  const std::vector<Vec2>& rt_points);

// mu(c) = loop integral of dl / |grad psi0| over {psi0 = c}, trapezoid in
// angle with n_quad points. Throws DegenerateLevel for c outside (0, psi_bar).
double travel_time(const BaseState& s, double c, int n_quad = 256);

}  // namespace qsgs

#endif

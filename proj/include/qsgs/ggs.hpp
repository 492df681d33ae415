#ifndef QSGS_GGS_HPP
#define QSGS_GGS_HPP

#include <memory>

#include "qsgs/base_state.hpp"
#include "qsgs/designer_metrics.hpp"
#include "qsgs/elliptic.hpp"

namespace qsgs {

//! Cross-section data of the generalized operator at a point (u, v) of the
//! half-plane Phi = 0, written in the Cartesian frame (e_x, e_z):
//!   L psi = A : Hess(psi) + B . grad(psi)
//!   G(c)  = C C'(c) * w_src - C(c) * kappa
//!   F(c)  = P'(c) / sqrt_g
struct CoeffSample {
  Mat2 A = Mat2::Identity();
  Vec2 B = Vec2::Zero();
  double w_src = 1.0;   // 1 / (sqrt|g| |xi|_g^2)
  double kappa = 0.0;   // (xi/|xi|^2) ._g curl_g(xi/|xi|^2)
  double sqrt_g = 1.0;  // Cartesian density sqrt|g|
  double xi2 = 1.0;     // |xi|_g^2
};

// Core formula from one metric frame and one symmetry sample at (R0+u, 0, v).
// Throws DegenerateSymmetry if |xi|_g or xi^y vanish.
CoeffSample cross_section_coefficients(const MetricFrame& g,
                                       const VecSample& xi);

class CoefficientField {
 public:
  virtual ~CoefficientField() = default;
  virtual CoeffSample at(const Vec2& x) const = 0;
  double R0 = 10.0;
};

//! Euclidean metric with the rotation field, in closed form.
class AxisymCoefficients : public CoefficientField {
 public:
  explicit AxisymCoefficients(double R0_) { R0 = R0_; }
  CoeffSample at(const Vec2& x) const override;
};

//! Coefficients evaluated pointwise from a metric source and a field.
class GeometricCoefficients : public CoefficientField {
 public:
  GeometricCoefficients(std::shared_ptr<const MetricSource> g,
                        std::shared_ptr<const SymmetryField> xi, double R0_);
  CoeffSample at(const Vec2& x) const override;

 private:
  std::shared_ptr<const MetricSource> g_;
  std::shared_ptr<const SymmetryField> xi_;
};

//! Samples another field on a polar table of radius rmax and interpolates.
//! Used when pointwise evaluation is expensive (circle-averaged metrics).
class TabulatedCoefficients : public CoefficientField {
 public:
  TabulatedCoefficients(const CoefficientField& src, int nr, int nt,
                        double rmax);
  CoeffSample at(const Vec2& x) const override;

 private:
  std::vector<Interpolator> comp_;
};

//! Polar form L w = a_rr w_rr + 2 a_rt w_rt + a_tt w_tt + b_r w_r + b_t w_t.
struct PolarCoeffs {
  double arr = 0, art = 0, att = 0, br = 0, bt = 0;
  double r_br = 0, r2_att = 0;  // finite at the pole
};
PolarCoeffs l0_coefficients(double r, double theta, double R0);
PolarCoeffs polar_coefficients(const CoeffSample& c, double r, double theta);

struct SourceTerms {
  double F = 0.0, G = 0.0;
};
SourceTerms ggs_sources(const CoeffSample& c, const BaseState& prof, double psi);
SourceTerms ggs_sources(const MetricFrame& g, const VecSample& xi,
                        const BaseState& prof, double psi);

// d/dpsi (F0 + G0) at a point; the zeroth-order term of the linearization.
double source_derivative(const CoeffSample& c, const BaseState& prof,
                         double psi);

//! Base flux function on the grid. In "discrete" mode psi0 solves the
//! discrete axisymmetric equation L0 psi + F0 + G0 = 0 with psi = 0 on the
//! boundary, so the identity deformation is an exact fixed point.
struct DiscreteBase {
  PolarGrid grid;
  GridValues psi;
  std::vector<CartDerivs> bundle;
  Interpolator interp;
  Vec2 axis = Vec2::Zero();
  double psi_axis = 0.0;
  int picard_iterations = 0;
  bool discrete = true;
};

DiscreteBase make_base(const BaseState& s, const PolarGrid& g, bool discrete);

// Node coefficients for the linearization of L0 at psi0.
NodeCoeffs linearized_coeffs(const CoefficientField& L0, const BaseState& s,
                             const DiscreteBase& b);

// Smallest eigenvalue of -linearization (Dirichlet); positive certifies H1.
SpectrumResult h1_spectrum(const CoefficientField& L0, const BaseState& s,
                           const DiscreteBase& b);

struct CoeffDistance {
  double a = 0, b = 0, G = 0, boundary = 0;
  double min_ellipticity = 0;  // smallest eigenvalue of A over the grid
  double total() const { return a + b + G + boundary; }
};

// Relative max-norm distances over grid nodes; boundary radii normalized by
// r0. delta_b holds the boundary offsets sampled at the grid angles.
CoeffDistance coefficient_distance(const PolarGrid& g,
                                   const CoefficientField& L0,
                                   const CoefficientField& L,
                                   const BaseState& s, const GridValues& psi0,
                                   const Eigen::VectorXd& delta_b);

}  // namespace qsgs

#endif

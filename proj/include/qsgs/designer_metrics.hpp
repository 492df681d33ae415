#ifndef QSGS_DESIGNER_METRICS_HPP
#define QSGS_DESIGNER_METRICS_HPP

#include <memory>
#include <vector>

#include "qsgs/geometry.hpp"
#include "qsgs/jet.hpp"

namespace qsgs {

//! Near-identity diffeomorphism f = S3 o S2 o S1, each S a shear along one
//! Cartesian axis. Every factor has unit Jacobian determinant and a closed
//! form inverse, so f is volume preserving and f = id at t = 0.
struct DiffeoSpec {
  double t = 0.0;      // amplitude
  double R0 = 10.0;    // major radius
  double r0 = 0.5;     // minor radius (sets the displacement scale)
  int m1 = 2;          // toroidal mode of the vertical shear
  int m2 = 3;          // toroidal mode of its radial modulation
  double bump = 0.5;   // weight of the Gaussian bump in the x shear
  double lambda = 1.0; // uniform dilation (testing aid; 1 keeps det df = 1)

  JetVec apply(const JetVec& x) const;
  Vec3 forward(const Vec3& x) const;
  Vec3 inverse(const Vec3& y) const;
  Mat3 jacobian(const Vec3& x) const;
};

//! Map value, Jacobian and per-component Hessians at a point.
struct MapJet {
  Vec3 f;
  Mat3 df;                  // df(a, i) = d_i f^a
  std::array<Mat3, 3> hess; // hess[a](i, j) = d_i d_j f^a
};
MapJet map_jet(const DiffeoSpec& spec, const Vec3& x);

class SymmetryField {
 public:
  virtual ~SymmetryField() = default;
  virtual VecSample eval(const Vec3& x) const = 0;
  // Time-s flow. The default integrates with adaptive RK45.
  virtual Vec3 flow(const Vec3& x, double s) const;
  // Flow together with its spatial derivative d(phi_s)/dx.
  virtual std::pair<Vec3, Mat3> flow_with_jacobian(const Vec3& x,
                                                   double s) const;
  double rtol = 1e-10;
  double atol = 1e-12;
};

//! xi_0 = R e_Phi = (-y, x, 0).
class RotationField : public SymmetryField {
 public:
  VecSample eval(const Vec3& x) const override;
  Vec3 flow(const Vec3& x, double s) const override;
  std::pair<Vec3, Mat3> flow_with_jacobian(const Vec3& x,
                                           double s) const override;
};

//! xi = (df)^{-1} xi_0(f(x)), the field f-related to xi_0. Its flow is
//! f^{-1} o Rot_s o f.
class PulledBackRotation : public SymmetryField {
 public:
  explicit PulledBackRotation(DiffeoSpec spec) : spec_(spec) {}
  VecSample eval(const Vec3& x) const override;
  Vec3 flow(const Vec3& x, double s) const override;
  std::pair<Vec3, Mat3> flow_with_jacobian(const Vec3& x,
                                           double s) const override;
  const DiffeoSpec& spec() const { return spec_; }

 private:
  DiffeoSpec spec_;
};

class MetricSource {
 public:
  virtual ~MetricSource() = default;
  virtual MetricFrame frame(const Vec3& x) const = 0;
};

class EuclideanMetric : public MetricSource {
 public:
  MetricFrame frame(const Vec3&) const override {
    return MetricFrame::euclidean();
  }
};

//! g = f^* delta with analytic first derivatives from the map Hessians.
class PullbackMetric : public MetricSource {
 public:
  explicit PullbackMetric(DiffeoSpec spec) : spec_(spec) {}
  MetricFrame frame(const Vec3& x) const override;
  // Same metric with derivatives by central differences of g, step h.
  MetricFrame frame_fd(const Vec3& x, double h) const;

 private:
  DiffeoSpec spec_;
};

//! Trapezoidal average of phi_s^* delta over one period of the field.
class CircleAverageMetric : public MetricSource {
 public:
  CircleAverageMetric(std::shared_ptr<const SymmetryField> xi, int n_quad,
                      double length_scale, double closure_tol);
  MetricFrame frame(const Vec3& x) const override;
  Mat3 metric(const Vec3& x) const;

 private:
  std::shared_ptr<const SymmetryField> xi_;
  int n_quad_;
  double h_fd_;
  double closure_tol_;
};

// Pullback frame and pulled-back symmetry field at p; throws Orientation if
// det df <= 0 there.
std::pair<MetricFrame, VecSample> pullback_frame(const DiffeoSpec& spec,
                                                 const Vec3& p);

// Averaged metric at p; throws NonPeriodicOrbit with the closure gap.
MetricFrame circle_average_metric(const SymmetryField& xi, const Vec3& p,
                                  int n_quad, double length_scale,
                                  double closure_tol = -1.0);

struct KillingResidual {
  double metric = 0.0;     // max |L_xi g|_F
  double euclidean = 0.0;  // max |L_xi delta|_F
};
KillingResidual killing_residual(const SymmetryField& xi,
                                 const MetricSource& g,
                                 const std::vector<Vec3>& samples);

// Sample points on a torus of major radius R0 and minor radius rmax.
std::vector<Vec3> torus_samples(double R0, double rmax, int nr, int ntheta,
                                int nphi);

}  // namespace qsgs

#endif

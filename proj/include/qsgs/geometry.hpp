#ifndef QSGS_GEOMETRY_HPP
#define QSGS_GEOMETRY_HPP

#include <Eigen/Dense>
#include <array>
#include <functional>

#include "qsgs/error.hpp"

namespace qsgs {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct ToroidalCoords {
  double r = 0, theta = 0, phi = 0;
  double R = 0;
  bool defined = true;  // false on the Z axis (R = 0)
};

struct Point3 {
  Vec3 x = Vec3::Zero();

  static Point3 from_toroidal(double r, double theta, double phi, double R0);
  ToroidalCoords toroidal(double R0) const;
};

//! Metric sample with first derivatives. dg[k] holds the partial of g along
//! x^k; gamma[k](i, j) is the Christoffel symbol with upper index k.
struct MetricFrame {
  Mat3 g = Mat3::Identity();
  std::array<Mat3, 3> dg{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
  Mat3 ginv = Mat3::Identity();
  double det = 1.0;
  double sqrt_det = 1.0;
  std::array<Mat3, 3> gamma{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};

  // Validates symmetry and positive definiteness; throws InvalidMetric.
  static MetricFrame make(const Mat3& g, const std::array<Mat3, 3>& dg);
  static MetricFrame euclidean() { return MetricFrame{}; }

  double dot(const Vec3& a, const Vec3& b) const { return a.dot(g * b); }
  double norm2(const Vec3& a) const { return a.dot(g * a); }
  // Partials of sqrt|g|.
  Vec3 d_sqrt_det() const;
};

//! Vector value and Jacobian, jac(i, j) = d_j X^i.
struct VecSample {
  Vec3 value = Vec3::Zero();
  Mat3 jac = Mat3::Zero();
  bool has_jac = false;

  VecSample() = default;
  explicit VecSample(const Vec3& v) : value(v) {}
  VecSample(const Vec3& v, const Mat3& j) : value(v), jac(j), has_jac(true) {}
};

Vec3 cross_g(const MetricFrame& g, const Vec3& X, const Vec3& Y);
Vec3 curl_g(const MetricFrame& g, const VecSample& X);
Vec3 grad_g(const MetricFrame& g, const Vec3& df);
double div_g(const MetricFrame& g, const VecSample& X);
double div_euclid(const VecSample& X);
// (L_X g)_ij
Mat3 deformation_tensor(const MetricFrame& g, const VecSample& X);
// L_X Y = [X, Y]
Vec3 lie_bracket(const VecSample& X, const VecSample& Y);
// nabla_X Y
Vec3 covariant_derivative(const MetricFrame& g, const Vec3& X,
                          const VecSample& Y);

// Central-difference Jacobian of a vector field, step h.
Mat3 fd_jacobian(const std::function<Vec3(const Vec3&)>& F, const Vec3& x,
                 double h);
// Central-difference gradient of a scalar field, step h.
Vec3 fd_gradient(const std::function<double(const Vec3&)>& f, const Vec3& x,
                 double h);
// Frame from a metric callable, derivatives by central differences.
MetricFrame fd_frame(const std::function<Mat3(const Vec3&)>& g, const Vec3& x,
                     double h);

}  // namespace qsgs

#endif

#include "qsgs/geometry.hpp"

#include <cmath>
#include <sstream>

namespace qsgs {

const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidMetric: return "invalid-metric";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::Orientation: return "orientation";
    case ErrorCode::NonPeriodicOrbit: return "non-periodic-orbit";
    case ErrorCode::DomainViolation: return "domain-violation";
    case ErrorCode::DegenerateLevel: return "degenerate-level";
    case ErrorCode::SpectralFailure: return "spectral-failure";
    case ErrorCode::SingularOperator: return "singular-operator";
    case ErrorCode::Streamline: return "streamline";
    case ErrorCode::Solvability: return "solvability";
    case ErrorCode::Gauge: return "gauge";
    case ErrorCode::Diffeomorphism: return "diffeomorphism";
    case ErrorCode::Extension: return "extension";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::DegenerateSymmetry: return "degenerate-symmetry";
    case ErrorCode::GateFailure: return "gate-failure";
    case ErrorCode::Config: return "config";
  }
  return "unknown";
}

int exit_code(ErrorCode c) { return 10 + static_cast<int>(c); }

Point3 Point3::from_toroidal(double r, double theta, double phi, double R0) {
  const double R = R0 + r * std::cos(theta);
  Point3 p;
  p.x = Vec3(R * std::cos(phi), R * std::sin(phi), r * std::sin(theta));
  return p;
}

ToroidalCoords Point3::toroidal(double R0) const {
  ToroidalCoords t;
  t.R = std::hypot(x[0], x[1]);
  if (t.R == 0.0) {
    t.defined = false;
    return t;
  }
  t.phi = std::atan2(x[1], x[0]);
  t.r = std::hypot(t.R - R0, x[2]);
  t.theta = std::atan2(x[2], t.R - R0);
  return t;
}

MetricFrame MetricFrame::make(const Mat3& g, const std::array<Mat3, 3>& dg) {
  if (!g.allFinite()) throw Error(ErrorCode::InvalidMetric, "non-finite metric");
  const double asym = (g - g.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * g.cwiseAbs().maxCoeff()) {
    throw Error(ErrorCode::InvalidMetric, "metric not symmetric");
  }
  MetricFrame f;
  f.g = 0.5 * (g + g.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> es(f.g, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()[0] <= 0.0) {
    std::ostringstream os;
    os << "metric not positive definite (min eigenvalue "
       << es.eigenvalues()[0] << ")";
    throw Error(ErrorCode::InvalidMetric, os.str());
  }
  f.dg = dg;
  f.ginv = f.g.inverse();
  f.det = f.g.determinant();
  f.sqrt_det = std::sqrt(f.det);
  // Gamma^k_ij = 1/2 g^{kl} (d_i g_lj + d_j g_li - d_l g_ij)
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int l = 0; l < 3; ++l) {
          s += f.ginv(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
        }
        f.gamma[k](i, j) = 0.5 * s;
      }
    }
  }
  return f;
}

Vec3 MetricFrame::d_sqrt_det() const {
  Vec3 d;
  for (int k = 0; k < 3; ++k) d[k] = 0.5 * sqrt_det * (ginv * dg[k]).trace();
  return d;
}

Vec3 cross_g(const MetricFrame& g, const Vec3& X, const Vec3& Y) {
  return g.sqrt_det * (g.ginv * X.cross(Y));
}

Vec3 curl_g(const MetricFrame& g, const VecSample& X) {
  if (!X.has_jac) {
    throw Error(ErrorCode::InsufficientData, "curl needs a Jacobian");
  }
  // D(i, j) = d_i X_j with X_j = g_jk X^k
  Mat3 D;
  for (int i = 0; i < 3; ++i) {
    D.row(i) = (g.dg[i] * X.value + g.g * X.jac.col(i)).transpose();
  }
  const Vec3 w(D(1, 2) - D(2, 1), D(2, 0) - D(0, 2), D(0, 1) - D(1, 0));
  return w / g.sqrt_det;
}

Vec3 grad_g(const MetricFrame& g, const Vec3& df) { return g.ginv * df; }

double div_g(const MetricFrame& g, const VecSample& X) {
  if (!X.has_jac) {
    throw Error(ErrorCode::InsufficientData, "divergence needs a Jacobian");
  }
  return X.jac.trace() + X.value.dot(g.d_sqrt_det()) / g.sqrt_det;
}

double div_euclid(const VecSample& X) {
  if (!X.has_jac) {
    throw Error(ErrorCode::InsufficientData, "divergence needs a Jacobian");
  }
  return X.jac.trace();
}

Mat3 deformation_tensor(const MetricFrame& g, const VecSample& X) {
  if (!X.has_jac) {
    throw Error(ErrorCode::InsufficientData, "deformation needs a Jacobian");
  }
  Mat3 L = g.g * X.jac;
  L = L + L.transpose().eval();
  for (int k = 0; k < 3; ++k) L += X.value[k] * g.dg[k];
  return L;
}

Vec3 lie_bracket(const VecSample& X, const VecSample& Y) {
  return Y.jac * X.value - X.jac * Y.value;
}

Vec3 covariant_derivative(const MetricFrame& g, const Vec3& X,
                          const VecSample& Y) {
  Vec3 r = Y.jac * X;
  for (int k = 0; k < 3; ++k) r[k] += X.dot(g.gamma[k] * Y.value);
  return r;
}

Mat3 fd_jacobian(const std::function<Vec3(const Vec3&)>& F, const Vec3& x,
                 double h) {
  Mat3 J;
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e[j] = h;
    J.col(j) = (F(x + e) - F(x - e)) / (2 * h);
  }
  return J;
}

Vec3 fd_gradient(const std::function<double(const Vec3&)>& f, const Vec3& x,
                 double h) {
  Vec3 d;
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e[j] = h;
    d[j] = (f(x + e) - f(x - e)) / (2 * h);
  }
  return d;
}

MetricFrame fd_frame(const std::function<Mat3(const Vec3&)>& g, const Vec3& x,
                     double h) {
  std::array<Mat3, 3> dg;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = h;
    dg[k] = (g(x + e) - g(x - e)) / (2 * h);
  }
  return MetricFrame::make(g(x), dg);
}

}  // namespace qsgs

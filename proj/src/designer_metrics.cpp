#include "qsgs/designer_metrics.hpp"

#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <sstream>

namespace qsgs {

namespace odeint = boost::numeric::odeint;

namespace {

const Mat3& rot_generator() {
  static const Mat3 J0 = (Mat3() << 0, -1, 0, 1, 0, 0, 0, 0, 0).finished();
  return J0;
}

Mat3 rotation(double s) {
  const double c = std::cos(s), sn = std::sin(s);
  Mat3 Rm;
  Rm << c, -sn, 0, sn, c, 0, 0, 0, 1;
  return Rm;
}

template <class T>
T vertical_shear(const DiffeoSpec& sp, const T& x, const T& y) {
  using std::atan2;
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T R = sqrt(x * x + y * y);
  const T phi = atan2(y, x);
  return sp.t * sp.r0 *
         (sin(T(sp.m1) * phi) +
          T(0.5) * cos(T(sp.m2) * phi) * (R - T(sp.R0)) / T(sp.r0));
}

template <class T>
T radial_shear(const DiffeoSpec& sp, const T& y, const T& z) {
  using std::cos;
  using std::exp;
  const T dy = y - T(0.5 * sp.R0);
  const double w2 = 4.0 * sp.r0 * sp.r0;
  return sp.t * sp.r0 *
         (z / T(sp.r0) * cos(y / T(sp.R0)) +
          T(sp.bump) * exp(-(dy * dy + z * z) / T(w2)));
}

template <class T>
T lateral_shear(const DiffeoSpec& sp, const T& x, const T& z) {
  using std::sin;
  const T zr = z / T(sp.r0);
  return sp.t * sp.r0 * T(0.5) * zr * zr * sin(x / T(sp.R0));
}

template <class T>
std::array<T, 3> apply_map(const DiffeoSpec& sp, const std::array<T, 3>& p) {
  const T z1 = p[2] + vertical_shear(sp, p[0], p[1]);
  const T x2 = p[0] + radial_shear(sp, p[1], z1);
  const T y3 = p[1] + lateral_shear(sp, x2, z1);
  return {T(sp.lambda) * x2, T(sp.lambda) * y3, T(sp.lambda) * z1};
}

}  // namespace

JetVec DiffeoSpec::apply(const JetVec& x) const { return apply_map(*this, x); }

Vec3 DiffeoSpec::forward(const Vec3& x) const {
  const auto y = apply_map<double>(*this, {x[0], x[1], x[2]});
  return Vec3(y[0], y[1], y[2]);
}

Vec3 DiffeoSpec::inverse(const Vec3& yv) const {
  const double x2 = yv[0] / lambda, y3 = yv[1] / lambda, z1 = yv[2] / lambda;
  const double y = y3 - lateral_shear(*this, x2, z1);
  const double x = x2 - radial_shear(*this, y, z1);
  const double z = z1 - vertical_shear(*this, x, y);
  return Vec3(x, y, z);
}

Mat3 DiffeoSpec::jacobian(const Vec3& x) const { return map_jet(*this, x).df; }

MapJet map_jet(const DiffeoSpec& spec, const Vec3& x) {
  const JetVec f = spec.apply(jet_point(x));
  MapJet m;
  for (int a = 0; a < 3; ++a) {
    m.f[a] = f[a].v;
    m.df.row(a) = f[a].d.transpose();
    m.hess[a] = f[a].h;
  }
  return m;
}

// ---------------------------------------------------------------------------

Vec3 SymmetryField::flow(const Vec3& x, double s) const {
  using State = std::array<double, 3>;
  State st{x[0], x[1], x[2]};
  auto rhs = [this](const State& q, State& dq, double) {
    const Vec3 v = eval(Vec3(q[0], q[1], q[2])).value;
    dq = {v[0], v[1], v[2]};
  };
  odeint::integrate_adaptive(
      odeint::make_controlled(atol, rtol, odeint::runge_kutta_dopri5<State>()),
      rhs, st, 0.0, s, s / 64.0);
  return Vec3(st[0], st[1], st[2]);
}

namespace {
using VarState = std::array<double, 12>;

void variational_rhs(const SymmetryField& xi, const VarState& q, VarState& dq) {
  const VecSample v = xi.eval(Vec3(q[0], q[1], q[2]));
  Eigen::Map<const Mat3> Phi(q.data() + 3);
  Eigen::Map<Mat3> dPhi(dq.data() + 3);
  dq[0] = v.value[0];
  dq[1] = v.value[1];
  dq[2] = v.value[2];
  dPhi = v.jac * Phi;
}
}  // namespace

std::pair<Vec3, Mat3> SymmetryField::flow_with_jacobian(const Vec3& x,
                                                        double s) const {
  VarState st{};
  st[0] = x[0];
  st[1] = x[1];
  st[2] = x[2];
  Eigen::Map<Mat3>(st.data() + 3) = Mat3::Identity();
  auto rhs = [this](const VarState& q, VarState& dq, double) {
    variational_rhs(*this, q, dq);
  };
  odeint::integrate_adaptive(
      odeint::make_controlled(atol, rtol,
                              odeint::runge_kutta_dopri5<VarState>()),
      rhs, st, 0.0, s, s / 64.0);
  return {Vec3(st[0], st[1], st[2]), Eigen::Map<Mat3>(st.data() + 3)};
}

VecSample RotationField::eval(const Vec3& x) const {
  return VecSample(Vec3(-x[1], x[0], 0.0), rot_generator());
}

Vec3 RotationField::flow(const Vec3& x, double s) const {
  return rotation(s) * x;
}

std::pair<Vec3, Mat3> RotationField::flow_with_jacobian(const Vec3& x,
                                                        double s) const {
  const Mat3 Rm = rotation(s);
  return {Rm * x, Rm};
}

VecSample PulledBackRotation::eval(const Vec3& x) const {
  const MapJet m = map_jet(spec_, x);
  const Vec3 xi0(-m.f[1], m.f[0], 0.0);
  const auto lu = m.df.partialPivLu();
  const Vec3 xi = lu.solve(xi0);
  Mat3 jac;
  for (int k = 0; k < 3; ++k) {
    Mat3 dM;  // d_k of df
    for (int a = 0; a < 3; ++a) dM.row(a) = m.hess[a].col(k).transpose();
    jac.col(k) = lu.solve(rot_generator() * m.df.col(k) - dM * xi);
  }
  return VecSample(xi, jac);
}

Vec3 PulledBackRotation::flow(const Vec3& x, double s) const {
  return spec_.inverse(rotation(s) * spec_.forward(x));
}

std::pair<Vec3, Mat3> PulledBackRotation::flow_with_jacobian(const Vec3& x,
                                                             double s) const {
  const Vec3 y = flow(x, s);
  const Mat3 J = spec_.jacobian(y).lu().solve(rotation(s) * spec_.jacobian(x));
  return {y, J};
}

// ---------------------------------------------------------------------------

MetricFrame PullbackMetric::frame(const Vec3& x) const {
  const MapJet m = map_jet(spec_, x);
  std::array<Mat3, 3> dg;
  for (int k = 0; k < 3; ++k) {
    Mat3 dM;
    for (int a = 0; a < 3; ++a) dM.row(a) = m.hess[a].col(k).transpose();
    dg[k] = dM.transpose() * m.df + m.df.transpose() * dM;
  }
  return MetricFrame::make(m.df.transpose() * m.df, dg);
}

MetricFrame PullbackMetric::frame_fd(const Vec3& x, double h) const {
  auto g = [this](const Vec3& p) {
    const Mat3 J = spec_.jacobian(p);
    return Mat3(J.transpose() * J);
  };
  return fd_frame(g, x, h);
}

std::pair<MetricFrame, VecSample> pullback_frame(const DiffeoSpec& spec,
                                                 const Vec3& p) {
  const double d = spec.jacobian(p).determinant();
  if (!(d > 0.0)) {
    std::ostringstream os;
    os << "det df = " << d << " at (" << p.transpose() << ")";
    throw Error(ErrorCode::Orientation, os.str());
  }
  return {PullbackMetric(spec).frame(p), PulledBackRotation(spec).eval(p)};
}

CircleAverageMetric::CircleAverageMetric(
    std::shared_ptr<const SymmetryField> xi, int n_quad, double length_scale,
    double closure_tol)
    : xi_(std::move(xi)),
      n_quad_(n_quad),
      h_fd_(1e-5 * length_scale),
      closure_tol_(closure_tol > 0 ? closure_tol : 1e-7 * length_scale) {}

Mat3 CircleAverageMetric::metric(const Vec3& x) const {
  VarState st{};
  st[0] = x[0];
  st[1] = x[1];
  st[2] = x[2];
  Eigen::Map<Mat3>(st.data() + 3) = Mat3::Identity();
  std::vector<double> times(n_quad_ + 1);
  for (int k = 0; k <= n_quad_; ++k) times[k] = 2.0 * M_PI * k / n_quad_;
  Mat3 acc = Mat3::Zero();
  Vec3 end = x;
  int count = 0;
  auto rhs = [this](const VarState& q, VarState& dq, double) {
    variational_rhs(*xi_, q, dq);
  };
  auto obs = [&](const VarState& q, double) {
    const Eigen::Map<const Mat3> Phi(q.data() + 3);
    if (count < n_quad_) acc += Phi.transpose() * Phi;
    end = Vec3(q[0], q[1], q[2]);
    ++count;
  };
  odeint::integrate_times(
      odeint::make_dense_output(xi_->atol, xi_->rtol,
                                odeint::runge_kutta_dopri5<VarState>()),
      rhs, st, times.begin(), times.end(), 2.0 * M_PI / n_quad_, obs);
  const double gap = (end - x).norm();
  if (gap > closure_tol_) {
    std::ostringstream os;
    os << "orbit closure gap " << gap << " exceeds " << closure_tol_;
    throw Error(ErrorCode::NonPeriodicOrbit, os.str());
  }
  acc /= n_quad_;
  return 0.5 * (acc + acc.transpose());
}

MetricFrame CircleAverageMetric::frame(const Vec3& x) const {
  return fd_frame([this](const Vec3& p) { return metric(p); }, x, h_fd_);
}

MetricFrame circle_average_metric(const SymmetryField& xi, const Vec3& p,
                                  int n_quad, double length_scale,
                                  double closure_tol) {
  // Non-owning view; the metric object does not outlive this call.
  std::shared_ptr<const SymmetryField> view(&xi, [](const SymmetryField*) {});
  return CircleAverageMetric(view, n_quad, length_scale, closure_tol).frame(p);
}

KillingResidual killing_residual(const SymmetryField& xi,
                                 const MetricSource& g,
                                 const std::vector<Vec3>& samples) {
  KillingResidual r;
  const MetricFrame delta = MetricFrame::euclidean();
  for (const Vec3& p : samples) {
    const VecSample v = xi.eval(p);
    r.metric = std::max(r.metric, deformation_tensor(g.frame(p), v).norm());
    r.euclidean = std::max(r.euclidean, deformation_tensor(delta, v).norm());
  }
  return r;
}

std::vector<Vec3> torus_samples(double R0, double rmax, int nr, int ntheta,
                                int nphi) {
  std::vector<Vec3> pts;
  pts.reserve(static_cast<size_t>(nr) * ntheta * nphi);
  for (int k = 0; k < nphi; ++k) {
    const double phi = 2 * M_PI * (k + 0.25) / nphi;
    for (int i = 0; i < nr; ++i) {
      const double r = rmax * (i + 0.5) / nr;
      for (int j = 0; j < ntheta; ++j) {
        const double th = 2 * M_PI * (j + 0.125) / ntheta;
        pts.push_back(Point3::from_toroidal(r, th, phi, R0).x);
      }
    }
  }
  return pts;
}

}  // namespace qsgs

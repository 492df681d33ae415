#include "qsgs/ggs.hpp"

#include <cmath>
#include <sstream>

namespace qsgs {

namespace {
constexpr int kU = 0, kS = 1, kV = 2;  // chart slots (u, s, v)
}

CoeffSample cross_section_coefficients(const MetricFrame& g,
                                       const VecSample& xi) {
  const Vec3& x = xi.value;
  Mat3 V;
  V.col(kU) = Vec3::UnitX();
  V.col(kS) = x;
  V.col(kV) = Vec3::UnitZ();
  const Mat3 Gc = V.transpose() * g.g * V;
  const double xi2 = Gc(kS, kS);
  const double detV = x[1];
  if (!(xi2 > 0) || !(detV > 0)) {
    std::ostringstream os;
    os << "|xi|_g^2 = " << xi2 << ", xi^y = " << detV;
    throw Error(ErrorCode::DegenerateSymmetry, os.str());
  }
  const Mat3 Gi = Gc.inverse();
  const double sg = g.sqrt_det;
  const double W = sg / xi2;
  const double sG = sg * detV;
  const Vec3 dsg = g.d_sqrt_det();

  CoeffSample c;
  c.sqrt_g = sg;
  c.xi2 = xi2;
  c.w_src = 1.0 / (sg * xi2);
  const int idx[2] = {kU, kV};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) c.A(a, b) = W * Gi(idx[a], idx[b]);
  }
  c.B.setZero();
  const int cart[2] = {0, 2};  // u along x, v along z
  for (int a = 0; a < 2; ++a) {
    const int k = cart[a];
    Mat3 dV = Mat3::Zero();
    dV.col(kS) = xi.jac.col(k);
    const Mat3 dGc = dV.transpose() * g.g * V + V.transpose() * g.dg[k] * V +
                     V.transpose() * g.g * dV;
    const Mat3 dGi = -Gi * dGc * Gi;
    const double dW = dsg[k] / xi2 - sg * dGc(kS, kS) / (xi2 * xi2);
    const double dsG = dsg[k] * detV + sg * xi.jac(1, k);
    for (int b = 0; b < 2; ++b) {
      const double wg = W * Gi(idx[a], idx[b]);
      c.B[b] += dW * Gi(idx[a], idx[b]) + W * dGi(idx[a], idx[b]) + dsG / sG * wg;
    }
  }

  // X = xi / |xi|^2 and its Jacobian
  Vec3 dxi2;
  for (int k = 0; k < 3; ++k) {
    dxi2[k] = 2 * x.dot(g.g * xi.jac.col(k)) + x.dot(g.dg[k] * x);
  }
  const VecSample X(x / xi2, xi.jac / xi2 - x * dxi2.transpose() / (xi2 * xi2));
  c.kappa = g.dot(X.value, curl_g(g, X));
  return c;
}

CoeffSample AxisymCoefficients::at(const Vec2& x) const {
  const double R = R0 + x[0];
  CoeffSample c;
  c.A = Mat2::Identity() / (R * R);
  c.B = Vec2(-1.0 / (R * R * R), 0.0);
  c.w_src = 1.0 / (R * R);
  c.kappa = 0.0;
  c.sqrt_g = 1.0;
  c.xi2 = R * R;
  return c;
}

GeometricCoefficients::GeometricCoefficients(
    std::shared_ptr<const MetricSource> g,
    std::shared_ptr<const SymmetryField> xi, double R0_)
    : g_(std::move(g)), xi_(std::move(xi)) {
  R0 = R0_;
}

CoeffSample GeometricCoefficients::at(const Vec2& x) const {
  const Vec3 p(R0 + x[0], 0.0, x[1]);
  return cross_section_coefficients(g_->frame(p), xi_->eval(p));
}

TabulatedCoefficients::TabulatedCoefficients(const CoefficientField& src,
                                             int nr, int nt, double rmax) {
  R0 = src.R0;
  const PolarGrid g(nr, nt, rmax);
  std::vector<GridValues> v(9, GridValues(g.size()));
  for (int i = 0; i < g.nr; ++i) {
    for (int j = 0; j < g.nt; ++j) {
      const int n = g.index(i, j);
      const CoeffSample c = src.at(g.point(i, j));
      v[0][n] = c.A(0, 0);
      v[1][n] = 0.5 * (c.A(0, 1) + c.A(1, 0));
      v[2][n] = c.A(1, 1);
      v[3][n] = c.B[0];
      v[4][n] = c.B[1];
      v[5][n] = c.w_src;
      v[6][n] = c.kappa;
      v[7][n] = c.sqrt_g;
      v[8][n] = c.xi2;
    }
  }
  for (auto& f : v) comp_.emplace_back(g, f, GhostRule::extrapolate());
}

CoeffSample TabulatedCoefficients::at(const Vec2& x) const {
  double q[9];
  for (int k = 0; k < 9; ++k) q[k] = comp_[k].value(x);
  CoeffSample c;
  c.A << q[0], q[1], q[1], q[2];
  c.B = Vec2(q[3], q[4]);
  c.w_src = q[5];
  c.kappa = q[6];
  c.sqrt_g = q[7];
  c.xi2 = q[8];
  return c;
}

PolarCoeffs l0_coefficients(double r, double theta, double R0) {
  const double c = std::cos(theta), s = std::sin(theta);
  const double R = R0 + r * c, R2 = R * R;
  PolarCoeffs p;
  p.arr = 1.0 / R2;
  p.art = 0.0;
  p.r2_att = 1.0 / R2;
  p.r_br = (1.0 - r * c / R) / R2;
  p.att = r > 0 ? p.r2_att / (r * r) : INFINITY;
  p.br = r > 0 ? p.r_br / r : INFINITY;
  p.bt = r > 0 ? s / (r * R2 * R) : 0.0;
  return p;
}

PolarCoeffs polar_coefficients(const CoeffSample& cs, double r, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  const Vec2 er(c, s), et(-s, c);
  const Mat2& A = cs.A;
  PolarCoeffs p;
  p.arr = er.dot(A * er);
  p.art = er.dot(A * et) / r;
  p.r2_att = et.dot(A * et);
  p.att = p.r2_att / (r * r);
  // Hess r = et et^T / r, Hess theta = -(er et^T + et er^T) / r^2
  const double a_hr = p.r2_att;
  const double a_ht = -2 * er.dot(A * et);
  p.r_br = a_hr + r * cs.B.dot(er);
  p.br = p.r_br / r;
  p.bt = a_ht / (r * r) + cs.B.dot(et) / r;
  return p;
}

SourceTerms ggs_sources(const CoeffSample& c, const BaseState& prof,
                        double psi) {
  SourceTerms t;
  t.F = prof.dP(psi) / c.sqrt_g;
  t.G = prof.CdC(psi) * c.w_src - prof.C(psi) * c.kappa;
  return t;
}

SourceTerms ggs_sources(const MetricFrame& g, const VecSample& xi,
                        const BaseState& prof, double psi) {
  return ggs_sources(cross_section_coefficients(g, xi), prof, psi);
}

double source_derivative(const CoeffSample& c, const BaseState& prof,
                         double psi) {
  return prof.ddP(psi) / c.sqrt_g + prof.d_CdC(psi) * c.w_src -
         prof.dC(psi) * c.kappa;
}

// ---------------------------------------------------------------------------

DiscreteBase make_base(const BaseState& s, const PolarGrid& g, bool discrete) {
  DiscreteBase b;
  b.grid = g;
  b.discrete = discrete;
  b.psi = GridValues(g.size());
  for (int i = 0; i < g.nr; ++i) {
    for (int j = 0; j < g.nt; ++j) b.psi[g.index(i, j)] = s.psi(g.r(i));
  }
  const GhostRule zero = GhostRule::dirichlet_zero(g.nt);
  if (discrete) {
    const AxisymCoefficients L0(s.params().R0);
    NodeCoeffs nc;
    nc.A.resize(g.size());
    nc.B.resize(g.size());
    nc.c = Eigen::VectorXd::Zero(g.size());
    std::vector<CoeffSample> cs(g.size());
    for (int i = 0; i < g.nr; ++i) {
      for (int j = 0; j < g.nt; ++j) {
        const int n = g.index(i, j);
        cs[n] = L0.at(g.point(i, j));
        nc.A[n] = cs[n].A;
        nc.B[n] = cs[n].B;
      }
    }
    const LinearOperator op(g, nc, GhostKind::Dirichlet);
    const Eigen::VectorXd bc = Eigen::VectorXd::Zero(g.nt);
    GridValues rhs(g.size());
    for (int it = 1; it <= 100; ++it) {
      for (int n = 0; n < g.size(); ++n) {
        const SourceTerms t = ggs_sources(cs[n], s, b.psi[n]);
        rhs[n] = -t.F - t.G;
      }
      const GridValues next = dirichlet_solve(op, rhs, bc);
      const double change = (next - b.psi).lpNorm<Eigen::Infinity>();
      b.psi = next;
      b.picard_iterations = it;
      if (change <= 1e-14 * b.psi.lpNorm<Eigen::Infinity>()) break;
      if (it == 100) {
        throw Error(ErrorCode::Divergence, "base-state Picard iteration stalled");
      }
    }
  }
  b.bundle = cart_bundle(g, b.psi, zero);
  b.interp = Interpolator(g, b.psi, zero);
  if (discrete) {
    Vec2 a = Vec2::Zero();
    for (int it = 0; it < 50; ++it) {
      const CartDerivs d = b.interp.eval(a);
      const Vec2 step = d.hess.ldlt().solve(d.grad);
      a -= step;
      if (step.norm() < 1e-15 * g.r0) break;
    }
    b.axis = a;
    b.psi_axis = b.interp.value(a);
  } else {
    b.axis = Vec2::Zero();
    b.psi_axis = s.params().psi_bar;
  }
  return b;
}

NodeCoeffs linearized_coeffs(const CoefficientField& L0, const BaseState& s,
                             const DiscreteBase& b) {
  const PolarGrid& g = b.grid;
  NodeCoeffs nc;
  nc.A.resize(g.size());
  nc.B.resize(g.size());
  nc.c = Eigen::VectorXd::Zero(g.size());
  for (int i = 0; i < g.nr; ++i) {
    for (int j = 0; j < g.nt; ++j) {
      const int n = g.index(i, j);
      const CoeffSample cs = L0.at(g.point(i, j));
      nc.A[n] = cs.A;
      nc.B[n] = cs.B;
      nc.c[n] = source_derivative(cs, s, b.psi[n]);
    }
  }
  return nc;
}

SpectrumResult h1_spectrum(const CoefficientField& L0, const BaseState& s,
                           const DiscreteBase& b) {
  const LinearOperator op(b.grid, linearized_coeffs(L0, s, b), GhostKind::Dirichlet);
  return smallest_eigenvalue(op);
}

CoeffDistance coefficient_distance(const PolarGrid& g,
                                   const CoefficientField& L0,
                                   const CoefficientField& L,
                                   const BaseState& s, const GridValues& psi0,
                                   const Eigen::VectorXd& delta_b) {
  double da = 0, na = 0, db = 0, nb = 0, dG = 0, nG = 0;
  double ell = INFINITY;
  for (int i = 0; i < g.nr; ++i) {
    for (int j = 0; j < g.nt; ++j) {
      const int n = g.index(i, j);
      const Vec2 x = g.point(i, j);
      const CoeffSample c0 = L0.at(x), c1 = L.at(x);
      da = std::max(da, (c1.A - c0.A).cwiseAbs().maxCoeff());
      na = std::max(na, c0.A.cwiseAbs().maxCoeff());
      db = std::max(db, (c1.B - c0.B).cwiseAbs().maxCoeff());
      nb = std::max(nb, c0.B.cwiseAbs().maxCoeff());
      const double G0 = ggs_sources(c0, s, psi0[n]).G;
      const double G1 = ggs_sources(c1, s, psi0[n]).G;
      dG = std::max(dG, std::abs(G1 - G0));
      nG = std::max(nG, std::abs(G0));
      const Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (c1.A + c1.A.transpose()));
      ell = std::min(ell, es.eigenvalues()[0]);
    }
  }
  CoeffDistance d;
  d.a = na > 0 ? da / na : da;
  d.b = nb > 0 ? db / nb : db;
  d.G = nG > 0 ? dG / nG : dG;
  d.boundary = delta_b.size() ? delta_b.lpNorm<Eigen::Infinity>() / g.r0 : 0.0;
  d.min_ellipticity = ell;
  return d;
}

}  // namespace qsgs

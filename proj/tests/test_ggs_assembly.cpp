#include <gtest/gtest.h>

#include <random>

#include "qsgs/ggs.hpp"
#include "qsgs/run.hpp"

using namespace qsgs;

namespace {

// psi = u^2 v + v^3 on the cross-section; L0 psi = (psi_uu + psi_vv) / R^2 - psi_u / R^3
double psi_polar(double r, double th) {
  const double u = r * std::cos(th), v = r * std::sin(th);
  return u * u * v + v * v * v;
}
double l0_direct(double r, double th, double R0) {
  const double u = r * std::cos(th), v = r * std::sin(th), R = R0 + u;
  return 8 * v / (R * R) - 2 * u * v / (R * R * R);
}

double apply_polar(const PolarCoeffs& p, double r, double th) {
  const double h = 1e-4;
  auto f = [](double a, double b) { return psi_polar(a, b); };
  const double fr = (f(r + h, th) - f(r - h, th)) / (2 * h);
  const double ft = (f(r, th + h) - f(r, th - h)) / (2 * h);
  const double frr = (f(r + h, th) - 2 * f(r, th) + f(r - h, th)) / (h * h);
  const double ftt = (f(r, th + h) - 2 * f(r, th) + f(r, th - h)) / (h * h);
  const double frt = (f(r + h, th + h) - f(r + h, th - h) - f(r - h, th + h) + f(r - h, th - h)) / (4 * h * h);
  return p.arr * frr + 2 * p.art * frt + p.att * ftt + p.br * fr + p.bt * ft;
}

std::shared_ptr<PullbackMetric> pullback(double t) {
  DiffeoSpec s;
  s.t = t;
  return std::make_shared<PullbackMetric>(s);
}
std::shared_ptr<PulledBackRotation> rotation(double t) {
  DiffeoSpec s;
  s.t = t;
  return std::make_shared<PulledBackRotation>(s);
}

double rel_dev(const CoeffSample& a, const CoeffSample& b) {
  const double sa = a.A.cwiseAbs().maxCoeff(), sb = b.B.cwiseAbs().maxCoeff();
  return std::max((a.A - b.A).cwiseAbs().maxCoeff() / sa, (a.B - b.B).cwiseAbs().maxCoeff() / sb);
}

}  // namespace

TEST(L0Coefficients, PoleValue) {
  const PolarCoeffs p = l0_coefficients(0.0, 0.3, 10.0);
  EXPECT_DOUBLE_EQ(p.arr, 0.01);
  EXPECT_DOUBLE_EQ(p.art, 0.0);
  EXPECT_DOUBLE_EQ(p.r2_att, 0.01);
  EXPECT_DOUBLE_EQ(p.r_br, 0.01);
}

TEST(L0Coefficients, PoloidalFirstOrder) {
  // b^theta = sin(theta) / (r R^3) from d_R = cos d_r - (sin / r) d_theta
  const PolarCoeffs p = l0_coefficients(0.5, M_PI / 2, 10.0);
  EXPECT_NEAR(p.bt, 2e-3, 1e-15);
  EXPECT_NEAR(p.br, 1.0 / (0.5 * 100.0), 1e-15);
}

TEST(L0Coefficients, ParityFlipsOnlyBTheta) {
  for (double th : {0.3, 1.2, 2.5}) {
    const PolarCoeffs a = l0_coefficients(0.4, th, 10.0), b = l0_coefficients(0.4, -th, 10.0);
    EXPECT_DOUBLE_EQ(a.arr, b.arr);
    EXPECT_DOUBLE_EQ(a.att, b.att);
    EXPECT_DOUBLE_EQ(a.br, b.br);
    EXPECT_DOUBLE_EQ(a.art, b.art);
    EXPECT_DOUBLE_EQ(a.bt, -b.bt);
  }
}

TEST(L0Coefficients, AppliedToPolynomial) {
  for (double r : {0.1, 0.3, 0.45}) {
    for (double th : {0.0, 0.7, 2.0, 4.0}) {
      const double lhs = apply_polar(l0_coefficients(r, th, 10.0), r, th);
      EXPECT_NEAR(lhs, l0_direct(r, th, 10.0), 1e-8) << r << " " << th;
    }
  }
}

TEST(GeneralCoefficients, EuclideanReducesToL0) {
  const GeometricCoefficients G(std::make_shared<EuclideanMetric>(), std::make_shared<RotationField>(), 10.0);
  const AxisymCoefficients A(10.0);
  for (double r : {0.05, 0.25, 0.5}) {
    for (double th : {0.0, 1.0, 3.0, 5.0}) {
      const Vec2 x(r * std::cos(th), r * std::sin(th));
      const CoeffSample g = G.at(x), a = A.at(x);
      EXPECT_LT(rel_dev(g, a), 1e-8);
      const PolarCoeffs pg = polar_coefficients(g, r, th), p0 = l0_coefficients(r, th, 10.0);
      EXPECT_NEAR(pg.arr, p0.arr, 1e-8 * p0.arr);
      EXPECT_NEAR(pg.att, p0.att, 1e-8 * p0.att);
      EXPECT_NEAR(pg.br, p0.br, 1e-8 * std::abs(p0.br));
      EXPECT_NEAR(pg.bt, p0.bt, 1e-8 * 0.01 + 1e-8 * std::abs(p0.bt));
      EXPECT_NEAR(pg.art, 0.0, 1e-12);
    }
  }
}

TEST(GeneralCoefficients, ConformalScaling) {
  // g = lam^2 delta, xi = xi0: sqrt g = lam^3, |xi|^2 = lam^2 R^2, g^-1 = lam^-2
  const double lam = 1.3;
  DiffeoSpec s;
  s.t = 0.0;
  s.lambda = lam;
  const GeometricCoefficients G(std::make_shared<PullbackMetric>(s), std::make_shared<PulledBackRotation>(s), 10.0);
  const AxisymCoefficients A(10.0);
  for (const Vec2 x : {Vec2(0.1, 0.2), Vec2(-0.3, 0.1), Vec2(0.0, -0.4)}) {
    const CoeffSample g = G.at(x), a = A.at(x);
    EXPECT_LT((g.A - a.A / lam).norm(), 1e-12);
    EXPECT_LT((g.B - a.B / lam).norm(), 1e-12);
    EXPECT_NEAR(g.sqrt_g, lam * lam * lam, 1e-12);
  }
}

TEST(GeneralCoefficients, LinearInDeformation) {
  const AxisymCoefficients A(10.0);
  std::vector<double> ts, da;
  for (double t : {1e-3, 1e-2, 1e-1}) {
    const GeometricCoefficients G(pullback(t), rotation(t), 10.0);
    double d = 0;
    for (int k = 0; k < 16; ++k) {
      const double th = 2 * M_PI * k / 16;
      const Vec2 x(0.4 * std::cos(th), 0.4 * std::sin(th));
      d = std::max(d, (G.at(x).A - A.at(x).A).cwiseAbs().maxCoeff());
    }
    ts.push_back(t);
    da.push_back(d / 0.01);
  }
  const SlopeFit f = loglog_fit(ts, da);
  EXPECT_NEAR(f.slope, 1.0, 0.1);
  std::printf("|a - a0| / (t |a0|) = %.3f\n", da[0] / ts[0]);
}

TEST(GeneralCoefficients, EllipticAndXiInvariant) {
  auto g = pullback(0.1);
  auto xi = rotation(0.1);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.35, 0.35), ang(0, 2 * M_PI);
  for (int n = 0; n < 20; ++n) {
    const Vec3 p(10 + u(rng), 0.0, u(rng));
    const Vec3 q = xi->flow(p, ang(rng));
    const MetricFrame gp = g->frame(p), gq = g->frame(q);
    const VecSample xp = xi->eval(p), xq = xi->eval(q);
    EXPECT_NEAR(gp.norm2(xp.value), gq.norm2(xq.value), 1e-8 * gp.norm2(xp.value));
    EXPECT_NEAR(gp.sqrt_det, gq.sqrt_det, 1e-9);
    const CoeffSample c = cross_section_coefficients(gp, xp);
    EXPECT_GT(c.A.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff(), 0.0);
  }
}

TEST(GeneralCoefficients, DegenerateSymmetry) {
  const EuclideanMetric d;
  const MetricFrame g = d.frame(Vec3(10, 0, 0));
  VecSample z(Vec3::Zero(), Mat3::Zero());
  EXPECT_THROW(cross_section_coefficients(g, z), Error);
}

TEST(Sources, EuclideanCurlTermVanishes) {
  const BaseState s = BaseState::build(BaseParams{});
  const EuclideanMetric d;
  const RotationField xi0;
  for (const Vec3 p : {Vec3(10.2, 0, 0.1), Vec3(9.7, 0, -0.3)}) {
    const CoeffSample c = cross_section_coefficients(d.frame(p), xi0.eval(p));
    EXPECT_LT(std::abs(c.kappa), 1e-10);
    const SourceTerms t = ggs_sources(d.frame(p), xi0.eval(p), s, 0.4);
    const double R = p[0];
    EXPECT_NEAR(t.G, s.CdC(0.4) / (R * R), 1e-10);
    EXPECT_NEAR(t.F, s.dP(0.4), 1e-15);
  }
}

TEST(Sources, TrivialProfiles) {
  auto g = pullback(0.05);
  auto xi = rotation(0.05);
  const Vec3 p(10.1, 0, 0.2);
  BaseParams bp;
  bp.c_bar = 0.0;
  const SourceTerms a = ggs_sources(g->frame(p), xi->eval(p), BaseState::build(bp), 0.5);
  EXPECT_EQ(a.G, 0.0);
  bp.psi_bar = 0.5;
  bp.c_bar = 2.0;  // p_bar = 2 psi_bar - (c_bar r0)^2 = 0
  const BaseState flat = BaseState::build(bp);
  EXPECT_EQ(flat.p_bar(), 0.0);
  EXPECT_EQ(ggs_sources(g->frame(p), xi->eval(p), flat, 0.25).F, 0.0);
}

TEST(Distance, IdenticalAndLinear) {
  const BaseState s = BaseState::build(BaseParams{});
  const PolarGrid grid(16, 16, 0.5);
  const DiscreteBase b = make_base(s, grid, true);
  const AxisymCoefficients A(10.0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(grid.nt);
  const CoeffDistance d0 = coefficient_distance(grid, A, A, s, b.psi, zero);
  EXPECT_EQ(d0.total(), 0.0);
  EXPECT_GT(d0.min_ellipticity, 0.0);

  std::vector<double> ts, ds;
  for (double t : {1e-3, 3e-3, 1e-2, 3e-2, 1e-1}) {
    const GeometricCoefficients G(pullback(t), rotation(t), 10.0);
    const CoeffDistance d = coefficient_distance(grid, A, G, s, b.psi, zero);
    EXPECT_GT(d.min_ellipticity, 0.0);
    ts.push_back(t);
    ds.push_back(d.total());
  }
  const SlopeFit f = loglog_fit(ts, ds);
  EXPECT_NEAR(f.slope, 1.0, 0.1);
  EXPECT_GT(f.r2, 0.99);
  std::printf("distance / t = %.3f\n", ds[0] / ts[0]);
}

TEST(Tabulated, MatchesDirect) {
  const GeometricCoefficients G(pullback(0.05), rotation(0.05), 10.0);
  const TabulatedCoefficients T(G, 24, 24, 0.75);
  for (const Vec2 x : {Vec2(0.1, 0.2), Vec2(-0.3, 0.25), Vec2(0.0, -0.45)}) {
    EXPECT_LT(rel_dev(T.at(x), G.at(x)), 1e-4);
  }
}

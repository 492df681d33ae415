#include <gtest/gtest.h>

#include "qsgs/deformation.hpp"

using namespace qsgs;

namespace {

GridValues nodal(const PolarGrid& g, const std::function<double(double, double)>& f) {
  GridValues v(g.size());
  for (int i = 0; i < g.nr; ++i)
    for (int j = 0; j < g.nt; ++j) {
      const Vec2 p = g.point(i, j);
      v[g.index(i, j)] = f(p[0], p[1]);
    }
  return v;
}

std::shared_ptr<CoefficientField> family(double t) {
  DiffeoSpec s;
  s.t = t;
  return std::make_shared<GeometricCoefficients>(std::make_shared<PullbackMetric>(s),
                                                 std::make_shared<PulledBackRotation>(s), 10.0);
}

// Manufactured stream function: phi = eps v (u^2 - 0.05) cos(3u)
struct Manufactured {
  double eps;
  double phi(double u, double v) const { return eps * v * (u * u - 0.05) * std::cos(3 * u); }
  // grad-perp phi = (phi_v, -phi_u)
  Vec2 disp(const Vec2& y) const {
    const double u = y[0], v = y[1];
    const double pu = eps * v * (2 * u * std::cos(3 * u) - 3 * (u * u - 0.05) * std::sin(3 * u));
    const double pv = eps * (u * u - 0.05) * std::cos(3 * u);
    return Vec2(pv, -pu);
  }
  Vec2 inverse(const Vec2& x) const {
    Vec2 y = x;
    for (int it = 0; it < 100; ++it) {
      const double h = 1e-7;
      const Vec2 r = y + disp(y) - x;
      Mat2 J;
      J.col(0) = (disp(y + Vec2(h, 0)) - disp(y - Vec2(h, 0))) / (2 * h) + Vec2(1, 0);
      J.col(1) = (disp(y + Vec2(0, h)) - disp(y - Vec2(0, h))) / (2 * h) + Vec2(0, 1);
      const Vec2 step = J.inverse() * r;
      y -= step;
      if (step.norm() < 1e-15) break;
    }
    return y;
  }
};

}  // namespace

TEST(NEta, ZeroPair) {
  const PolarGrid g(16, 16, 0.5);
  const DeformationPair p{GridValues::Zero(g.size()), GridValues::Zero(g.size())};
  const Displacement d = make_displacement(g, p, 0.0);
  EXPECT_EQ(eval_N_eta(d).lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(d.max_det_defect, 0.0);
}

TEST(NEta, DeterminantIdentity) {
  // eta = s (u^2 - v^2) / 2 has Hess eta = diag(s, -s), so -det H = s^2; the
  // discrete Hessian carries O(h^2) angular error
  const double s = 0.2;
  std::vector<double> err;
  for (int n : {24, 48, 96}) {
    const PolarGrid g(n, n, 0.5);
    const DeformationPair p{nodal(g, [&](double u, double v) { return s * (u * u - v * v) / 2; }),
                            GridValues::Zero(g.size())};
    const GridValues N = eval_N_eta(make_displacement(g, p, 0.0));
    double e = 0;
    for (int i = 0; i < g.nr - 2; ++i)
      for (int j = 0; j < g.nt; ++j) e = std::max(e, std::abs(N[g.index(i, j)] - s * s));
    err.push_back(e);
  }
  std::printf("N_eta errors %.3e %.3e %.3e\n", err[0], err[1], err[2]);
  EXPECT_LT(err[2], 1e-2 * s * s);
  EXPECT_GE(err[0] / err[1], 3.5);
  EXPECT_GE(err[1] / err[2], 3.5);
}

TEST(NEta, NeumannSolveGivesUnitJacobian) {
  // Delta eta = N_eta(eta, phi) iterated with phi fixed: det grad gamma -> 1
  std::vector<double> defects;
  for (int n : {24, 48}) {
    const PolarGrid g(n, n, 0.5);
    const NeumannSolver ns(g);
    DeformationPair p{GridValues::Zero(g.size()),
                      nodal(g, [](double u, double v) { return 0.02 * u * v * (0.25 - u * u - v * v); })};
    double q = 0.0;
    for (int it = 0; it < 30; ++it) {
      const GridValues N = eval_N_eta(make_displacement(g, p, q));
      q = integrate(g, N) / (2 * M_PI * g.r0);
      p.eta = ns.solve(N, q).eta;
    }
    defects.push_back(make_displacement(g, p, q).max_det_defect);
  }
  // the discrete Laplacian is the trace of the discrete Hessian, so the
  // identity holds to roundoff at the nodes, not just to O(h^2)
  std::printf("det defects %.3e %.3e\n", defects[0], defects[1]);
  EXPECT_LT(defects[0], 1e-12);
  EXPECT_LT(defects[1], 1e-12);
}

TEST(NPhi, ZeroPairAxisymmetric) {
  const BaseState s = BaseState::build(BaseParams{});
  const DiscreteBase b = make_base(s, PolarGrid(24, 24, 0.5), true);
  const AxisymCoefficients L0(10.0);
  const LinearOperator lin(b.grid, linearized_coeffs(L0, s, b), GhostKind::Dirichlet);
  const GridValues z = GridValues::Zero(b.grid.size());
  const Displacement d = make_displacement(b.grid, {z, z}, 0.0);
  const GridValues N = eval_N_phi(d, b, L0, L0, s, lin, z, Eigen::VectorXd::Zero(b.grid.nt));
  EXPECT_LT(N.lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(NPhi, TwoMeshOracle) {
  // (L0 psi)(gamma(y)) from finite differences of psi = psi0 o gamma^-1
  const BaseState s = BaseState::build(BaseParams{});
  const AxisymCoefficients L0(10.0);
  const Manufactured m{0.05};
  std::vector<double> err;
  for (int n : {32, 64}) {
    const DiscreteBase b = make_base(s, PolarGrid(n, n, 0.5), false);
    const PolarGrid& g = b.grid;
    const LinearOperator lin(g, linearized_coeffs(L0, s, b), GhostKind::Dirichlet);
    const GridValues z = GridValues::Zero(g.size());
    const DeformationPair p{z, nodal(g, [&](double u, double v) { return m.phi(u, v); })};
    const Displacement d = make_displacement(g, p, 0.0);
    const GridValues N = eval_N_phi(d, b, L0, L0, s, lin, z, Eigen::VectorXd::Zero(g.nt));
    auto psi = [&](const Vec2& x) { return s.psi(m.inverse(x).norm()); };
    double e = 0, scale = 0;
    for (int i = 0; i < g.nr * 3 / 4; ++i) {
      for (int j = 0; j < g.nt; ++j) {
        const Vec2 y = g.point(i, j);
        const Vec2 x = y + m.disp(y);
        const double h = 1e-3;
        const double pxx = (psi(x + Vec2(h, 0)) - 2 * psi(x) + psi(x - Vec2(h, 0))) / (h * h);
        const double pyy = (psi(x + Vec2(0, h)) - 2 * psi(x) + psi(x - Vec2(0, h))) / (h * h);
        const double pxy = (psi(x + Vec2(h, h)) - psi(x + Vec2(h, -h)) - psi(x - Vec2(h, -h)) + psi(x - Vec2(h, h))) / (4 * h * h);
        const double px = (psi(x + Vec2(h, 0)) - psi(x - Vec2(h, 0))) / (2 * h);
        const double py = (psi(x + Vec2(0, h)) - psi(x - Vec2(0, h))) / (2 * h);
        const CoeffSample c = L0.at(x), c0 = L0.at(y);
        const double lpsi = c.A(0, 0) * pxx + 2 * c.A(0, 1) * pxy + c.A(1, 1) * pyy + c.B[0] * px + c.B[1] * py;
        const double l0 = c0.A.trace() * s.ddpsi(0) + c0.B.dot(-8.0 * y);
        const double ref = l0 - lpsi;
        e = std::max(e, std::abs(N[g.index(i, j)] - ref));
        scale = std::max(scale, std::abs(ref));
      }
    }
    err.push_back(e / scale);
  }
  std::printf("two-mesh relative errors %.3e %.3e\n", err[0], err[1]);
  EXPECT_LT(err[1], 0.1);
  EXPECT_GT(err[0] / err[1], 3.0);
}

TEST(NPhi, QuadraticInPair) {
  // c_bar = 0 makes L0 psi0 uniform, so the linear part cancels. The two
  // rings at the pole and at the rim are excluded: there the stencil of
  // Lin(d_s phi) and the nested differences of the composed term disagree by
  // an h-independent amount linear in the pair (pole partner and Dirichlet
  // ghost), which a solve turns into an O(h^2) error.
  BaseParams bp;
  bp.c_bar = 0.0;
  const BaseState s = BaseState::build(bp);
  const DiscreteBase b = make_base(s, PolarGrid(64, 64, 0.5), true);
  const PolarGrid& g = b.grid;
  const AxisymCoefficients L0(10.0);
  const LinearOperator lin(g, linearized_coeffs(L0, s, b), GhostKind::Dirichlet);
  const GridValues z = GridValues::Zero(g.size());
  std::vector<double> nn;
  for (double eps : {0.08, 0.04, 0.02}) {
    const Manufactured m{eps};
    const DeformationPair p{z, nodal(g, [&](double u, double v) { return m.phi(u, v); })};
    Eigen::VectorXd tr;
    const GridValues Phi = streamline_derivative(b, p.phi, &tr);
    const GridValues N = eval_N_phi(make_displacement(g, p, 0.0), b, L0, L0, s, lin, Phi, tr);
    nn.push_back(N.segment(2 * g.nt, (g.nr - 4) * g.nt).lpNorm<Eigen::Infinity>());
  }
  std::printf("N_phi %.3e %.3e %.3e\n", nn[0], nn[1], nn[2]);
  EXPECT_GE(nn[0] / nn[1], 3.5);
  EXPECT_GE(nn[1] / nn[2], 3.5);
}

TEST(NPhi, ProfileIndependent) {
  const BaseState s = BaseState::build(BaseParams{});
  BaseParams other;
  other.c_bar = 0.3;
  const DiscreteBase b = make_base(s, PolarGrid(24, 24, 0.5), true);
  const AxisymCoefficients L0(10.0);
  const auto L = family(0.02);
  const LinearOperator lin(b.grid, linearized_coeffs(L0, s, b), GhostKind::Dirichlet);
  const Manufactured m{0.01};
  const GridValues z = GridValues::Zero(b.grid.size());
  const DeformationPair p{z, nodal(b.grid, [&](double u, double v) { return m.phi(u, v); })};
  const Displacement d = make_displacement(b.grid, p, 0.0);
  const Eigen::VectorXd tr = Eigen::VectorXd::Zero(b.grid.nt);
  const GridValues a = eval_N_phi(d, b, *L, L0, s, lin, z, tr);
  const GridValues c = eval_N_phi(d, b, *L, L0, BaseState::build(other), lin, z, tr);
  EXPECT_EQ((a - c).lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Boundary, ZeroPair) {
  const BaseState s = BaseState::build(BaseParams{});
  const DiscreteBase b = make_base(s, PolarGrid(24, 32, 0.5), true);
  const GridValues z = GridValues::Zero(b.grid.size());
  const Displacement d = make_displacement(b.grid, {z, z}, 0.0);
  const BoundaryRemainder r0 = boundary_remainder(d, b, BoundarySpec::circle(0.5));
  EXPECT_LT(r0.b1.lpNorm<Eigen::Infinity>(), 1e-15);
  EXPECT_LT(r0.trace.lpNorm<Eigen::Infinity>(), 1e-15);
  EXPECT_NEAR(r0.neumann_const, 0.0, 1e-15);

  BoundarySpec c2 = BoundarySpec::circle(0.5);
  c2.a = {0.0, 0.01};
  const BoundaryRemainder r = boundary_remainder(d, b, c2);
  const Eigen::VectorXd db = c2.delta_b(b.grid);
  EXPECT_LT((r.b1 - db).lpNorm<Eigen::Infinity>(), 1e-15);
  EXPECT_NEAR(r.mean, 0.0, 1e-15);
}

TEST(Boundary, LinearTermsCancel) {
  const BaseState s = BaseState::build(BaseParams{});
  const DiscreteBase b = make_base(s, PolarGrid(32, 32, 0.5), true);
  const GridValues z = GridValues::Zero(b.grid.size());
  std::vector<double> nb;
  for (double eps : {0.02, 0.01, 0.005}) {
    const Manufactured m{eps};
    const DeformationPair p{nodal(b.grid, [&](double u, double v) { return eps * (u * u * u + u * v); }),
                            nodal(b.grid, [&](double u, double v) { return m.phi(u, v); })};
    nb.push_back(boundary_remainder(make_displacement(b.grid, p, 0.0), b, BoundarySpec::circle(0.5)).b1.lpNorm<Eigen::Infinity>());
  }
  std::printf("b1 %.3e %.3e %.3e\n", nb[0], nb[1], nb[2]);
  EXPECT_GE(nb[0] / nb[1], 3.5);
  EXPECT_GE(nb[1] / nb[2], 3.5);
}

TEST(BoundarySpecTest, AreaAndAutoscale) {
  BoundarySpec b = BoundarySpec::circle(0.5);
  b.a = {0.05, 0.02};
  b.b = {0.0, 0.01};
  EXPECT_NEAR(b.area_defect(), 0.5 * (0.05 * 0.05 + 0.02 * 0.02 + 0.01 * 0.01), 1e-15);
  EXPECT_NEAR(b.autoscaled().area_defect(), 0.0, 1e-14);
  b.a0 = -1.2;
  EXPECT_THROW(b.validate(), Error);
}

TEST(Solver, AxisymmetricFixedPoint) {
  const BaseState s = BaseState::build(BaseParams{});
  const DiscreteBase b = make_base(s, PolarGrid(32, 32, 0.5), true);
  auto L0 = std::make_shared<AxisymCoefficients>(10.0);
  const DeformationSolver solver(s, b, L0, L0, BoundarySpec::circle(0.5));
  const IterState s1 = solver.iterate_step(solver.initial_state());
  EXPECT_LT(s1.pair.eta.lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_LT(s1.pair.phi.lpNorm<Eigen::Infinity>(), 1e-12);
  const ConvergenceResult r = run_to_convergence(solver);
  ASSERT_TRUE(r.converged) << r.failure;
  for (size_t k = 0; k < r.P_nodes.size(); ++k) {
    EXPECT_NEAR(r.P_values[k], s.P(r.P_nodes[k]), 1e-9) << r.P_nodes[k];
  }
}

TEST(Solver, SmallDeformationConverges) {
  const BaseState s = BaseState::build(BaseParams{});
  const DiscreteBase b = make_base(s, PolarGrid(48, 48, 0.5), true);
  auto L0 = std::make_shared<AxisymCoefficients>(10.0);
  const DeformationSolver solver(s, b, L0, family(1e-2), BoundarySpec::circle(0.5));
  const ConvergenceResult r = run_to_convergence(solver);
  ASSERT_TRUE(r.converged) << r.failure;
  EXPECT_LE(static_cast<int>(r.log.size()), 30);
  EXPECT_LT(r.max_ratio, 1.0);
  const StepLog& last = r.log.back();
  std::printf("steps %zu ratio %.3f det %.2e boundary %.2e loop %.2e\n", r.log.size(), r.max_ratio,
              last.det_defect, last.boundary_defect, last.loop_defect);
  for (const StepLog& l : r.log) EXPECT_LE(l.loop_defect, 1e-8);
  const double h = 0.5 / 48;
  EXPECT_LT(last.det_defect, 10 * (h * h + 1e-9));
  EXPECT_LT(last.boundary_defect, 10 * (h * h + 1e-9));

  // level sets of psi are star-shaped about gamma(axis): one crossing per ray
  const DeformedFlux psi(b, r.disp);
  const Vec2 a = psi.axis();
  for (double f : {0.2, 0.5, 0.8}) {
    const double c = f * b.psi_axis;
    for (int k = 0; k < 32; ++k) {
      const double th = 2 * M_PI * k / 32;
      const Vec2 e(std::cos(th), std::sin(th));
      int crossings = 0;
      double prev = psi.eval(a).w - c;
      for (int m = 1; (a + 0.005 * m * e).norm() < 0.499; ++m) {
        const double cur = psi.eval(a + 0.005 * m * e).w - c;
        if ((cur < 0) != (prev < 0)) ++crossings;
        prev = cur;
      }
      EXPECT_EQ(crossings, 1) << f << " " << th;
    }
  }
}

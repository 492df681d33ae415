#include <gtest/gtest.h>

#include <random>

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

double poisson_error(int n, bool quadratic) {
  const PolarGrid g(n, n, 1.0);
  const LinearOperator op(g, NodeCoeffs::laplacian(g), GhostKind::Dirichlet);
  // u = 1 - r^2, or u = (1 - r^2) e^x with Delta u = e^x (1 - r^2 - 4 - 4x)
  const GridValues rhs = quadratic ? GridValues::Constant(g.size(), -4.0)
                                   : nodal(g, [](double x, double y) { return std::exp(x) * (-3 - x * x - y * y - 4 * x); });
  const GridValues u = dirichlet_solve(op, rhs, Eigen::VectorXd::Zero(g.nt));
  const GridValues exact = nodal(g, [&](double x, double y) { return (1 - x * x - y * y) * (quadratic ? 1.0 : std::exp(x)); });
  return (u - exact).lpNorm<Eigen::Infinity>();
}

ScalarField2 analytic_psi(const BaseState& s) {
  return [s](const Vec2& x) {
    const double a = s.params().psi_bar / (s.params().r0 * s.params().r0);
    CartDerivs d;
    d.w = s.psi(x.norm());
    d.grad = -2 * a * x;
    d.hess = -2 * a * Mat2::Identity();
    return d;
  };
}

struct BaseCase {
  BaseState s = BaseState::build(BaseParams{});
  DiscreteBase b;
  std::unique_ptr<LinearOperator> op;
  std::unique_ptr<FluxGeometry> fg;

  BaseCase(int n, bool discrete) {
    b = make_base(s, PolarGrid(n, n, 0.5), discrete);
    const AxisymCoefficients L0(10.0);
    op = std::make_unique<LinearOperator>(b.grid, linearized_coeffs(L0, s, b), GhostKind::Dirichlet);
    fg = std::make_unique<FluxGeometry>(b);
  }
};

}  // namespace

TEST(Dirichlet, ZeroRhs) {
  const PolarGrid g(16, 16, 1.0);
  const LinearOperator op(g, NodeCoeffs::laplacian(g), GhostKind::Dirichlet);
  const GridValues u = dirichlet_solve(op, GridValues::Zero(g.size()), Eigen::VectorXd::Zero(g.nt));
  EXPECT_EQ(u.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Dirichlet, PoissonSecondOrder) {
  // the stencil is exact on the quadratic
  EXPECT_LT(poisson_error(32, true), 1e-12);
  const double e16 = poisson_error(16, false), e32 = poisson_error(32, false), e64 = poisson_error(64, false);
  std::printf("poisson errors %.3e %.3e %.3e\n", e16, e32, e64);
  EXPECT_LT(e64, 1e-3);
  EXPECT_GE(e16 / e32, 3.5);
  EXPECT_GE(e32 / e64, 3.5);
}

TEST(Dirichlet, Linearity) {
  BaseCase st(24, true);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  GridValues f(st.b.grid.size()), h(st.b.grid.size());
  for (int k = 0; k < f.size(); ++k) {
    f[k] = n(rng);
    h[k] = n(rng);
  }
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(st.b.grid.nt);
  const GridValues a = dirichlet_solve(*st.op, 2.5 * f - 0.7 * h, z);
  const GridValues b = 2.5 * dirichlet_solve(*st.op, f, z) - 0.7 * dirichlet_solve(*st.op, h, z);
  EXPECT_LT((a - b).lpNorm<Eigen::Infinity>(), 1e-10 * a.lpNorm<Eigen::Infinity>());
  // apply inverts solve with boundary data too
  Eigen::VectorXd bc(st.b.grid.nt);
  for (int j = 0; j < bc.size(); ++j) bc[j] = std::cos(st.b.grid.theta(j));
  const GridValues u = dirichlet_solve(*st.op, f, bc);
  EXPECT_LT((st.op->apply(u, bc) - f).lpNorm<Eigen::Infinity>(), 1e-6 * f.lpNorm<Eigen::Infinity>());
}

TEST(Neumann, ZeroData) {
  const PolarGrid g(16, 16, 0.5);
  const NeumannResult r = neumann_solve(g, GridValues::Zero(g.size()), 0.0);
  EXPECT_LT(r.eta.lpNorm<Eigen::Infinity>(), 1e-14);
  EXPECT_LT(std::abs(r.defect), 1e-14);
}

TEST(Neumann, RadialQuadratic) {
  // Delta eta = k, d_n eta = k r0 / 2: eta = k r^2 / 4 - k r0^2 / 8 (mean zero)
  const double k = 3.0, r0 = 0.5;
  std::vector<double> err;
  for (int n : {16, 32, 64}) {
    const PolarGrid g(n, n, r0);
    const NeumannResult r = neumann_solve(g, GridValues::Constant(g.size(), k), k * r0 / 2);
    const GridValues ex = nodal(g, [&](double x, double y) { return k * (x * x + y * y) / 4 - k * r0 * r0 / 8; });
    err.push_back((r.eta - ex).lpNorm<Eigen::Infinity>());
    EXPECT_LT(std::abs(r.defect), 1e-10);
    EXPECT_LT(std::abs(integrate(g, r.eta)), 1e-12);
  }
  std::printf("neumann errors %.3e %.3e %.3e\n", err[0], err[1], err[2]);
  EXPECT_GE(err[0] / err[1], 3.0);
  EXPECT_GE(err[1] / err[2], 3.0);
}

TEST(Neumann, IncompatibleDataProjected) {
  const PolarGrid g(24, 24, 0.5);
  const double k = 2.0, q = 0.1;
  const NeumannResult r = neumann_solve(g, GridValues::Constant(g.size(), k), q);
  // integral of rhs minus boundary flux
  const double incompat = k * M_PI * 0.25 - q * 2 * M_PI * 0.5;
  EXPECT_NEAR(r.defect, incompat, 1e-10);
}

TEST(Streamline, TravelTimeOnCircles) {
  const BaseState s = BaseState::build(BaseParams{});
  const FluxGeometry fa(analytic_psi(s), Vec2::Zero(), 1.0, 0.5, 256);
  BaseCase st(32, false);
  for (double c : {0.1, 0.5, 0.9}) {
    EXPECT_NEAR(fa.travel_time(c), M_PI / 4, 1e-10);
    EXPECT_NEAR(st.fg->travel_time(c), M_PI / 4, 1e-6);
    EXPECT_NEAR(streamline_integral(fa, [](const Vec2&) { return 1.0; }, c), M_PI / 4, 1e-10);
  }
}

TEST(Streamline, FunctionsOfFluxAndOddIntegrands) {
  const BaseState s = BaseState::build(BaseParams{});
  const FluxGeometry fa(analytic_psi(s), Vec2::Zero(), 1.0, 0.5, 256);
  for (double c : {0.2, 0.6}) {
    const double qf = streamline_integral(fa, [&](const Vec2& x) { return std::exp(s.psi(x.norm())); }, c);
    EXPECT_NEAR(qf, std::exp(c) * M_PI / 4, 1e-10);
    const double odd = streamline_integral(fa, [](const Vec2& x) { return std::sin(std::atan2(x[1], x[0])); }, c);
    EXPECT_LT(std::abs(odd), 1e-8);
  }
}

TEST(Streamline, DerivativeAnnihilatesFlux) {
  BaseCase st(48, true);
  const PolarGrid& g = st.b.grid;
  const GridValues t = streamline_derivative(st.b, st.b.psi);
  const double scale = 8.0 * 0.5 * 0.5 * 8.0;  // |grad psi0| |grad psi0| at the rim
  EXPECT_LT(t.lpNorm<Eigen::Infinity>(), 1e-3 * scale);
  // loop integrals of d_s q vanish
  const GridValues q = nodal(g, [](double x, double y) { return x * x * y + std::cos(3 * y) + x; });
  Eigen::VectorXd tr;
  const GridValues dq = streamline_derivative(st.b, q, &tr);
  const Interpolator ip(g, dq, GhostRule::dirichlet(tr));
  for (double f : {0.2, 0.5, 0.8}) {
    const double c = f * st.b.psi_axis;
    const double a = streamline_integral(*st.fg, [&](const Vec2& x) { return ip.value(x); }, c);
    const double m = streamline_integral(*st.fg, [&](const Vec2& x) { return std::abs(ip.value(x)); }, c);
    EXPECT_LT(std::abs(a), 1e-3 * m) << c;
  }
}

TEST(Streamline, CollocationLevels) {
  const auto c = collocation_levels(2.0, 32);
  ASSERT_EQ(c.size(), 32u);
  EXPECT_DOUBLE_EQ(c.front(), 0.1);
  EXPECT_DOUBLE_EQ(c.back(), 1.9);
}

TEST(Solvability, ZeroAndManufactured) {
  BaseCase st(32, true);
  const SolvabilitySystem sys(*st.op, st.b, *st.fg, 16);
  EXPECT_LT(sys.condition(), 1e10);
  const Eigen::VectorXd F0 = solve_profile_F(sys, Eigen::VectorXd::Zero(16));
  EXPECT_EQ(F0.lpNorm<Eigen::Infinity>(), 0.0);

  Eigen::VectorXd Fs(16);
  for (int j = 0; j < 16; ++j) Fs[j] = 1.0 + std::sin(3.0 * sys.basis().levels()[j]);
  const Eigen::VectorXd R = sys.T() * Fs;
  const Eigen::VectorXd F = solve_profile_F(sys, R);
  EXPECT_LT((F - Fs).lpNorm<Eigen::Infinity>(), 1e-6 * Fs.lpNorm<Eigen::Infinity>());
  // forward application through the grid response matches T
  const GridValues u = sys.response(Fs);
  const Eigen::VectorXd R2 = sys.loop_integrals(u, GhostRule::dirichlet_zero(st.b.grid.nt));
  EXPECT_LT((R2 - R).lpNorm<Eigen::Infinity>(), 1e-10 * R.lpNorm<Eigen::Infinity>());
}

TEST(Solvability, LevelRefinement) {
  // R from a smooth profile f(psi0); the hat-basis F converges to f at the levels
  BaseCase st(48, true);
  const auto f = [](double c) { return 1.0 + c * c; };
  std::vector<double> err;
  for (int M : {8, 16}) {
    const SolvabilitySystem sys(*st.op, st.b, *st.fg, M);
    GridValues rhs(st.b.grid.size());
    for (int k = 0; k < rhs.size(); ++k) rhs[k] = f(st.b.psi[k]);
    const GridValues u = st.op->solve(rhs, Eigen::VectorXd::Zero(st.b.grid.nt));
    const Eigen::VectorXd F = solve_profile_F(sys, sys.loop_integrals(u, GhostRule::dirichlet_zero(st.b.grid.nt)));
    double e = 0;
    for (int j = 0; j < M; ++j) e = std::max(e, std::abs(F[j] - f(sys.basis().levels()[j])));
    err.push_back(e);
  }
  std::printf("profile errors M=8 %.3e M=16 %.3e\n", err[0], err[1]);
  EXPECT_LT(err[1], err[0]);
  EXPECT_LT(err[1], 2e-2);
}

TEST(HatBasisTest, PartitionAndExtension) {
  const HatBasis h({0.1, 0.4, 0.7, 1.0});
  for (double c : {0.1, 0.25, 0.55, 0.9}) {
    double sum = 0;
    for (int j = 0; j < h.size(); ++j) sum += h.eval(j, c);
    EXPECT_NEAR(sum, 1.0, 1e-15);
  }
  Eigen::VectorXd F(4);
  F << 1, 2, 3, 4;
  EXPECT_NEAR(h.combine(F, 0.0), 2.0 / 3.0, 1e-14);  // linear past the ends
  EXPECT_NEAR(h.combine_derivative(F, 0.5), 1 / 0.3, 1e-12);
}

TEST(PhiRecoveryTest, RecoversKnownPhi) {
  // phi* = u v has zero mean on every circle; d_s phi* = 8 dtheta phi* = 8 (u^2 - v^2)
  std::vector<double> err;
  for (int n : {32, 64}) {
    BaseCase st(n, false);
    const PolarGrid& g = st.b.grid;
    const SolvabilitySystem sys(*st.op, st.b, *st.fg, 16);
    const PhiRecovery rec(st.b, *st.fg);
    const GridValues Phi = nodal(g, [](double u, double v) { return 8 * (u * u - v * v); });
    Eigen::VectorXd tr(g.nt);
    for (int j = 0; j < g.nt; ++j) tr[j] = 8 * 0.25 * std::cos(2 * g.theta(j));
    const GridValues phi = rec.recover(Interpolator(g, Phi, GhostRule::dirichlet(tr)), &sys);
    const GridValues ex = nodal(g, [](double u, double v) { return u * v; });
    err.push_back((phi - ex).lpNorm<Eigen::Infinity>());
  }
  std::printf("phi recovery errors %.3e %.3e\n", err[0], err[1]);
  EXPECT_LT(err[1], 1e-4);
  EXPECT_LE(err[1], err[0]);
}

TEST(PhiRecoveryTest, ZeroAndConstant) {
  BaseCase st(24, false);
  const PolarGrid& g = st.b.grid;
  const SolvabilitySystem sys(*st.op, st.b, *st.fg, 16);
  const PhiRecovery rec(st.b, *st.fg);
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(g.nt);
  const GridValues phi = rec.recover(Interpolator(g, GridValues::Zero(g.size()), GhostRule::dirichlet(z)), &sys);
  EXPECT_EQ(phi.lpNorm<Eigen::Infinity>(), 0.0);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(g.nt);
  try {
    rec.recover(Interpolator(g, GridValues::Ones(g.size()), GhostRule::dirichlet(one)), &sys);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Gauge);
    EXPECT_NE(std::string(e.what()).find("level"), std::string::npos);
  }
}

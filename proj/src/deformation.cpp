#include "qsgs/deformation.hpp"

#include <cmath>
#include <sstream>

namespace qsgs {

double BoundarySpec::rho(double th) const {
  double s = 1.0 + a0;
  for (size_t k = 0; k < a.size(); ++k) s += a[k] * std::cos((k + 1) * th);
  for (size_t k = 0; k < b.size(); ++k) s += b[k] * std::sin((k + 1) * th);
  return r0 * s;
}

double BoundarySpec::drho(double th) const {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s -= (k + 1) * a[k] * std::sin((k + 1) * th);
  for (size_t k = 0; k < b.size(); ++k) s += (k + 1) * b[k] * std::cos((k + 1) * th);
  return r0 * s;
}

double BoundarySpec::area() const {
  // 1/2 int rho^2 by Parseval
  double s = (1 + a0) * (1 + a0);
  for (double x : a) s += 0.5 * x * x;
  for (double x : b) s += 0.5 * x * x;
  return M_PI * r0 * r0 * s;
}

double BoundarySpec::area_defect() const {
  return area() / (M_PI * r0 * r0) - 1.0;
}

BoundarySpec BoundarySpec::autoscaled() const {
  const double f = std::sqrt(M_PI * r0 * r0 / area());
  BoundarySpec o = *this;
  o.a0 = f * (1 + a0) - 1;
  for (double& x : o.a) x *= f;
  for (double& x : o.b) x *= f;
  return o;
}

Eigen::VectorXd BoundarySpec::delta_b(const PolarGrid& g) const {
  Eigen::VectorXd d(g.nt);
  for (int j = 0; j < g.nt; ++j) d[j] = r0 - rho(g.theta(j));
  return d;
}

void BoundarySpec::validate() const {
  for (int k = 0; k < 4096; ++k) {
    const double th = 2 * M_PI * k / 4096;
    if (!(rho(th) > 0)) {
      std::ostringstream os;
      os << "boundary radius " << rho(th) << " at theta = " << th;
      throw Error(ErrorCode::DomainViolation, os.str());
    }
  }
}

// ---------------------------------------------------------------------------

Displacement make_displacement(const PolarGrid& g, const DeformationPair& p,
                               double q) {
  Displacement d;
  const auto be = cart_bundle(g, p.eta, GhostRule::neumann(Eigen::VectorXd::Constant(g.nt, q)));
  const auto bp = cart_bundle(g, p.phi, GhostRule::extrapolate());
  const int n = g.size();
  d.alpha.resize(n);
  d.beta.resize(n);
  d.jac.resize(n);
  d.min_det = INFINITY;
  for (int k = 0; k < n; ++k) {
    d.alpha[k] = be[k].grad[0] + bp[k].grad[1];
    d.beta[k] = be[k].grad[1] - bp[k].grad[0];
    const Mat2& He = be[k].hess;
    const Mat2& Hp = bp[k].hess;
    Mat2 J;
    J << 1 + He(0, 0) + Hp(0, 1), He(0, 1) + Hp(1, 1),
        He(1, 0) - Hp(0, 0), 1 + He(1, 1) - Hp(1, 0);
    d.jac[k] = J;
    const double det = J.determinant();
    d.min_det = std::min(d.min_det, det);
    d.max_det_defect = std::max(d.max_det_defect, std::abs(det - 1));
  }
  d.da = cart_bundle(g, d.alpha, GhostRule::extrapolate());
  d.db = cart_bundle(g, d.beta, GhostRule::extrapolate());
  return d;
}

GridValues eval_N_eta(const Displacement& d) {
  GridValues N(d.jac.size());
  for (size_t k = 0; k < d.jac.size(); ++k) {
    N[k] = -(d.jac[k] - Mat2::Identity()).determinant();
  }
  return N;
}

namespace {
// L psi at gamma(y), without sources
double composed_operator(const Displacement& d, const DiscreteBase& b, int k,
                         const CoeffSample& cs) {
  const Mat2 Ji = d.jac[k].inverse();
  const Vec2 gp = Ji.transpose() * b.bundle[k].grad;
  const Mat2 H0 = b.bundle[k].hess - gp[0] * d.da[k].hess - gp[1] * d.db[k].hess;
  const Mat2 H = Ji.transpose() * H0 * Ji;
  return cs.A.cwiseProduct(H).sum() + cs.B.dot(gp);
}

Vec2 node_point(const PolarGrid& g, int k) { return g.point(k / g.nt, k % g.nt); }
}  // namespace

GridValues composed_residual(const Displacement& d, const DiscreteBase& b,
                             const CoefficientField& L, const BaseState& prof) {
  const PolarGrid& g = b.grid;
  GridValues E(g.size());
  for (int k = 0; k < g.size(); ++k) {
    const Vec2 x = node_point(g, k) + Vec2(d.alpha[k], d.beta[k]);
    const CoeffSample cs = L.at(x);
    E[k] = composed_operator(d, b, k, cs) + ggs_sources(cs, prof, b.psi[k]).G;
  }
  return E;
}

GridValues eval_N_phi(const Displacement& d, const DiscreteBase& b,
                      const CoefficientField& L, const CoefficientField& L0,
                      const BaseState& /*prof*/, const LinearOperator& lin,
                      const GridValues& Phi, const Eigen::VectorXd& trace) {
  const PolarGrid& g = b.grid;
  GridValues N = lin.apply(Phi, trace);
  for (int k = 0; k < g.size(); ++k) {
    const Vec2 y = node_point(g, k);
    const Vec2 x = y + Vec2(d.alpha[k], d.beta[k]);
    const CoeffSample c0 = L0.at(y);
    const double l0 = c0.A.cwiseProduct(b.bundle[k].hess).sum() + c0.B.dot(b.bundle[k].grad);
    N[k] += l0 - composed_operator(d, b, k, L.at(x));
  }
  return N;
}

BoundaryRemainder boundary_remainder(const Displacement& d,
                                     const DiscreteBase& b,
                                     const BoundarySpec& spec) {
  const PolarGrid& g = b.grid;
  const Interpolator ia(g, d.alpha, GhostRule::extrapolate());
  const Interpolator ib(g, d.beta, GhostRule::extrapolate());
  BoundaryRemainder r;
  r.b1.resize(g.nt);
  r.trace.resize(g.nt);
  Eigen::VectorXd gradmag(g.nt);
  for (int j = 0; j < g.nt; ++j) {
    const Vec2 n(std::cos(g.theta(j)), std::sin(g.theta(j)));
    const Vec2 y = g.r0 * n;
    const Vec2 disp(ia.value(y), ib.value(y));
    const Vec2 x = y + disp;
    const double thx = std::atan2(x[1], x[0]);
    if (!std::isfinite(thx) || x.norm() > 2 * g.r0) {
      throw Error(ErrorCode::Extension, "boundary image left the working region");
    }
    r.b1[j] = x.norm() - spec.rho(thx) - n.dot(disp);
    gradmag[j] = b.interp.eval(y).grad.norm();
  }
  r.mean = r.b1.mean();
  r.neumann_const = -r.mean;
  // d_s = |grad psi0| d_tau on the boundary since psi0 decreases outward
  for (int j = 0; j < g.nt; ++j) r.trace[j] = gradmag[j] * (r.mean - r.b1[j]);
  return r;
}

// ---------------------------------------------------------------------------

DeformationSolver::DeformationSolver(BaseState prof, const DiscreteBase& base,
                                     std::shared_ptr<const CoefficientField> L0,
                                     std::shared_ptr<const CoefficientField> L,
                                     BoundarySpec boundary, SolverOptions opt,
                                     int M)
    : prof_(std::move(prof)),
      base_(&base),
      L0_(std::move(L0)),
      L_(std::move(L)),
      boundary_(std::move(boundary)),
      opt_(opt) {
  if (opt_.tol_iter <= 0) opt_.tol_iter = 1e-9 * base.grid.r0;
  lin_ = std::make_unique<LinearOperator>(base.grid, linearized_coeffs(*L0_, prof_, base),
                                          GhostKind::Dirichlet);
  fg_ = std::make_unique<FluxGeometry>(base);
  sys_ = std::make_unique<SolvabilitySystem>(*lin_, base, *fg_, M);
  rec_ = std::make_unique<PhiRecovery>(base, *fg_);
  neu_ = std::make_unique<NeumannSolver>(base.grid);
}

IterState DeformationSolver::initial_state() const {
  const PolarGrid& g = base_->grid;
  IterState s;
  s.pair.eta = GridValues::Zero(g.size());
  s.pair.phi = GridValues::Zero(g.size());
  s.Phi = GridValues::Zero(g.size());
  s.trace = Eigen::VectorXd::Zero(g.nt);
  s.F = Eigen::VectorXd::Zero(sys_->basis().size());
  return s;
}

GridValues streamline_derivative(const DiscreteBase& b, const GridValues& phi,
                                 Eigen::VectorXd* trace) {
  const PolarGrid& g = b.grid;
  const auto bp = cart_bundle(g, phi, GhostRule::extrapolate());
  GridValues out(g.size());
  for (int k = 0; k < g.size(); ++k) {
    const Vec2& p = b.bundle[k].grad;
    out[k] = p[1] * bp[k].grad[0] - p[0] * bp[k].grad[1];
  }
  if (trace) {
    const Interpolator ip(g, phi, GhostRule::extrapolate());
    trace->resize(g.nt);
    for (int j = 0; j < g.nt; ++j) {
      const Vec2 y = g.r0 * Vec2(std::cos(g.theta(j)), std::sin(g.theta(j)));
      const Vec2 p = b.interp.eval(y).grad, q = ip.eval(y).grad;
      (*trace)[j] = p[1] * q[0] - p[0] * q[1];
    }
  }
  return out;
}

IterState DeformationSolver::iterate_step(const IterState& s, StepLog* log) const {
  const PolarGrid& g = base_->grid;
  const std::shared_ptr<const Displacement> dp =
      s.disp ? s.disp : std::make_shared<Displacement>(make_displacement(g, s.pair, s.q));
  const Displacement& d = *dp;
  if (!(d.min_det > 0)) {
    std::ostringstream os;
    os << "det grad gamma reached " << d.min_det << " at step " << s.N;
    throw Error(ErrorCode::Diffeomorphism, os.str());
  }
  IterState o;
  o.N = s.N + 1;
  o.omega = s.omega;

  const GridValues Neta = eval_N_eta(d);
  o.q = integrate(g, Neta) / (2 * M_PI * g.r0);
  o.pair.eta = neu_->solve(Neta, o.q).eta;

  const BoundaryRemainder br = boundary_remainder(d, *base_, boundary_);
  o.trace = br.trace;

  const GridValues E = composed_residual(d, *base_, *L_, prof_);
  // d_s phi of the current phi rather than the stored Phi, so recovery error
  // does not feed back through the linear part
  Eigen::VectorXd trace_cur;
  const GridValues Phi_cur = streamline_derivative(*base_, s.pair.phi, &trace_cur);
  const GridValues rhs = lin_->apply(Phi_cur, trace_cur) - E;
  const GridValues Phi_h = dirichlet_solve(*lin_, rhs, o.trace);
  const GhostRule ghost = GhostRule::dirichlet(o.trace);
  o.F = sys_->solve(sys_->loop_integrals(Interpolator(g, Phi_h, ghost)));
  o.Phi = Phi_h - sys_->response(o.F);
  PhiRecoveryStats st;
  const Interpolator ref(g, Phi_h, ghost);
  o.pair.phi = rec_->recover(Interpolator(g, o.Phi, ghost), sys_.get(), &st, &ref);

  if (o.omega < 1.0) {
    const double w = o.omega;
    o.pair.eta = s.pair.eta + w * (o.pair.eta - s.pair.eta);
    o.pair.phi = s.pair.phi + w * (o.pair.phi - s.pair.phi);
    o.Phi = s.Phi + w * (o.Phi - s.Phi);
    o.trace = s.trace + w * (o.trace - s.trace);
    o.F = s.F + w * (o.F - s.F);
    o.q = s.q + w * (o.q - s.q);
  }

  if (log) {
    log->N = o.N;
    log->det_defect = d.max_det_defect;
    log->min_det = d.min_det;
    log->neumann_mismatch = o.q + br.mean;
    // boundary mapping defect of the input state
    const Interpolator ia(g, d.alpha, GhostRule::extrapolate());
    const Interpolator ib(g, d.beta, GhostRule::extrapolate());
    double bd = 0;
    for (int j = 0; j < g.nt; ++j) {
      const Vec2 y = g.r0 * Vec2(std::cos(g.theta(j)), std::sin(g.theta(j)));
      const Vec2 x = y + Vec2(ia.value(y), ib.value(y));
      bd = std::max(bd, std::abs(x.norm() - boundary_.rho(std::atan2(x[1], x[0]))));
    }
    log->boundary_defect = bd;
    log->loop_defect = st.worst_level_loop;
    log->residual = (E + sys_->profile_on_grid(o.F)).lpNorm<Eigen::Infinity>();
    log->d_eta = (o.pair.eta - s.pair.eta).lpNorm<Eigen::Infinity>();
    log->d_phi = (o.pair.phi - s.pair.phi).lpNorm<Eigen::Infinity>();
    log->omega = o.omega;
  }
  return o;
}

namespace {
// P' = F * <sqrt g> over each collocation level, integrated from psi = 0
void reconstruct_pressure(const DeformationSolver& solver, ConvergenceResult& res) {
  const PolarGrid& g = solver.base().grid;
  const IterState& s = res.state;
  const SolvabilitySystem& sys = solver.solvability();
  const auto& lev = sys.basis().levels();
  const int M = static_cast<int>(lev.size());
  std::vector<double> avg(M);
  const Interpolator ia(g, res.disp.alpha, GhostRule::extrapolate());
  const Interpolator ib(g, res.disp.beta, GhostRule::extrapolate());
  res.sqrtg_spread.assign(M, 0.0);
  for (int k = 0; k < M; ++k) {
    const LevelCurve& C = sys.curves()[k];
    double num = 0, den = 0, lo = INFINITY, hi = -INFINITY;
    for (size_t j = 0; j < C.pts.size(); ++j) {
      const Vec2 y = C.pts[j];
      const double sg = solver.L().at(y + Vec2(ia.value(y), ib.value(y))).sqrt_g;
      num += sg * C.dsdth[j];
      den += C.dsdth[j];
      lo = std::min(lo, sg);
      hi = std::max(hi, sg);
    }
    avg[k] = num / den;
    res.sqrtg_spread[k] = (hi - lo) / avg[k];
    res.max_sqrtg_spread = std::max(res.max_sqrtg_spread, res.sqrtg_spread[k]);
  }
  const double pa = solver.base().psi_axis;
  res.P_nodes.push_back(0.0);
  for (double c : lev) res.P_nodes.push_back(c);
  res.P_nodes.push_back(pa);
  for (size_t k = 0; k < res.P_nodes.size(); ++k) {
    const int ki = std::clamp(static_cast<int>(k) - 1, 0, M - 1);
    res.dP_values.push_back(sys.basis().combine(s.F, res.P_nodes[k]) * avg[ki]);
  }
  res.P_values.push_back(0.0);
  for (size_t k = 1; k < res.P_nodes.size(); ++k) {
    const double h = res.P_nodes[k] - res.P_nodes[k - 1];
    res.P_values.push_back(res.P_values.back() +
                           0.5 * h * (res.dP_values[k] + res.dP_values[k - 1]));
  }
}
}  // namespace

ConvergenceResult run_to_convergence(const DeformationSolver& solver) {
  const PolarGrid& g = solver.base().grid;
  const SolverOptions& opt = solver.options();
  ConvergenceResult res;
  IterState s = solver.initial_state();
  s.disp = std::make_shared<Displacement>(make_displacement(g, s.pair, s.q));
  double prev = -1;
  int slow = 0;
  try {
    for (int it = 0; it < opt.max_iter; ++it) {
      StepLog lg;
      IterState o = solver.iterate_step(s, &lg);
      o.disp = std::make_shared<Displacement>(make_displacement(g, o.pair, o.q));
      const double da = std::max((o.disp->alpha - s.disp->alpha).lpNorm<Eigen::Infinity>(),
                                 (o.disp->beta - s.disp->beta).lpNorm<Eigen::Infinity>());
      lg.d_disp = da;
      lg.ratio = prev > 0 ? da / prev : 0.0;
      if (prev > 0) res.max_ratio = std::max(res.max_ratio, lg.ratio);
      res.log.push_back(lg);
      s = o;
      if (!std::isfinite(da) || da > opt.divergence_factor * g.r0) {
        std::ostringstream os;
        os << "update " << da << " exceeds " << opt.divergence_factor << " r0 at step " << o.N;
        res.failure = os.str();
        res.failure_code = ErrorCode::Divergence;
        break;
      }
      if (da < opt.tol_iter) {
        res.converged = true;
        break;
      }
      if (prev > 0 && lg.ratio > 0.9) ++slow; else slow = 0;
      if (opt.auto_damp && slow >= 3 && s.omega == 1.0) {
        s.omega = opt.omega;
        slow = 0;
      }
      prev = da;
    }
    if (!res.converged && res.failure.empty()) {
      std::ostringstream os;
      os << "no convergence after " << opt.max_iter << " steps";
      res.failure = os.str();
      res.failure_code = ErrorCode::Divergence;
    }
  } catch (const Error& e) {
    res.failure = e.what();
    res.failure_code = e.code();
  }
  res.state = s;
  res.disp = s.disp ? *s.disp : make_displacement(g, s.pair, s.q);
  if (!res.log.empty()) res.final_residual = res.log.back().residual;

  if (res.converged) {
    try {
      reconstruct_pressure(solver, res);
    } catch (const Error& e) {
      res.converged = false;
      res.failure = e.what();
      res.failure_code = e.code();
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

DeformedFlux::DeformedFlux(const DiscreteBase& b, const Displacement& d)
    : base_(&b),
      ia_(b.grid, d.alpha, GhostRule::extrapolate()),
      ib_(b.grid, d.beta, GhostRule::extrapolate()) {}

Vec2 DeformedFlux::gamma(const Vec2& y) const {
  return y + Vec2(ia_.value(y), ib_.value(y));
}

Mat2 DeformedFlux::dgamma(const Vec2& y) const {
  Mat2 J = Mat2::Identity();
  J.row(0) += ia_.eval(y).grad.transpose();
  J.row(1) += ib_.eval(y).grad.transpose();
  return J;
}

Vec2 DeformedFlux::inverse(const Vec2& x) const {
  Vec2 y = x - Vec2(ia_.value(x), ib_.value(x));
  const double r0 = base_->grid.r0;
  for (int it = 0; it < 40; ++it) {
    const CartDerivs a = ia_.eval(y), b = ib_.eval(y);
    Mat2 J = Mat2::Identity();
    J.row(0) += a.grad.transpose();
    J.row(1) += b.grad.transpose();
    const Vec2 res = y + Vec2(a.w, b.w) - x;
    const Vec2 step = J.inverse() * res;
    y -= step;
    if (!(y.norm() < 2 * r0)) break;
    if (step.norm() < 1e-15 * r0) return y;
  }
  const Vec2 res = gamma(y) - x;
  if (y.norm() < 2 * r0 && res.norm() < 1e-13 * r0) return y;
  std::ostringstream os;
  os << "cannot invert gamma at (" << x.transpose() << ")";
  throw Error(ErrorCode::Extension, os.str());
}

CartDerivs DeformedFlux::eval_preimage(const Vec2& y) const {
  const CartDerivs p0 = base_->interp.eval(y);
  const CartDerivs a = ia_.eval(y), b = ib_.eval(y);
  Mat2 J = Mat2::Identity();
  J.row(0) += a.grad.transpose();
  J.row(1) += b.grad.transpose();
  const Mat2 Ji = J.inverse();
  CartDerivs o;
  o.w = p0.w;
  o.grad = Ji.transpose() * p0.grad;
  o.hess = Ji.transpose() * (p0.hess - o.grad[0] * a.hess - o.grad[1] * b.hess) * Ji;
  return o;
}

CartDerivs DeformedFlux::eval(const Vec2& x) const {
  return eval_preimage(inverse(x));
}

}  // namespace qsgs

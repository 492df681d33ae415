#include "qsgs/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <numeric>
#include <sstream>

namespace qsgs {

namespace odeint = boost::numeric::odeint;

FieldProfiles FieldProfiles::from_base(const BaseState& s) {
  FieldProfiles p;
  p.C = [s](double c) { return s.C(c); };
  p.dC = [s](double c) { return s.dC(c); };
  p.P = [s](double c) { return s.P(c); };
  p.dP = [s](double c) { return s.dP(c); };
  return p;
}

FieldProfiles FieldProfiles::from_result(const BaseState& s,
                                         const ConvergenceResult& r) {
  FieldProfiles p = from_base(s);
  if (r.P_nodes.size() >= 2) {
    auto pp = std::make_shared<PiecewisePressure>(r.P_nodes, r.dP_values, 0.0);
    p.P = [pp](double c) { return pp->P(c); };
    p.dP = [pp](double c) { return pp->dP(c); };
  }
  return p;
}

PiecewisePressure::PiecewisePressure(std::vector<double> nodes,
                                     std::vector<double> dP, double P0)
    : x_(std::move(nodes)), d_(std::move(dP)) {
  if (x_.size() < 2 || x_.size() != d_.size()) {
    throw Error(ErrorCode::InsufficientData, "pressure profile needs matching nodes");
  }
  p_.push_back(P0);
  for (size_t k = 1; k < x_.size(); ++k) {
    p_.push_back(p_.back() + 0.5 * (x_[k] - x_[k - 1]) * (d_[k] + d_[k - 1]));
  }
}

int PiecewisePressure::segment(double c) const {
  const auto it = std::upper_bound(x_.begin(), x_.end(), c);
  return std::clamp(static_cast<int>(it - x_.begin()) - 1, 0,
                    static_cast<int>(x_.size()) - 2);
}

double PiecewisePressure::dP(double c) const {
  const int k = segment(c);
  const double t = (c - x_[k]) / (x_[k + 1] - x_[k]);
  return (1 - t) * d_[k] + t * d_[k + 1];
}

double PiecewisePressure::P(double c) const {
  const int k = segment(c);
  const double h = c - x_[k];
  const double slope = (d_[k + 1] - d_[k]) / (x_[k + 1] - x_[k]);
  return p_[k] + d_[k] * h + 0.5 * slope * h * h;
}

// ---------------------------------------------------------------------------

FluxExtension::FluxExtension(std::shared_ptr<const SymmetryField> xi,
                             std::function<CartDerivs(const Vec2&)> psi,
                             double R0)
    : xi_(std::move(xi)), psi_(std::move(psi)), R0_(R0) {}

Vec3 FluxExtension::project(const Vec3& X, double* s_out) const {
  double s = -std::atan2(X[1], X[0]);
  Vec3 P = xi_->flow(X, s);
  for (int it = 0; it < 50 && std::abs(P[1]) > 1e-14 * R0_; ++it) {
    const double vy = xi_->eval(P).value[1];
    if (!(std::abs(vy) > 0)) break;
    s -= P[1] / vy;
    P = xi_->flow(X, s);
  }
  if (!(std::abs(P[1]) <= 1e-12 * R0_) || !(P[0] > 0)) {
    std::ostringstream os;
    os << "flow from (" << X.transpose() << ") does not reach the half-plane";
    throw Error(ErrorCode::Extension, os.str());
  }
  if (s_out) *s_out = s;
  return P;
}

double FluxExtension::value(const Vec3& X) const {
  const Vec3 P = project(X);
  return psi_(Vec2(P[0] - R0_, P[2])).w;
}

FluxExtension::Value FluxExtension::eval(const Vec3& X) const {
  Value v;
  project(X, &v.s);
  const auto [P, D] = xi_->flow_with_jacobian(X, v.s);
  v.proj = P;
  v.y = Vec2(P[0] - R0_, P[2]);
  const CartDerivs d = psi_(v.y);
  v.psi = d.w;
  const Vec3 xp = xi_->eval(P).value;
  // dP = (I - xi(P) e_y^T / xi^y(P)) d(phi_s)
  Mat3 proj = Mat3::Identity();
  proj.col(1) -= xp / xp[1];
  const Mat3 dP = proj * D;
  v.grad = dP.transpose() * Vec3(d.grad[0], 0.0, d.grad[1]);
  return v;
}

// ---------------------------------------------------------------------------

EquilibriumField::EquilibriumField(std::shared_ptr<const MetricSource> g,
                                   std::shared_ptr<const SymmetryField> xi,
                                   FluxExtension ext, FieldProfiles prof,
                                   double r0)
    : g_(std::move(g)), xi_(std::move(xi)), ext_(std::move(ext)),
      prof_(std::move(prof)), r0_(r0) {}

EquilibriumField::Sample EquilibriumField::eval(const Vec3& X) const {
  Sample s;
  s.x = X;
  s.g = g_->frame(X);
  s.xi = xi_->eval(X);
  const FluxExtension::Value e = ext_.eval(X);
  s.psi = e.psi;
  s.grad_psi = e.grad;
  s.y = e.y;
  const double xi2 = s.g.norm2(s.xi.value);
  if (!(xi2 > 0)) throw Error(ErrorCode::DegenerateSymmetry, "|xi|_g vanishes");
  const Vec3 gg = s.g.ginv * e.grad;
  s.B = (prof_.C(e.psi) * s.xi.value +
         s.g.sqrt_det * cross_g(s.g, s.xi.value, gg)) / xi2;
  return s;
}

// ---------------------------------------------------------------------------

std::vector<Vec3> diagnostic_samples(const BoundarySpec& b,
                                     const SymmetryField& xi, double R0,
                                     int n_r, int n_t, int n_s) {
  std::vector<Vec3> out;
  out.reserve(static_cast<size_t>(n_r) * n_t * n_s);
  for (int m = 0; m < n_s; ++m) {
    const double s = 2 * M_PI * m / n_s;
    for (int j = 0; j < n_t; ++j) {
      const double th = 2 * M_PI * j / n_t;
      for (int k = 0; k < n_r; ++k) {
        const double rho = b.rho(th) * (k + 1) / (n_r + 1);
        const Vec3 p(R0 + rho * std::cos(th), 0.0, rho * std::sin(th));
        out.push_back(m == 0 ? p : xi.flow(p, s));
      }
    }
  }
  return out;
}

std::vector<Vec3> boundary_samples(const BoundarySpec& b,
                                   const SymmetryField& xi, double R0, int n_t,
                                   int n_s) {
  std::vector<Vec3> out;
  for (int m = 0; m < n_s; ++m) {
    const double s = 2 * M_PI * m / n_s;
    for (int j = 0; j < n_t; ++j) {
      const double th = 2 * M_PI * j / n_t;
      const double rho = b.rho(th);
      const Vec3 p(R0 + rho * std::cos(th), 0.0, rho * std::sin(th));
      out.push_back(m == 0 ? p : xi.flow(p, s));
    }
  }
  return out;
}

void Stat::add(double v) {
  max = std::max(max, v);
  mean += v;
  ++count;
}

void Stat::finish() {
  if (count > 0) mean /= count;
}

namespace {

Vec3 curl_from(const Mat3& J) {
  return Vec3(J(2, 1) - J(1, 2), J(0, 2) - J(2, 0), J(1, 0) - J(0, 1));
}

struct Neighbourhood {
  EquilibriumField::Sample c;
  Mat3 jacB;            // jacB(i, j) = d_j B^i
  Vec3 grad_absB;
  Vec3 grad_Bxi;        // grad of B . xi (Euclidean)
  double div_g_V = 0.0; // div_g of sqrt g grad_g psi / |xi|_g^2
  double ddg = 0.0;     // max |d dg| by FD
};

Neighbourhood probe(const EquilibriumField& f, const Vec3& X, double h) {
  Neighbourhood n;
  n.c = f.eval(X);
  double dv = 0.0;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = h;
    const auto p = f.eval(X + e);
    const auto m = f.eval(X - e);
    n.jacB.col(k) = (p.B - m.B) / (2 * h);
    n.grad_absB[k] = (p.B.norm() - m.B.norm()) / (2 * h);
    n.grad_Bxi[k] = (p.B.dot(p.xi.value) - m.B.dot(m.xi.value)) / (2 * h);
    auto V = [](const EquilibriumField::Sample& s) {
      const double xi2 = s.g.norm2(s.xi.value);
      return Vec3(s.g.sqrt_det * s.g.sqrt_det * (s.g.ginv * s.grad_psi) / xi2);
    };
    dv += (V(p)[k] - V(m)[k]) / (2 * h);
    for (int j = 0; j < 3; ++j) {
      n.ddg = std::max(n.ddg, ((p.g.dg[j] - m.g.dg[j]) / (2 * h)).norm());
    }
  }
  n.div_g_V = dv / n.c.g.sqrt_det;
  return n;
}

}  // namespace

DiagnosticsReport residual_report(const EquilibriumField& f,
                                  const std::vector<Vec3>& samples,
                                  const std::vector<Vec3>& boundary,
                                  const GsResidualFn& gs) {
  DiagnosticsReport r;
  const double h = f.h_B > 0 ? f.h_B : 1e-4 * f.r0();
  const MetricFrame eu = MetricFrame::euclidean();
  r.B_min = INFINITY;
  double qs_max = 0.0, qs_diff = 0.0;
  for (const Vec3& X : samples) {
    Neighbourhood n;
    try {
      n = probe(f, X, h);
    } catch (const Error&) {
      ++r.quarantined;
      continue;
    }
    const auto& s = n.c;
    const MetricFrame& g = s.g;
    const Vec3& B = s.B;
    const Vec3& xi = s.xi.value;
    const Vec3& gp = s.grad_psi;
    if (!B.allFinite() || !n.jacB.allFinite()) {
      ++r.quarantined;
      continue;
    }
    ++r.samples;
    const double Bn = B.norm();
    r.B_max = std::max(r.B_max, Bn);
    r.B_min = std::min(r.B_min, Bn);
    const Vec3 J = curl_from(n.jacB);
    r.div_B.add(std::abs(n.jacB.trace()));

    const Vec3 fr = xi.cross(B) + gp;
    const Vec3 fa = B.cross(xi) + gp;
    r.flux_residual.add(fr.norm());
    r.flux_residual_alt.add(fa.norm());
    const Vec3 bx = B.cross(xi);
    if (gp.norm() > 0 && bx.norm() > 0) {
      r.flux_alignment_min =
          std::min(r.flux_alignment_min, std::abs(bx.dot(gp)) / (bx.norm() * gp.norm()));
      r.flux_property.add(std::abs(B.dot(gp)) / (Bn * gp.norm()));
    }

    const FieldProfiles& pr = f.profiles();
    const double C = pr.C(s.psi), dC = pr.dC(s.psi), dP = pr.dP(s.psi);
    const Vec3 gradP = dP * gp;
    r.force_euclid.add((J.cross(B) - gradP).norm());
    const Vec3 cg = curl_g(g, VecSample(B, n.jacB));
    const Vec3 fm = cross_g(g, cg, B) - g.ginv * gradP;
    r.force_metric.add(std::sqrt(std::max(0.0, g.norm2(fm))));

    // (grad_g psi, grad-perp, xi) frame
    const Vec3 e1 = g.ginv * gp;
    const Vec3 e2 = cross_g(g, xi, e1);
    const double n1 = g.norm2(e1), n2 = g.norm2(e2), xi2 = g.norm2(xi);
    if (n1 > 0 && n2 > 0) {
      const double cF = g.dot(cg, e1) / n1;
      const double cG = g.dot(cg, e2) / n2;
      const double cH = g.dot(cg, xi) / xi2;
      const Mat3 Lg = deformation_tensor(g, s.xi);
      const double sg = g.sqrt_det;
      const double Lsg = xi.dot(g.d_sqrt_det());
      const double Fform =
          -sg / (xi2 * xi2 * n1) *
          (C / sg * e2.dot(Lg * xi) + 2 * xi2 * n1 * Lsg / sg -
           xi2 * e1.dot(Lg * e1) - n1 * xi.dot(Lg * xi));
      const double Gform = sg / xi2 / n1 * (B.dot(Lg * e1) - n1 * dC / sg);
      const Vec3 cxi = curl_g(g, s.xi);
      const double Hform = n.div_g_V + C * g.dot(xi, cxi) / (xi2 * xi2) +
                           sg / xi2 * e1.dot(Lg * xi);
      r.frame_F_err.add(std::abs(cF - Fform));
      r.frame_G_err.add(std::abs(cG - Gform));
      r.frame_H_err.add(std::abs(cH - Hform));
      const double a1 = g.dot(fm, e1) / n1, a2 = g.dot(fm, e2) / n2,
                   a3 = g.dot(fm, xi) / xi2;
      const double j1 = std::abs(a1 - (C * cG - cH - dP));
      const double j2 = std::abs(a2 + C / xi2 * cF);
      const double j3 = std::abs(a3 - n1 / xi2 * cF);
      r.jxb_frame_err.add(std::max({j1, j2, j3}));
      if (gs) {
        const double lhs = g.dot(fm, e1) / (sg * n1);
        r.gs_crosscheck.add(std::abs(lhs - gs(s.y)));
      }
    }

    // quasisymmetry, three ways
    const Mat3 Ld = deformation_tensor(eu, s.xi);
    const double direct = xi.dot(n.grad_absB);
    const double chain = B.dot(Ld * B) / (2 * Bn);
    double formula = chain;
    if (C != 0.0) {
      const double pre = C * C / (2 * xi2 * xi2 * Bn);
      formula = pre * (xi.dot(Ld * xi) + 2 / C * xi.dot(Ld * e2) +
                       e2.dot(Ld * e2) / (C * C));
    }
    r.qs_direct.add(std::abs(direct));
    r.qs_formula.add(std::abs(formula));
    r.qs_chain.add(std::abs(chain));
    qs_max = std::max(qs_max, std::abs(direct));
    qs_diff = std::max(qs_diff, std::abs(direct - formula));

    const Vec3 sq = xi.cross(J) - n.grad_Bxi;
    r.strong_qs.add(sq.norm());
    r.footnote.add(std::abs(B.dot(sq) + 2 * Bn * direct));

    r.killing_metric.add(deformation_tensor(g, s.xi).norm());
    r.killing_euclid.add(Ld.norm());
    r.g_minus_delta = std::max(r.g_minus_delta, (g.g - Mat3::Identity()).norm());
    for (int k = 0; k < 3; ++k) {
      r.g_minus_delta_c1 = std::max(r.g_minus_delta_c1, g.dg[k].norm());
    }
    r.g_minus_delta_c2 = std::max(r.g_minus_delta_c2, n.ddg);
  }
  if (r.samples == 0) r.B_min = 0.0;
  r.qs_discrepancy = qs_max > 0 ? qs_diff / qs_max : qs_diff;
  for (const Vec3& X : boundary) {
    try {
      const auto s = f.eval(X);
      const double gn = s.grad_psi.norm(), bn = s.B.norm();
      if (gn > 0 && bn > 0) r.tangency.add(std::abs(s.B.dot(s.grad_psi)) / (bn * gn));
    } catch (const Error&) {
      ++r.quarantined;
    }
  }
  for (Stat* st : {&r.div_B, &r.flux_residual, &r.flux_residual_alt, &r.force_euclid,
                   &r.force_metric, &r.gs_crosscheck, &r.qs_direct, &r.qs_formula,
                   &r.qs_chain, &r.strong_qs, &r.footnote, &r.frame_F_err,
                   &r.frame_G_err, &r.frame_H_err, &r.jxb_frame_err,
                   &r.killing_metric, &r.killing_euclid, &r.tangency,
                   &r.flux_property}) {
    st->finish();
  }
  r.flux_orientation = r.flux_residual.max <= r.flux_residual_alt.max
                           ? "xi x B = -grad psi"
                           : "B x xi = -grad psi";
  return r;
}

QsError qs_error(const EquilibriumField& f, const std::vector<Vec3>& samples) {
  const DiagnosticsReport r = residual_report(f, samples);
  QsError q;
  q.direct = r.qs_direct.max;
  q.formula = r.qs_formula.max;
  q.chain = r.qs_chain.max;
  q.discrepancy = r.qs_discrepancy;
  return q;
}

// ---------------------------------------------------------------------------

FieldLine trace_field_line(const EquilibriumField& f, const Vec3& seed,
                           const TraceOptions& opt) {
  using State = std::array<double, 3>;
  FieldLine L;
  L.seed = seed;
  const FluxExtension& ext = f.extension();
  L.psi_seed = ext.value(seed);
  const double R0 = ext.R0();
  auto rhs = [&f](const State& x, State& dx, double) {
    const Vec3 B = f.B(Vec3(x[0], x[1], x[2]));
    dx = {B[0], B[1], B[2]};
  };
  auto stepper = odeint::make_dense_output(opt.atol, opt.rtol,
                                           odeint::runge_kutta_dopri5<State>());
  State x0{seed[0], seed[1], seed[2]};
  const double B0 = f.B(seed).norm();
  stepper.initialize(x0, 0.0, 1e-3 * f.r0() / B0);
  try {
    while (L.transits < opt.transits) {
      if (++L.steps > opt.max_steps) {
        L.exited = true;
        L.exit_reason = "step limit";
        break;
      }
      const State prev = stepper.current_state();
      stepper.do_step(rhs);
      const State cur = stepper.current_state();
      const Vec3 xc(cur[0], cur[1], cur[2]);
      if (!xc.allFinite()) {
        L.exited = true;
        L.exit_reason = "non-finite state";
        break;
      }
      L.max_deviation = std::max(L.max_deviation, std::abs(ext.value(xc) - L.psi_seed));
      if (prev[1] < 0 && cur[1] >= 0 && cur[0] > 0) {
        // locate the crossing on the dense output
        double a = stepper.previous_time(), b = stepper.current_time();
        State xm;
        for (int it = 0; it < 100 && b - a > 1e-15 * b; ++it) {
          const double m = 0.5 * (a + b);
          stepper.calc_state(m, xm);
          if (xm[1] < 0) a = m; else b = m;
        }
        stepper.calc_state(b, xm);
        L.punctures.emplace_back(xm[0] - R0, xm[2]);
        ++L.transits;
      }
    }
  } catch (const Error& e) {
    L.exited = true;
    L.exit_reason = e.what();
  }
  return L;
}

PoincareTopology poincare_topology(const std::vector<Vec2>& pts,
                                   const Vec2& centre) {
  PoincareTopology t;
  const int n = static_cast<int>(pts.size());
  if (n < 3) return t;
  // nearest-neighbour distances
  std::vector<double> nn(n, INFINITY);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) nn[i] = std::min(nn[i], (pts[i] - pts[j]).norm());
    }
  }
  const double tau = 2.5 * *std::max_element(nn.begin(), nn.end());
  // connected components within tau
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if ((pts[i] - pts[j]).norm() <= tau) parent[find(i)] = find(j);
    }
  }
  // Near-rational transits leave the punctures in clusters along the curve,
  // so angular neighbours about the centre are also joined when the radius
  // is continuous across the gap.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> ang(n), rad(n);
  for (int i = 0; i < n; ++i) {
    const Vec2 d = pts[i] - centre;
    ang[i] = std::atan2(d[1], d[0]);
    rad[i] = d.norm();
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) { return ang[a] < ang[b]; });
  for (int k = 0; k < n; ++k) {
    const int a = order[k], b = order[(k + 1) % n];
    double gap = ang[b] - ang[a];
    if (k == n - 1) gap += 2 * M_PI;
    const double jump = std::abs(rad[b] - rad[a]) / std::max(rad[a], rad[b]);
    t.max_angle_gap = std::max(t.max_angle_gap, gap);
    t.max_radial_jump = std::max(t.max_radial_jump, jump);
    if (gap < M_PI / 4 && jump < 0.1) parent[find(a)] = find(b);
  }
  for (int i = 0; i < n; ++i) t.components += find(i) == i;
  // closed polygon by greedy nearest-neighbour chaining
  std::vector<bool> used(n, false);
  std::vector<int> chain{0};
  used[0] = true;
  for (int k = 1; k < n; ++k) {
    const int a = chain.back();
    int best = -1;
    double bd = INFINITY;
    for (int j = 0; j < n; ++j) {
      if (!used[j] && (pts[j] - pts[a]).norm() < bd) {
        bd = (pts[j] - pts[a]).norm();
        best = j;
      }
    }
    used[best] = true;
    chain.push_back(best);
  }
  double total = 0;
  for (int k = 0; k < n; ++k) {
    const Vec2 a = pts[chain[k]] - centre, b = pts[chain[(k + 1) % n]] - centre;
    total += std::atan2(a[0] * b[1] - a[1] * b[0], a.dot(b));
  }
  t.winding = static_cast<int>(std::lround(total / (2 * M_PI)));
  t.closed_curve = t.components == 1 && std::abs(t.winding) == 1;
  return t;
}

Vec3 seed_on_level(const EquilibriumField& f, const Vec2& centre, double c,
                   double theta, double rmax) {
  const FluxExtension& ext = f.extension();
  const double R0 = ext.R0();
  const Vec2 e(std::cos(theta), std::sin(theta));
  auto at = [&](double rho) {
    const Vec2 y = centre + rho * e;
    return Vec3(R0 + y[0], 0.0, y[1]);
  };
  double lo = 0.0, hi = rmax;
  if (!(ext.value(at(lo)) > c && ext.value(at(hi)) < c)) {
    std::ostringstream os;
    os << "no seed bracket for level " << c;
    throw Error(ErrorCode::Streamline, os.str());
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * rmax; ++it) {
    const double m = 0.5 * (lo + hi);
    if (ext.value(at(m)) > c) lo = m; else hi = m;
  }
  return at(0.5 * (lo + hi));
}

}  // namespace qsgs

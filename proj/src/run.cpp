#include "qsgs/run.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qsgs/identities.hpp"

namespace qsgs {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// nlohmann writes NaN and inf as null; keep them readable instead
json num(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

json stat_json(const Stat& s) {
  return {{"max", num(s.max)}, {"mean", num(s.mean)}, {"count", s.count}};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

fs::path ensure_dir(const std::string& d) {
  fs::path p(d);
  fs::create_directories(p);
  return p;
}

json provenance(const RunConfig& c) {
  json j = config_to_json(c);
  j.erase("output");
  return j;
}

json header_json(const RunConfig& c) {
  return {{"code_version", QSGS_VERSION},
          {"config_hash", config_hash(c)},
          {"schema_version", kSchemaVersion}};
}

struct Geometry {
  std::shared_ptr<const MetricSource> metric;
  std::shared_ptr<const SymmetryField> xi;
  std::shared_ptr<const CoefficientField> L;
};

Geometry make_geometry(const RunConfig& c, const Pipeline& p, double t) {
  Geometry g;
  if (t == 0.0) {
    g.metric = std::make_shared<EuclideanMetric>();
    g.xi = std::make_shared<RotationField>();
    g.L = p.L0;
    return g;
  }
  const DiffeoSpec sp = c.diffeo(t);
  g.xi = std::make_shared<PulledBackRotation>(sp);
  if (c.route == "pullback") {
    g.metric = std::make_shared<PullbackMetric>(sp);
    g.L = std::make_shared<GeometricCoefficients>(g.metric, g.xi, c.base.R0);
  } else {
    g.metric = std::make_shared<CircleAverageMetric>(g.xi, c.n_quad, c.base.r0, -1.0);
    GeometricCoefficients direct(g.metric, g.xi, c.base.R0);
    // table covers the deformed domain with margin
    g.L = std::make_shared<TabulatedCoefficients>(direct, c.table_n, c.table_n,
                                                  1.5 * c.base.r0);
  }
  return g;
}

}  // namespace

std::string artifact_header(const RunConfig& c) {
  std::ostringstream os;
  os << "# code_version: " << QSGS_VERSION << "\n"
     << "# config_hash: " << config_hash(c) << "\n"
     << "# schema_version: " << kSchemaVersion << "\n";
  return os.str();
}

Pipeline::Pipeline(const RunConfig& c)
    : state(BaseState::build(c.base)),
      grid(c.nr, c.nt, c.base.r0),
      base(make_base(state, grid, c.discrete_base)),
      L0(std::make_shared<AxisymCoefficients>(c.base.R0)) {
  h1_lambda = h1_spectrum(*L0, state, base).lambda_min;
  h1_ok = h1_lambda > 0;
  h2_levels = collocation_levels(c.base.psi_bar, c.levels);
  for (double lv : h2_levels) {
    h2_mu.push_back(travel_time(state, lv));
    h2_max = std::max(h2_max, h2_mu.back());
  }
  h2_ok = std::isfinite(h2_max) && h2_max <= c.h2_bound;
  FluxGeometry fg(base);
  for (double lv : collocation_levels(base.psi_axis, c.levels)) {
    mu_discrete.push_back(fg.level(lv).period());
    mu_discrete_max = std::max(mu_discrete_max, mu_discrete.back());
  }
}

SolveOutcome solve_member(const RunConfig& c, const Pipeline& p, double t,
                          bool enforce) {
  SolveOutcome o;
  o.t = t;
  o.boundary = c.boundary;
  o.stage = "gates";
  try {
    o.boundary.validate();
    o.area_defect = o.boundary.area_defect();
    if (std::abs(o.area_defect) > c.area_tol) {
      if (!c.autoscale_boundary) {
        throw Error(ErrorCode::GateFailure,
                    "boundary area defect " + fmt(o.area_defect) +
                        " exceeds " + fmt(c.area_tol) +
                        " (enable autoscale to rescale)");
      }
      o.boundary = o.boundary.autoscaled();
      o.autoscaled = true;
    }
    if (!p.h1_ok) {
      throw Error(ErrorCode::GateFailure,
                  "H1: smallest eigenvalue " + fmt(p.h1_lambda) + " <= 0");
    }
    if (!p.h2_ok) {
      throw Error(ErrorCode::GateFailure,
                  "H2: max travel time " + fmt(p.h2_max) + " exceeds " + fmt(c.h2_bound));
    }
    const Geometry geo = make_geometry(c, p, t);
    o.distance = coefficient_distance(p.grid, *p.L0, *geo.L, p.state, p.base.psi,
                                      o.boundary.delta_b(p.grid));
    o.gated = o.distance.total() <= c.eps_gate;
    if (!o.gated && enforce) {
      throw Error(ErrorCode::GateFailure,
                  "coefficient distance " + fmt(o.distance.total()) +
                      " exceeds eps_gate " + fmt(c.eps_gate));
    }

    o.stage = "solve";
    DeformationSolver solver(p.state, p.base, p.L0, geo.L, o.boundary,
                             c.solver_options(), c.levels);
    o.conv = run_to_convergence(solver);
    if (!o.conv->converged) {
      o.code = o.conv->failure_code;
      o.failure = o.conv->failure;
      return o;
    }

    o.stage = "diagnostics";
    const ConvergenceResult& r = *o.conv;
    auto df = std::make_shared<DeformedFlux>(p.base, r.disp);
    FluxExtension ext(geo.xi, [df](const Vec2& y) { return df->eval(y); },
                      c.base.R0);
    const FieldProfiles prof = FieldProfiles::from_result(p.state, r);
    EquilibriumField F(geo.metric, geo.xi, ext, prof, c.base.r0);
    F.h_B = c.h_B * c.base.r0;
    const auto smp = diagnostic_samples(o.boundary, *geo.xi, c.base.R0,
                                        c.diag_nr, c.diag_nt, c.diag_ns);
    const auto bd = boundary_samples(o.boundary, *geo.xi, c.base.R0);
    auto L = geo.L;
    GsResidualFn gs = [df, L, prof](const Vec2& y) {
      const CartDerivs d = df->eval(y);
      const CoeffSample k = L->at(y);
      const double lpsi = (k.A.array() * d.hess.array()).sum() + k.B.dot(d.grad);
      const double E = lpsi + prof.dP(d.w) / k.sqrt_g +
                       prof.C(d.w) * prof.dC(d.w) * k.w_src - prof.C(d.w) * k.kappa;
      return -E;  // the force component along grad psi is -E
    };
    o.diag = residual_report(F, smp, bd, gs);

    TraceOptions to;
    to.rtol = c.line_rtol;
    to.atol = 1e-2 * c.line_rtol;
    to.transits = c.transits;
    for (int k = 0; k < c.field_lines; ++k) {
      FieldLineSummary fl;
      const double frac = c.field_lines == 1 ? 0.5 : 0.1 + 0.8 * k / (c.field_lines - 1);
      fl.c = frac * p.base.psi_axis;
      const Vec2 centre = df->axis();
      const Vec3 seed = seed_on_level(F, centre, fl.c, 0.3, 1.2 * c.base.r0);
      fl.line = trace_field_line(F, seed, to);
      fl.topo = poincare_topology(fl.line.punctures, centre);
      o.lines.push_back(std::move(fl));
    }
    o.stage = "done";
    o.ok = true;
  } catch (const Error& e) {
    o.code = e.code();
    o.failure = e.what();
  }
  return o;
}

json outcome_json(const RunConfig& c, const Pipeline& p, const SolveOutcome& o) {
  json j;
  j["header"] = header_json(c);
  j["config"] = provenance(c);
  j["t"] = o.t;
  j["status"] = {{"ok", o.ok},
                 {"stage", o.stage},
                 {"exit_code", o.exit_status()},
                 {"error", o.code ? error_name(*o.code) : ""},
                 {"message", o.failure}};
  j["gates"] = {
      {"area_defect", num(o.area_defect)},
      {"autoscaled", o.autoscaled},
      {"h1_lambda_min", num(p.h1_lambda)},
      {"h1_ok", p.h1_ok},
      {"h2_max_travel_time", num(p.h2_max)},
      {"h2_bound", c.h2_bound},
      {"h2_ok", p.h2_ok},
      {"discrete_max_travel_time", num(p.mu_discrete_max)},
      {"coefficient_distance",
       {{"a", num(o.distance.a)},
        {"b", num(o.distance.b)},
        {"G", num(o.distance.G)},
        {"boundary", num(o.distance.boundary)},
        {"total", num(o.distance.total())},
        {"min_ellipticity", num(o.distance.min_ellipticity)}}},
      {"eps_gate", c.eps_gate},
      {"gated", o.gated}};
  j["base"] = {{"psi_axis", p.base.psi_axis},
               {"axis", {p.base.axis.x(), p.base.axis.y()}},
               {"discrete", p.base.discrete},
               {"p_bar", p.state.p_bar()}};
  if (o.conv) {
    const ConvergenceResult& r = *o.conv;
    j["convergence"] = {{"converged", r.converged},
                        {"iterations", static_cast<int>(r.log.size())},
                        {"max_ratio", num(r.max_ratio)},
                        {"final_residual", num(r.final_residual)},
                        {"failure", r.failure},
                        {"min_det", num(r.disp.min_det)},
                        {"max_det_defect", num(r.disp.max_det_defect)},
                        {"max_sqrtg_spread", num(r.max_sqrtg_spread)}};
    if (!r.log.empty()) {
      const StepLog& l = r.log.back();
      j["convergence"]["final_step"] = {{"boundary_defect", num(l.boundary_defect)},
                                        {"neumann_mismatch", num(l.neumann_mismatch)},
                                        {"loop_defect", num(l.loop_defect)},
                                        {"d_disp", num(l.d_disp)}};
    }
  }
  if (o.diag) {
    const DiagnosticsReport& d = *o.diag;
    j["diagnostics"] = {
        {"samples", d.samples},
        {"quarantined", d.quarantined},
        {"B_max", num(d.B_max)},
        {"B_min", num(d.B_min)},
        {"div_B", stat_json(d.div_B)},
        {"flux_residual", stat_json(d.flux_residual)},
        {"flux_residual_alt", stat_json(d.flux_residual_alt)},
        {"flux_alignment_min", num(d.flux_alignment_min)},
        {"flux_orientation", d.flux_orientation},
        {"force_euclid", stat_json(d.force_euclid)},
        {"force_metric", stat_json(d.force_metric)},
        {"gs_crosscheck", stat_json(d.gs_crosscheck)},
        {"qs_direct", stat_json(d.qs_direct)},
        {"qs_formula", stat_json(d.qs_formula)},
        {"qs_chain", stat_json(d.qs_chain)},
        {"qs_discrepancy", num(d.qs_discrepancy)},
        {"strong_qs", stat_json(d.strong_qs)},
        {"footnote", stat_json(d.footnote)},
        {"frame_F_err", stat_json(d.frame_F_err)},
        {"frame_G_err", stat_json(d.frame_G_err)},
        {"frame_H_err", stat_json(d.frame_H_err)},
        {"jxb_frame_err", stat_json(d.jxb_frame_err)},
        {"killing_metric", stat_json(d.killing_metric)},
        {"killing_euclid", stat_json(d.killing_euclid)},
        {"g_minus_delta", num(d.g_minus_delta)},
        {"g_minus_delta_c1", num(d.g_minus_delta_c1)},
        {"g_minus_delta_c2", num(d.g_minus_delta_c2)},
        {"tangency", stat_json(d.tangency)},
        {"flux_property", stat_json(d.flux_property)}};
  }
  json lines = json::array();
  for (const auto& fl : o.lines) {
    lines.push_back({{"c", fl.c},
                     {"psi_seed", fl.line.psi_seed},
                     {"max_deviation", num(fl.line.max_deviation)},
                     {"transits", fl.line.transits},
                     {"punctures", fl.line.punctures.size()},
                     {"exited", fl.line.exited},
                     {"exit_reason", fl.line.exit_reason},
                     {"steps", fl.line.steps},
                     {"components", fl.topo.components},
                     {"winding", fl.topo.winding},
                     {"max_angle_gap", num(fl.topo.max_angle_gap)},
                     {"max_radial_jump", num(fl.topo.max_radial_jump)}});
  }
  j["field_lines"] = lines;
  return j;
}

namespace {

void write_member(const RunConfig& c, const Pipeline& p, const SolveOutcome& o,
                  const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "report.json", outcome_json(c, p, o).dump(2) + "\n");
  const std::string hdr = artifact_header(c);
  if (o.conv) {
    const ConvergenceResult& r = *o.conv;
    std::ostringstream cs;
    cs << hdr << "N,d_eta,d_phi,d_disp,ratio,det_defect,min_det,boundary_defect,"
                 "neumann_mismatch,loop_defect,residual,omega\n";
    for (const StepLog& l : r.log) {
      cs << l.N << ',' << fmt(l.d_eta) << ',' << fmt(l.d_phi) << ','
         << fmt(l.d_disp) << ',' << fmt(l.ratio) << ',' << fmt(l.det_defect)
         << ',' << fmt(l.min_det) << ',' << fmt(l.boundary_defect) << ','
         << fmt(l.neumann_mismatch) << ',' << fmt(l.loop_defect) << ','
         << fmt(l.residual) << ',' << fmt(l.omega) << '\n';
    }
    write_file(dir / "convergence.csv", cs.str());

    std::ostringstream gs;
    gs << hdr << "i,j,r,theta,psi0,eta,phi,alpha,beta\n";
    const PolarGrid& g = p.grid;
    for (int i = 0; i < g.nr; ++i) {
      for (int jj = 0; jj < g.nt; ++jj) {
        const int n = g.index(i, jj);
        gs << i << ',' << jj << ',' << fmt(g.r(i)) << ',' << fmt(g.theta(jj))
           << ',' << fmt(p.base.psi[n]) << ',' << fmt(r.state.pair.eta[n]) << ','
           << fmt(r.state.pair.phi[n]) << ',' << fmt(r.disp.alpha[n]) << ','
           << fmt(r.disp.beta[n]) << '\n';
      }
    }
    write_file(dir / "grid.csv", gs.str());

    if (r.converged) {
      std::ostringstream ps;
      ps << hdr << "c,mu,F,P,C\n";
      const auto levels = collocation_levels(p.base.psi_axis, c.levels);
      const PiecewisePressure P(r.P_nodes.size() >= 2 ? r.P_nodes : levels,
                                r.P_nodes.size() >= 2 ? r.dP_values
                                                      : std::vector<double>(levels.size(), 0.0),
                                0.0);
      for (size_t k = 0; k < levels.size(); ++k) {
        const double F = k < static_cast<size_t>(r.state.F.size()) ? r.state.F[k] : 0.0;
        ps << fmt(levels[k]) << ',' << fmt(p.mu_discrete[k]) << ',' << fmt(F)
           << ',' << fmt(P.P(levels[k])) << ',' << fmt(p.state.C(levels[k])) << '\n';
      }
      write_file(dir / "profile.csv", ps.str());
    }
  }
  if (!o.lines.empty()) {
    std::ostringstream ls;
    ls << hdr << "line,c,k,u,v\n";
    for (size_t n = 0; n < o.lines.size(); ++n) {
      const auto& pts = o.lines[n].line.punctures;
      for (size_t k = 0; k < pts.size(); ++k) {
        ls << n << ',' << fmt(o.lines[n].c) << ',' << k << ',' << fmt(pts[k].x())
           << ',' << fmt(pts[k].y()) << '\n';
      }
    }
    write_file(dir / "punctures.csv", ls.str());
  }
}

}  // namespace

int run_solve(const RunConfig& c, std::ostream& log) {
  const fs::path dir = ensure_dir(c.out_dir);
  std::unique_ptr<Pipeline> p;
  try {
    p = std::make_unique<Pipeline>(c);
  } catch (const Error& e) {
    json j{{"header", header_json(c)},
           {"config", provenance(c)},
           {"status", {{"ok", false}, {"stage", "base"}, {"exit_code", exit_code(e.code())},
                       {"error", error_name(e.code())}, {"message", e.what()}}}};
    write_file(dir / "report.json", j.dump(2) + "\n");
    log << "solve failed: " << e.what() << "\n";
    return exit_code(e.code());
  }
  const SolveOutcome o = solve_member(c, *p, c.t, c.enforce_gates);
  write_member(c, *p, o, dir);
  if (o.ok) {
    const auto& d = *o.diag;
    log << "solve t=" << c.t << " converged in " << o.conv->log.size()
        << " steps, ratio " << o.conv->max_ratio << ", max |f| " << d.force_euclid.max
        << ", max |div B| " << d.div_B.max << ", qs " << d.qs_direct.max << "\n";
  } else {
    log << "solve t=" << c.t << " failed at " << o.stage << ": " << o.failure << "\n";
  }
  return o.exit_status();
}

SlopeFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  SlopeFit f;
  std::vector<double> lx, ly;
  for (size_t k = 0; k < x.size() && k < y.size(); ++k) {
    if (x[k] > 0 && y[k] > 0) {
      lx.push_back(std::log(x[k]));
      ly.push_back(std::log(y[k]));
    }
  }
  f.n = static_cast<int>(lx.size());
  if (f.n < 2) return f;
  double mx = 0, my = 0;
  for (int k = 0; k < f.n; ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= f.n;
  my /= f.n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int k = 0; k < f.n; ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
    syy += (ly[k] - my) * (ly[k] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double sse = std::max(0.0, syy - f.slope * sxy);
  f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  if (f.n > 2) {
    const double se = std::sqrt(sse / (f.n - 2) / sxx);
    boost::math::students_t dist(f.n - 2);
    const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
    f.ci_lo = f.slope - q * se;
    f.ci_hi = f.slope + q * se;
  } else {
    f.ci_lo = f.ci_hi = f.slope;
  }
  return f;
}

namespace {

json fit_json(const SlopeFit& f) {
  return {{"slope", num(f.slope)}, {"intercept", num(f.intercept)},
          {"r2", num(f.r2)},       {"ci95", {num(f.ci_lo), num(f.ci_hi)}},
          {"points", f.n}};
}

}  // namespace

int run_study(const RunConfig& c, std::ostream& log, StudyResult* out) {
  const fs::path dir = ensure_dir(c.out_dir);
  StudyResult res;
  int status = 0;
  std::unique_ptr<Pipeline> p;
  try {
    p = std::make_unique<Pipeline>(c);
  } catch (const Error& e) {
    res.aborted = true;
    res.abort_reason = e.what();
    status = exit_code(e.code());
  }

  for (size_t k = 0; p && k < c.amplitudes.size(); ++k) {
    const double t = c.amplitudes[k];
    // members beyond eps_gate still run, as probes; they cannot abort the table
    const SolveOutcome o = solve_member(c, *p, t, false);
    char name[32];
    std::snprintf(name, sizeof name, "member_%02zu", k);
    write_member(c, *p, o, dir / name);

    StudyRow row;
    row.t = t;
    row.gated = o.gated;
    row.ok = o.ok;
    row.failure = o.failure;
    if (o.conv) {
      row.iterations = static_cast<int>(o.conv->log.size());
      row.ratio = o.conv->max_ratio;
    }
    if (o.diag) {
      row.g_minus_delta = o.diag->g_minus_delta;
      row.killing_euclid = o.diag->killing_euclid.max;
      row.force = o.diag->force_euclid.max;
      row.qs = o.diag->qs_direct.max;
    }
    res.rows.push_back(row);
    log << "member t=" << t << (o.gated ? " gated" : " probe") << ": "
        << (o.ok ? "ok" : o.failure) << "\n";
    if (!o.ok && o.gated) {
      res.aborted = true;
      res.abort_reason = "member t=" + fmt(t) + " failed: " + o.failure;
      status = o.exit_status();
      break;
    }
  }

  if (!res.aborted) {
    std::vector<double> gd, fr, ts, qs;
    for (const auto& r : res.rows) {
      if (r.t == 0.0 && r.ok) res.floor = r.force;
    }
    for (const auto& r : res.rows) {
      if (r.t > 0 && r.ok && r.gated) {
        gd.push_back(r.g_minus_delta);
        fr.push_back(r.force - res.floor);
        ts.push_back(r.t);
        qs.push_back(r.qs);
      }
    }
    if (gd.size() >= 2) {
      res.force_fit = loglog_fit(gd, fr);
      res.qs_fit = loglog_fit(ts, qs);
    }
  }

  std::ostringstream cs;
  cs << artifact_header(c);
  cs << "t,g_minus_delta,killing_euclid,force,qs_error,iterations,ratio,gated,ok\n";
  for (const auto& r : res.rows) {
    cs << fmt(r.t) << ',' << fmt(r.g_minus_delta) << ',' << fmt(r.killing_euclid)
       << ',' << fmt(r.force) << ',' << fmt(r.qs) << ',' << r.iterations << ','
       << fmt(r.ratio) << ',' << (r.gated ? 1 : 0) << ',' << (r.ok ? 1 : 0) << '\n';
  }
  write_file(dir / "study.csv", cs.str());

  json j;
  j["header"] = header_json(c);
  j["config"] = provenance(c);
  j["aborted"] = res.aborted;
  j["abort_reason"] = res.abort_reason;
  j["force_floor"] = num(res.floor);
  json rows = json::array();
  for (const auto& r : res.rows) {
    rows.push_back({{"t", r.t}, {"gated", r.gated}, {"ok", r.ok}, {"failure", r.failure},
                    {"g_minus_delta", num(r.g_minus_delta)},
                    {"killing_euclid", num(r.killing_euclid)}, {"force", num(r.force)},
                    {"qs_error", num(r.qs)}, {"iterations", r.iterations},
                    {"ratio", num(r.ratio)}});
  }
  j["rows"] = rows;
  if (res.force_fit) j["fit_force_vs_g_minus_delta"] = fit_json(*res.force_fit);
  if (res.qs_fit) j["fit_qs_vs_t"] = fit_json(*res.qs_fit);
  write_file(dir / "study.json", j.dump(2) + "\n");

  if (res.force_fit) {
    log << "force slope " << res.force_fit->slope << " (R2 " << res.force_fit->r2
        << "), qs slope " << res.qs_fit->slope << " (R2 " << res.qs_fit->r2 << ")\n";
  }
  if (res.aborted) log << "study aborted: " << res.abort_reason << "\n";
  if (out) *out = std::move(res);
  return status;
}

int run_identities(const RunConfig& c, std::ostream& log) {
  const fs::path dir = ensure_dir(c.out_dir);
  const IdentitySuite s = run_identity_suite(c.seed, c.identity_count);
  std::ostringstream cs;
  cs << artifact_header(c) << "# seed: " << s.seed << "\n# count: " << s.count << "\n";
  cs << "name,family,kind,tol,max_rel,samples,variant,pass\n";
  for (const auto& r : s.results) {
    cs << r.name << ',' << r.family << ','
       << (r.kind == CheckKind::Analytic ? "analytic" : "fd") << ',' << fmt(r.tol)
       << ',' << fmt(r.max_rel) << ',' << r.count << ',' << (r.variant ? 1 : 0)
       << ',' << (r.pass ? 1 : 0) << '\n';
    log << (r.variant ? "  variant " : (r.pass ? "  pass    " : "  FAIL    ")) << r.name
        << "  max rel " << r.max_rel << "\n";
  }
  write_file(dir / "identities.csv", cs.str());
  log << (s.all_pass() ? "all identities pass" : "identity failures") << "\n";
  return s.all_pass() ? 0 : exit_code(ErrorCode::GateFailure);
}

int run_base_state_check(const RunConfig& c, std::ostream& log) {
  const fs::path dir = ensure_dir(c.out_dir);
  const Pipeline p(c);
  const BaseParams& bp = c.base;
  const double p_expected = 2 * bp.psi_bar - (bp.c_bar * bp.r0) * (bp.c_bar * bp.r0);
  const double mu_exact = M_PI * bp.r0 * bp.r0 / bp.psi_bar;
  double mu_dev = 0.0;
  for (double m : p.h2_mu) mu_dev = std::max(mu_dev, std::abs(m / mu_exact - 1));

  std::vector<Vec2> rt;
  for (int i = 0; i <= 8; ++i) {
    for (int k = 0; k < 8; ++k) rt.emplace_back(bp.r0 * i / 8.0, 2 * M_PI * k / 8.0);
  }
  const AxisymResidual res = axisym_gs_residual(p.state, rt);

  std::ostringstream ps;
  ps << artifact_header(c) << "c,mu,F,P,C\n";
  for (size_t k = 0; k < p.h2_levels.size(); ++k) {
    const double lv = p.h2_levels[k];
    ps << fmt(lv) << ',' << fmt(p.h2_mu[k]) << ',' << fmt(p.state.dP(lv)) << ','
       << fmt(p.state.P(lv)) << ',' << fmt(p.state.C(lv)) << '\n';
  }
  write_file(dir / "base_profile.csv", ps.str());

  json j;
  j["header"] = header_json(c);
  j["config"] = provenance(c);
  j["p_bar"] = p.state.p_bar();
  j["p_bar_expected"] = p_expected;
  j["travel_time_exact"] = mu_exact;
  j["travel_time_max_rel_dev"] = num(mu_dev);
  j["h2_max_travel_time"] = num(p.h2_max);
  j["h2_bound"] = c.h2_bound;
  j["h2_ok"] = p.h2_ok;
  j["h1_lambda_min"] = num(p.h1_lambda);
  j["h1_ok"] = p.h1_ok;
  j["discrete_psi_axis"] = p.base.psi_axis;
  j["discrete_max_travel_time"] = num(p.mu_discrete_max);
  j["residual"] = {{"max_toroidal", num(res.max_toroidal)},
                   {"max_infinite", num(res.max_infinite)},
                   {"max_psi_only", num(res.max_psi_only)}};
  write_file(dir / "base_state.json", j.dump(2) + "\n");

  log << "p_bar " << p.state.p_bar() << " (expected " << p_expected << ")\n"
      << "travel time max rel dev " << mu_dev << ", H2 max " << p.h2_max << "\n"
      << "H1 lambda_min " << p.h1_lambda << "\n";
  if (!p.h1_ok || !p.h2_ok) return exit_code(ErrorCode::GateFailure);
  return 0;
}

}  // namespace qsgs

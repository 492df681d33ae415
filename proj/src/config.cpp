#include "qsgs/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace qsgs {

using nlohmann::json;

DiffeoSpec RunConfig::diffeo(double amplitude) const {
  DiffeoSpec s;
  s.t = amplitude;
  s.R0 = base.R0;
  s.r0 = base.r0;
  s.m1 = m1;
  s.m2 = m2;
  s.bump = bump;
  return s;
}

SolverOptions RunConfig::solver_options() const {
  SolverOptions o;
  o.tol_iter = tol_iter * base.r0;
  o.max_iter = max_iter;
  o.omega = omega;
  o.auto_damp = auto_damp;
  o.divergence_factor = divergence_factor;
  return o;
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::Config, msg); }

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) fail("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void get(const json& j, const char* key, const std::string& where, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail("bad type for " + where + "." + key);
  }
}

void positive(double v, const char* name) {
  if (!(v > 0)) fail(std::string(name) + " must be > 0");
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  check_keys(j, "config",
             {"schema_version", "base", "boundary", "family", "metric", "grid",
              "solver", "gates", "diagnostics", "output", "seed", "identities"});
  int version = kSchemaVersion;
  get(j, "schema_version", "config", version);
  if (version != kSchemaVersion) {
    fail("schema_version " + std::to_string(version) + " not supported");
  }
  if (j.contains("base")) {
    const json& s = j["base"];
    check_keys(s, "base", {"psi_bar", "c_bar", "r0", "R0", "eps_reg", "discrete"});
    get(s, "psi_bar", "base", c.base.psi_bar);
    get(s, "c_bar", "base", c.base.c_bar);
    get(s, "r0", "base", c.base.r0);
    get(s, "R0", "base", c.base.R0);
    get(s, "eps_reg", "base", c.base.eps_reg);
    get(s, "discrete", "base", c.discrete_base);
  }
  if (j.contains("boundary")) {
    const json& s = j["boundary"];
    check_keys(s, "boundary", {"a0", "a", "b", "autoscale"});
    get(s, "a0", "boundary", c.boundary.a0);
    get(s, "a", "boundary", c.boundary.a);
    get(s, "b", "boundary", c.boundary.b);
    get(s, "autoscale", "boundary", c.autoscale_boundary);
  }
  c.boundary.r0 = c.base.r0;
  if (j.contains("family")) {
    const json& s = j["family"];
    check_keys(s, "family", {"t", "amplitudes", "m1", "m2", "bump"});
    get(s, "t", "family", c.t);
    get(s, "amplitudes", "family", c.amplitudes);
    get(s, "m1", "family", c.m1);
    get(s, "m2", "family", c.m2);
    get(s, "bump", "family", c.bump);
  }
  if (j.contains("metric")) {
    const json& s = j["metric"];
    check_keys(s, "metric", {"route", "n_quad", "table_n"});
    get(s, "route", "metric", c.route);
    get(s, "n_quad", "metric", c.n_quad);
    get(s, "table_n", "metric", c.table_n);
  }
  if (j.contains("grid")) {
    const json& s = j["grid"];
    check_keys(s, "grid", {"nr", "nt", "levels"});
    get(s, "nr", "grid", c.nr);
    get(s, "nt", "grid", c.nt);
    get(s, "levels", "grid", c.levels);
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, "solver", {"tol_iter", "max_iter", "omega", "auto_damp", "divergence_factor"});
    get(s, "tol_iter", "solver", c.tol_iter);
    get(s, "max_iter", "solver", c.max_iter);
    get(s, "omega", "solver", c.omega);
    get(s, "auto_damp", "solver", c.auto_damp);
    get(s, "divergence_factor", "solver", c.divergence_factor);
  }
  if (j.contains("gates")) {
    const json& s = j["gates"];
    check_keys(s, "gates", {"eps_gate", "enforce", "area_tol", "h2_bound"});
    get(s, "eps_gate", "gates", c.eps_gate);
    get(s, "enforce", "gates", c.enforce_gates);
    get(s, "area_tol", "gates", c.area_tol);
    get(s, "h2_bound", "gates", c.h2_bound);
  }
  if (j.contains("diagnostics")) {
    const json& s = j["diagnostics"];
    check_keys(s, "diagnostics",
               {"nr", "nt", "ns", "h_B", "field_lines", "transits", "line_rtol"});
    get(s, "nr", "diagnostics", c.diag_nr);
    get(s, "nt", "diagnostics", c.diag_nt);
    get(s, "ns", "diagnostics", c.diag_ns);
    get(s, "h_B", "diagnostics", c.h_B);
    get(s, "field_lines", "diagnostics", c.field_lines);
    get(s, "transits", "diagnostics", c.transits);
    get(s, "line_rtol", "diagnostics", c.line_rtol);
  }
  if (j.contains("output")) {
    const json& s = j["output"];
    check_keys(s, "output", {"dir"});
    get(s, "dir", "output", c.out_dir);
  }
  get(j, "seed", "config", c.seed);
  if (j.contains("identities")) {
    const json& s = j["identities"];
    check_keys(s, "identities", {"count"});
    get(s, "count", "identities", c.identity_count);
  }
  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  positive(c.base.psi_bar, "base.psi_bar");
  positive(c.base.r0, "base.r0");
  positive(c.base.eps_reg, "base.eps_reg");
  if (!(c.base.r0 < c.base.R0)) fail("base.r0 must be < base.R0");
  if (!(c.t >= 0)) fail("family.t must be >= 0");
  for (double a : c.amplitudes) {
    if (!(a >= 0)) fail("family.amplitudes must be >= 0");
  }
  if (c.route != "pullback" && c.route != "circle-average") {
    fail("metric.route must be pullback or circle-average");
  }
  if (c.n_quad < 8) fail("metric.n_quad must be >= 8");
  if (c.table_n < 8) fail("metric.table_n must be >= 8");
  if (c.nr < 8 || c.nt < 8) fail("grid.nr and grid.nt must be >= 8");
  if (c.levels < 4) fail("grid.levels must be >= 4");
  positive(c.tol_iter, "solver.tol_iter");
  if (c.max_iter < 1) fail("solver.max_iter must be >= 1");
  if (!(c.omega > 0 && c.omega <= 1)) fail("solver.omega must be in (0, 1]");
  positive(c.divergence_factor, "solver.divergence_factor");
  positive(c.eps_gate, "gates.eps_gate");
  positive(c.area_tol, "gates.area_tol");
  positive(c.h2_bound, "gates.h2_bound");
  if (c.diag_nr < 1 || c.diag_nt < 1 || c.diag_ns < 1) fail("diagnostics sample counts must be >= 1");
  positive(c.h_B, "diagnostics.h_B");
  if (c.field_lines < 0) fail("diagnostics.field_lines must be >= 0");
  if (c.transits < 1) fail("diagnostics.transits must be >= 1");
  positive(c.line_rtol, "diagnostics.line_rtol");
  if (c.identity_count < 1) fail("identities.count must be >= 1");
}

json config_to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["base"] = {{"psi_bar", c.base.psi_bar}, {"c_bar", c.base.c_bar},
               {"r0", c.base.r0}, {"R0", c.base.R0},
               {"eps_reg", c.base.eps_reg}, {"discrete", c.discrete_base}};
  j["boundary"] = {{"a0", c.boundary.a0}, {"a", c.boundary.a},
                   {"b", c.boundary.b}, {"autoscale", c.autoscale_boundary}};
  j["family"] = {{"t", c.t}, {"amplitudes", c.amplitudes}, {"m1", c.m1},
                 {"m2", c.m2}, {"bump", c.bump}};
  j["metric"] = {{"route", c.route}, {"n_quad", c.n_quad}, {"table_n", c.table_n}};
  j["grid"] = {{"nr", c.nr}, {"nt", c.nt}, {"levels", c.levels}};
  j["solver"] = {{"tol_iter", c.tol_iter}, {"max_iter", c.max_iter},
                 {"omega", c.omega}, {"auto_damp", c.auto_damp},
                 {"divergence_factor", c.divergence_factor}};
  j["gates"] = {{"eps_gate", c.eps_gate}, {"enforce", c.enforce_gates},
                {"area_tol", c.area_tol}, {"h2_bound", c.h2_bound}};
  j["diagnostics"] = {{"nr", c.diag_nr}, {"nt", c.diag_nt}, {"ns", c.diag_ns},
                      {"h_B", c.h_B}, {"field_lines", c.field_lines},
                      {"transits", c.transits}, {"line_rtol", c.line_rtol}};
  j["output"] = {{"dir", c.out_dir}};
  j["seed"] = c.seed;
  j["identities"] = {{"count", c.identity_count}};
  return j;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(std::string("parse error in ") + path + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const RunConfig& c) {
  json j = config_to_json(c);
  j.erase("output");  // where artifacts land does not change them
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qsgs

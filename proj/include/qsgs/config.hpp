#ifndef QSGS_CONFIG_HPP
#define QSGS_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsgs/base_state.hpp"
#include "qsgs/deformation.hpp"
#include "qsgs/designer_metrics.hpp"

namespace qsgs {

constexpr int kSchemaVersion = 1;

struct RunConfig {
  BaseParams base;
  bool discrete_base = true;

  BoundarySpec boundary = BoundarySpec::circle(0.5);
  bool autoscale_boundary = false;

  // pullback family; t is the amplitude of a single solve
  double t = 0.01;
  std::vector<double> amplitudes{0.0, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 0.8};
  int m1 = 2, m2 = 3;
  double bump = 0.5;

  std::string route = "pullback";  // or "circle-average"
  int n_quad = 64;                 // circle-average quadrature
  int table_n = 48;                // circle-average coefficient table

  int nr = 64, nt = 64;
  int levels = 32;

  double tol_iter = 1e-9;          // relative to r0
  int max_iter = 200;
  double omega = 0.5;
  bool auto_damp = true;
  double divergence_factor = 1.0;

  double eps_gate = 0.25;
  bool enforce_gates = true;
  double area_tol = 1e-10;
  double h2_bound = 1.0;      // max travel time over the levels

  int diag_nr = 16, diag_nt = 32, diag_ns = 8;
  double h_B = 1e-4;               // Cartesian FD step, relative to r0
  int field_lines = 0;             // seeds on as many levels
  int transits = 100;
  double line_rtol = 1e-9;

  std::string out_dir = "out";
  std::uint64_t seed = 42;
  int identity_count = 1000;

  DiffeoSpec diffeo(double amplitude) const;
  SolverOptions solver_options() const;
};

// Throws Error(Config) on unknown keys, wrong types, or invalid values.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
RunConfig load_config(const std::string& path);
void validate(const RunConfig& c);

// FNV-1a 64 of the canonical JSON dump without the output section, as 16
// hex digits.
std::string config_hash(const RunConfig& c);

}  // namespace qsgs

#endif

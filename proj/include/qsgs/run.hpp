#ifndef QSGS_RUN_HPP
#define QSGS_RUN_HPP

#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qsgs/config.hpp"
#include "qsgs/diagnostics.hpp"

namespace qsgs {

//! t-independent part of a run: base state, discrete base, L0, H1/H2.
struct Pipeline {
  BaseState state;
  PolarGrid grid;
  DiscreteBase base;
  std::shared_ptr<const CoefficientField> L0;

  double h1_lambda = 0.0;
  std::vector<double> h2_levels;    // collocation levels of the analytic state
  std::vector<double> h2_mu;        // analytic travel times there
  double h2_max = 0.0;
  std::vector<double> mu_discrete;  // travel times of the discrete base
  double mu_discrete_max = 0.0;
  bool h1_ok = false, h2_ok = false;

  explicit Pipeline(const RunConfig& c);
};

struct FieldLineSummary {
  double c = 0.0;
  FieldLine line;
  PoincareTopology topo;
};

//! One member of the deformation family, run through gates, iteration and
//! diagnostics. Failures are recorded, not thrown.
struct SolveOutcome {
  double t = 0.0;
  BoundarySpec boundary;
  double area_defect = 0.0;
  bool autoscaled = false;
  CoeffDistance distance;
  bool gated = false;  // coefficient distance within eps_gate

  bool ok = false;
  std::string stage;  // where it stopped: gates, solve, diagnostics, done
  std::optional<ErrorCode> code;
  std::string failure;

  std::optional<ConvergenceResult> conv;
  std::optional<DiagnosticsReport> diag;
  std::vector<FieldLineSummary> lines;

  int exit_status() const { return ok ? 0 : exit_code(*code); }
};

// enforce = false runs past a failed coefficient-distance gate.
SolveOutcome solve_member(const RunConfig& c, const Pipeline& p, double t,
                          bool enforce);

nlohmann::json outcome_json(const RunConfig& c, const Pipeline& p,
                            const SolveOutcome& o);

//! Log-log least squares fit y = a x^slope.
struct SlopeFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // 95% interval on the slope
  int n = 0;
};
SlopeFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

struct StudyRow {
  double t = 0.0;
  bool gated = false, ok = false;
  std::string failure;
  double g_minus_delta = 0.0, killing_euclid = 0.0, force = 0.0, qs = 0.0;
  int iterations = 0;
  double ratio = 0.0;
};

struct StudyResult {
  std::vector<StudyRow> rows;
  bool aborted = false;
  std::string abort_reason;
  double floor = 0.0;             // force at t = 0, if present
  std::optional<SlopeFit> force_fit;  // force - floor vs |g - delta|
  std::optional<SlopeFit> qs_fit;     // qs error vs t
};

// Artifacts go to out_dir; returns the process exit status.
int run_solve(const RunConfig& c, std::ostream& log);
int run_study(const RunConfig& c, std::ostream& log, StudyResult* out = nullptr);
int run_identities(const RunConfig& c, std::ostream& log);
int run_base_state_check(const RunConfig& c, std::ostream& log);

// Header block for CSV artifacts: "# key: value" lines.
std::string artifact_header(const RunConfig& c);

}  // namespace qsgs

#endif

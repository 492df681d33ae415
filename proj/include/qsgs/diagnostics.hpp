#ifndef QSGS_DIAGNOSTICS_HPP
#define QSGS_DIAGNOSTICS_HPP

#include <functional>
#include <memory>
#include <string>

#include "qsgs/deformation.hpp"

namespace qsgs {

//! C and P as functions of the flux label, with first derivatives.
struct FieldProfiles {
  std::function<double(double)> C, dC, P, dP;

  static FieldProfiles from_base(const BaseState& s);
  // C from the base state; P from the converged profile nodes.
  static FieldProfiles from_result(const BaseState& s, const ConvergenceResult& r);
};

//! Piecewise-linear P' on nodes, P its exact integral with P(nodes[0]) = P0.
//! Linear extension past both ends.
class PiecewisePressure {
 public:
  PiecewisePressure(std::vector<double> nodes, std::vector<double> dP, double P0);
  double P(double c) const;
  double dP(double c) const;

 private:
  std::vector<double> x_, d_, p_;
  int segment(double c) const;
};

//! psi-bar on the torus: constant along the flow of xi, equal to the
//! cross-section flux on the half-plane y = 0, x > 0, where the
//! cross-section coordinates are (u, v) = (x - R0, z).
class FluxExtension {
 public:
  FluxExtension(std::shared_ptr<const SymmetryField> xi,
                std::function<CartDerivs(const Vec2&)> psi, double R0);

  struct Value {
    double psi = 0.0;
    Vec3 grad = Vec3::Zero();  // Euclidean gradient of psi-bar
    Vec3 proj = Vec3::Zero();  // flow image on the half-plane
    double s = 0.0;            // flow time to the half-plane
    Vec2 y = Vec2::Zero();     // cross-section coordinates of proj
  };
  // Throws Extension if the projection fails.
  Value eval(const Vec3& X) const;
  // Value only; cheaper, no flow Jacobian.
  double value(const Vec3& X) const;
  Vec3 project(const Vec3& X, double* s_out = nullptr) const;

  const SymmetryField& xi() const { return *xi_; }
  double R0() const { return R0_; }

 private:
  std::shared_ptr<const SymmetryField> xi_;
  std::function<CartDerivs(const Vec2&)> psi_;
  double R0_;
};

//! B_g = (C(psi) xi + sqrt|g| xi x_g grad_g psi) / |xi|_g^2 on the torus.
class EquilibriumField {
 public:
  EquilibriumField(std::shared_ptr<const MetricSource> g,
                   std::shared_ptr<const SymmetryField> xi,
                   FluxExtension ext, FieldProfiles prof, double r0);

  struct Sample {
    Vec3 x, B;
    double psi = 0.0;
    Vec3 grad_psi;
    MetricFrame g;
    VecSample xi;
    Vec2 y;  // cross-section preimage coordinates
  };
  Sample eval(const Vec3& X) const;
  Vec3 B(const Vec3& X) const { return eval(X).B; }

  const FluxExtension& extension() const { return ext_; }
  const FieldProfiles& profiles() const { return prof_; }
  const MetricSource& metric() const { return *g_; }
  const SymmetryField& xi() const { return *xi_; }
  std::shared_ptr<const SymmetryField> xi_ptr() const { return xi_; }
  double r0() const { return r0_; }
  double h_B = 0.0;  // Cartesian FD step; 0 means 1e-4 r0

 private:
  std::shared_ptr<const MetricSource> g_;
  std::shared_ptr<const SymmetryField> xi_;
  FluxExtension ext_;
  FieldProfiles prof_;
  double r0_;
};

// Points phi_s(R0 + rho_k cos th, 0, rho_k sin th) with rho_k = rho_D(th)
// (k + 1) / (n_r + 1) and s = 2 pi m / n_s.
std::vector<Vec3> diagnostic_samples(const BoundarySpec& b,
                                     const SymmetryField& xi, double R0,
                                     int n_r = 16, int n_t = 32, int n_s = 8);
// Points on the image of the boundary curve, for the tangency check.
std::vector<Vec3> boundary_samples(const BoundarySpec& b,
                                   const SymmetryField& xi, double R0,
                                   int n_t = 64, int n_s = 8);

struct Stat {
  double max = 0.0, mean = 0.0;
  long count = 0;
  void add(double v);
  void finish();
};

struct DiagnosticsReport {
  long samples = 0;
  long quarantined = 0;  // non-finite samples dropped
  double B_max = 0.0, B_min = 0.0;
  Stat div_B;
  Stat flux_residual;       // |xi x B + grad psi|
  Stat flux_residual_alt;   // |B x xi + grad psi|
  double flux_alignment_min = 1.0;  // min |cos(B x xi, grad psi)|
  std::string flux_orientation;     // which orientation holds
  Stat force_euclid;        // |(curl B) x B - grad P|
  Stat force_metric;        // |curl_g B x_g B - grad_g P|_g
  Stat gs_crosscheck;       // |f ._g grad_g psi / (sqrt g |grad_g psi|^2) - E|
  Stat qs_direct;           // |xi . grad |B||
  Stat qs_formula;          // bracket formula
  Stat qs_chain;            // (L_xi delta)(B, B) / (2 |B|)
  double qs_discrepancy = 0.0;  // max |direct - formula| / max |direct|
  Stat strong_qs;           // |xi x J - grad(B . xi)|
  Stat footnote;            // |B.(xi x J - grad(B.xi)) + xi . grad |B|^2|
  Stat frame_F_err;         // grad_g psi coefficient of curl_g B minus its formula
  Stat frame_G_err;         // grad-perp coefficient minus its formula
  Stat frame_H_err;         // xi coefficient minus its formula
  Stat jxb_frame_err;       // force frame components vs F, G, H
  Stat killing_metric;      // |L_xi g|
  Stat killing_euclid;      // |L_xi delta|
  double g_minus_delta = 0.0;     // C0 max of |g - I|_F
  double g_minus_delta_c1 = 0.0;  // max |dg|
  double g_minus_delta_c2 = 0.0;  // max |d dg| by FD
  Stat tangency;            // |B . n| / |B| on the boundary image
  Stat flux_property;       // |B . grad psi| / (|B| |grad psi|)
};

// Optional gGS residual at cross-section points for the force cross-check.
using GsResidualFn = std::function<double(const Vec2&)>;

DiagnosticsReport residual_report(const EquilibriumField& f,
                                  const std::vector<Vec3>& samples,
                                  const std::vector<Vec3>& boundary = {},
                                  const GsResidualFn& gs = nullptr);

struct QsError {
  double direct = 0.0, formula = 0.0, chain = 0.0;
  double discrepancy = 0.0;  // relative, direct vs formula
};
QsError qs_error(const EquilibriumField& f, const std::vector<Vec3>& samples);

//! Field line of B from a seed, with punctures through y = 0, x > 0.
struct FieldLine {
  Vec3 seed;
  double psi_seed = 0.0;
  double max_deviation = 0.0;  // max |psi-bar(x(t)) - psi-bar(seed)|
  std::vector<Vec2> punctures; // (u, v) cross-section coordinates
  int transits = 0;
  bool exited = false;
  std::string exit_reason;
  long steps = 0;
};

struct TraceOptions {
  double rtol = 1e-9, atol = 1e-11;
  int transits = 100;
  long max_steps = 50000000;
};

FieldLine trace_field_line(const EquilibriumField& f, const Vec3& seed,
                           const TraceOptions& opt = {});

struct PoincareTopology {
  int components = 0;
  int winding = 0;
  double max_angle_gap = 0.0;  // radians, about the centre
  double max_radial_jump = 0.0; // relative, between angular neighbours
  bool closed_curve = false;
};

// Punctures of one seed, ordered by angle about centre.
PoincareTopology poincare_topology(const std::vector<Vec2>& pts,
                                   const Vec2& centre);

// Seed on the half-plane where the flux equals c, searching along the ray
// from centre at angle theta.
Vec3 seed_on_level(const EquilibriumField& f, const Vec2& centre, double c,
                   double theta, double rmax);

}  // namespace qsgs

#endif

#include "qsgs/identities.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <random>

#include "qsgs/designer_metrics.hpp"
#include "qsgs/geometry.hpp"
#include "qsgs/jet.hpp"

namespace qsgs {

bool IdentitySuite::all_pass() const {
  for (const auto& r : results) {
    if (!r.variant && !r.pass) return false;
  }
  return !results.empty();
}

const IdentityResult* IdentitySuite::find(const std::string& name) const {
  for (const auto& r : results) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

namespace {

constexpr double kFdStep = 1e-5;

struct Rng {
  std::mt19937_64 e;
  double u(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(e);
  }
  Vec3 vec(double lo, double hi) { return Vec3(u(lo, hi), u(lo, hi), u(lo, hi)); }
};

// c0 + a.x + sum_k b_k sin(w_k . x + p_k)
struct ScalarFn {
  double c0 = 0;
  Vec3 a = Vec3::Zero();
  std::array<Vec3, 3> w;
  std::array<double, 3> b{}, p{};

  static ScalarFn random(Rng& r, double amp) {
    ScalarFn f;
    f.c0 = r.u(-amp, amp);
    f.a = r.vec(-amp, amp);
    for (int k = 0; k < 3; ++k) {
      f.w[k] = r.vec(-2, 2);
      f.b[k] = r.u(-amp, amp);
      f.p[k] = r.u(0, 2 * M_PI);
    }
    return f;
  }
  Jet operator()(const JetVec& x) const {
    Jet s(c0);
    for (int i = 0; i < 3; ++i) s += a[i] * x[i];
    for (int k = 0; k < 3; ++k) {
      Jet arg(p[k]);
      for (int i = 0; i < 3; ++i) arg += w[k][i] * x[i];
      s += b[k] * sin(arg);
    }
    return s;
  }
  Jet at(const Vec3& x) const { return (*this)(jet_point(x)); }
};

struct VecFn {
  std::array<ScalarFn, 3> c;
  static VecFn random(Rng& r) {
    VecFn v;
    for (auto& s : v.c) s = ScalarFn::random(r, 1.0);
    return v;
  }
  VecSample sample(const Vec3& x) const {
    const JetVec X = jet_point(x);
    VecSample s;
    s.has_jac = true;
    for (int i = 0; i < 3; ++i) {
      const Jet j = c[i](X);
      s.value[i] = j.v;
      s.jac.row(i) = j.d.transpose();
    }
    return s;
  }
  Vec3 value(const Vec3& x) const { return sample(x).value; }
};

// g = L L^T + I/4 with L = I + 0.3 S(x); always positive definite.
struct MetricFn {
  std::array<ScalarFn, 9> S;
  static MetricFn random(Rng& r) {
    MetricFn m;
    for (auto& s : m.S) s = ScalarFn::random(r, 0.5);
    return m;
  }
  MetricFrame frame(const Vec3& x) const {
    const JetVec X = jet_point(x);
    Jet L[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) L[i][j] = (i == j ? 1.0 : 0.0) + 0.3 * S[3 * i + j](X);
    Mat3 g;
    std::array<Mat3, 3> dg;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        Jet s(i == j ? 0.25 : 0.0);
        for (int k = 0; k < 3; ++k) s += L[i][k] * L[j][k];
        g(i, j) = s.v;
        for (int k = 0; k < 3; ++k) dg[k](i, j) = s.d[k];
      }
    }
    return MetricFrame::make(g, dg);
  }
};

VecSample rotation(const Vec3& x) {
  Mat3 J = Mat3::Zero();
  J(0, 1) = -1;
  J(1, 0) = 1;
  return VecSample(Vec3(-x[1], x[0], 0), J);
}

Vec3 torus_point(Rng& r) {
  const double R = r.u(0.6, 1.4), ph = r.u(0, 2 * M_PI), z = r.u(-0.4, 0.4);
  return Vec3(R * std::cos(ph), R * std::sin(ph), z);
}

DiffeoSpec random_spec(Rng& r) {
  DiffeoSpec s;
  s.t = r.u(0.02, 0.2);
  s.R0 = 1.0;
  s.r0 = 0.4;
  return s;
}

double sum_abs(std::initializer_list<double> m) {
  double s = 0;
  for (double v : m) s += std::abs(v);
  return s;
}

double rel(double diff, std::initializer_list<double> m) {
  return std::abs(diff) / std::max(sum_abs(m), 1e-300);
}

double rel(const Vec3& d, std::initializer_list<double> m) {
  return d.norm() / std::max(sum_abs(m), 1e-300);
}

double levi(int i, int j, int k) {
  return 0.5 * (i - j) * (j - k) * (k - i);
}

// d_k |X|_g^2
Vec3 d_norm2(const MetricFrame& g, const VecSample& X) {
  Vec3 d;
  for (int k = 0; k < 3; ++k) {
    d[k] = 2 * X.jac.col(k).dot(g.g * X.value) + X.value.dot(g.dg[k] * X.value);
  }
  return d;
}

Vec3 lie(const VecSample& a, const VecSample& b) {  // L_a b
  return b.jac * a.value - a.jac * b.value;
}

// div_g of a vector field by central differences of sqrt g V
double fd_div_g(const std::function<MetricFrame(const Vec3&)>& frame,
                const std::function<Vec3(const Vec3&)>& V, const Vec3& x,
                double* scale = nullptr) {
  const auto S = [&](const Vec3& p) { return Vec3(frame(p).sqrt_det * V(p)); };
  const Mat3 J = fd_jacobian(S, x, kFdStep);
  const double sg = frame(x).sqrt_det;
  if (scale) *scale = J.norm() / sg;
  return J.trace() / sg;
}

Vec3 fd_curl_g(const MetricFrame& g, const std::function<Vec3(const Vec3&)>& V,
               const Vec3& x, double* scale = nullptr) {
  const VecSample s(V(x), fd_jacobian(V, x, kFdStep));
  if (scale) {
    double m = 0;
    for (int i = 0; i < 3; ++i) m += (g.dg[i] * s.value).norm() + (g.g * s.jac.col(i)).norm();
    *scale = m / g.sqrt_det;
  }
  return curl_g(g, s);
}

// ---------------------------------------------------------------------------
// Generic random configuration for the vector calculus identities.

struct Generic {
  MetricFn M;
  VecFn X, Y, Z;
  ScalarFn f;
  Vec3 x;
  bool euclid = false;

  static Generic draw(Rng& r, bool euclid) {
    Generic c;
    c.M = MetricFn::random(r);
    c.X = VecFn::random(r);
    c.Y = VecFn::random(r);
    c.Z = VecFn::random(r);
    c.f = ScalarFn::random(r, 1.0);
    c.x = r.vec(-1, 1);
    c.euclid = euclid;
    return c;
  }
  MetricFrame frame(const Vec3& p) const {
    return euclid ? MetricFrame::euclidean() : M.frame(p);
  }
  std::function<MetricFrame(const Vec3&)> frame_fn() const {
    return [this](const Vec3& p) { return frame(p); };
  }
};

using Check = std::function<std::optional<double>(Rng&, bool euclid)>;

double determinant(const Generic& c) {
  const MetricFrame g = c.frame(c.x);
  const Vec3 X = c.X.value(c.x), Y = c.Y.value(c.x), Z = c.Z.value(c.x);
  const double lhs = g.dot(cross_g(g, X, Y), Z);
  const double rhs = g.sqrt_det * X.cross(Y).dot(Z);
  return rel(lhs - rhs, {g.sqrt_det * X.norm() * Y.norm() * Z.norm() * g.g.norm() * g.ginv.norm()});
}

double cross_components(const Generic& c) {
  const MetricFrame g = c.frame(c.x);
  const Vec3 X = c.X.value(c.x), Y = c.Y.value(c.x);
  Vec3 brute = Vec3::Zero();
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          brute[k] += g.sqrt_det * g.ginv(k, l) * levi(i, j, l) * X[i] * Y[j];
  return rel(cross_g(g, X, Y) - brute, {g.sqrt_det * g.ginv.norm() * X.norm() * Y.norm()});
}

double product_rule(const Generic& c) {
  const MetricFrame g = c.frame(c.x);
  const VecSample X = c.X.sample(c.x);
  const Jet f = c.f.at(c.x);
  const VecSample fX(f.v * X.value, f.v * X.jac + X.value * f.d.transpose());
  const Vec3 lhs = curl_g(g, fX);
  const Vec3 t1 = cross_g(g, grad_g(g, f.d), X.value);
  const Vec3 t2 = f.v * curl_g(g, X);
  return rel(lhs - t1 - t2, {lhs.norm(), t1.norm(), t2.norm()});
}

double curl_grad(const Generic& c) {
  const MetricFrame g = c.frame(c.x);
  const Jet f = c.f.at(c.x);
  const Vec3 V = g.ginv * f.d;
  Mat3 J;
  for (int k = 0; k < 3; ++k) J.col(k) = -g.ginv * g.dg[k] * V + g.ginv * f.h.col(k);
  double scale = 0;
  for (int i = 0; i < 3; ++i) scale += (g.dg[i] * V).norm() + (g.g * J.col(i)).norm();
  return rel(curl_g(g, VecSample(V, J)), {scale / g.sqrt_det});
}

double triple_product(const Generic& c, bool alt) {
  const MetricFrame g = c.frame(c.x);
  const Vec3 X = c.X.value(c.x), Y = c.Y.value(c.x), Z = c.Z.value(c.x);
  const Vec3 lhs = cross_g(g, cross_g(g, X, Y), Z);
  Vec3 a, b;
  if (alt) {
    a = g.dot(X, Y) * Z;
    b = g.dot(X, Z) * Y;
  } else {
    a = g.dot(X, Z) * Y;
    b = g.dot(Y, Z) * X;
  }
  return rel(lhs - a + b, {lhs.norm(), a.norm(), b.norm()});
}

double curl_cross(const Generic& c) {
  const MetricFrame g = c.frame(c.x);
  const auto W = [&](const Vec3& p) {
    return cross_g(c.frame(p), c.X.value(p), c.Y.value(p));
  };
  double sc = 0;
  const Vec3 lhs = fd_curl_g(g, W, c.x, &sc);
  const VecSample X = c.X.sample(c.x), Y = c.Y.sample(c.x);
  const Vec3 t1 = X.value * div_g(g, Y), t2 = Y.value * div_g(g, X);
  const Vec3 t3 = X.jac * Y.value, t4 = Y.jac * X.value;
  return rel(lhs - (t1 - t2 + lie(Y, X)),
             {sc, t1.norm(), t2.norm(), t3.norm(), t4.norm()});
}

double grad_norm(const Generic& c, bool alt) {
  const MetricFrame g = c.frame(c.x);
  const VecSample X = c.X.sample(c.x);
  const Vec3 lhs = g.ginv * d_norm2(g, X);
  const Vec3 t1 = 2 * covariant_derivative(g, X.value, X);
  const Vec3 t2 = 2 * cross_g(g, X.value, curl_g(g, X));
  const Vec3 rhs = alt ? Vec3(t1 - t2) : Vec3(t1 + t2);
  return rel(lhs - rhs, {lhs.norm(), t1.norm(), t2.norm()});
}

double lie_flat(const Generic& c) {
  const MetricFrame g = c.frame(c.x);
  const VecSample X = c.X.sample(c.x);
  Mat3 D;  // D(i, j) = d_i X_j
  for (int i = 0; i < 3; ++i) D.row(i) = (g.dg[i] * X.value + g.g * X.jac.col(i)).transpose();
  const Vec3 t1 = D.transpose() * X.value;
  const Vec3 t2 = X.jac.transpose() * (g.g * X.value);
  const Vec3 r1 = g.g * covariant_derivative(g, X.value, X);
  const Vec3 r2 = 0.5 * d_norm2(g, X);
  return rel(t1 + t2 - r1 - r2, {t1.norm(), t2.norm(), r1.norm(), r2.norm()});
}

double div_cross(const Generic& c) {
  const MetricFrame g = c.frame(c.x);
  const auto W = [&](const Vec3& p) {
    return cross_g(c.frame(p), c.X.value(p), c.Y.value(p));
  };
  double sc = 0;
  const double lhs = fd_div_g(c.frame_fn(), W, c.x, &sc);
  const VecSample X = c.X.sample(c.x), Y = c.Y.sample(c.x);
  const double a = g.dot(Y.value, curl_g(g, X)), b = g.dot(X.value, curl_g(g, Y));
  return rel(lhs - a + b, {sc, a, b});
}

double cross_curl(const Generic& c, bool alt) {
  const MetricFrame g = c.frame(c.x);
  const VecSample X = c.X.sample(c.x);
  const Vec3 lhs = cross_g(g, X.value, curl_g(g, X));
  const Vec3 t1 = g.ginv * d_norm2(g, X);
  const Vec3 t2 = g.ginv * (deformation_tensor(g, X) * X.value);
  const Vec3 rhs = alt ? Vec3(t1 + t2) : Vec3(t1 - t2);
  return rel(lhs - rhs, {lhs.norm(), t1.norm(), t2.norm()});
}

// X x (X x_g grad_g phi) = -|X|_g^2 grad phi / sqrt g for phi invariant
// under the flow of X. Rotation about the z axis, or its pullback.
std::optional<double> cross_cross_flux(Rng& r, bool euclid, bool pullback) {
  const MetricFn M = MetricFn::random(r);
  const ScalarFn h = ScalarFn::random(r, 1.0);
  const DiffeoSpec spec = random_spec(r);
  Vec3 p = torus_point(r);
  Vec3 X;
  Jet phi;
  if (pullback) {
    p = spec.inverse(p);
    X = PulledBackRotation(spec).eval(p).value;
    const JetVec f = spec.apply(jet_point(p));
    phi = h({f[0] * f[0] + f[1] * f[1], f[2], Jet(0.0)});
  } else {
    X = rotation(p).value;
    const JetVec x = jet_point(p);
    phi = h({x[0] * x[0] + x[1] * x[1], x[2], Jet(0.0)});
  }
  const MetricFrame g = euclid ? MetricFrame::euclidean() : M.frame(p);
  const Vec3 lhs = X.cross(cross_g(g, X, g.ginv * phi.d));
  const Vec3 rhs = -g.norm2(X) / g.sqrt_det * phi.d;
  return rel(lhs - rhs, {lhs.norm(), rhs.norm()});
}

// ---------------------------------------------------------------------------
// Killing pairs from the pullback route.

struct KillingCfg {
  DiffeoSpec spec;
  VecFn X, Y;
  Vec3 p;
  static KillingCfg draw(Rng& r) {
    KillingCfg c;
    c.spec = random_spec(r);
    c.X = VecFn::random(r);
    c.Y = VecFn::random(r);
    c.p = c.spec.inverse(torus_point(r));
    return c;
  }
};

double killing_metric(const KillingCfg& c) {
  const PullbackMetric gm(c.spec);
  const MetricFrame g = gm.frame(c.p);
  const VecSample xi = PulledBackRotation(c.spec).eval(c.p);
  double sc = 2 * (g.g * xi.jac).norm();
  for (int k = 0; k < 3; ++k) sc += std::abs(xi.value[k]) * g.dg[k].norm();
  return deformation_tensor(g, xi).norm() / sc;
}

double lie_cross(const KillingCfg& c) {
  const PullbackMetric gm(c.spec);
  const PulledBackRotation xf(c.spec);
  const MetricFrame g = gm.frame(c.p);
  const VecSample xi = xf.eval(c.p);
  const auto W = [&](const Vec3& q) {
    return cross_g(gm.frame(q), c.X.value(q), c.Y.value(q));
  };
  const VecSample w(W(c.p), fd_jacobian(W, c.p, kFdStep));
  const VecSample X = c.X.sample(c.p), Y = c.Y.sample(c.p);
  const Vec3 lhs = lie(xi, w);
  const Vec3 a = cross_g(g, lie(xi, X), Y.value), b = cross_g(g, X.value, lie(xi, Y));
  return rel(lhs - a - b, {(w.jac * xi.value).norm(), (xi.jac * w.value).norm(),
                           a.norm(), b.norm()});
}

double lie_curl(const KillingCfg& c) {
  const PullbackMetric gm(c.spec);
  const PulledBackRotation xf(c.spec);
  const MetricFrame g = gm.frame(c.p);
  const VecSample xi = xf.eval(c.p);
  const auto V = [&](const Vec3& q) { return curl_g(gm.frame(q), c.X.sample(q)); };
  const VecSample v(V(c.p), fd_jacobian(V, c.p, kFdStep));
  const Vec3 lhs = lie(xi, v);
  const auto U = [&](const Vec3& q) { return lie(xf.eval(q), c.X.sample(q)); };
  double sc = 0;
  const Vec3 rhs = fd_curl_g(g, U, c.p, &sc);
  return rel(lhs - rhs, {(v.jac * xi.value).norm(), (xi.jac * v.value).norm(), sc});
}

// ---------------------------------------------------------------------------
// The field B = (C(psi) xi + sqrt g xi x_g grad_g psi) / |xi|_g^2.

struct Profile {
  double c0, c1, c2, k, p1, p2;
  static Profile draw(Rng& r) {
    return {r.u(1, 2), r.u(-0.3, 0.3), r.u(-0.3, 0.3), r.u(0.5, 2), r.u(-1, 1), r.u(-1, 1)};
  }
  double C(double s) const { return c0 + c1 * s + c2 * std::sin(k * s); }
  double dC(double s) const { return c1 + c2 * k * std::cos(k * s); }
  double dP(double s) const { return p1 + 2 * p2 * s; }
};

struct StructCfg {
  bool killing = false;
  bool euclid = false;
  MetricFn M;
  DiffeoSpec spec;
  ScalarFn h;
  Profile prof;
  Vec3 p;

  static StructCfg draw(Rng& r, bool killing, bool euclid) {
    StructCfg c;
    c.killing = killing;
    c.euclid = euclid;
    c.M = MetricFn::random(r);
    c.spec = random_spec(r);
    c.h = ScalarFn::random(r, 1.0);
    c.prof = Profile::draw(r);
    c.p = torus_point(r);
    if (killing) c.p = c.spec.inverse(c.p);
    return c;
  }
  MetricFrame frame(const Vec3& q) const {
    if (euclid) return MetricFrame::euclidean();
    return killing ? PullbackMetric(spec).frame(q) : M.frame(q);
  }
  VecSample xi(const Vec3& q) const {
    return killing ? PulledBackRotation(spec).eval(q) : rotation(q);
  }
  Jet psi(const Vec3& q) const {
    const JetVec f = killing ? spec.apply(jet_point(q)) : jet_point(q);
    return h({f[0] * f[0] + f[1] * f[1], f[2], Jet(0.0)});
  }
};

struct State {
  MetricFrame g;
  VecSample xi;
  Jet psi;
  Vec3 e1, e2, B;  // grad_g psi, grad-perp, field
  double xi2 = 0, n1 = 0, C = 0;
};

State state(const StructCfg& c, const Vec3& q) {
  State s;
  s.g = c.frame(q);
  s.xi = c.xi(q);
  s.psi = c.psi(q);
  s.e1 = s.g.ginv * s.psi.d;
  s.e2 = cross_g(s.g, s.xi.value, s.e1);
  s.xi2 = s.g.norm2(s.xi.value);
  s.n1 = s.g.norm2(s.e1);
  s.C = c.prof.C(s.psi.v);
  s.B = (s.C * s.xi.value + s.g.sqrt_det * s.e2) / s.xi2;
  return s;
}

std::function<Vec3(const Vec3&)> field_B(const StructCfg& c) {
  return [&c](const Vec3& q) { return state(c, q).B; };
}

bool degenerate(const State& s) { return s.n1 < 1e-4 || s.xi2 < 1e-4; }

std::optional<double> basis_identities(const StructCfg& c) {
  const State s = state(c, c.p);
  if (degenerate(s)) return std::nullopt;
  const Vec3 a = cross_g(s.g, s.e1, s.e2), b = cross_g(s.g, s.e2, s.xi.value);
  const double ea = rel(a - s.n1 * s.xi.value, {a.norm(), s.n1 * s.xi.value.norm()});
  const double eb = rel(b - s.xi2 * s.e1, {b.norm(), s.xi2 * s.e1.norm()});
  return std::max(ea, eb);
}

std::optional<double> flux_relation(const StructCfg& c) {
  const State s = state(c, c.p);
  if (degenerate(s)) return std::nullopt;
  const Vec3 l = s.xi.value.cross(s.B);
  return rel(l + s.psi.d, {s.xi.value.norm() * s.B.norm(), s.psi.d.norm()});
}

std::optional<double> div_B(const StructCfg& c, bool killing_form) {
  const State s = state(c, c.p);
  if (degenerate(s)) return std::nullopt;
  const Mat3 J = fd_jacobian(field_B(c), c.p, kFdStep);
  const Mat3 L = deformation_tensor(s.g, s.xi);
  const double rhs = killing_form ? 0.0 : -s.xi.value.dot(L * s.B) / s.xi2;
  return rel(J.trace() - rhs, {J.norm(), rhs});
}

std::optional<double> lie_B(const StructCfg& c) {
  const State s = state(c, c.p);
  if (degenerate(s)) return std::nullopt;
  const VecSample B(s.B, fd_jacobian(field_B(c), c.p, kFdStep));
  const Mat3 L = deformation_tensor(s.g, s.xi);
  const Vec3 rhs = -s.xi.value.dot(L * s.B) / s.xi2 * s.xi.value;
  return rel(lie(s.xi, B) - rhs, {(B.jac * s.xi.value).norm(),
                                  (s.xi.jac * B.value).norm(), rhs.norm()});
}

std::optional<double> div_C_xi(const StructCfg& c) {
  const State s = state(c, c.p);
  if (degenerate(s)) return std::nullopt;
  const auto V = [&](const Vec3& q) {
    const State t = state(c, q);
    return Vec3(t.C * t.xi.value / t.xi2);
  };
  double sc = 0;
  const double lhs = fd_div_g([&](const Vec3& q) { return c.frame(q); }, V, c.p, &sc);
  const Mat3 L = deformation_tensor(s.g, s.xi);
  const double rhs = s.C / s.xi2 * (div_g(s.g, s.xi) - s.xi.value.dot(L * s.xi.value) / s.xi2);
  return rel(lhs - rhs, {sc, rhs});
}

std::optional<double> div_perp(const StructCfg& c) {
  const State s = state(c, c.p);
  if (degenerate(s)) return std::nullopt;
  const auto V = [&](const Vec3& q) {
    const State t = state(c, q);
    return Vec3(t.g.sqrt_det * t.e2 / t.xi2);
  };
  double sc = 0;
  const double lhs = fd_div_g([&](const Vec3& q) { return c.frame(q); }, V, c.p, &sc);
  const Mat3 L = deformation_tensor(s.g, s.xi);
  const double a = -s.g.sqrt_det / (s.xi2 * s.xi2) * s.xi.value.dot(L * s.e2);
  const double b = s.e2.dot(s.g.d_sqrt_det()) / s.xi2;
  return rel(lhs - a - b, {sc, a, b});
}

std::optional<double> curl_C_xi(const StructCfg& c) {
  const State s = state(c, c.p);
  if (degenerate(s)) return std::nullopt;
  const auto V = [&](const Vec3& q) {
    const State t = state(c, q);
    return Vec3(t.C * t.xi.value / t.xi2);
  };
  double sc = 0;
  const Vec3 lhs = fd_curl_g(s.g, V, c.p, &sc);
  const Mat3 L = deformation_tensor(s.g, s.xi);
  const double x4 = s.xi2 * s.xi2;
  const Vec3 a = s.C * s.g.dot(s.xi.value, curl_g(s.g, s.xi)) / x4 * s.xi.value;
  const Vec3 b = (s.C / (s.xi2 * s.n1) * s.xi.value.dot(L * s.e1) - c.prof.dC(s.psi.v)) /
                 s.xi2 * s.e2;
  const Vec3 d = -s.C / (x4 * s.n1) * s.xi.value.dot(L * s.e2) * s.e1;
  return rel(lhs - a - b - d, {sc, a.norm(), b.norm(), d.norm()});
}

// div_g(sqrt g grad_g psi / |xi|_g^2) by differences
double div_V1(const StructCfg& c, const Vec3& q) {
  const auto V = [&](const Vec3& y) {
    const State t = state(c, y);
    return Vec3(t.g.sqrt_det * t.e1 / t.xi2);
  };
  return fd_div_g([&](const Vec3& y) { return c.frame(y); }, V, q);
}

std::optional<double> curl_perp(const StructCfg& c) {
  const State s = state(c, c.p);
  if (degenerate(s)) return std::nullopt;
  const auto V = [&](const Vec3& q) {
    const State t = state(c, q);
    return Vec3(t.g.sqrt_det * t.e2 / t.xi2);
  };
  double sc = 0;
  const Vec3 lhs = fd_curl_g(s.g, V, c.p, &sc);
  const Mat3 L = deformation_tensor(s.g, s.xi);
  const double sg = s.g.sqrt_det, x4 = s.xi2 * s.xi2;
  const double Lsg = s.xi.value.dot(s.g.d_sqrt_det());
  const Vec3& xi = s.xi.value;
  const Vec3 a = (div_V1(c, c.p) + sg / x4 * s.e1.dot(L * xi)) * xi;
  const Vec3 b = sg / x4 *
                 (xi.dot(L * xi) - 2 * s.xi2 * Lsg / sg + s.xi2 / s.n1 * s.e1.dot(L * s.e1)) *
                 s.e1;
  const Vec3 d = sg / (x4 * s.n1) * s.e1.dot(L * s.e2) * s.e2;
  return rel(lhs - a - b - d, {sc, a.norm(), b.norm(), d.norm()});
}

struct FGH {
  double F, G, H;
};

// Coefficients of curl_g B in the (grad_g psi, grad-perp, xi) frame. The
// alternative G and H differ from the sum of the two curl formulas above by
// terms carrying L_xi g, so both agree for Killing pairs only.
FGH frame_coefficients(const StructCfg& c, const State& s, bool alt) {
  const Mat3 L = deformation_tensor(s.g, s.xi);
  const Vec3& xi = s.xi.value;
  const double sg = s.g.sqrt_det, x4 = s.xi2 * s.xi2;
  const double Lsg = xi.dot(s.g.d_sqrt_det());
  const double dC = c.prof.dC(s.psi.v);
  FGH r;
  r.F = -sg / (x4 * s.n1) *
        (s.C / sg * xi.dot(L * s.e2) + 2 * s.xi2 * s.n1 * Lsg / sg -
         s.xi2 * s.e1.dot(L * s.e1) - s.n1 * xi.dot(L * xi));
  const double base_H = div_V1(c, c.p) + s.C * s.g.dot(xi, curl_g(s.g, s.xi)) / x4;
  if (alt) {
    r.G = sg / s.xi2 / s.n1 * (s.B.dot(L * s.e1) - s.n1 * dC / sg);
    r.H = base_H + sg / s.xi2 * s.e1.dot(L * xi);
  } else {
    r.G = (s.C * xi.dot(L * s.e1) + sg * s.e1.dot(L * s.e2)) / (x4 * s.n1) - dC / s.xi2;
    r.H = base_H + sg / x4 * s.e1.dot(L * xi);
  }
  return r;
}

std::optional<double> curl_B_frame(const StructCfg& c, bool alt) {
  const State s = state(c, c.p);
  if (degenerate(s)) return std::nullopt;
  double sc = 0;
  const Vec3 lhs = fd_curl_g(s.g, field_B(c), c.p, &sc);
  const FGH k = frame_coefficients(c, s, alt);
  const Vec3 a = k.F * s.e1, b = k.G * s.e2, d = k.H * s.xi.value;
  return rel(lhs - a - b - d, {sc, a.norm(), b.norm(), d.norm()});
}

std::optional<double> force_frame(const StructCfg& c, bool alt) {
  const State s = state(c, c.p);
  if (degenerate(s)) return std::nullopt;
  const VecSample B(s.B, fd_jacobian(field_B(c), c.p, kFdStep));
  const Vec3 J = curl_g(s.g, B);
  const double dP = c.prof.dP(s.psi.v);
  const Vec3 jxb = cross_g(s.g, J, s.B);
  const Vec3 gp = dP * s.e1;
  const FGH k = frame_coefficients(c, s, alt);
  // the alternative form drops the sqrt g factors, harmless when sqrt g = 1
  const double sg = alt ? 1.0 : s.g.sqrt_det;
  const Vec3 a = (s.C * k.G - sg * k.H - dP) * s.e1;
  const Vec3 b = -s.C / s.xi2 * k.F * s.e2;
  const Vec3 d = sg * s.n1 / s.xi2 * k.F * s.xi.value;
  return rel(jxb - gp - a - b - d, {jxb.norm(), gp.norm(), a.norm(), b.norm(), d.norm()});
}

Vec3 fd_grad_B2(const StructCfg& c, const Vec3& q) {
  return fd_gradient([&](const Vec3& y) { return state(c, y).B.squaredNorm(); }, q, kFdStep);
}

std::optional<double> qs_norm(const StructCfg& c) {
  const State s = state(c, c.p);
  if (degenerate(s)) return std::nullopt;
  const Vec3 gB2 = fd_grad_B2(c, c.p);
  const Vec3& xi = s.xi.value;
  const double lhs = xi.dot(gB2);
  const Mat3 Ld = deformation_tensor(MetricFrame::euclidean(), s.xi);
  const double t1 = xi.dot(Ld * xi), t2 = 2 / s.C * xi.dot(Ld * s.e2),
               t3 = s.e2.dot(Ld * s.e2) / (s.C * s.C);
  const double pre = s.C * s.C / (s.xi2 * s.xi2);
  return rel(lhs - pre * (t1 + t2 + t3),
             {xi.norm() * gB2.norm(), pre * t1, pre * t2, pre * t3});
}

std::optional<double> strong_qs_projection(const StructCfg& c) {
  const State s = state(c, c.p);
  if (degenerate(s)) return std::nullopt;
  const Mat3 JB = fd_jacobian(field_B(c), c.p, kFdStep);
  const Vec3 J(JB(2, 1) - JB(1, 2), JB(0, 2) - JB(2, 0), JB(1, 0) - JB(0, 1));
  const Vec3 gBxi = fd_gradient(
      [&](const Vec3& y) {
        const State t = state(c, y);
        return t.B.dot(t.xi.value);
      },
      c.p, kFdStep);
  const Vec3& xi = s.xi.value;
  const double lhs = s.B.dot(xi.cross(J) - gBxi);
  const double rhs = -xi.dot(fd_grad_B2(c, c.p));
  return rel(lhs - rhs,
             {s.B.norm() * (xi.norm() * J.norm() + gBxi.norm()), rhs});
}

}  // namespace

IdentitySuite run_identity_suite(std::uint64_t seed, int count) {
  IdentitySuite suite;
  suite.seed = seed;
  suite.count = count;
  Rng rng{std::mt19937_64(seed)};

  const auto run = [&](const std::string& name, const std::string& family,
                       CheckKind kind, bool variant, const Check& fn,
                       bool euclid = false) {
    IdentityResult r;
    r.name = name;
    r.family = family;
    r.kind = kind;
    r.tol = check_tolerance(kind);
    r.variant = variant;
    for (int i = 0; i < count; ++i) {
      std::optional<double> e;
      for (int tries = 0; tries < 100 && !e; ++tries) {
        try {
          e = fn(rng, euclid);
        } catch (const Error&) {
          e.reset();
        }
      }
      const double v = e ? *e : INFINITY;
      r.max_rel = std::isfinite(v) ? std::max(r.max_rel, v) : INFINITY;
      ++r.count;
    }
    r.pass = r.count > 0 && r.max_rel <= r.tol;
    suite.results.push_back(r);
  };
  const auto generic = [](double (*f)(const Generic&)) -> Check {
    return [f](Rng& r, bool eu) { return f(Generic::draw(r, eu)); };
  };
  const auto generic_v = [](double (*f)(const Generic&, bool), bool alt) -> Check {
    return [f, alt](Rng& r, bool eu) { return f(Generic::draw(r, eu), alt); };
  };
  const auto killing = [](double (*f)(const KillingCfg&)) -> Check {
    return [f](Rng& r, bool) { return f(KillingCfg::draw(r)); };
  };
  const auto structure = [](std::optional<double> (*f)(const StructCfg&), bool kill) -> Check {
    return [f, kill](Rng& r, bool eu) { return f(StructCfg::draw(r, kill, eu)); };
  };
  const auto A = CheckKind::Analytic;
  const auto D = CheckKind::FiniteDifference;
  const std::string vc = "vector-calculus", ki = "killing", st = "structure";

  for (bool eu : {false, true}) {
    const std::string sfx = eu ? "-euclid" : "";
    run("determinant" + sfx, vc, A, false, generic(determinant), eu);
    run("cross-components" + sfx, vc, A, false, generic(cross_components), eu);
    run("product-rule" + sfx, vc, A, false, generic(product_rule), eu);
    run("curl-grad" + sfx, vc, A, false, generic(curl_grad), eu);
    run("triple-product" + sfx, vc, A, false, generic_v(triple_product, false), eu);
    run("grad-norm" + sfx, vc, A, false, generic_v(grad_norm, false), eu);
    run("lie-flat" + sfx, vc, A, false, generic(lie_flat), eu);
    run("cross-curl" + sfx, vc, A, false, generic_v(cross_curl, false), eu);
    run("cross-cross-flux" + sfx, vc, A, false,
        [](Rng& r, bool e) { return cross_cross_flux(r, e, false); }, eu);
    run("cross-cross-flux-pullback" + sfx, vc, A, false,
        [](Rng& r, bool e) { return cross_cross_flux(r, e, true); }, eu);
    run("basis-identities" + sfx, st, A, false, structure(basis_identities, false), eu);
    run("flux-relation" + sfx, st, A, false, structure(flux_relation, false), eu);
  }
  run("triple-product-variant", vc, A, true, generic_v(triple_product, true));
  run("grad-norm-variant", vc, A, true, generic_v(grad_norm, true));
  run("cross-curl-variant", vc, A, true, generic_v(cross_curl, true));
  run("curl-cross", vc, D, false, generic(curl_cross));
  run("div-cross", vc, D, false, generic(div_cross));

  run("killing-metric", ki, A, false, killing(killing_metric));
  run("lie-cross", ki, D, false, killing(lie_cross));
  run("lie-curl", ki, D, false, killing(lie_curl));

  run("div-B", st, D, false, [](Rng& r, bool e) {
        return div_B(StructCfg::draw(r, false, e), false);
      });
  run("div-B-killing", st, D, false, [](Rng& r, bool e) {
        return div_B(StructCfg::draw(r, true, e), true);
      });
  run("flux-relation-killing", st, A, false, structure(flux_relation, true));
  run("lie-B", st, D, false, structure(lie_B, false));
  run("div-C-xi", st, D, false, structure(div_C_xi, false));
  run("div-perp", st, D, false, structure(div_perp, false));
  run("curl-C-xi", st, D, false, structure(curl_C_xi, false));
  run("curl-perp", st, D, false, structure(curl_perp, false));
  const auto framed = [](std::optional<double> (*f)(const StructCfg&, bool),
                         bool kill, bool alt) -> Check {
    return [f, kill, alt](Rng& r, bool eu) {
      return f(StructCfg::draw(r, kill, eu), alt);
    };
  };
  run("curl-B-frame", st, D, false, framed(curl_B_frame, false, false));
  run("curl-B-frame-killing", st, D, false, framed(curl_B_frame, true, true));
  run("curl-B-frame-variant", st, D, true, framed(curl_B_frame, false, true));
  run("force-frame", st, D, false, framed(force_frame, false, false));
  run("force-frame-killing", st, D, false, framed(force_frame, true, true));
  run("force-frame-variant", st, D, true, framed(force_frame, false, true));
  run("qs-norm", st, D, false, structure(qs_norm, true));
  run("strong-qs-projection", st, D, false, structure(strong_qs_projection, true));
  return suite;
}

}  // namespace qsgs

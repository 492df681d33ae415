#include "qsgs/flux_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <unsupported/Eigen/FFT>

namespace qsgs {

double LevelCurve::integrate(const std::function<double(const Vec2&)>& q) const {
  double s = 0;
  for (size_t j = 0; j < pts.size(); ++j) s += q(pts[j]) * dsdth[j];
  return s * dth;
}

double LevelCurve::period() const {
  double s = 0;
  for (double d : dsdth) s += d;
  return s * dth;
}

FluxGeometry::FluxGeometry(ScalarField2 psi, const Vec2& axis, double psi_axis,
                           double rmax, int n_angle)
    : psi_(std::move(psi)), axis_(axis), psi_axis_(psi_axis), rmax_(rmax),
      n_(n_angle) {}

FluxGeometry::FluxGeometry(const DiscreteBase& b, int n_angle)
    : axis_(b.axis), psi_axis_(b.psi_axis), rmax_(b.grid.r0),
      n_(n_angle > 0 ? n_angle : b.grid.nt) {
  const Interpolator* in = &b.interp;
  psi_ = [in](const Vec2& x) { return in->eval(x); };
}

LevelCurve FluxGeometry::level(double c) const {
  if (!(c > 0 && c < psi_axis_)) {
    std::ostringstream os;
    os << "level " << c << " outside (0, " << psi_axis_ << ")";
    throw Error(ErrorCode::DegenerateLevel, os.str());
  }
  LevelCurve L;
  L.c = c;
  L.dth = 2 * M_PI / n_;
  L.pts.resize(n_);
  L.rho.resize(n_);
  L.dsdth.resize(n_);
  for (int j = 0; j < n_; ++j) {
    const double th = j * L.dth;
    const Vec2 e(std::cos(th), std::sin(th));
    // far end: where the ray leaves the disk of radius rmax, nudged outward
    const double ae = axis_.dot(e);
    const double hi0 = -ae + std::sqrt(ae * ae - axis_.squaredNorm() + rmax_ * rmax_);
    double lo = 0.0, hi = 1.02 * hi0;
    auto f = [&](double rho) { return psi_(axis_ + rho * e).w - c; };
    if (!(f(lo) > 0 && f(hi) < 0)) {
      std::ostringstream os;
      os << "no bracket for level " << c << " at angle " << th;
      throw Error(ErrorCode::Streamline, os.str());
    }
    double rho = L.rho[j > 0 ? j - 1 : 0];
    if (!(rho > lo && rho < hi)) rho = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
      const CartDerivs d = psi_(axis_ + rho * e);
      const double val = d.w - c;
      if (val > 0) lo = rho; else hi = rho;
      const double slope = d.grad.dot(e);
      double next = slope < 0 ? rho - val / slope : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      const double step = std::abs(next - rho);
      rho = next;
      if (step < 1e-15 * rmax_ || hi - lo < 1e-15 * rmax_) break;
    }
    const Vec2 x = axis_ + rho * e;
    const CartDerivs d = psi_(x);
    const Vec2 V(d.grad[1], -d.grad[0]);
    const Vec2 et(-e[1], e[0]);
    const double w = et.dot(V);
    if (!(w > 0)) {
      std::ostringstream os;
      os << "streamline of level " << c << " turns back at angle " << th;
      throw Error(ErrorCode::Streamline, os.str());
    }
    L.pts[j] = x;
    L.rho[j] = rho;
    L.dsdth[j] = rho / w;
  }
  return L;
}

double streamline_integral(const FluxGeometry& fg,
                           const std::function<double(const Vec2&)>& q,
                           double c) {
  return fg.level(c).integrate(q);
}

std::vector<double> collocation_levels(double psi_axis, int M) {
  std::vector<double> c(M);
  for (int k = 0; k < M; ++k) c[k] = psi_axis * (0.05 + 0.9 * k / (M - 1));
  return c;
}

// ---------------------------------------------------------------------------

int HatBasis::segment(double psi) const {
  const auto it = std::upper_bound(c_.begin(), c_.end(), psi);
  const int k = static_cast<int>(it - c_.begin()) - 1;
  return std::clamp(k, 0, size() - 2);
}

double HatBasis::eval(int j, double psi) const {
  const int k = segment(psi);
  if (j != k && j != k + 1) return 0.0;
  const double t = (psi - c_[k]) / (c_[k + 1] - c_[k]);
  return j == k ? 1 - t : t;
}

double HatBasis::combine(const Eigen::VectorXd& F, double psi) const {
  const int k = segment(psi);
  const double t = (psi - c_[k]) / (c_[k + 1] - c_[k]);
  return (1 - t) * F[k] + t * F[k + 1];
}

double HatBasis::combine_derivative(const Eigen::VectorXd& F, double psi) const {
  const int k = segment(psi);
  return (F[k + 1] - F[k]) / (c_[k + 1] - c_[k]);
}

SolvabilitySystem::SolvabilitySystem(const LinearOperator& op,
                                     const DiscreteBase& b,
                                     const FluxGeometry& fg, int M)
    : base_(&b), hats_(collocation_levels(b.psi_axis, M)) {
  const PolarGrid& g = b.grid;
  for (double c : hats_.levels()) curves_.push_back(fg.level(c));
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(g.nt);
  const GhostRule ghost = GhostRule::dirichlet_zero(g.nt);
  T_.resize(M, M);
  u_.resize(M);
  for (int j = 0; j < M; ++j) {
    GridValues e(g.size());
    for (int n = 0; n < g.size(); ++n) e[n] = hats_.eval(j, b.psi[n]);
    u_[j] = dirichlet_solve(op, e, zero);
    T_.col(j) = loop_integrals(u_[j], ghost);
  }
  lu_.compute(T_);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(T_);
  const auto& s = svd.singularValues();
  cond_ = s[s.size() - 1] > 0 ? s[0] / s[s.size() - 1] : INFINITY;
}

Eigen::VectorXd SolvabilitySystem::loop_integrals(const Interpolator& q) const {
  Eigen::VectorXd S(curves_.size());
  for (size_t k = 0; k < curves_.size(); ++k) {
    S[k] = curves_[k].integrate([&](const Vec2& x) { return q.value(x); });
  }
  return S;
}

Eigen::VectorXd SolvabilitySystem::loop_integrals(const GridValues& q,
                                                  const GhostRule& ghost) const {
  return loop_integrals(Interpolator(base_->grid, q, ghost));
}

Eigen::VectorXd SolvabilitySystem::abs_loop_integrals(const Interpolator& q) const {
  Eigen::VectorXd S(curves_.size());
  for (size_t k = 0; k < curves_.size(); ++k) {
    S[k] = curves_[k].integrate([&](const Vec2& x) { return std::abs(q.value(x)); });
  }
  return S;
}

Eigen::VectorXd SolvabilitySystem::solve(const Eigen::VectorXd& R) const {
  if (!(cond_ <= 1e10)) {
    std::ostringstream os;
    os << "solvability matrix condition number " << cond_ << " exceeds 1e10";
    throw Error(ErrorCode::Solvability, os.str());
  }
  return lu_.solve(R);
}

GridValues SolvabilitySystem::response(const Eigen::VectorXd& F) const {
  GridValues r = GridValues::Zero(base_->grid.size());
  for (size_t j = 0; j < u_.size(); ++j) r += F[j] * u_[j];
  return r;
}

GridValues SolvabilitySystem::profile_on_grid(const Eigen::VectorXd& F) const {
  GridValues r(base_->grid.size());
  for (int n = 0; n < r.size(); ++n) r[n] = hats_.combine(F, base_->psi[n]);
  return r;
}

Eigen::VectorXd solve_profile_F(const SolvabilitySystem& sys,
                                const Eigen::VectorXd& R) {
  return sys.solve(R);
}

// ---------------------------------------------------------------------------

PhiRecovery::PhiRecovery(const DiscreteBase& b, const FluxGeometry& fg)
    : base_(&b), table_(b.grid.nr, b.grid.nt, 1.0) {
  const double pa = b.psi_axis;
  for (int i = 0; i < table_.nr; ++i) {
    const double sg = table_.r(i);
    rings_.push_back(fg.level(pa * (1 - sg * sg)));
  }
  const PolarGrid& g = b.grid;
  node_sigma_.resize(g.size());
  node_angle_.resize(g.size());
  for (int n = 0; n < g.size(); ++n) {
    const int i = n / g.nt, j = n % g.nt;
    const Vec2 d = g.point(i, j) - b.axis;
    node_sigma_[n] = std::sqrt(std::max(0.0, (pa - b.psi[n]) / pa));
    node_angle_[n] = std::atan2(d[1], d[0]);
  }
}

GridValues PhiRecovery::recover(const Interpolator& Phi,
                                const SolvabilitySystem* sys,
                                PhiRecoveryStats* stats,
                                const Interpolator* ref) const {
  PhiRecoveryStats st;
  if (sys) {
    const Eigen::VectorXd S = sys->loop_integrals(Phi);
    Eigen::VectorXd A = sys->abs_loop_integrals(Phi);
    if (ref) A = A.cwiseMax(sys->abs_loop_integrals(*ref));
    for (int k = 0; k < S.size(); ++k) {
      const double rel = A[k] > 0 ? std::abs(S[k]) / A[k] : 0.0;
      if (rel > st.worst_level_loop) {
        st.worst_level_loop = rel;
        st.worst_level = k;
      }
    }
    if (st.worst_level_loop > 1e-8) {
      std::ostringstream os;
      os << "loop integral of Phi at level " << st.worst_level << " (c = "
         << sys->basis().levels()[st.worst_level] << ") is "
         << st.worst_level_loop << " relative";
      if (stats) *stats = st;
      throw Error(ErrorCode::Gauge, os.str());
    }
  }
  const int nt = table_.nt;
  Eigen::FFT<double> fft;
  std::vector<double> h(nt), out(nt);
  std::vector<std::complex<double>> H(nt);
  GridValues tab(table_.size());
  for (int i = 0; i < table_.nr; ++i) {
    const LevelCurve& L = rings_[i];
    double hsum = 0, habs = 0;
    for (int j = 0; j < nt; ++j) {
      h[j] = Phi.value(L.pts[j]) * L.dsdth[j];
      habs += std::abs(h[j]);
    }
    fft.fwd(H, h);
    hsum = H[0].real();
    if (habs > 0) st.max_mean_defect = std::max(st.max_mean_defect, std::abs(hsum) / habs);
    H[0] = 0.0;
    for (int k = 1; k < nt; ++k) {
      const int kk = k <= nt / 2 ? k : k - nt;
      if (2 * k == nt) {
        H[k] = 0.0;
      } else {
        H[k] /= std::complex<double>(0.0, kk);
      }
    }
    fft.inv(out, H);
    double num = 0, den = 0;
    for (int j = 0; j < nt; ++j) {
      num += out[j] * L.dsdth[j];
      den += L.dsdth[j];
    }
    const double mean = num / den;
    for (int j = 0; j < nt; ++j) tab[table_.index(i, j)] = out[j] - mean;
  }
  const Interpolator ti(table_, tab, GhostRule::extrapolate());
  const PolarGrid& g = base_->grid;
  GridValues phi(g.size());
  for (int n = 0; n < g.size(); ++n) {
    phi[n] = ti.eval_polar(node_sigma_[n], node_angle_[n]).w;
  }
  phi.array() -= integrate(g, phi) / (M_PI * g.r0 * g.r0);
  if (stats) *stats = st;
  return phi;
}

}  // namespace qsgs

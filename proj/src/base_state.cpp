#include "qsgs/base_state.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qsgs {

ProfileFn::ProfileFn(std::vector<double> nodes, std::vector<double> values)
    : x_(std::move(nodes)), y_(std::move(values)) {
  const size_t n = x_.size();
  if (n < 2 || y_.size() != n) {
    throw Error(ErrorCode::InsufficientData, "profile needs >= 2 matching nodes");
  }
  for (size_t k = 1; k < n; ++k) {
    if (!(x_[k] > x_[k - 1])) {
      throw Error(ErrorCode::InsufficientData, "profile nodes must increase");
    }
  }
  std::vector<double> d(n - 1);
  for (size_t k = 0; k + 1 < n; ++k) d[k] = (y_[k + 1] - y_[k]) / (x_[k + 1] - x_[k]);
  m_.assign(n, 0.0);
  m_[0] = d[0];
  m_[n - 1] = d[n - 2];
  for (size_t k = 1; k + 1 < n; ++k) {
    m_[k] = (d[k - 1] * d[k] <= 0.0) ? 0.0 : 0.5 * (d[k - 1] + d[k]);
  }
  for (size_t k = 0; k + 1 < n; ++k) {
    if (d[k] == 0.0) {
      m_[k] = m_[k + 1] = 0.0;
      continue;
    }
    const double a = m_[k] / d[k], b = m_[k + 1] / d[k];
    const double s = a * a + b * b;
    if (s > 9.0) {
      const double tau = 3.0 / std::sqrt(s);
      m_[k] = tau * a * d[k];
      m_[k + 1] = tau * b * d[k];
    }
  }
}

int ProfileFn::segment(double c) const {
  const auto it = std::upper_bound(x_.begin(), x_.end(), c);
  int k = static_cast<int>(it - x_.begin()) - 1;
  return std::clamp(k, 0, static_cast<int>(x_.size()) - 2);
}

double ProfileFn::operator()(double c) const {
  if (c < x_.front() || c > x_.back()) {
    ++clamps_;
    return c < x_.front() ? y_.front() : y_.back();
  }
  const int k = segment(c);
  const double h = x_[k + 1] - x_[k], t = (c - x_[k]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y_[k] + (t3 - 2 * t2 + t) * h * m_[k] +
         (-2 * t3 + 3 * t2) * y_[k + 1] + (t3 - t2) * h * m_[k + 1];
}

double ProfileFn::derivative(double c) const {
  if (c < x_.front() || c > x_.back()) {
    ++clamps_;
    return 0.0;
  }
  const int k = segment(c);
  const double h = x_[k + 1] - x_[k], t = (c - x_[k]) / h;
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * y_[k] + (-6 * t2 + 6 * t) * y_[k + 1]) / h +
         (3 * t2 - 4 * t + 1) * m_[k] + (3 * t2 - 2 * t) * m_[k + 1];
}

// ---------------------------------------------------------------------------

BaseState BaseState::unchecked(const BaseParams& p) {
  BaseState s;
  s.p_ = p;
  s.p_bar_ = 2 * p.psi_bar - (p.c_bar * p.r0) * (p.c_bar * p.r0);
  return s;
}

BaseState BaseState::build(const BaseParams& p) {
  std::ostringstream os;
  if (!(p.r0 > 0 && p.r0 < p.R0)) os << "need 0 < r0 < R0; ";
  if (!(p.psi_bar > 0)) os << "need psi_bar > 0; ";
  if (!(p.eps_reg > 0)) os << "need eps_reg > 0; ";
  if (!std::isfinite(p.c_bar)) os << "c_bar not finite; ";
  if (!os.str().empty()) throw Error(ErrorCode::DomainViolation, os.str());
  return unchecked(p);
}

double BaseState::psi(double r) const {
  const double x = r / p_.r0;
  return p_.psi_bar * (1 - x * x);
}
double BaseState::dpsi(double r) const {
  return -2 * p_.psi_bar * r / (p_.r0 * p_.r0);
}
double BaseState::ddpsi(double) const { return -2 * p_.psi_bar / (p_.r0 * p_.r0); }

double BaseState::level_radius(double c) const {
  return p_.r0 * std::sqrt(std::max(0.0, 1 - c / p_.psi_bar));
}

double BaseState::C(double c) const {
  return p_.c_bar * std::sqrt(std::max(0.0, p_.psi_bar - c + p_.eps_reg));
}
double BaseState::dC(double c) const {
  const double s = p_.psi_bar - c + p_.eps_reg;
  if (s <= 0) return 0.0;
  return -0.5 * p_.c_bar / std::sqrt(s);
}
double BaseState::CdC(double c) const {
  // c_bar^2 * d/dc (psi_bar - c + eps) / 2, exact where C is real
  return (p_.psi_bar - c + p_.eps_reg > 0) ? -0.5 * p_.c_bar * p_.c_bar : 0.0;
}
double BaseState::d_CdC(double) const { return 0.0; }

double BaseState::P(double c) const {
  const double s = p_.r0 * p_.R0;
  return p_bar_ * c / (s * s);
}
double BaseState::dP(double) const {
  const double s = p_.r0 * p_.R0;
  return p_bar_ / (s * s);
}

AxisymResidual axisym_gs_residual(const BaseState& s,
                                  const std::vector<Vec2>& rt) {
  const BaseParams& p = s.params();
  AxisymResidual out;
  out.toroidal.reserve(rt.size());
  for (const Vec2& q : rt) {
    const double r = q[0], th = q[1];
    const double R = p.R0 + r * std::cos(th);
    const double ps = s.psi(r), d1 = s.dpsi(r), d2 = s.ddpsi(r);
    // d1 / r is regular: psi0 is even in r
    const double d1r = -2 * p.psi_bar / (p.r0 * p.r0);
    const double tor = (d2 + d1r) / (R * R) - std::cos(th) * d1 / (R * R * R) +
                       s.dP(ps) + s.CdC(ps) / (R * R);
    const double inf = d2 + d1r + p.R0 * p.R0 * s.dP(ps) + s.CdC(ps);
    const double only = d2 + p.R0 * p.R0 * s.dP(ps) + s.CdC(ps);
    out.toroidal.push_back(tor);
    out.max_toroidal = std::max(out.max_toroidal, std::abs(tor));
    out.max_infinite = std::max(out.max_infinite, std::abs(inf));
    out.max_psi_only = std::max(out.max_psi_only, std::abs(only));
  }
  return out;
}

double travel_time(const BaseState& s, double c, int n_quad) {
  const double pb = s.params().psi_bar;
  if (!(c > 0 && c < pb)) {
    std::ostringstream os;
    os << "level " << c << " outside (0, " << pb << ")";
    throw Error(ErrorCode::DegenerateLevel, os.str());
  }
  const double rc = s.level_radius(c);
  double mu = 0;
  const double dth = 2 * M_PI / n_quad;
  for (int k = 0; k < n_quad; ++k) {
    // dl = rc dtheta on the circle; psi0 radial so |grad psi0| = |psi0'|
    mu += rc * dth / std::abs(s.dpsi(rc));
  }
  return mu;
}

}  // namespace qsgs

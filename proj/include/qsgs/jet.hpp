#ifndef QSGS_JET_HPP
#define QSGS_JET_HPP

#include <Eigen/Dense>
#include <array>
#include <cmath>

namespace qsgs {

//! Second-order forward-mode derivative of a scalar function of three
//! variables: value, gradient and Hessian carried through arithmetic.
struct Jet {
  double v = 0.0;
  Eigen::Vector3d d = Eigen::Vector3d::Zero();
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();

  Jet() = default;
  Jet(double c) : v(c) {}  // NOLINT: implicit promotion of constants is intended

  static Jet variable(int i, double x) {
    Jet j(x);
    j.d[i] = 1.0;
    return j;
  }
  // The i-th partial derivative as a jet whose own gradient is exact; its
  // Hessian is unknown and left at zero.
  Jet partial(int i) const {
    Jet j(d[i]);
    j.d = h.col(i);
    return j;
  }
};

// f(a) given f, f', f'' at a.v
inline Jet chain(const Jet& a, double f0, double f1, double f2) {
  Jet r(f0);
  r.d = f1 * a.d;
  r.h = f1 * a.h + f2 * a.d * a.d.transpose();
  return r;
}

inline Jet operator+(const Jet& a, const Jet& b) {
  Jet r(a.v + b.v);
  r.d = a.d + b.d;
  r.h = a.h + b.h;
  return r;
}
inline Jet operator-(const Jet& a, const Jet& b) {
  Jet r(a.v - b.v);
  r.d = a.d - b.d;
  r.h = a.h - b.h;
  return r;
}
inline Jet operator-(const Jet& a) {
  Jet r(-a.v);
  r.d = -a.d;
  r.h = -a.h;
  return r;
}
inline Jet operator*(const Jet& a, const Jet& b) {
  Jet r(a.v * b.v);
  r.d = a.d * b.v + b.d * a.v;
  r.h = a.h * b.v + b.h * a.v + a.d * b.d.transpose() + b.d * a.d.transpose();
  return r;
}
inline Jet operator/(const Jet& a, const Jet& b) {
  const double x = b.v;
  return a * chain(b, 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x));
}
inline Jet& operator+=(Jet& a, const Jet& b) { return a = a + b; }
inline Jet& operator-=(Jet& a, const Jet& b) { return a = a - b; }
inline Jet& operator*=(Jet& a, const Jet& b) { return a = a * b; }

inline Jet sin(const Jet& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return chain(a, s, c, -s);
}
inline Jet cos(const Jet& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return chain(a, c, -s, -c);
}
inline Jet exp(const Jet& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e, e);
}
inline Jet sqrt(const Jet& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}
inline Jet sq(const Jet& a) { return a * a; }

// Two-argument chain rule given the partials of f(y, x).
inline Jet chain2(const Jet& y, const Jet& x, double f0, double fy, double fx,
                  double fyy, double fxx, double fxy) {
  Jet r(f0);
  r.d = fy * y.d + fx * x.d;
  r.h = fy * y.h + fx * x.h + fyy * y.d * y.d.transpose() +
        fxx * x.d * x.d.transpose() +
        fxy * (y.d * x.d.transpose() + x.d * y.d.transpose());
  return r;
}

inline Jet atan2(const Jet& y, const Jet& x) {
  const double r2 = x.v * x.v + y.v * y.v;
  const double r4 = r2 * r2;
  return chain2(y, x, std::atan2(y.v, x.v), x.v / r2, -y.v / r2,
                -2.0 * x.v * y.v / r4, 2.0 * x.v * y.v / r4,
                (y.v * y.v - x.v * x.v) / r4);
}

inline Jet hypot(const Jet& x, const Jet& y) { return sqrt(x * x + y * y); }

using JetVec = std::array<Jet, 3>;

inline JetVec jet_point(const Eigen::Vector3d& x) {
  return {Jet::variable(0, x[0]), Jet::variable(1, x[1]),
          Jet::variable(2, x[2])};
}

}  // namespace qsgs

#endif

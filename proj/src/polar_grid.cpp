#include "qsgs/polar_grid.hpp"

#include <cmath>

namespace qsgs {

PolarGrid::PolarGrid(int nr_, int nt_, double r0_)
    : nr(nr_), nt(nt_), r0(r0_), hr(r0_ / nr_), ht(2 * M_PI / nt_) {
  if (nr < 4 || nt < 4 || nt % 2 != 0 || !(r0 > 0)) {
    throw Error(ErrorCode::DomainViolation,
                "polar grid needs nr >= 4, even nt >= 4 and r0 > 0");
  }
}

Vec2 PolarGrid::point(int i, int j) const {
  const double rr = r(i), th = theta(j);
  return Vec2(rr * std::cos(th), rr * std::sin(th));
}

GhostTerm resolve(const PolarGrid& g, GhostKind kind, int i, int j) {
  GhostTerm t;
  auto add = [&](int ii, int jj, double w) {
    t.idx[t.terms] = g.index(ii, jj);
    t.w[t.terms] = w;
    ++t.terms;
  };
  if (i >= 0 && i < g.nr) {
    add(i, j, 1.0);
  } else if (i == -1 || i == -2) {
    add(-1 - i, j + g.nt / 2, 1.0);
  } else if (i == g.nr) {
    const int n = g.nr;
    switch (kind) {
      case GhostKind::Dirichlet:
        add(n - 1, j, -2.0);
        add(n - 2, j, 1.0 / 3.0);
        t.bc_index = g.wrap(j);
        t.bc_weight = 8.0 / 3.0;
        break;
      case GhostKind::Neumann:
        add(n - 1, j, 1.0);
        t.bc_index = g.wrap(j);
        t.bc_weight = g.hr;
        break;
      case GhostKind::Extrapolate:
        add(n - 1, j, 4.0);
        add(n - 2, j, -6.0);
        add(n - 3, j, 4.0);
        add(n - 4, j, -1.0);
        break;
    }
  } else {
    throw Error(ErrorCode::DomainViolation, "ghost ring out of range");
  }
  return t;
}

CartDerivs polar_to_cart(const PolarDerivs& d, double r, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  const double ir = 1.0 / r, ir2 = ir * ir;
  CartDerivs o;
  o.w = d.w;
  o.grad[0] = c * d.r - s * ir * d.t;
  o.grad[1] = s * d.r + c * ir * d.t;
  const double uu = c * c * d.rr - 2 * s * c * ir * d.rt + s * s * ir2 * d.tt +
                    s * s * ir * d.r + 2 * s * c * ir2 * d.t;
  const double vv = s * s * d.rr + 2 * s * c * ir * d.rt + c * c * ir2 * d.tt +
                    c * c * ir * d.r - 2 * s * c * ir2 * d.t;
  const double uv = s * c * d.rr + (c * c - s * s) * ir * d.rt -
                    s * c * ir2 * d.tt - s * c * ir * d.r -
                    (c * c - s * s) * ir2 * d.t;
  o.hess << uu, uv, uv, vv;
  return o;
}

PolarStencil polar_stencil(const PolarGrid& g) {
  PolarStencil st{};
  auto at = [](int di, int dj) { return (di + 1) * 3 + (dj + 1); };
  const double hr = g.hr, ht = g.ht;
  st.r[at(1, 0)] = 0.5 / hr;
  st.r[at(-1, 0)] = -0.5 / hr;
  st.rr[at(1, 0)] = 1 / (hr * hr);
  st.rr[at(0, 0)] = -2 / (hr * hr);
  st.rr[at(-1, 0)] = 1 / (hr * hr);
  st.t[at(0, 1)] = 0.5 / ht;
  st.t[at(0, -1)] = -0.5 / ht;
  st.tt[at(0, 1)] = 1 / (ht * ht);
  st.tt[at(0, 0)] = -2 / (ht * ht);
  st.tt[at(0, -1)] = 1 / (ht * ht);
  const double x = 0.25 / (hr * ht);
  st.rt[at(1, 1)] = x;
  st.rt[at(1, -1)] = -x;
  st.rt[at(-1, 1)] = -x;
  st.rt[at(-1, -1)] = x;
  return st;
}

namespace {
double logical_value(const PolarGrid& g, const GridValues& w,
                     const GhostRule& ghost, int i, int j) {
  if (i >= 0 && i < g.nr) return w[g.index(i, j)];
  const GhostTerm t = resolve(g, ghost.kind, i, j);
  double s = 0;
  for (int k = 0; k < t.terms; ++k) s += t.w[k] * w[t.idx[k]];
  if (t.bc_index >= 0) s += t.bc_weight * ghost.data[t.bc_index];
  return s;
}
}  // namespace

std::vector<PolarDerivs> polar_bundle(const PolarGrid& g, const GridValues& w,
                                      const GhostRule& ghost) {
  const PolarStencil st = polar_stencil(g);
  std::vector<PolarDerivs> out(g.size());
  double nb[9];
  for (int i = 0; i < g.nr; ++i) {
    for (int j = 0; j < g.nt; ++j) {
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          nb[(di + 1) * 3 + dj + 1] = logical_value(g, w, ghost, i + di, j + dj);
        }
      }
      PolarDerivs d;
      d.w = nb[4];
      for (int k = 0; k < 9; ++k) {
        d.r += st.r[k] * nb[k];
        d.t += st.t[k] * nb[k];
        d.rr += st.rr[k] * nb[k];
        d.rt += st.rt[k] * nb[k];
        d.tt += st.tt[k] * nb[k];
      }
      out[g.index(i, j)] = d;
    }
  }
  return out;
}

std::vector<CartDerivs> cart_bundle(const PolarGrid& g, const GridValues& w,
                                    const GhostRule& ghost) {
  const auto pb = polar_bundle(g, w, ghost);
  std::vector<CartDerivs> out(g.size());
  for (int i = 0; i < g.nr; ++i) {
    for (int j = 0; j < g.nt; ++j) {
      const int n = g.index(i, j);
      out[n] = polar_to_cart(pb[n], g.r(i), g.theta(j));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Interpolator::Interpolator(const PolarGrid& g, const GridValues& w,
                           const GhostRule& ghost)
    : g_(g), rings_(g.nr + 4) {
  const int nt = g.nt, nr = g.nr;
  const size_t n = static_cast<size_t>(rings_) * nt;
  f_.assign(n, 0.0);
  fr_.assign(n, 0.0);
  ft_.assign(n, 0.0);
  frt_.assign(n, 0.0);
  for (int i = -2; i <= nr; ++i) {
    for (int j = 0; j < nt; ++j) f_[ext(i, j)] = logical_value(g, w, ghost, i, j);
  }
  for (int j = 0; j < nt; ++j) {
    f_[ext(nr + 1, j)] = 4 * f_[ext(nr, j)] - 6 * f_[ext(nr - 1, j)] +
                         4 * f_[ext(nr - 2, j)] - f_[ext(nr - 3, j)];
  }
  const double hr = g.hr, ht = g.ht;
  // theta derivative on every extended ring
  for (int i = -2; i <= nr + 1; ++i) {
    for (int j = 0; j < nt; ++j) {
      ft_[ext(i, j)] = (-f_[ext(i, j + 2)] + 8 * f_[ext(i, j + 1)] -
                        8 * f_[ext(i, j - 1)] + f_[ext(i, j - 2)]) /
                       (12 * ht);
    }
  }
  auto radial = [&](const std::vector<double>& a, int i, int j) {
    if (i <= nr - 1) {
      return (-a[ext(i + 2, j)] + 8 * a[ext(i + 1, j)] - 8 * a[ext(i - 1, j)] +
              a[ext(i - 2, j)]) /
             (12 * hr);
    }
    return (a[ext(i + 1, j)] - a[ext(i - 1, j)]) / (2 * hr);
  };
  for (int i = 0; i <= nr; ++i) {
    for (int j = 0; j < nt; ++j) {
      fr_[ext(i, j)] = radial(f_, i, j);
      frt_[ext(i, j)] = radial(ft_, i, j);
    }
  }
  for (int j = 0; j < nt; ++j) {
    for (int i = -2; i <= -1; ++i) {
      const int src = ext(-1 - i, j + nt / 2);
      fr_[ext(i, j)] = -fr_[src];
      frt_[ext(i, j)] = -frt_[src];
    }
  }
}

PolarDerivs Interpolator::eval_polar(double r, double theta) const {
  const double hr = g_.hr, ht = g_.ht;
  int i = static_cast<int>(std::floor(r / hr - 0.5));
  i = std::max(-1, std::min(i, g_.nr - 1));
  const double s = (r - (i + 0.5) * hr) / hr;
  double th = std::fmod(theta, 2 * M_PI);
  if (th < 0) th += 2 * M_PI;
  int j = static_cast<int>(std::floor(th / ht));
  const double tau = th / ht - j;
  j = g_.wrap(j);

  auto basis = [](double x, double* H, double* K, double* dH, double* dK,
                  double* ddH, double* ddK) {
    const double x2 = x * x, x3 = x2 * x;
    H[0] = 2 * x3 - 3 * x2 + 1;
    H[1] = -2 * x3 + 3 * x2;
    K[0] = x3 - 2 * x2 + x;
    K[1] = x3 - x2;
    dH[0] = 6 * x2 - 6 * x;
    dH[1] = -6 * x2 + 6 * x;
    dK[0] = 3 * x2 - 4 * x + 1;
    dK[1] = 3 * x2 - 2 * x;
    ddH[0] = 12 * x - 6;
    ddH[1] = -12 * x + 6;
    ddK[0] = 6 * x - 4;
    ddK[1] = 6 * x - 2;
  };
  double Hs[2], Ks[2], dHs[2], dKs[2], ddHs[2], ddKs[2];
  double Ht[2], Kt[2], dHt[2], dKt[2], ddHt[2], ddKt[2];
  basis(s, Hs, Ks, dHs, dKs, ddHs, ddKs);
  basis(tau, Ht, Kt, dHt, dKt, ddHt, ddKt);

  PolarDerivs d;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const int k = ext(i + a, j + b);
      const double f = f_[k], fr = fr_[k] * hr, ft = ft_[k] * ht,
                   frt = frt_[k] * hr * ht;
      // value-like combination for generic radial/angular basis choice
      auto comb = [&](const double* Rb, const double* Rk, const double* Tb,
                      const double* Tk) {
        return Rb[a] * Tb[b] * f + Rk[a] * Tb[b] * fr + Rb[a] * Tk[b] * ft +
               Rk[a] * Tk[b] * frt;
      };
      d.w += comb(Hs, Ks, Ht, Kt);
      d.r += comb(dHs, dKs, Ht, Kt);
      d.t += comb(Hs, Ks, dHt, dKt);
      d.rr += comb(ddHs, ddKs, Ht, Kt);
      d.rt += comb(dHs, dKs, dHt, dKt);
      d.tt += comb(Hs, Ks, ddHt, ddKt);
    }
  }
  d.r /= hr;
  d.t /= ht;
  d.rr /= hr * hr;
  d.rt /= hr * ht;
  d.tt /= ht * ht;
  return d;
}

double Interpolator::value(const Vec2& p) const {
  return eval_polar(p.norm(), std::atan2(p[1], p[0])).w;
}

CartDerivs Interpolator::eval(const Vec2& p) const {
  const double r = std::max(p.norm(), 1e-12 * g_.r0);
  const double th = std::atan2(p[1], p[0]);
  return polar_to_cart(eval_polar(r, th), r, th);
}

double integrate(const PolarGrid& g, const GridValues& w) {
  double s = 0;
  for (int i = 0; i < g.nr; ++i) {
    const double a = g.area_weight(i);
    for (int j = 0; j < g.nt; ++j) s += a * w[g.index(i, j)];
  }
  return s;
}

}  // namespace qsgs

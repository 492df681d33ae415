#include "qsgs/elliptic.hpp"

#include <cmath>
#include <sstream>

namespace qsgs {

NodeCoeffs NodeCoeffs::laplacian(const PolarGrid& g) {
  NodeCoeffs c;
  c.A.assign(g.size(), Mat2::Identity());
  c.B.assign(g.size(), Vec2::Zero());
  c.c = Eigen::VectorXd::Zero(g.size());
  return c;
}

PolarWeights polar_weights(const Mat2& A, const Vec2& B, double r,
                           double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  const double auu = A(0, 0), auv = 0.5 * (A(0, 1) + A(1, 0)), avv = A(1, 1);
  const double cross = 2 * s * c * (avv - auu) + 2 * auv * (c * c - s * s);
  const double tang = auu * s * s - 2 * auv * s * c + avv * c * c;
  PolarWeights w;
  w.rr = auu * c * c + 2 * auv * s * c + avv * s * s;
  w.rt = cross / r;
  w.tt = tang / (r * r);
  w.r = tang / r + B[0] * c + B[1] * s;
  w.t = -cross / (r * r) + (-B[0] * s + B[1] * c) / r;
  return w;
}

LinearOperator::LinearOperator(const PolarGrid& g, const NodeCoeffs& co,
                               GhostKind kind)
    : g_(g), kind_(kind) {
  const int n = g.size();
  if (static_cast<int>(co.A.size()) != n || static_cast<int>(co.B.size()) != n ||
      co.c.size() != n) {
    throw Error(ErrorCode::InsufficientData, "coefficient arrays do not match grid");
  }
  const PolarStencil st = polar_stencil(g);
  std::vector<Eigen::Triplet<double>> tm, tb;
  tm.reserve(static_cast<size_t>(n) * 12);
  for (int i = 0; i < g.nr; ++i) {
    for (int j = 0; j < g.nt; ++j) {
      const int row = g.index(i, j);
      const PolarWeights pw = polar_weights(co.A[row], co.B[row], g.r(i), g.theta(j));
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const int k = (di + 1) * 3 + dj + 1;
          double w = pw.rr * st.rr[k] + pw.rt * st.rt[k] + pw.tt * st.tt[k] +
                     pw.r * st.r[k] + pw.t * st.t[k];
          if (di == 0 && dj == 0) w += co.c[row];
          if (w == 0.0) continue;
          const GhostTerm t = resolve(g, kind, i + di, j + dj);
          for (int m = 0; m < t.terms; ++m) tm.emplace_back(row, t.idx[m], w * t.w[m]);
          if (t.bc_index >= 0) tb.emplace_back(row, t.bc_index, w * t.bc_weight);
        }
      }
    }
  }
  M_.resize(n, n);
  M_.setFromTriplets(tm.begin(), tm.end());
  Bc_.resize(n, g.nt);
  Bc_.setFromTriplets(tb.begin(), tb.end());
}

GridValues LinearOperator::apply(const GridValues& w,
                                 const Eigen::VectorXd& bc) const {
  GridValues out = M_ * w;
  if (bc.size() == g_.nt) out += Bc_ * bc;
  return out;
}

void LinearOperator::factorize() const {
  if (lu_) return;
  auto lu = std::make_shared<Eigen::SparseLU<SpMat>>();
  lu->analyzePattern(M_);
  lu->factorize(M_);
  if (lu->info() != Eigen::Success) {
    throw Error(ErrorCode::SingularOperator,
                "sparse factorisation failed: " + lu->lastErrorMessage());
  }
  lu_ = lu;
}

GridValues LinearOperator::solve(const GridValues& rhs,
                                 const Eigen::VectorXd& bc) const {
  factorize();
  GridValues b = rhs;
  if (bc.size() == g_.nt) b -= Bc_ * bc;
  GridValues u = lu_->solve(b);
  // one step of refinement; the stencil weights scale like 1/h^2
  const GridValues res = b - M_ * u;
  u += lu_->solve(res);
  if (!u.allFinite()) throw Error(ErrorCode::SingularOperator, "non-finite solution");
  return u;
}

GridValues dirichlet_solve(const LinearOperator& op, const GridValues& rhs,
                           const Eigen::VectorXd& bc) {
  if (op.kind() != GhostKind::Dirichlet) {
    throw Error(ErrorCode::InsufficientData, "operator is not a Dirichlet operator");
  }
  const GridValues u = op.solve(rhs, bc);
  // componentwise backward error; pole rows carry weights ~ 1/(h_r h_t)^2 so
  // a plain |rhs| scale would sit below their roundoff
  const GridValues res = (op.apply(u, bc) - rhs).cwiseAbs();
  const GridValues scale = rhs.cwiseAbs() + op.matrix().cwiseAbs() * u.cwiseAbs() +
                           op.boundary_coupling().cwiseAbs() * bc.cwiseAbs();
  double worst = 0.0;
  for (int k = 0; k < res.size(); ++k) {
    if (res[k] > 0) worst = std::max(worst, res[k] / scale[k]);
  }
  if (worst > 1e-10) {
    std::ostringstream os;
    os << "Dirichlet backward error " << worst << " exceeds 1e-10";
    throw Error(ErrorCode::SingularOperator, os.str());
  }
  return u;
}

NeumannSolver::NeumannSolver(const PolarGrid& g)
    : g_(g), lap_(g, NodeCoeffs::laplacian(g), GhostKind::Neumann) {
  const int n = g.size();
  std::vector<Eigen::Triplet<double>> t;
  const SpMat& M = lap_.matrix();
  for (int k = 0; k < M.outerSize(); ++k) {
    for (SpMat::InnerIterator it(M, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  }
  // scale the border like the stencil so pivots stay balanced
  const double sc = 1.0 / (g.hr * g.hr);
  for (int i = 0; i < g.nr; ++i) {
    const double a = g.area_weight(i) / (g.hr * g.ht * g.r0);
    for (int j = 0; j < g.nt; ++j) {
      const int idx = g.index(i, j);
      t.emplace_back(idx, n, sc);
      t.emplace_back(n, idx, a * sc);
    }
  }
  SpMat K(n + 1, n + 1);
  K.setFromTriplets(t.begin(), t.end());
  lu_.analyzePattern(K);
  lu_.factorize(K);
  if (lu_.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularOperator, "bordered Neumann system is singular");
  }
}

NeumannResult NeumannSolver::solve(const GridValues& rhs,
                                   double boundary_const) const {
  const int n = g_.size();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  b.head(n) = rhs - lap_.boundary_coupling() *
                        Eigen::VectorXd::Constant(g_.nt, boundary_const);
  const Eigen::VectorXd x = lu_.solve(b);
  NeumannResult r;
  r.eta = x.head(n);
  r.lambda = x[n] / (g_.hr * g_.hr);
  r.defect = r.lambda * M_PI * g_.r0 * g_.r0;
  return r;
}

NeumannResult neumann_solve(const PolarGrid& g, const GridValues& rhs,
                            double boundary_const) {
  return NeumannSolver(g).solve(rhs, boundary_const);
}

SpectrumResult smallest_eigenvalue(const LinearOperator& op, int max_iter,
                                   double tol) {
  const int n = op.grid().size();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(op.grid().nt);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  x.normalize();
  double prev = 0.0;
  SpectrumResult r;
  for (int k = 1; k <= max_iter; ++k) {
    const Eigen::VectorXd y = op.solve(x, zero);
    const double est = -x.dot(y) / y.squaredNorm();
    x = y.normalized();
    r.lambda_min = est;
    r.iterations = k;
    if (k > 2 && std::abs(est - prev) <= tol * std::abs(est)) return r;
    prev = est;
  }
  std::ostringstream os;
  os << "inverse iteration did not settle in " << max_iter << " steps";
  throw Error(ErrorCode::SpectralFailure, os.str());
}

}  // namespace qsgs

#include <gtest/gtest.h>

#include "qsgs/geometry.hpp"
#include "test_util.hpp"

using namespace qsgs;
using namespace qsgs::test;

namespace {

// (X x_g Y)^k = sqrt|g| g^{kl} eps_{ijl} X^i Y^j, summed by hand
Vec3 cross_bruteforce(const Mat3& g, const Vec3& X, const Vec3& Y) {
  const Mat3 gi = g.inverse();
  const double sg = std::sqrt(g.determinant());
  Vec3 out = Vec3::Zero();
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[k] += sg * gi(k, l) * levi(i, j, l) * X[i] * Y[j];
  return out;
}

// curl_g X = (1/sqrt g) eps^{ijk} d_i (X_flat)_j by central differences of
// the lowered field.
Vec3 curl_fd(const AffineMetric& m, const QuadField& X, const Vec3& p, double h) {
  auto flat = [&](const Vec3& x) -> Vec3 { return m.g(x) * X.value(x); };
  Mat3 d;  // d(j, i) = d_i flat_j
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Zero();
    e[i] = h;
    d.col(i) = (flat(p + e) - flat(p - e)) / (2 * h);
  }
  Vec3 c = Vec3::Zero();
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) c[k] += levi(i, j, k) * d(j, i);
  return c / std::sqrt(m.g(p).determinant());
}

}  // namespace

TEST(CrossG, EuclideanBasis) {
  const Vec3 z = cross_g(MetricFrame::euclidean(), Vec3::UnitX(), Vec3::UnitY());
  EXPECT_NEAR((z - Vec3::UnitZ()).norm(), 0.0, 1e-15);
}

TEST(CrossG, ScaledMetric) {
  const MetricFrame g = MetricFrame::make(4 * Mat3::Identity(), {});
  const Vec3 v = cross_g(g, Vec3::UnitX(), Vec3::UnitY());
  EXPECT_NEAR((v - 2 * Vec3::UnitZ()).norm(), 0.0, 1e-14);
  // determinant identity with Z = e_z: g(2 e_z, e_z) = 8 = sqrt|g|
  EXPECT_NEAR(g.dot(v, Vec3::UnitZ()), 8.0, 1e-13);
}

TEST(CrossG, Antisymmetric) {
  std::mt19937_64 rng(1);
  const AffineMetric m = AffineMetric::random(rng);
  const Vec3 X = random_vec(rng);
  EXPECT_LT(cross_g(m.frame(Vec3::Zero()), X, X).norm(), 1e-15);
}

TEST(CrossG, MatchesComponentFormula) {
  std::mt19937_64 rng(2);
  for (int n = 0; n < 200; ++n) {
    const AffineMetric m = AffineMetric::random(rng);
    const Vec3 p = random_vec(rng, 0.5), X = random_vec(rng), Y = random_vec(rng);
    const MetricFrame g = m.frame(p);
    const Vec3 a = cross_g(g, X, Y), b = cross_bruteforce(g.g, X, Y);
    EXPECT_LT((a - b).norm(), 1e-12 * (1 + b.norm()));
  }
}

TEST(CrossG, RejectsIndefiniteMetric) {
  Mat3 g = Mat3::Identity();
  g(2, 2) = -1;
  EXPECT_THROW(MetricFrame::make(g, {}), Error);
  try {
    MetricFrame::make(g, {});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidMetric);
  }
}

TEST(CurlG, RigidRotation) {
  const Vec3 x(0.3, -0.2, 0.7);
  Mat3 J = Mat3::Zero();
  J(0, 1) = -1;
  J(1, 0) = 1;
  const VecSample X(Vec3(-x[1], x[0], 0), J);
  EXPECT_LT((curl_g(MetricFrame::euclidean(), X) - Vec3(0, 0, 2)).norm(), 1e-15);
}

TEST(CurlG, GradientIsCurlFree) {
  // f = sin(x) y + z^3 x, constant random metric; grad_g f has flat df
  std::mt19937_64 rng(3);
  AffineMetric m = AffineMetric::random(rng);
  for (auto& G : m.Gk) G.setZero();
  const Vec3 p(0.4, -0.3, 0.2);
  const Vec3 df(std::cos(p[0]) * p[1] + p[2] * p[2] * p[2], std::sin(p[0]),
                3 * p[2] * p[2] * p[0]);
  Mat3 H;
  H << -std::sin(p[0]) * p[1], std::cos(p[0]), 3 * p[2] * p[2], std::cos(p[0]), 0, 0,
      3 * p[2] * p[2], 0, 6 * p[2] * p[0];
  const MetricFrame g = m.frame(p);
  const VecSample X(grad_g(g, df), g.ginv * H);
  EXPECT_LT(curl_g(g, X).norm(), 1e-10);
  EXPECT_LT(curl_g(MetricFrame::euclidean(), VecSample(df, H)).norm(), 1e-10);
}

TEST(CurlG, MatchesFormDefinitionByFD) {
  std::mt19937_64 rng(4);
  for (int n = 0; n < 50; ++n) {
    const AffineMetric m = AffineMetric::random(rng);
    const QuadField X = QuadField::random(rng);
    const Vec3 p = random_vec(rng, 0.5);
    const Vec3 a = curl_g(m.frame(p), X.sample(p));
    const Vec3 b = curl_fd(m, X, p, 1e-4);
    EXPECT_LT((a - b).norm(), 1e-7 * (1 + b.norm()));
  }
}

TEST(CurlG, NeedsJacobian) {
  try {
    curl_g(MetricFrame::euclidean(), VecSample(Vec3(1, 2, 3)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
}

TEST(DivGrad, Euclidean) {
  const Vec3 x(0.2, 0.5, -0.1);
  EXPECT_NEAR(div_g(MetricFrame::euclidean(), VecSample(x, Mat3::Identity())), 3.0, 1e-15);
  const Vec3 gf = grad_g(MetricFrame::euclidean(), Vec3(2 * x[0], 0, 0));
  EXPECT_LT((gf - Vec3(0.4, 0, 0)).norm(), 1e-15);
}

TEST(DivGrad, ConstantMetricLinearField) {
  // sqrt|g| constant, so div_g X = trace(dX) = div X
  std::mt19937_64 rng(5);
  for (int n = 0; n < 20; ++n) {
    AffineMetric m = AffineMetric::random(rng);
    for (auto& G : m.Gk) G.setZero();
    QuadField X = QuadField::random(rng);
    for (auto& q : X.Q) q.setZero();
    const Vec3 p = random_vec(rng, 0.5);
    const VecSample s = X.sample(p);
    EXPECT_NEAR(div_g(m.frame(p), s), X.B.trace(), 1e-13);
    EXPECT_NEAR(div_euclid(s), X.B.trace(), 1e-13);
  }
}

TEST(DivGrad, DivergenceMatchesDensityFormByFD) {
  std::mt19937_64 rng(6);
  const AffineMetric m = AffineMetric::random(rng);
  const QuadField X = QuadField::random(rng);
  const Vec3 p = random_vec(rng, 0.3);
  const double h = 1e-4;
  double ref = 0;
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Zero();
    e[i] = h;
    auto dens = [&](const Vec3& x) { return std::sqrt(m.g(x).determinant()) * X.value(x)[i]; };
    ref += (dens(p + e) - dens(p - e)) / (2 * h);
  }
  ref /= std::sqrt(m.g(p).determinant());
  EXPECT_NEAR(div_g(m.frame(p), X.sample(p)), ref, 1e-7);
}

TEST(Deformation, RotationIsEuclideanKilling) {
  const Vec3 x(10.3, 0.4, 0.1);
  Mat3 J = Mat3::Zero();
  J(0, 1) = -1;
  J(1, 0) = 1;
  const Mat3 L = deformation_tensor(MetricFrame::euclidean(), VecSample(Vec3(-x[1], x[0], 0), J));
  EXPECT_LT(L.norm(), 1e-12);
}

TEST(Deformation, Stretch) {
  Mat3 J = Mat3::Zero();
  J(0, 0) = 1;
  const Mat3 L = deformation_tensor(MetricFrame::euclidean(), VecSample(Vec3(0.7, 0, 0), J));
  Mat3 expect = Mat3::Zero();
  expect(0, 0) = 2;
  EXPECT_LT((L - expect).norm(), 1e-15);
}

TEST(Deformation, MatchesLieDerivativeByFD) {
  // (L_X g)_ij = X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k
  std::mt19937_64 rng(7);
  for (int n = 0; n < 20; ++n) {
    const AffineMetric m = AffineMetric::random(rng);
    const QuadField X = QuadField::random(rng);
    const Vec3 p = random_vec(rng, 0.4);
    const VecSample s = X.sample(p);
    const Mat3 g = m.g(p);
    Mat3 ref = s.jac.transpose() * g + g * s.jac;
    for (int k = 0; k < 3; ++k) ref += s.value[k] * m.Gk[k];
    EXPECT_LT((deformation_tensor(m.frame(p), s) - ref).norm(), 1e-12 * (1 + ref.norm()));
  }
}

// Invariants

TEST(GeomInvariant, DeterminantIdentity) {
  std::mt19937_64 rng(8);
  for (int n = 0; n < 1000; ++n) {
    const AffineMetric m = AffineMetric::random(rng);
    const MetricFrame g = m.frame(random_vec(rng, 0.5));
    const Vec3 X = random_vec(rng), Y = random_vec(rng), Z = random_vec(rng);
    const double lhs = g.dot(cross_g(g, X, Y), Z);
    const double rhs = g.sqrt_det * X.cross(Y).dot(Z);
    const double scale = g.sqrt_det * X.norm() * Y.norm() * Z.norm();
    ASSERT_LT(std::abs(lhs - rhs), 1e-9 * scale);
  }
}

TEST(GeomInvariant, MetricFrameAlgebra) {
  std::mt19937_64 rng(9);
  for (int n = 0; n < 100; ++n) {
    const AffineMetric m = AffineMetric::random(rng);
    const MetricFrame g = m.frame(random_vec(rng, 0.5));
    EXPECT_LT((g.ginv * g.g - Mat3::Identity()).norm(), 1e-12);
    EXPECT_NEAR(g.sqrt_det * g.sqrt_det, g.det, 1e-12 * g.det);
    for (int k = 0; k < 3; ++k) EXPECT_LT((g.gamma[k] - g.gamma[k].transpose()).norm(), 1e-14);
  }
}

TEST(GeomInvariant, ChristoffelFromMetricDerivatives) {
  std::mt19937_64 rng(10);
  const AffineMetric m = AffineMetric::random(rng);
  const MetricFrame g = m.frame(Vec3(0.1, 0.2, 0.3));
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double ref = 0;
        for (int l = 0; l < 3; ++l)
          ref += 0.5 * g.ginv(k, l) * (m.Gk[i](l, j) + m.Gk[j](l, i) - m.Gk[l](i, j));
        EXPECT_NEAR(g.gamma[k](i, j), ref, 1e-13);
      }
}

TEST(GeomInvariant, ProductRule) {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 200; ++n) {
    const AffineMetric m = AffineMetric::random(rng);
    const QuadField X = QuadField::random(rng);
    const Vec3 p = random_vec(rng, 0.5);
    const MetricFrame g = m.frame(p);
    // f = 1 + a.x + |x|^2 / 2
    const Vec3 a = random_vec(rng);
    const double f = 1 + a.dot(p) + 0.5 * p.squaredNorm();
    const Vec3 df = a + p;
    const VecSample s = X.sample(p);
    const VecSample fX(f * s.value, f * s.jac + s.value * df.transpose());
    const Vec3 lhs = curl_g(g, fX);
    const Vec3 rhs = cross_g(g, grad_g(g, df), s.value) + f * curl_g(g, s);
    ASSERT_LT((lhs - rhs).norm(), 1e-10 * (1 + rhs.norm()));
  }
}

TEST(GeomInvariant, TripleProductImplementedForm) {
  // (X x_g Y) x_g Z = (X._g Z) Y - (Y._g Z) X, with both crosses expanded
  // independently through the epsilon symbol
  std::mt19937_64 rng(12);
  for (int n = 0; n < 1000; ++n) {
    const AffineMetric m = AffineMetric::random(rng);
    const MetricFrame g = m.frame(random_vec(rng, 0.5));
    const Vec3 X = random_vec(rng), Y = random_vec(rng), Z = random_vec(rng);
    const Vec3 brute = cross_bruteforce(g.g, cross_bruteforce(g.g, X, Y), Z);
    const Vec3 impl = cross_g(g, cross_g(g, X, Y), Z);
    const Vec3 form = g.dot(X, Z) * Y - g.dot(Y, Z) * X;
    const double s = 1 + brute.norm();
    ASSERT_LT((impl - brute).norm(), 1e-12 * s);
    ASSERT_LT((form - brute).norm(), 1e-10 * s);
  }
}

TEST(GeomInvariant, TripleProductSwappedIndexPatternFails) {
  // the swapped (X._g Y) Z - (X._g Z) Y is not an identity, even for g = delta
  const Vec3 X(1, 0, 0), Y(1, 1, 0), Z(0, 0, 1);
  const MetricFrame e = MetricFrame::euclidean();
  const Vec3 lhs = cross_g(e, cross_g(e, X, Y), Z);
  const Vec3 swapped = e.dot(X, Y) * Z - e.dot(X, Z) * Y;
  EXPECT_GT((lhs - swapped).norm(), 0.5);
}

TEST(GeomInvariant, FDHelpersSecondOrder) {
  auto f = [](const Vec3& x) { return std::sin(x[0]) * std::exp(x[1]) + x[2] * x[2] * x[2]; };
  const Vec3 p(0.3, -0.2, 0.5);
  const Vec3 exact(std::cos(p[0]) * std::exp(p[1]), std::sin(p[0]) * std::exp(p[1]),
                   3 * p[2] * p[2]);
  const double e1 = (fd_gradient(f, p, 1e-2) - exact).norm();
  const double e2 = (fd_gradient(f, p, 5e-3) - exact).norm();
  EXPECT_GT(e1 / e2, 3.5);
  EXPECT_LT(e2, 1e-4);
}

TEST(Point3, ToroidalRoundTrip) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0, 1);
  for (int n = 0; n < 200; ++n) {
    const double r = 0.5 * u(rng), th = 2 * M_PI * u(rng) - M_PI, ph = 2 * M_PI * u(rng) - M_PI;
    const Point3 p = Point3::from_toroidal(r, th, ph, 10.0);
    const ToroidalCoords t = p.toroidal(10.0);
    ASSERT_TRUE(t.defined);
    const Point3 q = Point3::from_toroidal(t.r, t.theta, t.phi, 10.0);
    ASSERT_LT((p.x - q.x).norm(), 1e-12 * p.x.norm());
    ASSERT_GE(t.r, 0.0);
  }
  Point3 axis;
  axis.x = Vec3(0, 0, 1);
  EXPECT_FALSE(axis.toroidal(10.0).defined);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hybo/lorentz/manifold.hpp"

using namespace hybo::lorentz;
using V = Vec<double>;
using M = Mat<double>;

namespace {

// Reference values from a 30-digit evaluation.
constexpr double kCosh1 = 1.54308063481524377848;
constexpr double kSinh1 = 1.17520119364380145688;
constexpr double kCosh2 = 3.76219569108363145956;
constexpr double kSinh2 = 3.62686040784701876767;

V vec(std::initializer_list<double> xs) {
  V v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST(CurvatureTest, RejectsNonNegative) {
  EXPECT_THROW(Curvature(0.0), GeometryError);
  EXPECT_THROW(Curvature(1.0), GeometryError);
  EXPECT_DOUBLE_EQ(Curvature().value(), -1.0);
}

TEST(InnerTest, Examples) {
  const V o = origin<double>(2);
  const V x = vec({kCosh1, kSinh1, 0.0});
  EXPECT_DOUBLE_EQ(lorentz_inner(o, o), -1.0);
  EXPECT_NEAR(lorentz_inner(x, x), -1.0, 1e-15);
  EXPECT_NEAR(lorentz_inner(o, x), -kCosh1, 1e-15);
  EXPECT_THROW(lorentz_inner(o, vec({1.0, 0.0})), GeometryError);
}

TEST(ProjectTest, Examples) {
  EXPECT_EQ(project_to_hyperboloid<double>(V::Zero(3)), origin<double>(3));
  const V x = project_to_hyperboloid<double>(vec({kSinh1, 0.0}));
  EXPECT_NEAR(x(0), kCosh1, 1e-15);
  EXPECT_NEAR(project_to_hyperboloid<double>(vec({3.0, 4.0}))(0), std::sqrt(26.0), 1e-15);
}

TEST(ExpMapTest, Examples) {
  const V o = origin<double>(2);
  EXPECT_EQ(exp_map<double>(o, V::Zero(3)), o);
  const V a = exp_map<double>(o, vec({0.0, 1.0, 0.0}));
  EXPECT_NEAR(a(0), kCosh1, 1e-14);
  EXPECT_NEAR(a(1), kSinh1, 1e-14);
  EXPECT_NEAR(a(2), 0.0, 1e-15);
  const V b = exp_map<double>(o, vec({0.0, 0.0, 2.0}));
  EXPECT_NEAR(b(0), kCosh2, 1e-14);
  EXPECT_NEAR(b(2), kSinh2, 1e-14);
  EXPECT_TRUE(on_manifold(b));
  EXPECT_THROW(exp_map<double>(o, vec({1.0, 0.0, 0.0})), GeometryError);
}

TEST(LogMapTest, Examples) {
  std::mt19937_64 rng(1);
  const V o = origin<double>(2);
  const V x = random_point<double>(2, Curvature(), 1.0, rng);
  EXPECT_EQ(log_map(x, x), V::Zero(3));
  const V z = vec({0.0, 0.7, -0.2});
  EXPECT_LT((log_map(o, exp_map(o, z)) - z).norm(), 1e-12);
  for (int i = 0; i < 100; ++i) {
    const V y = random_point<double>(4, Curvature(), 1.5, rng);
    const V o4 = origin<double>(4);
    const double via_log = lorentz_norm(log_map(o4, y));
    const double direct = std::acosh(-lorentz_inner(o4, y));
    EXPECT_NEAR(via_log, direct, 1e-10 * std::max(1.0, direct));
  }
}

TEST(DistanceTest, Examples) {
  const V o = origin<double>(2);
  EXPECT_EQ(squared_distance(o, o), 0.0);
  EXPECT_NEAR(squared_distance(o, vec({kCosh1, kSinh1, 0.0})), 1.08616126963048755696, 1e-14);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const V a = random_point<double>(3, Curvature(), 1.0, rng);
    const V b = random_point<double>(3, Curvature(), 1.0, rng);
    EXPECT_DOUBLE_EQ(squared_distance(a, b), squared_distance(b, a));
    EXPECT_GT(squared_distance(a, b), 0.0);
    // d2 = 2/K (1 - cosh(sqrt(-K) d_geo)) against the inner-product form.
    const double dg = geodesic_distance(a, b);
    EXPECT_NEAR(squared_distance(a, b), -2.0 * (1.0 - std::cosh(dg)), 1e-10 * std::max(1.0, dg * dg));
  }
}

TEST(BoostTest, Examples) {
  EXPECT_EQ(boost_matrix<double>(V::Zero(2)), M::Identity(3, 3));
  const V bo = boost_matrix<double>(vec({0.6, 0.0})) * origin<double>(2);
  EXPECT_NEAR(bo(0), 1.25, 1e-15);
  EXPECT_NEAR(bo(1), -0.75, 1e-15);
  EXPECT_NEAR(bo(2), 0.0, 1e-15);
  EXPECT_NEAR(lorentz_inner(bo, bo), -1.0, 1e-14);
  const V v = vec({0.3, -0.5});
  EXPECT_LT((boost_matrix<double>(v) * boost_matrix<double>(V(-v)) - M::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(boost_matrix<double>(vec({0.8, 0.6})), GeometryError);
}

TEST(RotationTest, Examples) {
  EXPECT_EQ(rotation_matrix<double>(M::Identity(2, 2)), M::Identity(3, 3));
  M r(2, 2);
  r << 0.0, -1.0, 1.0, 0.0;
  const V y = rotation_matrix<double>(r) * vec({kCosh1, kSinh1, 0.0});
  EXPECT_NEAR(y(0), kCosh1, 1e-15);
  EXPECT_NEAR(y(1), 0.0, 1e-15);
  EXPECT_NEAR(y(2), kSinh1, 1e-15);
  M reflect = M::Identity(2, 2);
  reflect(0, 0) = -1.0;
  EXPECT_THROW(rotation_matrix<double>(reflect), GeometryError);
  EXPECT_THROW(rotation_matrix<double>(M::Constant(2, 2, 1.0)), GeometryError);
}

TEST(IsometryTest, BoostsAndRotationsPreserveInnerProduct) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const V a = random_point<double>(4, Curvature(), 1.0, rng);
    const V b = random_point<double>(4, Curvature(), 1.0, rng);
    const M B = boost_matrix<double>(random_velocity<double>(4, 0.9, rng));
    const M R = rotation_matrix<double>(random_rotation<double>(4, rng));
    const double ab = lorentz_inner(a, b);
    EXPECT_NEAR(lorentz_inner(V(B * a), V(B * b)), ab, 1e-9 * std::abs(ab));
    EXPECT_NEAR(lorentz_inner(V(R * a), V(R * b)), ab, 1e-9 * std::abs(ab));
    EXPECT_NEAR(squared_distance(V(R * a), V(R * b)), squared_distance(a, b), 1e-10 * std::max(1.0, std::abs(ab)));
    EXPECT_DOUBLE_EQ((R * a)(0), a(0));
  }
}

TEST(SamplingTest, PointsAndTangentsSatisfyInvariants) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const V x = random_point<double>(5, Curvature(), 1.0, rng);
    EXPECT_TRUE(on_manifold(x));
    const V z = random_tangent<double>(x, Curvature(), 1.0, rng);
    EXPECT_LT(std::abs(lorentz_inner(z, x)), 1e-9 * std::max(1.0, x.squaredNorm()));
  }
  const V tiny = random_point<double>(3, Curvature(), 1e-9, rng);
  EXPECT_LT((tiny - origin<double>(3)).norm(), 1e-7);
  EXPECT_THROW(random_point<double>(3, Curvature(), 0.0, rng), GeometryError);
}

TEST(RoundtripTest, ExpLogBothDirections) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(0.01, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const V x = random_point<double>(4, Curvature(), 1.0, rng);
    V z = random_tangent<double>(x, Curvature(), 1.0, rng);
    z *= dist(rng) / lorentz_norm(z);
    const V y = exp_map(x, z);
    EXPECT_LT((log_map(x, y) - z).norm() / z.norm(), 1e-8);
    EXPECT_LT((exp_map(x, log_map(x, y)) - y).norm() / y.norm(), 1e-8);
  }
}

TEST(CurvatureTest, NonUnitCurvature) {
  const Curvature K(-0.5);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 50; ++i) {
    const V x = random_point<double>(3, K, 1.0, rng);
    EXPECT_NEAR(lorentz_inner(x, x), -2.0, 1e-12);
    const V z = random_tangent<double>(x, K, 0.5, rng);
    const V y = exp_map(x, z, K);
    EXPECT_TRUE(on_manifold(y, K));
    EXPECT_LT((log_map(x, y, K) - z).norm(), 1e-8 * std::max(1.0, z.norm()));
  }
}

TEST(FxTransformTest, IdentityBoostAndZero) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const V x = random_point<double>(3, Curvature(), 1.0, rng);
    EXPECT_LT((fx_transform<double>(M::Identity(4, 4), x) - x).norm(), 1e-12 * x.norm());
  }
  const M B = boost_matrix<double>(vec({0.6, 0.0}));
  const V o = origin<double>(2);
  EXPECT_LT((fx_transform(B, o, Curvature(), true) - V(B * o)).norm(), 1e-14);
  M Z = M::Zero(3, 3);
  Z(0, 0) = 1.0;
  EXPECT_EQ(fx_transform(Z, random_point<double>(2, Curvature(), 1.0, rng)), origin<double>(2));
  M noV = M::Identity(3, 3);
  noV(0, 0) = 0.0;
  EXPECT_THROW(fx_transform(noV, o, Curvature(), true), GeometryError);
  EXPECT_NO_THROW(fx_transform(noV, o, Curvature(), false));
}

TEST(FxTransformTest, RectangularOutputOnManifold) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int i = 0; i < 200; ++i) {
    const V x = random_point<double>(5, Curvature(), 1.0, rng);
    M m(3, 6);
    for (Eigen::Index r = 0; r < 3; ++r)
      for (Eigen::Index c = 0; c < 6; ++c) m(r, c) = g(rng);
    const V y = fx_transform(m, x);
    EXPECT_EQ(y.size(), 3);
    EXPECT_TRUE(on_manifold(y));
    // The rescaled matrix reproduces the transform.
    EXPECT_LT((fx_matrix(m, x) * x - y).norm(), 1e-10 * y.norm());
  }
}

TEST(PseudoRotationTest, IdentityAndDegenerate) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const V x = random_point<double>(3, Curvature(), 1.0, rng);
    EXPECT_LT((pseudo_rotation<double>(M::Identity(3, 3), x) - x).norm(), 1e-10 * x.norm());
  }
  const V o = origin<double>(3);
  EXPECT_EQ(pseudo_rotation<double>(M::Identity(3, 3), o), o);
  EXPECT_EQ(pseudo_rotation<double>(M::Zero(3, 3), random_point<double>(3, Curvature(), 1.0, rng)), o);
}

TEST(PseudoRotationTest, ThreePathsAgree) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  for (int i = 0; i < 100; ++i) {
    const V x = random_point<double>(4, Curvature(), 1.0, rng);
    M w(4, 4);
    for (Eigen::Index r = 0; r < 4; ++r)
      for (Eigen::Index c = 0; c < 4; ++c) w(r, c) = 0.5 * g(rng);
    const M H = pseudo_rotation_matrix(w, x);
    const V closed = H * x;
    const V composite = pseudo_rotation_composite(w, x);
    const V fx = fx_transform(H, x);
    EXPECT_LT((closed - composite).norm() / closed.norm(), 1e-8);
    EXPECT_LT((closed - fx).norm() / closed.norm(), 1e-8);
    EXPECT_LT((fx_matrix(H, x) - H).cwiseAbs().maxCoeff(), 1e-9 * H.cwiseAbs().maxCoeff());
    EXPECT_EQ(H.block(0, 1, 1, 4).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(CentroidTest, Examples) {
  std::mt19937_64 rng(11);
  const V p = random_point<double>(3, Curvature(), 1.0, rng);
  EXPECT_LT((centroid<double>(V::Ones(1), M(p)) - p).norm(), 1e-14);
  M two(3, 2);
  two.col(0) = vec({kCosh1, kSinh1, 0.0});
  two.col(1) = vec({kCosh1, -kSinh1, 0.0});
  EXPECT_LT((centroid<double>(V::Ones(2), two) - origin<double>(2)).norm(), 1e-15);
  EXPECT_THROW(centroid<double>(V::Zero(2), two), GeometryError);
}

TEST(CentroidTest, ScaleInvariantAndMinimizing) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int cfg = 0; cfg < 20; ++cfg) {
    M pts(4, 6);
    V w(6);
    for (int j = 0; j < 6; ++j) {
      pts.col(j) = random_point<double>(3, Curvature(), 1.0, rng);
      w(j) = u(rng);
    }
    const V mu = centroid(w, pts);
    EXPECT_TRUE(on_manifold(mu));
    for (double c : {0.1, 10.0}) EXPECT_LT((centroid(V(c * w), pts) - mu).cwiseAbs().maxCoeff(), 1e-12);
    auto objective = [&](const V& q) {
      double s = 0.0;
      for (int j = 0; j < 6; ++j) s += w(j) * squared_distance<double>(pts.col(j), q);
      return s;
    };
    const double best = objective(mu);
    for (int k = 0; k < 1000; ++k) {
      EXPECT_LE(best, objective(random_point<double>(3, Curvature(), 1.0, rng)) + 1e-12);
    }
  }
}

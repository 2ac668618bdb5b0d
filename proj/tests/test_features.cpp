#include "icpviz/features.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace icpviz;

TEST(Smoothness, SymmetricNeighborsCancel) {
  const PointCloud c({Vec3(2, 0, 0), Vec3(1, 0, 0), Vec3(3, 0, 0)});
  const auto f = smoothness(c, 2);
  EXPECT_EQ(f.smoothness[0], 0.0);
  EXPECT_EQ(f.label[0], FeatureLabel::Planar);
}

TEST(Smoothness, EndpointCase) {
  const PointCloud c({Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)});
  const auto f = smoothness(c, 2);
  EXPECT_EQ(f.smoothness[0], 1.5);
  EXPECT_EQ(f.label[0], FeatureLabel::Edge);
}

TEST(Smoothness, ThresholdIsStrict) {
  // sum = (0.5,0,0) + (0.5,0,0); s = 1 / (2 * 5) = 0.1 exactly.
  const PointCloud c({Vec3(5, 0, 0), Vec3(4.5, 0, 0), Vec3(4.5, 0, 0)});
  const auto f = smoothness(c, 2);
  EXPECT_EQ(f.smoothness[0], 0.1);
  EXPECT_EQ(f.label[0], FeatureLabel::Edge);
}

TEST(Smoothness, OriginPointIsInvalid) {
  const PointCloud c({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)});
  const auto f = smoothness(c, 2);
  EXPECT_EQ(f.label[0], FeatureLabel::Invalid);
  EXPECT_TRUE(std::isnan(f.smoothness[0]));
  EXPECT_EQ(f.count(FeatureLabel::Invalid), 1U);
}

TEST(Smoothness, NeedsMorePointsThanNeighborhood) {
  const PointCloud c({Vec3(1, 0, 0), Vec3(2, 0, 0)});
  EXPECT_THROW(smoothness(c, 2), std::invalid_argument);
}

TEST(Smoothness, UniformScalingLeavesValueUnchanged) {
  std::mt19937_64 rng(31);
  auto pts = oracle::random_points(rng, 200, 1, 5);
  const auto a = smoothness(PointCloud(pts), 10);
  for (auto& p : pts) {
    p *= 2.0;
  }
  const auto b = smoothness(PointCloud(pts), 10);
  // Neighbor differences double and ranges double: s_i is unchanged by pure scaling
  // about the origin. Distance weighting shows when only the range grows.
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_NEAR(a.smoothness[i], b.smoothness[i], 1e-12);
  }
}

TEST(Smoothness, DistanceWeighting) {
  // Same local neighborhood shape, twice the range: s halves.
  const PointCloud near({Vec3(10, 0, 0), Vec3(10.1, 0, 0), Vec3(10.3, 0, 0)});
  const PointCloud far({Vec3(20, 0, 0), Vec3(20.1, 0, 0), Vec3(20.3, 0, 0)});
  EXPECT_NEAR(smoothness(far, 2).smoothness[0] * 2.0, smoothness(near, 2).smoothness[0], 1e-12);
}

TEST(FitEdgeLine, CollinearPoints) {
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0), Vec3(4, 0, 0)};
  const auto line = fit_edge_line(pts, 3.0);
  ASSERT_TRUE(line.has_value());
  const Vec3 dir = (line->first - line->second).normalized();
  EXPECT_NEAR(std::abs(dir.x()), 1.0, 1e-12);
  EXPECT_LT(((line->first + line->second) / 2 - Vec3(2, 0, 0)).norm(), 1e-12);
  EXPECT_NEAR((line->first - line->second).norm(), 0.2, 1e-12);
}

TEST(FitEdgeLine, IsotropicPlaneRejected) {
  const std::vector<Vec3> pts{Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 0)};
  EXPECT_FALSE(fit_edge_line(pts, 3.0).has_value());
}

TEST(FitEdgeLine, IdenticalPointsRejected) {
  const std::vector<Vec3> pts(5, Vec3(1, 2, 3));
  EXPECT_FALSE(fit_edge_line(pts, 3.0).has_value());
  EXPECT_FALSE(fit_planar_patch(pts, 3.0, 1e-4).has_value());
}

TEST(FitEdgeLine, NoisyLineDecidedByEigenOracle) {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> noise(0.0, 0.01);
  int accepted = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 5; ++i) {
      pts.emplace_back(0.02 * i, noise(rng), noise(rng));
    }
    const auto lambda = oracle::cubic_eigenvalues(oracle::covariance(pts));
    const double margin = std::abs(lambda[0] - 3.0 * lambda[1]) / lambda[0];
    if (margin < 1e-9) {
      continue;
    }
    const bool expect = lambda[0] >= 3.0 * lambda[1];
    EXPECT_EQ(fit_edge_line(pts, 3.0).has_value(), expect);
    accepted += expect ? 1 : 0;
  }
  EXPECT_GT(accepted, 0);
  EXPECT_LT(accepted, 100);
}

TEST(FitEdgeLine, RotationEquivariance) {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<Vec3> pts;
  for (int i = 0; i < 5; ++i) {
    pts.emplace_back(0.1 * i, noise(rng), noise(rng));
  }
  const auto r = RigidTransform::axis_angle(Vec3(1, 2, 3), 0.8, Vec3(1, -1, 2));
  const auto a = fit_edge_line(pts, 3.0);
  const auto b = fit_edge_line(r.apply(pts), 3.0);
  ASSERT_TRUE(a && b);
  const Vec3 da = r.rotation_matrix() * (a->first - a->second).normalized();
  const Vec3 db = (b->first - b->second).normalized();
  EXPECT_LT(std::min((da - db).norm(), (da + db).norm()), 1e-6);
  EXPECT_LT((r.apply((a->first + a->second) / 2) - (b->first + b->second) / 2).norm(), 1e-6);
}

TEST(FitPlanarPatch, CoplanarPoints) {
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0), Vec3(0.5, 0.3, 0)};
  const auto patch = fit_planar_patch(pts, 3.0, 1e-4);
  ASSERT_TRUE(patch.has_value());
  EXPECT_NEAR(std::abs(patch->normal.z()), 1.0, 1e-12);
  const Vec3 cross = (patch->first - patch->second).cross(patch->first - patch->third).normalized();
  EXPECT_NEAR(std::abs(cross.dot(patch->normal)), 1.0, 1e-6);
}

TEST(FitPlanarPatch, CollinearPointsRejected) {
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0), Vec3(4, 0, 0)};
  EXPECT_FALSE(fit_planar_patch(pts, 3.0, 1e-4).has_value());
}

TEST(FitPlanarPatch, FlatnessDecidedByExplicitCovariance) {
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> spread(-1.0, 1.0);
  for (double sigma : {0.001, 0.005, 0.01, 0.02, 0.05}) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Vec3> pts;
      for (int i = 0; i < 5; ++i) {
        pts.emplace_back(spread(rng), spread(rng), noise(rng));
      }
      const auto l = oracle::cubic_eigenvalues(oracle::covariance(pts));
      if (std::abs(l[2] - 1e-4) < 1e-10 || std::abs(l[1] - 3 * l[2]) < 1e-10) {
        continue;
      }
      const bool expect = l[1] >= 3 * l[2] && l[0] >= 3 * l[2] && l[2] < 1e-4;
      EXPECT_EQ(fit_planar_patch(pts, 3.0, 1e-4).has_value(), expect) << "sigma " << sigma;
    }
  }
}

TEST(FitFeatures, TooFewNeighborsRejected) {
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  EXPECT_THROW(fit_edge_line(pts, 3.0), std::invalid_argument);
  EXPECT_THROW(fit_planar_patch(pts, 3.0, 1e-4), std::invalid_argument);
}

#include "icpviz/cloud.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace icpviz;

TEST(PointCloud, RejectsNonFiniteCoordinates) {
  EXPECT_THROW(PointCloud({Vec3(0, 0, 0), Vec3(INFINITY, 0, 0)}), std::invalid_argument);
  EXPECT_THROW(PointCloud({Vec3(NAN, 0, 0)}), std::invalid_argument);
}

TEST(PointCloud, NormalsMustBeUnitAndParallel) {
  PointCloud c({Vec3(0, 0, 0), Vec3(1, 0, 0)});
  EXPECT_THROW(c.set_normals({Vec3::UnitZ()}), std::invalid_argument);
  EXPECT_THROW(c.set_normals({Vec3::UnitZ(), Vec3(0, 0, 2)}), std::invalid_argument);
  c.set_normals({Vec3::UnitZ(), Vec3::UnitY()});
  EXPECT_TRUE(c.has_normals());
}

TEST(PointCloud, SubsetKeepsNormals) {
  PointCloud c({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)});
  c.set_normals({Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitX()});
  const std::vector<std::size_t> idx{2, 0};
  const PointCloud s = c.subset(idx);
  ASSERT_EQ(s.size(), 2U);
  EXPECT_EQ(s[0], Vec3(2, 0, 0));
  EXPECT_EQ(s.normals()[0], Vec3::UnitX());
}

TEST(KdTree, NearestOfTwo) {
  const KdTree t(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(10, 0, 0)});
  EXPECT_EQ(t.nearest(Vec3(1, 0, 0)).index, 0U);
}

TEST(KdTree, QueryOnCloudPointHasZeroDistance) {
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(1, 2, 3), Vec3(4, 4, 4)};
  const KdTree t(pts);
  const auto n = t.nearest(Vec3(1, 2, 3));
  EXPECT_EQ(n.index, 1U);
  EXPECT_EQ(n.distance, 0.0);
}

TEST(KdTree, EmptyCloudRejected) {
  EXPECT_THROW(KdTree(std::vector<Vec3>{}), std::invalid_argument);
}

TEST(KdTree, MatchesLinearScan) {
  std::mt19937_64 rng(11);
  const auto pts = oracle::random_points(rng, 1000, -5, 5);
  const KdTree t(pts);
  for (const auto& q : oracle::random_points(rng, 100, -6, 6)) {
    const auto expect = oracle::linear_scan(pts, q);
    const auto got = t.nearest(q);
    EXPECT_EQ(got.index, expect[0].first);
    EXPECT_DOUBLE_EQ(got.distance * got.distance, expect[0].second);
  }
}

TEST(Knn, CollinearPoints) {
  const KdTree t(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)});
  const auto r = knn(t, Vec3(0, 0, 0), 2);
  ASSERT_EQ(r.size(), 2U);
  EXPECT_EQ(r[0].index, 0U);
  EXPECT_EQ(r[1].index, 1U);
}

TEST(Knn, AllPointsAndTooMany) {
  const KdTree t(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)});
  const auto r = t.knn(Vec3(5, 0, 0), 3);
  ASSERT_EQ(r.size(), 3U);
  EXPECT_EQ(r[0].index, 2U);
  EXPECT_EQ(r[2].index, 0U);
  EXPECT_THROW(t.knn(Vec3(0, 0, 0), 4), std::invalid_argument);
}

TEST(Knn, TiesBrokenByLowestIndex) {
  // Duplicated coordinates make every distance tie at least twice.
  std::vector<Vec3> pts;
  for (int i = 0; i < 40; ++i) {
    pts.emplace_back(i % 5, 0, 0);
  }
  const KdTree t(pts);
  const auto r = t.knn(Vec3(0, 0, 0), 16);
  const auto expect = oracle::linear_scan(pts, Vec3(0, 0, 0));
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(r[i].index, expect[i].first);
  }
}

TEST(Knn, MatchesSortedLinearScan) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pts = oracle::random_points(rng, 200, -1, 1);
    const KdTree t(pts);
    const auto q = oracle::random_points(rng, 1, -1, 1)[0];
    const auto got = t.knn(q, 5);
    const auto expect = oracle::linear_scan(pts, q);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_EQ(got[i].index, expect[i].first);
    }
  }
}

TEST(CovarianceEigen, LineHasRankOne) {
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)};
  const auto e = covariance_eigen(pts);
  EXPECT_GT(e.values[0], 0.0);
  EXPECT_NEAR(e.values[1], 0.0, 1e-12);
  EXPECT_NEAR(e.values[2], 0.0, 1e-12);
  EXPECT_NEAR(std::abs(e.vectors.col(0).x()), 1.0, 1e-12);
}

TEST(CovarianceEigen, PlaneNormalIsSmallestVector) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      pts.emplace_back(i, j, 0);
    }
  }
  const auto e = covariance_eigen(pts);
  EXPECT_NEAR(std::abs(e.vectors.col(2).z()), 1.0, 1e-12);
}

TEST(CovarianceEigen, FewerThanThreeRejected) {
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  EXPECT_THROW(covariance_eigen(pts), std::invalid_argument);
}

TEST(CovarianceEigen, MatchesAnalyticCubic) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pts = oracle::random_points(rng, 10, -2, 2);
    const auto e = covariance_eigen(pts);
    const auto cov = oracle::covariance(pts);
    const auto lambda = oracle::cubic_eigenvalues(cov);
    EXPECT_LT((e.covariance - cov).cwiseAbs().maxCoeff(), 1e-12);
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(e.values[i], lambda[static_cast<std::size_t>(i)], 1e-8);
      const Vec3 v = e.vectors.col(i);
      EXPECT_LT((cov * v - e.values[i] * v).norm(), 1e-8);
    }
    EXPECT_GE(e.values[0], e.values[1]);
    EXPECT_GE(e.values[1], e.values[2]);
    EXPECT_LT((e.vectors.transpose() * e.vectors - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(e.vectors.determinant(), 1.0, 1e-8);
  }
}

namespace {

PointCloud grid(Vec3 origin) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      pts.emplace_back(i * 0.5 - 2.0, j * 0.5 - 2.0, 0.0);
    }
  }
  return PointCloud(std::move(pts), origin);
}

}  // namespace

TEST(EstimateNormals, OrientedTowardSensorAbove) {
  const auto c = estimate_normals(grid(Vec3(0, 0, 10)), 10);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_LT((c.normals()[i] - Vec3(0, 0, 1)).norm(), 1e-9);
  }
}

TEST(EstimateNormals, OrientedTowardSensorBelow) {
  const auto c = estimate_normals(grid(Vec3(0, 0, -10)), 10);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_LT((c.normals()[i] - Vec3(0, 0, -1)).norm(), 1e-9);
  }
}

TEST(EstimateNormals, TwoPerpendicularPlanes) {
  // Floor z = 0 for x in [0, 5], wall x = 0 for z in [0, 5]; sensor in the corner.
  std::vector<Vec3> pts;
  for (int i = 1; i <= 25; ++i) {
    for (int j = 0; j < 20; ++j) {
      pts.emplace_back(i * 0.2, j * 0.2, 0.0);
      pts.emplace_back(0.0, j * 0.2, i * 0.2);
    }
  }
  const auto c = estimate_normals(PointCloud(pts, Vec3(2, 2, 2)), 8);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Vec3& p = c[i];
    if (p.x() > 1.0 && p.z() == 0.0) {
      EXPECT_LT((c.normals()[i] - Vec3::UnitZ()).norm(), 1e-3);
    } else if (p.z() > 1.0 && p.x() == 0.0) {
      EXPECT_LT((c.normals()[i] - Vec3::UnitX()).norm(), 1e-3);
    }
  }
}

TEST(EstimateNormals, DegenerateNeighborhoodFlagged) {
  std::vector<Vec3> pts(5, Vec3(1, 1, 1));
  pts.emplace_back(5, 5, 5);
  const auto c = estimate_normals(PointCloud(pts), 3);
  EXPECT_FALSE(c.normal_valid(0));
  EXPECT_EQ(c.normals()[0], Vec3::Zero());
}

TEST(EstimateNormals, OrientationProperty) {
  std::mt19937_64 rng(14);
  const auto pts = oracle::random_points(rng, 300, -3, 3);
  const auto c = estimate_normals(PointCloud(pts, Vec3(0.5, -0.2, 4)), 10);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.normal_valid(i)) {
      EXPECT_GE(c.normals()[i].dot(c.sensor_origin() - c[i]), 0.0);
      EXPECT_NEAR(c.normals()[i].norm(), 1.0, 1e-9);
    }
  }
}

TEST(VoxelOccupancy, TwoDistinctVoxels) {
  const std::vector<Vec3> pts{Vec3(0.05, 0.05, 0.05), Vec3(0.15, 0.05, 0.05)};
  const VoxelOccupancy v(pts, 0.1);
  EXPECT_EQ(v.occupied_count(), 2U);
  EXPECT_TRUE(v.occupied({0, 0, 0}));
  EXPECT_TRUE(v.occupied({1, 0, 0}));
}

TEST(VoxelOccupancy, EmptyCloud) {
  const VoxelOccupancy v(std::vector<Vec3>{}, 0.1);
  EXPECT_EQ(v.occupied_count(), 0U);
}

TEST(VoxelOccupancy, NonPositiveSizeRejected) {
  const std::vector<Vec3> pts{Vec3(0, 0, 0)};
  EXPECT_THROW(VoxelOccupancy(pts, 0.0), std::invalid_argument);
  EXPECT_THROW(VoxelOccupancy(pts, -1.0), std::invalid_argument);
}

TEST(VoxelOccupancy, NegativeCoordinatesUseFloor) {
  EXPECT_EQ(voxel_key(Vec3(-0.05, 0.0, 0.1), 0.1), (VoxelKey{-1, 0, 1}));
}

TEST(VoxelOccupancy, MatchesFloorHashOracleAndPartitions) {
  std::mt19937_64 rng(15);
  const auto pts = oracle::random_points(rng, 1000, 0, 1);
  const auto v = build_voxel_occupancy(PointCloud(pts), 0.1);
  std::set<oracle::Key> got;
  std::vector<int> seen(pts.size(), 0);
  for (const auto& [key, indices] : v.voxels()) {
    got.emplace(key.x, key.y, key.z);
    for (auto i : indices) {
      ++seen[i];
      EXPECT_EQ(voxel_key(pts[i], 0.1), key);
    }
  }
  EXPECT_EQ(got, oracle::voxel_set(pts, 0.1));
  for (int s : seen) {
    EXPECT_EQ(s, 1);
  }
}

#pragma once

#include "icpviz/cloud.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace icpviz {

enum class FeatureLabel { Edge, Planar, Invalid };

inline std::string_view to_string(FeatureLabel label) {
  switch (label) {
    case FeatureLabel::Edge:
      return "edge";
    case FeatureLabel::Planar:
      return "planar";
    case FeatureLabel::Invalid:
      return "invalid";
  }
  return "invalid";
}

/// LOAM feature parameters. Defaults follow the published experiment setup.
struct FeatureParams {
  std::size_t neighborhood_size = 10;  // |S_i| for the smoothness value
  double planar_threshold = 0.1;       // planar iff s_i < threshold
  std::size_t fit_neighbors = 5;       // closest points used for line/patch fitting
  double ratio_threshold = 3.0;        // "three times larger" eigenvalue test
  double flatness_max = 1e-4;          // smallest eigenvalue bound for patches
  double half_width = 0.1;             // offset of the synthesized line/patch points (m)
};

struct FeatureLabels {
  std::vector<double> smoothness;  // NaN where undefined
  std::vector<FeatureLabel> label;

  std::size_t count(FeatureLabel which) const {
    std::size_t n = 0;
    for (auto l : label) {
      n += (l == which) ? 1 : 0;
    }
    return n;
  }
};

inline constexpr double kMinPointRange = 1e-6;

/// Smoothness s_i = |sum_j (p_i - p_j)| / (|S_i| |p_i|) over the
/// neighborhood_size nearest neighbors of p_i (p_i itself excluded).
inline FeatureLabels smoothness(const PointCloud& cloud, std::size_t neighborhood_size,
                                double planar_threshold = FeatureParams{}.planar_threshold) {
  if (neighborhood_size == 0) {
    throw std::invalid_argument("smoothness: neighborhood size must be positive");
  }
  if (cloud.size() <= neighborhood_size) {
    throw std::invalid_argument("smoothness: cloud must contain more points than the neighborhood size");
  }
  const KdTree tree(cloud);
  FeatureLabels out;
  out.smoothness.resize(cloud.size(), std::numeric_limits<double>::quiet_NaN());
  out.label.resize(cloud.size(), FeatureLabel::Invalid);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud[i];
    const double range = p.norm();
    if (range < kMinPointRange) {
      continue;
    }
    auto hood = tree.knn(p, neighborhood_size + 1);
    std::size_t skip = hood.size() - 1;
    for (std::size_t j = 0; j < hood.size(); ++j) {
      if (hood[j].index == i) {
        skip = j;
        break;
      }
    }
    Vec3 sum = Vec3::Zero();
    for (std::size_t j = 0; j < hood.size(); ++j) {
      if (j != skip) {
        sum += p - cloud[hood[j].index];
      }
    }
    const double s = sum.norm() / (static_cast<double>(neighborhood_size) * range);
    out.smoothness[i] = s;
    out.label[i] = s < planar_threshold ? FeatureLabel::Planar : FeatureLabel::Edge;
  }
  return out;
}

/// Line through two synthesized points; neither is a member of the reference cloud.
struct EdgeLine {
  Vec3 first;
  Vec3 second;
};

/// Patch spanned by three synthesized points, with the smallest-eigenvalue
/// eigenvector of the fitted neighborhood as its normal.
struct PlanarPatch {
  Vec3 first;
  Vec3 second;
  Vec3 third;
  Vec3 normal;
};

namespace detail {

// Eigenvalues below this fraction of the largest are numerically zero.
inline constexpr double kNegligibleEigenRatio = 1e-10;

}  // namespace detail

/// Edge line from a neighborhood with one dominant eigenvalue
/// (lambda_1 >= ratio * lambda_2). Empty when the test fails or the points coincide.
inline std::optional<EdgeLine> fit_edge_line(std::span<const Vec3> neighbors, double ratio_threshold,
                                             double half_width = FeatureParams{}.half_width) {
  if (neighbors.size() < 3) {
    throw std::invalid_argument("fit_edge_line: at least three neighbors are required");
  }
  const auto eig = covariance_eigen(neighbors);
  if (!(eig.values[0] > 0.0)) {
    return std::nullopt;
  }
  if (!(eig.values[0] >= ratio_threshold * eig.values[1])) {
    return std::nullopt;
  }
  const Vec3 dir = eig.vectors.col(0);
  return EdgeLine{eig.centroid + half_width * dir, eig.centroid - half_width * dir};
}

/// Planar patch from a neighborhood with two dominant eigenvalues and a flat
/// third one (lambda_3 < flatness_max).
inline std::optional<PlanarPatch> fit_planar_patch(std::span<const Vec3> neighbors, double ratio_threshold,
                                                   double flatness_max,
                                                   double half_width = FeatureParams{}.half_width) {
  if (neighbors.size() < 3) {
    throw std::invalid_argument("fit_planar_patch: at least three neighbors are required");
  }
  const auto eig = covariance_eigen(neighbors);
  const Vec3& l = eig.values;
  if (!(l[0] > 0.0) || l[1] <= detail::kNegligibleEigenRatio * l[0]) {
    return std::nullopt;
  }
  if (!(l[1] >= ratio_threshold * l[2]) || !(l[0] >= ratio_threshold * l[2]) || !(l[2] < flatness_max)) {
    return std::nullopt;
  }
  return PlanarPatch{eig.centroid, eig.centroid + half_width * eig.vectors.col(0),
                     eig.centroid + half_width * eig.vectors.col(1), eig.vectors.col(2)};
}

}  // namespace icpviz

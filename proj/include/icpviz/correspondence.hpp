#pragma once

#include "icpviz/cloud.hpp"

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace icpviz {

struct PointPair {
  std::size_t source;
  std::size_t target;
  double distance;  // between the transformed source point and the target point
};

struct PointCorrespondenceSet {
  std::vector<PointPair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Classical closest-point correspondences: one pair per (already transformed)
/// source point, targeting its exact nearest neighbor in the reference index.
inline PointCorrespondenceSet closest_point(std::span<const Vec3> source_transformed, const KdTree& reference) {
  if (source_transformed.empty()) {
    throw std::invalid_argument("closest_point: source cloud is empty");
  }
  PointCorrespondenceSet out;
  out.pairs.reserve(source_transformed.size());
  for (std::size_t i = 0; i < source_transformed.size(); ++i) {
    const Neighbor nn = reference.nearest(source_transformed[i]);
    out.pairs.push_back({i, nn.index, nn.distance});
  }
  return out;
}

inline PointCorrespondenceSet closest_point(const PointCloud& source_transformed, const KdTree& reference) {
  return closest_point(std::span<const Vec3>(source_transformed.points()), reference);
}

/// Reciprocal correspondences. A closest-point pair (i, j) survives when the
/// nearest source point k of q_j is p_i itself or lies within `relaxation` of p_i.
/// relaxation = 0 is strict reciprocity.
inline PointCorrespondenceSet reciprocal(std::span<const Vec3> source_transformed, const KdTree& reference,
                                         double relaxation) {
  if (!(relaxation >= 0.0)) {
    throw std::invalid_argument("reciprocal: relaxation must be non-negative");
  }
  const PointCorrespondenceSet forward = closest_point(source_transformed, reference);
  const KdTree source_index(std::vector<Vec3>(source_transformed.begin(), source_transformed.end()));

  PointCorrespondenceSet out;
  out.pairs.reserve(forward.size());
  std::vector<std::size_t> back(reference.size(), static_cast<std::size_t>(-1));
  for (const PointPair& pair : forward.pairs) {
    std::size_t& k = back[pair.target];
    if (k == static_cast<std::size_t>(-1)) {
      k = source_index.nearest(reference.points()[pair.target]).index;
    }
    if (k == pair.source || (source_transformed[k] - source_transformed[pair.source]).norm() <= relaxation) {
      out.pairs.push_back(pair);
    }
  }
  return out;
}

inline PointCorrespondenceSet reciprocal(const PointCloud& source_transformed, const PointCloud& reference,
                                         double relaxation) {
  if (reference.empty()) {
    throw std::invalid_argument("reciprocal: reference cloud is empty");
  }
  return reciprocal(std::span<const Vec3>(source_transformed.points()), KdTree(reference), relaxation);
}

}  // namespace icpviz

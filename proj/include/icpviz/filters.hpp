#pragma once

#include "icpviz/cloud.hpp"

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace icpviz {

/// Output of a two-cloud data filter. Survivors are copied from the inputs by
/// index, so their coordinates are bit-identical to the originals.
struct FilterResult {
  PointCloud source;
  PointCloud reference;
  std::vector<std::size_t> source_kept;
  std::vector<std::size_t> reference_kept;
  std::size_t voxels_cleared = 0;

  std::size_t source_removed(std::size_t original) const { return original - source_kept.size(); }
  std::size_t reference_removed(std::size_t original) const { return original - reference_kept.size(); }
};

struct BlindSpotConfig {
  double radius = 5.0;  // m
  RigidTransform estimate;

  void validate() const {
    if (!(radius > 0.0)) {
      throw std::invalid_argument("BlindSpotConfig: radius must be positive");
    }
  }
};

inline constexpr double kDefaultVoxelSize = 0.1;  // m; twice the worst-case braking offset of 0.05 m

struct OcfConfig {
  double voxel_size = kDefaultVoxelSize;
  RigidTransform estimate;

  void validate() const {
    if (!(voxel_size > 0.0)) {
      throw std::invalid_argument("OcfConfig: voxel size must be positive");
    }
  }
};

namespace detail {

inline std::vector<std::size_t> outside_circle(const PointCloud& cloud, double cx, double cy, double radius) {
  std::vector<std::size_t> kept;
  kept.reserve(cloud.size());
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double dx = cloud[i].x() - cx;
    const double dy = cloud[i].y() - cy;
    if (!(dx * dx + dy * dy <= r2)) {
      kept.push_back(i);
    }
  }
  return kept;
}

}  // namespace detail

/// Removes the points that fall into the other frame's blind spot: a vertical
/// cylinder of the given radius around the other sensor's xy position. The
/// reference test uses the translation of the estimate, the source test the
/// translation of its inverse. The boundary (distance == r) is removed.
inline FilterResult ego_blind_spot_filter(const PointCloud& source, const PointCloud& reference,
                                          const BlindSpotConfig& cfg) {
  cfg.validate();
  const Vec3 t = cfg.estimate.translation();
  const Vec3 t_inv = cfg.estimate.inverse().translation();
  FilterResult out;
  out.reference_kept = detail::outside_circle(reference, t.x(), t.y(), cfg.radius);
  out.source_kept = detail::outside_circle(source, t_inv.x(), t_inv.y(), cfg.radius);
  out.reference = reference.subset(out.reference_kept);
  out.source = source.subset(out.source_kept);
  return out;
}

/// Removes every point with x^2 + y^2 <= r^2 about the cloud's own origin.
inline PointCloud artificial_blind_spot(const PointCloud& cloud, double radius) {
  if (!(radius > 0.0)) {
    throw std::invalid_argument("artificial_blind_spot: radius must be positive");
  }
  const auto kept = detail::outside_circle(cloud, 0.0, 0.0, radius);
  return cloud.subset(kept);
}

/// Octree Correspondence Filter. The source is moved into the reference frame
/// by the estimate, both clouds are voxelized, and the points of every voxel
/// occupied by only one of the two clouds are deleted from that cloud.
/// Source survivors are returned in the source's own frame.
inline FilterResult octree_correspondence_filter(const PointCloud& source, const PointCloud& reference,
                                                 const OcfConfig& cfg) {
  cfg.validate();
  const std::vector<Vec3> moved = cfg.estimate.apply(source.points());
  const VoxelOccupancy source_voxels(moved, cfg.voxel_size);
  const VoxelOccupancy reference_voxels(reference.points(), cfg.voxel_size);

  std::vector<bool> keep_source(source.size(), true);
  std::vector<bool> keep_reference(reference.size(), true);
  FilterResult out;
  for (const auto& [key, indices] : source_voxels.voxels()) {
    if (!reference_voxels.occupied(key)) {
      for (auto i : indices) {
        keep_source[i] = false;
      }
      ++out.voxels_cleared;
    }
  }
  for (const auto& [key, indices] : reference_voxels.voxels()) {
    if (!source_voxels.occupied(key)) {
      for (auto i : indices) {
        keep_reference[i] = false;
      }
      ++out.voxels_cleared;
    }
  }
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (keep_source[i]) {
      out.source_kept.push_back(i);
    }
  }
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (keep_reference[i]) {
      out.reference_kept.push_back(i);
    }
  }
  out.source = source.subset(out.source_kept);
  out.reference = reference.subset(out.reference_kept);
  return out;
}

}  // namespace icpviz

#pragma once

#include "icpviz/correspondence.hpp"
#include "icpviz/features.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace icpviz {

enum class Objective { PointToPoint, PointToPlane, Symmetric, EdgeToEdgeLine, PlanarToPlanarPatch };

inline constexpr Objective kAllObjectives[] = {Objective::PointToPoint, Objective::PointToPlane,
                                               Objective::Symmetric, Objective::EdgeToEdgeLine,
                                               Objective::PlanarToPlanarPatch};

inline std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::PointToPoint:
      return "point-to-point";
    case Objective::PointToPlane:
      return "point-to-plane";
    case Objective::Symmetric:
      return "symmetric";
    case Objective::EdgeToEdgeLine:
      return "edge-to-edge-line";
    case Objective::PlanarToPlanarPatch:
      return "planar-to-planar-patch";
  }
  return "unknown";
}

inline std::optional<Objective> parse_objective(std::string_view name) {
  for (Objective o : kAllObjectives) {
    if (to_string(o) == name) {
      return o;
    }
  }
  return std::nullopt;
}

inline bool is_feature_objective(Objective o) {
  return o == Objective::EdgeToEdgeLine || o == Objective::PlanarToPlanarPatch;
}

/// Unsquared per-correspondence residuals (m). Squaring happens in rmse().
/// `offset` is subtracted from the aggregated value.
struct ResidualSet {
  std::vector<double> residuals;
  std::string metric_name;
  double offset = 0.0;

  std::size_t size() const { return residuals.size(); }
  bool empty() const { return residuals.empty(); }
};

/// Sum of squared residuals.
inline double sum_of_squares(const ResidualSet& res) {
  double sum = 0.0;
  for (double r : res.residuals) {
    sum += r * r;
  }
  return sum;
}

/// sqrt(mean(r^2)) - offset. Empty when no correspondence survived, which is
/// distinct from a zero error.
inline std::optional<double> rmse(const ResidualSet& res) {
  if (res.residuals.empty()) {
    return std::nullopt;
  }
  return std::sqrt(sum_of_squares(res) / static_cast<double>(res.residuals.size())) - res.offset;
}

namespace detail {

inline void check_pair(const PointPair& pair, const PointCloud& source, const PointCloud& reference) {
  if (pair.source >= source.size() || pair.target >= reference.size()) {
    throw std::out_of_range("correspondence index out of range");
  }
}

}  // namespace detail

inline ResidualSet point_to_point(const RigidTransform& t, const PointCorrespondenceSet& pairs,
                                  const PointCloud& source, const PointCloud& reference) {
  ResidualSet out{{}, std::string(to_string(Objective::PointToPoint))};
  out.residuals.reserve(pairs.size());
  for (const auto& pair : pairs.pairs) {
    detail::check_pair(pair, source, reference);
    out.residuals.push_back((t.apply(source[pair.source]) - reference[pair.target]).norm());
  }
  return out;
}

/// (T(p) - q) . n_q; pairs whose target normal is flagged are skipped.
inline ResidualSet point_to_plane(const RigidTransform& t, const PointCorrespondenceSet& pairs,
                                  const PointCloud& source, const PointCloud& reference) {
  if (!reference.has_normals()) {
    throw std::invalid_argument("point_to_plane: reference cloud has no normals");
  }
  ResidualSet out{{}, std::string(to_string(Objective::PointToPlane))};
  out.residuals.reserve(pairs.size());
  for (const auto& pair : pairs.pairs) {
    detail::check_pair(pair, source, reference);
    if (!reference.normal_valid(pair.target)) {
      continue;
    }
    const Vec3 d = t.apply(source[pair.source]) - reference[pair.target];
    out.residuals.push_back(d.dot(reference.normals()[pair.target]));
  }
  return out;
}

/// (T(p) - q) . (n_p + n_q). n_p stays in the source frame (not rotated by T).
inline ResidualSet symmetric(const RigidTransform& t, const PointCorrespondenceSet& pairs, const PointCloud& source,
                             const PointCloud& reference) {
  if (!source.has_normals() || !reference.has_normals()) {
    throw std::invalid_argument("symmetric: both clouds need normals");
  }
  ResidualSet out{{}, std::string(to_string(Objective::Symmetric))};
  out.residuals.reserve(pairs.size());
  for (const auto& pair : pairs.pairs) {
    detail::check_pair(pair, source, reference);
    if (!source.normal_valid(pair.source) || !reference.normal_valid(pair.target)) {
      continue;
    }
    const Vec3 d = t.apply(source[pair.source]) - reference[pair.target];
    out.residuals.push_back(d.dot(source.normals()[pair.source] + reference.normals()[pair.target]));
  }
  return out;
}

inline constexpr double kDegenerateLength = 1e-12;

inline double edge_line_distance(const Vec3& x, const EdgeLine& line) {
  const double base = (line.first - line.second).norm();
  if (!(base > kDegenerateLength)) {
    throw std::invalid_argument("edge line with coincident points");
  }
  return (x - line.first).cross(x - line.second).norm() / base;
}

inline double patch_distance(const Vec3& x, const PlanarPatch& patch) {
  const Vec3 cross = (patch.first - patch.second).cross(patch.first - patch.third);
  const double area = cross.norm();
  if (!(area > kDegenerateLength)) {
    throw std::invalid_argument("planar patch with collinear points");
  }
  return std::abs((x - patch.first).dot(cross)) / area;
}

/// Perpendicular distance of each transformed edge point to its fitted line.
inline ResidualSet edge_to_edge_line(const RigidTransform& t, std::span<const Vec3> edge_points,
                                     std::span<const EdgeLine> lines) {
  if (edge_points.size() != lines.size()) {
    throw std::invalid_argument("edge_to_edge_line: one line per edge point is required");
  }
  ResidualSet out{{}, std::string(to_string(Objective::EdgeToEdgeLine))};
  out.residuals.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out.residuals.push_back(edge_line_distance(t.apply(edge_points[i]), lines[i]));
  }
  return out;
}

/// Distance of each transformed planar point to the plane through its patch.
inline ResidualSet planar_to_planar_patch(const RigidTransform& t, std::span<const Vec3> planar_points,
                                          std::span<const PlanarPatch> patches, double offset = 0.0) {
  if (planar_points.size() != patches.size()) {
    throw std::invalid_argument("planar_to_planar_patch: one patch per planar point is required");
  }
  ResidualSet out{{}, std::string(to_string(Objective::PlanarToPlanarPatch)), offset};
  out.residuals.reserve(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    out.residuals.push_back(patch_distance(t.apply(planar_points[i]), patches[i]));
  }
  return out;
}

}  // namespace icpviz

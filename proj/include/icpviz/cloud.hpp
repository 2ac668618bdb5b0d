#pragma once

#include "icpviz/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace icpviz {

/// Ordered 3D points with optional per-point normals.
///
/// A normal may be flagged as degenerate (zero vector) when its neighborhood
/// had no spatial extent; flagged points are skipped by plane-based metrics.
class PointCloud {
 public:
  PointCloud() = default;

  explicit PointCloud(std::vector<Vec3> points, Vec3 sensor_origin = Vec3::Zero())
      : points_(std::move(points)), sensor_origin_(std::move(sensor_origin)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!points_[i].allFinite()) {
        throw std::invalid_argument("PointCloud: non-finite coordinate at index " + std::to_string(i));
      }
    }
    if (!sensor_origin_.allFinite()) {
      throw std::invalid_argument("PointCloud: non-finite sensor origin");
    }
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  const std::vector<Vec3>& points() const { return points_; }
  const Vec3& operator[](std::size_t i) const { return points_[i]; }
  const Vec3& sensor_origin() const { return sensor_origin_; }

  bool has_normals() const { return has_normals_flag_; }
  const std::vector<Vec3>& normals() const { return normals_; }
  const std::vector<bool>& normal_flagged() const { return flagged_; }
  bool normal_valid(std::size_t i) const { return has_normals() && !flagged_[i]; }

  /// Attaches normals. Non-flagged normals must be unit length within 1e-6.
  void set_normals(std::vector<Vec3> normals, std::vector<bool> flagged) {
    if (normals.size() != points_.size() || flagged.size() != points_.size()) {
      throw std::invalid_argument("PointCloud: normal count must equal point count");
    }
    for (std::size_t i = 0; i < normals.size(); ++i) {
      if (!flagged[i] && std::abs(normals[i].norm() - 1.0) > 1e-6) {
        throw std::invalid_argument("PointCloud: normal " + std::to_string(i) + " is not unit length");
      }
    }
    normals_ = std::move(normals);
    flagged_ = std::move(flagged);
    has_normals_flag_ = true;
  }

  void set_normals(std::vector<Vec3> normals) {
    std::vector<bool> flagged(normals.size(), false);
    set_normals(std::move(normals), std::move(flagged));
  }

  /// Copies the selected points (and their normals) in the given order.
  PointCloud subset(std::span<const std::size_t> indices) const {
    std::vector<Vec3> pts;
    pts.reserve(indices.size());
    for (auto i : indices) {
      pts.push_back(points_.at(i));
    }
    PointCloud out(std::move(pts), sensor_origin_);
    if (has_normals()) {
      std::vector<Vec3> n;
      std::vector<bool> f;
      n.reserve(indices.size());
      f.reserve(indices.size());
      for (auto i : indices) {
        n.push_back(normals_[i]);
        f.push_back(flagged_[i]);
      }
      out.normals_ = std::move(n);
      out.flagged_ = std::move(f);
      out.has_normals_flag_ = true;
    }
    return out;
  }

 private:
  std::vector<Vec3> points_;
  std::vector<Vec3> normals_;
  std::vector<bool> flagged_;
  Vec3 sensor_origin_ = Vec3::Zero();
  bool has_normals_flag_ = false;
};

struct Neighbor {
  std::size_t index;
  double distance;
};

/// Exact kd-tree over a fixed point set.
///
/// Ties between equidistant points resolve to the lowest index, which makes
/// every query result deterministic.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    if (points_.empty()) {
      throw std::invalid_argument("KdTree: cannot index an empty cloud");
    }
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size());
  }

  explicit KdTree(const PointCloud& cloud) : KdTree(cloud.points()) {}

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  Neighbor nearest(const Vec3& query) const {
    Candidate best{std::numeric_limits<double>::infinity(), std::numeric_limits<std::size_t>::max()};
    search_nearest(0, query, best);
    return {best.index, std::sqrt(best.sq_distance)};
  }

  /// k nearest points sorted by ascending distance, ties by ascending index.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const {
    if (k > points_.size()) {
      throw std::invalid_argument("KdTree::knn: k exceeds cloud size");
    }
    std::vector<Neighbor> result;
    if (k == 0) {
      return result;
    }
    std::vector<Candidate> heap;
    heap.reserve(k + 1);
    search_knn(0, query, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    result.reserve(heap.size());
    for (const auto& c : heap) {
      result.push_back({c.index, std::sqrt(c.sq_distance)});
    }
    return result;
  }

 private:
  static constexpr std::size_t kLeafSize = 8;
  static constexpr std::uint32_t kLeaf = 3;

  struct Node {
    std::size_t begin;
    std::size_t end;
    std::uint32_t axis;  // kLeaf for leaves
    double split;
    std::size_t left;
    std::size_t right;
  };

  struct Candidate {
    double sq_distance;
    std::size_t index;
    bool operator<(const Candidate& o) const {
      return sq_distance < o.sq_distance || (sq_distance == o.sq_distance && index < o.index);
    }
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end, kLeaf, 0.0, 0, 0});
    if (end - begin <= kLeafSize) {
      return id;
    }
    Vec3 lo = points_[order_[begin]];
    Vec3 hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    Eigen::Index axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) {
      return id;  // all points coincide
    }
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].axis = static_cast<std::uint32_t>(axis);
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  // Left subtree holds coordinates <= split, right subtree >= split.
  void search_nearest(std::size_t node_id, const Vec3& q, Candidate& best) const {
    const Node& node = nodes_[node_id];
    if (node.axis == kLeaf) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const Candidate c{(points_[idx] - q).squaredNorm(), idx};
        if (c < best) {
          best = c;
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::size_t near = diff <= 0.0 ? node.left : node.right;
    const std::size_t far = diff <= 0.0 ? node.right : node.left;
    search_nearest(near, q, best);
    if (diff * diff <= best.sq_distance) {
      search_nearest(far, q, best);
    }
  }

  void search_knn(std::size_t node_id, const Vec3& q, std::size_t k, std::vector<Candidate>& heap) const {
    const Node& node = nodes_[node_id];
    if (node.axis == kLeaf) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const Candidate c{(points_[idx] - q).squaredNorm(), idx};
        if (heap.size() < k) {
          heap.push_back(c);
          std::push_heap(heap.begin(), heap.end());
        } else if (c < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = c;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::size_t near = diff <= 0.0 ? node.left : node.right;
    const std::size_t far = diff <= 0.0 ? node.right : node.left;
    search_knn(near, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.front().sq_distance) {
      search_knn(far, q, k, heap);
    }
  }

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

using NearestNeighborIndex = KdTree;

inline KdTree build_nn_index(const PointCloud& cloud) { return KdTree(cloud); }

inline std::vector<Neighbor> knn(const KdTree& index, const Vec3& p, std::size_t k) { return index.knn(p, k); }

/// Eigendecomposition of a 3x3 sample covariance. values are descending and
/// vectors.col(i) belongs to values[i]; the basis is right-handed.
struct CovarianceEigen {
  Vec3 values;
  Mat3 vectors;
  Vec3 centroid;
  Mat3 covariance;
};

template <typename Range>
CovarianceEigen covariance_eigen(const Range& points) {
  const auto n = static_cast<std::size_t>(std::size(points));
  if (n < 3) {
    throw std::invalid_argument("covariance_eigen: at least three points are required");
  }
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) {
    centroid += p;
  }
  centroid /= static_cast<double>(n);
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - centroid;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  CovarianceEigen out;
  out.centroid = centroid;
  out.covariance = cov;
  // Eigen returns ascending order.
  for (int i = 0; i < 3; ++i) {
    out.values[i] = solver.eigenvalues()[2 - i];
    out.vectors.col(i) = solver.eigenvectors().col(2 - i).normalized();
  }
  if (out.vectors.determinant() < 0.0) {
    out.vectors.col(2) *= -1.0;
  }
  return out;
}

inline constexpr std::size_t kDefaultNormalNeighbors = 10;

/// Normals from the smallest-eigenvalue eigenvector of each point's k-neighborhood
/// (the point itself included), oriented toward the sensor origin. Neighborhoods
/// with no spatial extent yield a zero normal and a flag.
inline PointCloud estimate_normals(const PointCloud& cloud, std::size_t k = kDefaultNormalNeighbors) {
  if (k < 3) {
    throw std::invalid_argument("estimate_normals: k must be at least 3");
  }
  if (cloud.size() < k) {
    throw std::invalid_argument("estimate_normals: cloud has fewer points than k");
  }
  const KdTree tree(cloud);
  std::vector<Vec3> normals(cloud.size(), Vec3::Zero());
  std::vector<bool> flagged(cloud.size(), false);
  std::vector<Vec3> hood(k);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto neighbors = tree.knn(cloud[i], k);
    for (std::size_t j = 0; j < k; ++j) {
      hood[j] = cloud[neighbors[j].index];
    }
    const auto eig = covariance_eigen(hood);
    if (!(eig.values[0] > 0.0)) {
      flagged[i] = true;
      continue;
    }
    Vec3 n = eig.vectors.col(2);
    if (n.dot(cloud.sensor_origin() - cloud[i]) < 0.0) {
      n = -n;
    }
    normals[i] = n;
  }
  PointCloud out = cloud;
  out.set_normals(std::move(normals), std::move(flagged));
  return out;
}

/// Integer voxel coordinate (floor(p / s) per axis).
struct VoxelKey {
  std::int64_t x;
  std::int64_t y;
  std::int64_t z;
  bool operator==(const VoxelKey&) const = default;
  auto operator<=>(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

inline VoxelKey voxel_key(const Vec3& p, double voxel_size) {
  return {static_cast<std::int64_t>(std::floor(p.x() / voxel_size)),
          static_cast<std::int64_t>(std::floor(p.y() / voxel_size)),
          static_cast<std::int64_t>(std::floor(p.z() / voxel_size))};
}

/// Addressable voxel map: occupied voxel -> indices of the contained points.
/// Plays the role of the leaf level of an octree; only leaf occupancy is used.
class VoxelOccupancy {
 public:
  using Map = std::unordered_map<VoxelKey, std::vector<std::size_t>, VoxelKeyHash>;

  VoxelOccupancy(std::span<const Vec3> points, double voxel_size) : voxel_size_(voxel_size) {
    if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
      throw std::invalid_argument("VoxelOccupancy: voxel size must be positive");
    }
    voxels_.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      voxels_[voxel_key(points[i], voxel_size)].push_back(i);
    }
  }

  double voxel_size() const { return voxel_size_; }
  std::size_t occupied_count() const { return voxels_.size(); }
  bool occupied(const VoxelKey& key) const { return voxels_.contains(key); }
  const Map& voxels() const { return voxels_; }

  std::span<const std::size_t> points_in(const VoxelKey& key) const {
    const auto it = voxels_.find(key);
    if (it == voxels_.end()) {
      return {};
    }
    return it->second;
  }

 private:
  double voxel_size_;
  Map voxels_;
};

using Octree = VoxelOccupancy;

inline VoxelOccupancy build_voxel_occupancy(const PointCloud& cloud, double voxel_size) {
  return {cloud.points(), voxel_size};
}

}  // namespace icpviz

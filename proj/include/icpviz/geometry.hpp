#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace icpviz {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Rigid motion in SE(3), stored as unit quaternion + translation.
/// apply(p) = R p + t. Composition a * b applies b first.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Quat::Identity()), translation_(Vec3::Zero()) {}

  RigidTransform(const Quat& rotation, const Vec3& translation)
      : rotation_(rotation.normalized()), translation_(translation) {
    if (!std::isfinite(rotation.norm()) || rotation.norm() < 1e-12) {
      throw std::invalid_argument("RigidTransform: rotation quaternion must be non-zero and finite");
    }
    if (!translation.allFinite()) {
      throw std::invalid_argument("RigidTransform: translation must be finite");
    }
  }

  static RigidTransform identity() { return {}; }

  static RigidTransform translation(const Vec3& t) { return {Quat::Identity(), t}; }

  static RigidTransform translation(double x, double y, double z) { return translation(Vec3(x, y, z)); }

  static RigidTransform axis_angle(const Vec3& axis, double angle, const Vec3& t = Vec3::Zero()) {
    return {Quat(Eigen::AngleAxisd(angle, axis.normalized())), t};
  }

  /// Builds a transform from a (possibly slightly non-orthonormal) rotation
  /// matrix. The rotation is projected onto SO(3) through its SVD.
  static RigidTransform from_matrix(const Mat3& rotation, const Vec3& translation) {
    return {Quat(project_to_rotation(rotation)), translation};
  }

  static RigidTransform from_matrix(const Mat4& m) {
    return from_matrix(Mat3(m.topLeftCorner<3, 3>()), Vec3(m.topRightCorner<3, 1>()));
  }

  static Mat3 project_to_rotation(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) {
      u.col(2) *= -1.0;
    }
    return u * v.transpose();
  }

  const Quat& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_matrix();
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

  RigidTransform inverse() const {
    const Quat inv = rotation_.conjugate();
    return {inv, -(inv * translation_)};
  }

  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
  }

  std::vector<Vec3> apply(const std::vector<Vec3>& points) const {
    std::vector<Vec3> out;
    out.reserve(points.size());
    const Mat3 r = rotation_matrix();
    for (const auto& p : points) {
      out.emplace_back(r * p + translation_);
    }
    return out;
  }

 private:
  Quat rotation_;
  Vec3 translation_;
};

inline Vec3 apply(const RigidTransform& t, const Vec3& p) { return t.apply(p); }
inline RigidTransform inverse(const RigidTransform& t) { return t.inverse(); }
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) { return a * b; }

/// Max elementwise difference of the homogeneous matrices.
inline double matrix_distance(const RigidTransform& a, const RigidTransform& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

inline Vec3 lerp(const Vec3& from, const Vec3& to, double u) { return (1.0 - u) * from + u * to; }

/// Rotation angle (radians, in [0, pi]) between the rotations represented by a and b.
inline double rotation_angle_between(const Quat& a, const Quat& b) {
  const Quat d = a.conjugate() * b;
  return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

namespace detail {

constexpr double kParallelDot = 1.0 - 1e-9;
constexpr double kAntipodalDot = 1e-12;

// Sign of q_j such that slerp follows the shorter arc. At a rotation angle of
// exactly pi both arcs are equally long; the sign making the largest-magnitude
// component of q_j positive is taken.
inline Quat align_sign(const Quat& from, Quat to) {
  const double dot = from.coeffs().dot(to.coeffs());
  if (std::abs(dot) <= kAntipodalDot) {
    Eigen::Index largest = 0;
    to.coeffs().cwiseAbs().maxCoeff(&largest);
    if (to.coeffs()[largest] < 0.0) {
      to.coeffs() = -to.coeffs();
    }
  } else if (dot < 0.0) {
    to.coeffs() = -to.coeffs();
  }
  return to;
}

}  // namespace detail

/// Spherical linear interpolation q_i (q_i^-1 q_j)^u. Any real u is accepted;
/// u outside [0, 1] extrapolates along the same great circle.
inline Quat slerp(const Quat& from_in, const Quat& to_in, double u) {
  const Quat from = from_in.normalized();
  const Quat to = detail::align_sign(from, to_in.normalized());
  const double dot = from.coeffs().dot(to.coeffs());

  if (dot > detail::kParallelDot) {
    Quat q;
    q.coeffs() = (1.0 - u) * from.coeffs() + u * to.coeffs();
    return q.normalized();
  }

  // (q_i^-1 q_j) = (cos a, sin a * axis); its u-th power is (cos ua, sin ua * axis).
  const Quat delta = from.conjugate() * to;
  const double half_angle = std::atan2(delta.vec().norm(), delta.w());
  const Vec3 axis = delta.vec().normalized();
  const double scaled = u * half_angle;
  Quat power;
  power.w() = std::cos(scaled);
  power.vec() = std::sin(scaled) * axis;
  return (from * power).normalized();
}

inline RigidTransform interpolate(const RigidTransform& from, const RigidTransform& to, double u) {
  return {slerp(from.rotation(), to.rotation(), u), lerp(from.translation(), to.translation(), u)};
}

struct PathSample {
  double u;
  RigidTransform transform;
};

/// Equally spaced samples of the LERP/SLERP path between a start and an end
/// transform; u = 0 is the start, u = 1 the end.
class InterpolationPath {
 public:
  InterpolationPath(const RigidTransform& start, const RigidTransform& end, double u_min, double u_max,
                    std::size_t count)
      : start_(start), end_(end) {
    if (count < 2) {
      throw std::invalid_argument("InterpolationPath: at least two samples are required");
    }
    if (!(u_min < u_max) || !std::isfinite(u_min) || !std::isfinite(u_max)) {
      throw std::invalid_argument("InterpolationPath: u_min must be smaller than u_max");
    }
    samples_.reserve(count);
    const double span = u_max - u_min;
    const auto last = static_cast<double>(count - 1);
    for (std::size_t k = 0; k < count; ++k) {
      const double u = (k + 1 == count) ? u_max : u_min + (span * static_cast<double>(k)) / last;
      samples_.push_back({u, at(u)});
    }
  }

  RigidTransform at(double u) const {
    if (u == 0.0) {
      return start_;
    }
    if (u == 1.0) {
      return end_;
    }
    return interpolate(start_, end_, u);
  }

  const RigidTransform& start() const { return start_; }
  const RigidTransform& end() const { return end_; }
  const std::vector<PathSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  const PathSample& operator[](std::size_t i) const { return samples_[i]; }

 private:
  RigidTransform start_;
  RigidTransform end_;
  std::vector<PathSample> samples_;
};

inline constexpr double kDefaultUMin = -1.0;
inline constexpr double kDefaultUMax = 2.0;
inline constexpr std::size_t kDefaultSamples = 100;

inline InterpolationPath make_path(const RigidTransform& start, const RigidTransform& end,
                                   double u_min = kDefaultUMin, double u_max = kDefaultUMax,
                                   std::size_t count = kDefaultSamples) {
  return {start, end, u_min, u_max, count};
}

}  // namespace icpviz

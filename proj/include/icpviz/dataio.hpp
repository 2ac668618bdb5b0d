#pragma once

#include "icpviz/cloud.hpp"
#include "icpviz/sweep.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace icpviz {

static_assert(std::endian::native == std::endian::little, "binary scan I/O assumes a little-endian host");

/// Malformed input file. `location` is a byte offset for binary files and a
/// 1-based line number for text files.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t location) : std::runtime_error(what), location_(location) {}
  std::size_t location() const { return location_; }

 private:
  std::size_t location_;
};

struct VelodyneScan {
  PointCloud cloud;
  std::size_t dropped_non_finite = 0;
};

inline std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// KITTI velodyne scan: little-endian float32 (x, y, z, reflectance) records.
/// Reflectance is discarded; records with non-finite coordinates are dropped.
inline VelodyneScan load_velodyne_bin(const std::filesystem::path& path) {
  const std::vector<char> bytes = read_file_bytes(path);
  constexpr std::size_t kRecord = 16;
  if (bytes.size() % kRecord != 0) {
    const std::size_t offset = bytes.size() / kRecord * kRecord;
    throw ParseError(path.string() + ": truncated point record at byte offset " + std::to_string(offset), offset);
  }
  VelodyneScan scan;
  std::vector<Vec3> points;
  points.reserve(bytes.size() / kRecord);
  for (std::size_t offset = 0; offset < bytes.size(); offset += kRecord) {
    float xyz[3];
    std::memcpy(xyz, bytes.data() + offset, sizeof(xyz));
    const Vec3 p(xyz[0], xyz[1], xyz[2]);
    if (!p.allFinite()) {
      ++scan.dropped_non_finite;
      continue;
    }
    points.push_back(p);
  }
  scan.cloud = PointCloud(std::move(points));
  return scan;
}

/// Writes the velodyne layout with zero reflectance. Coordinates are narrowed to float32.
inline void write_velodyne_bin(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  for (const Vec3& p : cloud.points()) {
    const float rec[4] = {static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z()), 0.0F};
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
  if (!out) {
    throw std::runtime_error("failed writing " + path.string());
  }
}

inline constexpr double kOrthonormalDrift = 1e-6;

/// Parses 12 row-major values of a 3x4 [R|t] matrix. The rotation is projected
/// onto SO(3) when it deviates from orthonormal by more than 1e-6.
inline RigidTransform transform_from_row_major(const std::vector<double>& v, bool* reorthonormalized = nullptr) {
  Mat3 r;
  Vec3 t;
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) {
      r(row, col) = v[static_cast<std::size_t>(row * 4 + col)];
    }
    t[row] = v[static_cast<std::size_t>(row * 4 + 3)];
  }
  const double drift = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (reorthonormalized != nullptr) {
    *reorthonormalized = drift > kOrthonormalDrift;
  }
  return RigidTransform::from_matrix(r, t);
}

namespace detail {

inline std::vector<double> parse_numbers(const std::string& text, std::size_t line_no, const std::string& source) {
  std::istringstream is(text);
  std::vector<double> values;
  std::string token;
  while (is >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() || !std::isfinite(v)) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": invalid number '" + token + "'", line_no);
    }
    values.push_back(v);
  }
  return values;
}

}  // namespace detail

/// KITTI pose file: one 3x4 row-major matrix (12 decimals) per non-empty line.
inline std::vector<RigidTransform> load_poses(const std::filesystem::path& path, std::ostream* log = &std::clog) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::vector<RigidTransform> poses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto values = detail::parse_numbers(line, line_no, path.string());
    if (values.empty()) {
      continue;
    }
    if (values.size() != 12) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 12 values, found " +
                           std::to_string(values.size()),
                       line_no);
    }
    bool fixed = false;
    poses.push_back(transform_from_row_major(values, &fixed));
    if (fixed && log != nullptr) {
      *log << path.string() << ":" << line_no << ": rotation re-orthonormalized\n";
    }
  }
  return poses;
}

/// Velodyne-to-camera transform from the "Tr:" line of a KITTI calib.txt.
inline RigidTransform load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("Tr:", 0) != 0) {
      continue;
    }
    const auto values = detail::parse_numbers(line.substr(3), line_no, path.string());
    if (values.size() != 12) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 12 values after 'Tr:'", line_no);
    }
    return transform_from_row_major(values);
  }
  throw ParseError(path.string() + ": no 'Tr:' line", line_no);
}

/// inverse(a) * b: maps points of frame b into frame a.
inline RigidTransform relative_transform(const RigidTransform& pose_a, const RigidTransform& pose_b) {
  return pose_a.inverse() * pose_b;
}

/// Camera-frame pose to lidar frame: Tr^-1 * pose * Tr.
inline RigidTransform camera_pose_to_lidar(const RigidTransform& camera_pose, const RigidTransform& velo_to_cam) {
  return velo_to_cam.inverse() * camera_pose * velo_to_cam;
}

inline std::string format_pose_line(const RigidTransform& t) {
  const Mat4 m = t.matrix();
  std::string s;
  char buf[40];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
      s += buf;
      if (r != 2 || c != 3) {
        s += ' ';
      }
    }
  }
  return s;
}

struct KittiFrame {
  std::string sequence;
  std::size_t frame_index = 0;
  PointCloud cloud;
  RigidTransform pose;  // lidar frame to world (first lidar frame)
  std::size_t dropped_non_finite = 0;
};

/// Layout: <root>/sequences/<seq>/velodyne/<frame %06d>.bin,
/// <root>/sequences/<seq>/calib.txt and <root>/poses/<seq>.txt.
class KittiSequence {
 public:
  KittiSequence(std::filesystem::path root, std::string sequence)
      : root_(std::move(root)), sequence_(std::move(sequence)) {
    velo_to_cam_ = load_calibration(root_ / "sequences" / sequence_ / "calib.txt");
    camera_poses_ = load_poses(root_ / "poses" / (sequence_ + ".txt"));
  }

  std::size_t pose_count() const { return camera_poses_.size(); }

  RigidTransform lidar_pose(std::size_t frame) const {
    if (frame >= camera_poses_.size()) {
      throw std::out_of_range("frame " + std::to_string(frame) + " has no ground-truth pose");
    }
    return camera_pose_to_lidar(camera_poses_[frame], velo_to_cam_);
  }

  std::filesystem::path scan_path(std::size_t frame) const {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.bin", frame);
    return root_ / "sequences" / sequence_ / "velodyne" / name;
  }

  KittiFrame load(std::size_t frame) const {
    VelodyneScan scan = load_velodyne_bin(scan_path(frame));
    return {sequence_, frame, std::move(scan.cloud), lidar_pose(frame), scan.dropped_non_finite};
  }

 private:
  std::filesystem::path root_;
  std::string sequence_;
  RigidTransform velo_to_cam_;
  std::vector<RigidTransform> camera_poses_;
};

/// Two-column "u rmse" table, six decimals, "nan" for undefined entries.
inline std::string format_curve_table(const SweepCurve& curve) {
  std::string out;
  char buf[64];
  for (const auto& e : curve.entries) {
    if (e.rmse) {
      std::snprintf(buf, sizeof(buf), "%.6f %.6f\n", e.u, *e.rmse);
    } else {
      std::snprintf(buf, sizeof(buf), "%.6f nan\n", e.u);
    }
    out += buf;
  }
  return out;
}

inline void write_curve_table(const SweepCurve& curve, const std::filesystem::path& path) {
  if (curve.entries.empty()) {
    throw std::invalid_argument("write_curve_table: curve has no entries");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << format_curve_table(curve);
  if (!out) {
    throw std::runtime_error("failed writing " + path.string());
  }
}

struct CurveTableRow {
  double u;
  std::optional<double> rmse;
};

inline std::vector<CurveTableRow> read_curve_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::vector<CurveTableRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream is(line);
    std::string u_text;
    std::string r_text;
    std::string extra;
    if (!(is >> u_text)) {
      continue;
    }
    if (!(is >> r_text) || (is >> extra)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected two columns", line_no);
    }
    try {
      CurveTableRow row{std::stod(u_text), std::nullopt};
      if (r_text != "nan") {
        row.rmse = std::stod(r_text);
      }
      rows.push_back(row);
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": invalid number", line_no);
    }
  }
  return rows;
}

}  // namespace icpviz

#pragma once

#include "icpviz/cloud.hpp"

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace icpviz {

// Synthetic two-frame scenes with known ground truth. Coordinates of the
// static world are given in the reference frame (frame n-1).

struct GridGround {
  double x_min = -20.0;
  double x_max = 20.0;
  double y_min = -10.0;
  double y_max = 10.0;
  double spacing = 0.5;
  double z = -1.7;
};

/// Lidar-like ground: concentric rings around the reference origin with
/// geometrically growing radii and a fixed number of points per ring.
struct RingGround {
  double r_min = 1.0;
  double r_max = 40.0;
  std::size_t rings = 32;
  std::size_t azimuth_steps = 720;
  double z = -1.7;
};

/// Rectangle origin + a*u + b*v, a in [0, length_u], b in [0, length_v].
struct Wall {
  Vec3 origin = Vec3::Zero();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitZ();
  double length_u = 10.0;
  double length_v = 3.0;
  double spacing = 0.2;
};

/// Vertical line of points starting at base.
struct Pole {
  Vec3 base = Vec3::Zero();
  double height = 3.0;
  double spacing = 0.1;
};

/// Box surface that moves by `displacement` (world frame) between the frames.
struct DynamicBox {
  Vec3 center = Vec3(6.0, 3.0, 0.0);
  Vec3 size = Vec3(1.6, 1.6, 1.5);
  double spacing = 0.05;
  Vec3 displacement = Vec3(2.0, 0.0, 0.0);
};

struct SceneSpec {
  std::optional<GridGround> grid_ground;
  std::optional<RingGround> ring_ground;
  std::vector<Wall> walls;
  std::vector<Pole> poles;
  std::optional<DynamicBox> box;
  double blind_spot_radius = 0.0;  // 0: no blind spot
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  RigidTransform ego_motion;  // T_gt: source frame -> reference frame
  RigidTransform initial;     // T_0 of the sweep
};

enum class SceneLabel { Static, Dynamic, BlindSpot };

inline std::string_view to_string(SceneLabel l) {
  switch (l) {
    case SceneLabel::Static:
      return "static";
    case SceneLabel::Dynamic:
      return "dynamic";
    case SceneLabel::BlindSpot:
      return "blindspot";
  }
  return "static";
}

/// Static points visible in both frames are labeled Static, static points whose
/// counterpart lies in the other frame's blind spot are labeled BlindSpot.
struct SyntheticScene {
  PointCloud reference;
  PointCloud source;
  RigidTransform ground_truth;
  RigidTransform initial;
  std::vector<SceneLabel> reference_labels;
  std::vector<SceneLabel> source_labels;

  std::size_t count(const std::vector<SceneLabel>& labels, SceneLabel which) const {
    std::size_t n = 0;
    for (auto l : labels) {
      n += (l == which) ? 1 : 0;
    }
    return n;
  }
};

namespace detail {

inline std::size_t steps(double length, double spacing) {
  if (!(spacing > 0.0) || !(length >= 0.0)) {
    throw std::invalid_argument("scene primitive needs positive spacing and non-negative extent");
  }
  return static_cast<std::size_t>(std::floor(length / spacing + 1e-9)) + 1;
}

inline void add_static_world(const SceneSpec& spec, std::vector<Vec3>& out) {
  if (spec.grid_ground) {
    const auto& g = *spec.grid_ground;
    const std::size_t nx = steps(g.x_max - g.x_min, g.spacing);
    const std::size_t ny = steps(g.y_max - g.y_min, g.spacing);
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        out.emplace_back(g.x_min + static_cast<double>(i) * g.spacing, g.y_min + static_cast<double>(j) * g.spacing,
                         g.z);
      }
    }
  }
  if (spec.ring_ground) {
    const auto& g = *spec.ring_ground;
    if (g.rings < 2 || g.azimuth_steps == 0 || !(g.r_min > 0.0) || !(g.r_max > g.r_min)) {
      throw std::invalid_argument("ring ground needs r_max > r_min > 0, >= 2 rings and azimuth steps");
    }
    const double growth = std::pow(g.r_max / g.r_min, 1.0 / static_cast<double>(g.rings - 1));
    for (std::size_t k = 0; k < g.rings; ++k) {
      const double r = g.r_min * std::pow(growth, static_cast<double>(k));
      for (std::size_t a = 0; a < g.azimuth_steps; ++a) {
        const double phi = 2.0 * std::numbers::pi * static_cast<double>(a) / static_cast<double>(g.azimuth_steps);
        out.emplace_back(r * std::cos(phi), r * std::sin(phi), g.z);
      }
    }
  }
  for (const auto& w : spec.walls) {
    const Vec3 u = w.axis_u.normalized();
    const Vec3 v = w.axis_v.normalized();
    const std::size_t nu = steps(w.length_u, w.spacing);
    const std::size_t nv = steps(w.length_v, w.spacing);
    for (std::size_t i = 0; i < nu; ++i) {
      for (std::size_t j = 0; j < nv; ++j) {
        out.push_back(w.origin + static_cast<double>(i) * w.spacing * u + static_cast<double>(j) * w.spacing * v);
      }
    }
  }
  for (const auto& p : spec.poles) {
    const std::size_t n = steps(p.height, p.spacing);
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(p.base + Vec3(0.0, 0.0, static_cast<double>(i) * p.spacing));
    }
  }
}

// Face-centred samples on the six faces of an axis-aligned box; no point is
// shared between two faces.
inline std::vector<Vec3> box_surface(const Vec3& center, const Vec3& size, double spacing) {
  std::vector<Vec3> out;
  for (int axis = 0; axis < 3; ++axis) {
    const int a = (axis + 1) % 3;
    const int b = (axis + 2) % 3;
    const auto na = static_cast<std::size_t>(std::max(1.0, std::round(size[a] / spacing)));
    const auto nb = static_cast<std::size_t>(std::max(1.0, std::round(size[b] / spacing)));
    for (double side : {-0.5, 0.5}) {
      for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < nb; ++j) {
          Vec3 p;
          p[axis] = side * size[axis];
          p[a] = -0.5 * size[a] + (static_cast<double>(i) + 0.5) * size[a] / static_cast<double>(na);
          p[b] = -0.5 * size[b] + (static_cast<double>(j) + 0.5) * size[b] / static_cast<double>(nb);
          out.push_back(center + p);
        }
      }
    }
  }
  return out;
}

inline bool in_blind_spot(const Vec3& p, double radius) {
  return radius > 0.0 && p.x() * p.x() + p.y() * p.y() <= radius * radius;
}

}  // namespace detail

/// Builds reference (frame n-1) and source (frame n, own coordinates) clouds.
inline SyntheticScene make_scene(const SceneSpec& spec) {
  std::vector<Vec3> world;
  detail::add_static_world(spec, world);
  if (world.empty()) {
    throw std::invalid_argument("make_scene: the scene has no static points");
  }
  if (spec.noise_sigma < 0.0 || spec.blind_spot_radius < 0.0) {
    throw std::invalid_argument("make_scene: noise and blind spot radius must be non-negative");
  }
  const RigidTransform to_source = spec.ego_motion.inverse();
  const double r = spec.blind_spot_radius;

  std::vector<Vec3> ref_pts;
  std::vector<Vec3> src_pts;
  std::vector<SceneLabel> ref_labels;
  std::vector<SceneLabel> src_labels;
  std::vector<std::size_t> ref_counterpart;  // static source point -> reference index

  for (const Vec3& w : world) {
    const Vec3 s = to_source.apply(w);
    const bool ref_hidden = detail::in_blind_spot(w, r);
    const bool src_hidden = detail::in_blind_spot(s, r);
    if (!ref_hidden) {
      ref_pts.push_back(w);
      ref_labels.push_back(src_hidden ? SceneLabel::BlindSpot : SceneLabel::Static);
    }
    if (!src_hidden) {
      src_pts.push_back(s);
      src_labels.push_back(ref_hidden ? SceneLabel::BlindSpot : SceneLabel::Static);
      ref_counterpart.push_back(ref_hidden ? static_cast<std::size_t>(-1) : ref_pts.size() - 1);
    }
  }
  if (spec.box) {
    const auto& b = *spec.box;
    for (const Vec3& p : detail::box_surface(b.center, b.size, b.spacing)) {
      if (!detail::in_blind_spot(p, r)) {
        ref_pts.push_back(p);
        ref_labels.push_back(SceneLabel::Dynamic);
      }
    }
    for (const Vec3& p : detail::box_surface(b.center + b.displacement, b.size, b.spacing)) {
      const Vec3 s = to_source.apply(p);
      if (!detail::in_blind_spot(s, r)) {
        src_pts.push_back(s);
        src_labels.push_back(SceneLabel::Dynamic);
        ref_counterpart.push_back(static_cast<std::size_t>(-1));
      }
    }
  }

  // Ground-truth consistency of the noise-free geometry.
  for (std::size_t i = 0; i < src_pts.size(); ++i) {
    if (src_labels[i] != SceneLabel::Static) {
      continue;
    }
    if ((spec.ego_motion.apply(src_pts[i]) - ref_pts[ref_counterpart[i]]).norm() > 1e-12 * (1.0 + ref_pts[ref_counterpart[i]].norm())) {
      throw std::logic_error("make_scene: ground truth does not map static points onto their counterparts");
    }
  }

  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto* pts : {&ref_pts, &src_pts}) {
      for (Vec3& p : *pts) {
        p += Vec3(noise(rng), noise(rng), noise(rng));
      }
    }
  }

  SyntheticScene scene;
  scene.reference = PointCloud(std::move(ref_pts));
  scene.source = PointCloud(std::move(src_pts));
  scene.ground_truth = spec.ego_motion;
  scene.initial = spec.initial;
  scene.reference_labels = std::move(ref_labels);
  scene.source_labels = std::move(src_labels);
  return scene;
}

// JSON scene description. All keys are optional except that at least one
// static primitive must be present.

namespace detail {

inline Vec3 json_vec3(const nlohmann::json& j, const char* key, const Vec3& fallback) {
  if (!j.contains(key)) {
    return fallback;
  }
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) {
    throw std::invalid_argument(std::string("scene spec: '") + key + "' must be an array of three numbers");
  }
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

inline RigidTransform json_motion(const nlohmann::json& j) {
  const Vec3 t = json_vec3(j, "translation", Vec3::Zero());
  const double yaw = j.value("yaw_deg", 0.0) * std::numbers::pi / 180.0;
  return RigidTransform::axis_angle(Vec3::UnitZ(), yaw, t);
}

}  // namespace detail

inline SceneSpec parse_scene_spec(const nlohmann::json& j) {
  using detail::json_vec3;
  if (!j.is_object()) {
    throw std::invalid_argument("scene spec must be a JSON object");
  }
  SceneSpec spec;
  try {
    if (j.contains("ground")) {
      const auto& g = j.at("ground");
      const std::string type = g.value("type", "grid");
      if (type == "grid") {
        GridGround gg;
        if (g.contains("x")) {
          gg.x_min = g.at("x").at(0).get<double>();
          gg.x_max = g.at("x").at(1).get<double>();
        }
        if (g.contains("y")) {
          gg.y_min = g.at("y").at(0).get<double>();
          gg.y_max = g.at("y").at(1).get<double>();
        }
        gg.spacing = g.value("spacing", gg.spacing);
        gg.z = g.value("z", gg.z);
        spec.grid_ground = gg;
      } else if (type == "rings") {
        RingGround rg;
        rg.r_min = g.value("r_min", rg.r_min);
        rg.r_max = g.value("r_max", rg.r_max);
        rg.rings = g.value("rings", rg.rings);
        rg.azimuth_steps = g.value("azimuth_steps", rg.azimuth_steps);
        rg.z = g.value("z", rg.z);
        spec.ring_ground = rg;
      } else {
        throw std::invalid_argument("scene spec: unknown ground type '" + type + "'");
      }
    }
    for (const auto& w : j.value("walls", nlohmann::json::array())) {
      Wall wall;
      wall.origin = json_vec3(w, "origin", wall.origin);
      wall.axis_u = json_vec3(w, "u", wall.axis_u);
      wall.axis_v = json_vec3(w, "v", wall.axis_v);
      wall.length_u = w.value("length_u", wall.length_u);
      wall.length_v = w.value("length_v", wall.length_v);
      wall.spacing = w.value("spacing", wall.spacing);
      spec.walls.push_back(wall);
    }
    for (const auto& p : j.value("poles", nlohmann::json::array())) {
      Pole pole;
      pole.base = json_vec3(p, "base", pole.base);
      pole.height = p.value("height", pole.height);
      pole.spacing = p.value("spacing", pole.spacing);
      spec.poles.push_back(pole);
    }
    if (j.contains("dynamic_box")) {
      const auto& b = j.at("dynamic_box");
      DynamicBox box;
      box.center = json_vec3(b, "center", box.center);
      box.size = json_vec3(b, "size", box.size);
      box.spacing = b.value("spacing", box.spacing);
      box.displacement = json_vec3(b, "displacement", box.displacement);
      spec.box = box;
    }
    spec.blind_spot_radius = j.value("blind_spot_radius", 0.0);
    spec.noise_sigma = j.value("noise_sigma", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("ego_motion")) {
      spec.ego_motion = detail::json_motion(j.at("ego_motion"));
    }
    if (j.contains("initial")) {
      spec.initial = detail::json_motion(j.at("initial"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("scene spec: ") + e.what());
  }
  return spec;
}

inline SceneSpec load_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return parse_scene_spec(j);
}

}  // namespace icpviz

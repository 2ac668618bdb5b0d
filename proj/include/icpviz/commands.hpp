#pragma once

#include "icpviz/dataio.hpp"
#include "icpviz/features.hpp"
#include "icpviz/filters.hpp"
#include "icpviz/scene.hpp"
#include "icpviz/sweep.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef ICPVIZ_VERSION
#define ICPVIZ_VERSION "0.0.0"
#endif

namespace icpviz::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// User-facing failure: reported as a diagnostic with a non-zero exit status.
class CommandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- data source

struct SourceArgs {
  std::optional<fs::path> kitti_root;
  std::string sequence = "00";
  std::optional<std::size_t> frame;
  std::optional<fs::path> scene_spec;
  std::optional<json> scene_json;  // embedded spec (manifest re-runs)
  std::optional<std::uint64_t> seed;
};

/// Reference/source clouds with the transforms a sweep or filter needs.
struct FramePair {
  PointCloud reference;
  PointCloud source;
  RigidTransform initial;
  RigidTransform ground_truth;
  RigidTransform previous_motion;
  std::string reference_id;
  std::string source_id;
  json input;  // manifest record of the data source
};

inline FramePair load_scene_pair(const json& spec_json, std::optional<std::uint64_t> seed) {
  SceneSpec spec = parse_scene_spec(spec_json);
  if (seed) {
    spec.seed = *seed;
  }
  const SyntheticScene scene = make_scene(spec);
  FramePair pair;
  pair.reference = scene.reference;
  pair.source = scene.source;
  pair.initial = scene.initial;
  pair.ground_truth = scene.ground_truth;
  pair.previous_motion = scene.ground_truth;  // constant velocity
  pair.reference_id = "scene:reference";
  pair.source_id = "scene:source";
  pair.input = {{"kind", "scene"}, {"scene_spec", spec_json}, {"seed", spec.seed}};
  return pair;
}

inline FramePair load_frame_pair(const SourceArgs& args) {
  const int sources = (args.kitti_root ? 1 : 0) + ((args.scene_spec || args.scene_json) ? 1 : 0);
  if (sources != 1) {
    throw CommandError("exactly one data source is required: --kitti-root or --scene-spec");
  }
  if (args.scene_json) {
    return load_scene_pair(*args.scene_json, args.seed);
  }
  if (args.scene_spec) {
    std::ifstream in(*args.scene_spec);
    if (!in) {
      throw CommandError("cannot open scene spec " + args.scene_spec->string());
    }
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw CommandError(args.scene_spec->string() + ": " + e.what());
    }
    return load_scene_pair(j, args.seed);
  }
  if (!args.frame) {
    throw CommandError("--frame is required with --kitti-root");
  }
  const KittiSequence seq(*args.kitti_root, args.sequence);
  const std::size_t f = *args.frame;
  const KittiFrame ref = seq.load(f);
  const KittiFrame src = seq.load(f + 1);
  FramePair pair;
  pair.reference = ref.cloud;
  pair.source = src.cloud;
  pair.ground_truth = relative_transform(ref.pose, src.pose);
  pair.previous_motion = f > 0 ? relative_transform(seq.lidar_pose(f - 1), ref.pose) : RigidTransform::identity();
  pair.reference_id = "kitti:" + args.sequence + ":" + std::to_string(f);
  pair.source_id = "kitti:" + args.sequence + ":" + std::to_string(f + 1);
  pair.input = {{"kind", "kitti"}, {"root", args.kitti_root->string()}, {"sequence", args.sequence}, {"frame", f}};
  return pair;
}

inline std::optional<RigidTransform> resolve_estimate(const std::string& name, const FramePair& pair) {
  if (name == "ground-truth") {
    return pair.ground_truth;
  }
  if (name == "previous-frame") {
    return pair.previous_motion;
  }
  if (name == "identity") {
    return RigidTransform::identity();
  }
  throw CommandError("unknown estimate source '" + name + "' (valid: ground-truth, previous-frame, identity)");
}

// ------------------------------------------------------------------- variants

struct VariantDefaults {
  double voxel_size = kDefaultVoxelSize;
  double blindspot_radius = 5.0;
  double u_min = kDefaultUMin;
  double u_max = kDefaultUMax;
  std::size_t samples = kDefaultSamples;
  std::optional<RigidTransform> estimate;  // empty: ground truth
};

inline std::string valid_objective_names() {
  std::string s;
  for (Objective o : kAllObjectives) {
    s += s.empty() ? "" : ", ";
    s += to_string(o);
  }
  return s;
}

/// "<objective>[+modifier...]" with modifiers ocf, ego-overlap, blind-spot,
/// reciprocal and reciprocal=<relaxation m>.
inline PipelineConfig parse_variant(const std::string& name, const VariantDefaults& d) {
  std::vector<std::string> parts;
  std::size_t begin = 0;
  while (true) {
    const std::size_t plus = name.find('+', begin);
    parts.push_back(name.substr(begin, plus == std::string::npos ? std::string::npos : plus - begin));
    if (plus == std::string::npos) {
      break;
    }
    begin = plus + 1;
  }
  PipelineConfig c;
  c.name = name;
  const auto objective = parse_objective(parts.front());
  if (!objective) {
    throw CommandError("unknown objective '" + parts.front() + "' (valid: " + valid_objective_names() + ")");
  }
  c.objective = *objective;
  c.u_min = d.u_min;
  c.u_max = d.u_max;
  c.n_samples = d.samples;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::string& m = parts[i];
    if (m == "ocf") {
      c.data_filters.emplace_back(OcfStage{d.voxel_size, d.estimate});
    } else if (m == "ego-overlap") {
      c.data_filters.emplace_back(ArtificialBlindSpotStage{d.blindspot_radius});
      c.data_filters.emplace_back(EgoBlindSpotStage{d.blindspot_radius, d.estimate});
    } else if (m == "blind-spot") {
      c.data_filters.emplace_back(ArtificialBlindSpotStage{d.blindspot_radius});
    } else if (m == "reciprocal") {
      c.correspondence = ReciprocalMode{0.0};
    } else if (m.rfind("reciprocal=", 0) == 0) {
      try {
        c.correspondence = ReciprocalMode{std::stod(m.substr(11))};
      } catch (const std::exception&) {
        throw CommandError("invalid reciprocal relaxation in '" + name + "'");
      }
    } else {
      throw CommandError("unknown variant modifier '+" + m +
                         "' (valid: +ocf, +ego-overlap, +blind-spot, +reciprocal, +reciprocal=<m>)");
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw CommandError("variant '" + name + "': " + e.what());
  }
  return c;
}

inline std::string table_file_name(const std::string& variant) {
  std::string s;
  for (char ch : variant) {
    s += (ch == '+' || ch == '=' || ch == '/' || ch == ' ') ? '_' : ch;
  }
  return s + "_rmse.txt";
}

// Files created by a command; removed again unless the command commits.
class OutputGuard {
 public:
  explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {}
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard() {
    if (committed_) {
      return;
    }
    std::error_code ec;
    for (const auto& p : files_) {
      fs::remove(p, ec);
    }
  }

  fs::path add(const std::string& name) {
    files_.push_back(dir_ / name);
    return files_.back();
  }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
  bool committed_ = false;
};

inline void prepare_out_dir(const fs::path& out) {
  if (out.empty()) {
    throw CommandError("--out is required");
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw CommandError("cannot create output directory " + out.string());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    throw CommandError("cannot write " + path.string());
  }
}

inline std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// ---------------------------------------------------------------------- sweep

struct SweepArgs {
  SourceArgs source;
  std::vector<std::string> variants;
  double voxel_size = kDefaultVoxelSize;
  double blindspot_radius = 5.0;
  double u_min = kDefaultUMin;
  double u_max = kDefaultUMax;
  std::size_t samples = kDefaultSamples;
  std::string estimate = "previous-frame";
  std::optional<fs::path> manifest;  // re-run from a manifest
  fs::path out;
  std::size_t threads = 0;
};

inline constexpr const char* kManifestName = "manifest.json";

/// Replaces the run description in `args` by the one stored in a manifest.
inline SweepArgs sweep_args_from_manifest(const fs::path& path, fs::path out, std::size_t threads) {
  std::ifstream in(path);
  if (!in) {
    throw CommandError("cannot open manifest " + path.string());
  }
  json m;
  try {
    in >> m;
    SweepArgs a;
    a.out = std::move(out);
    a.threads = threads;
    const json& input = m.at("input");
    if (input.at("kind") == "scene") {
      a.source.scene_json = input.at("scene_spec");
      a.source.seed = input.at("seed").get<std::uint64_t>();
    } else {
      a.source.kitti_root = fs::path(input.at("root").get<std::string>());
      a.source.sequence = input.at("sequence").get<std::string>();
      a.source.frame = input.at("frame").get<std::size_t>();
    }
    const json& p = m.at("parameters");
    a.voxel_size = p.at("voxel_size").get<double>();
    a.blindspot_radius = p.at("blindspot_radius").get<double>();
    a.u_min = p.at("u_min").get<double>();
    a.u_max = p.at("u_max").get<double>();
    a.samples = p.at("samples").get<std::size_t>();
    a.estimate = p.at("estimate").get<std::string>();
    for (const auto& v : m.at("variants")) {
      a.variants.push_back(v.at("name").get<std::string>());
    }
    return a;
  } catch (const json::exception& e) {
    throw CommandError("invalid manifest " + path.string() + ": " + e.what());
  }
}

/// Writes one curve table per variant plus manifest.json and prints the
/// (argmin u, min rmse) summary. Returns the process exit status.
inline int cmd_sweep(SweepArgs args, std::ostream& out, std::ostream& err) {
  try {
    if (args.manifest) {
      args = sweep_args_from_manifest(*args.manifest, args.out, args.threads);
    }
    if (args.variants.empty()) {
      throw CommandError("at least one --variant is required");
    }
    prepare_out_dir(args.out);
    const FramePair pair = load_frame_pair(args.source);

    VariantDefaults d;
    d.voxel_size = args.voxel_size;
    d.blindspot_radius = args.blindspot_radius;
    d.u_min = args.u_min;
    d.u_max = args.u_max;
    d.samples = args.samples;
    d.estimate = resolve_estimate(args.estimate, pair);
    std::vector<PipelineConfig> configs;
    for (const auto& v : args.variants) {
      configs.push_back(parse_variant(v, d));
    }

    SweepOptions options;
    options.reference_id = pair.reference_id;
    options.source_id = pair.source_id;
    options.threads = args.threads;
    const auto results = run_sweep_suite(pair.source, pair.reference, pair.initial, pair.ground_truth, configs, options);

    OutputGuard guard(args.out);
    json manifest;
    manifest["tool"] = "icpviz";
    manifest["version"] = ICPVIZ_VERSION;
    manifest["command"] = "sweep";
    manifest["input"] = pair.input;
    manifest["frames"] = {{"reference", pair.reference_id}, {"source", pair.source_id}};
    manifest["parameters"] = {{"voxel_size", args.voxel_size}, {"blindspot_radius", args.blindspot_radius},
                              {"u_min", args.u_min},           {"u_max", args.u_max},
                              {"samples", args.samples},       {"estimate", args.estimate}};
    manifest["variants"] = json::array();
    bool failed = false;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      if (!r.curve) {
        err << "variant '" << r.name << "' failed: " << r.error << "\n";
        failed = true;
        continue;
      }
      const std::string file = table_file_name(r.name);
      write_curve_table(*r.curve, guard.add(file));
      manifest["variants"].push_back({{"name", r.name},
                                      {"config", describe(configs[i])},
                                      {"digest", r.curve->config_digest},
                                      {"table", file}});
      const auto best = r.curve->argmin();
      out << r.name << "  argmin_u=" << (best ? fmt(r.curve->entries[*best].u) : std::string("nan"))
          << "  min_rmse=" << (best ? fmt(*r.curve->entries[*best].rmse, "%.6g") : std::string("nan")) << "\n";
    }
    if (failed) {
      return 1;  // guard removes the tables written so far
    }
    write_text(guard.add(kManifestName), manifest.dump(2) + "\n");
    guard.commit();
    return 0;
  } catch (const std::exception& e) {
    err << "icpviz sweep: " << e.what() << "\n";
    return 1;
  }
}

// --------------------------------------------------------------------- filter

struct FilterArgs {
  SourceArgs source;
  std::optional<fs::path> source_bin;
  std::optional<fs::path> reference_bin;
  std::optional<fs::path> estimate_file;  // pose-line file for bin inputs
  std::string filter = "ocf";             // ocf | ego | blind-spot
  double voxel_size = kDefaultVoxelSize;
  double blindspot_radius = 5.0;
  std::string estimate = "previous-frame";
  fs::path out;
};

struct FilterReport {
  std::size_t source_removed = 0;
  std::size_t reference_removed = 0;
  std::size_t voxels_cleared = 0;
  std::size_t source_total = 0;
  std::size_t reference_total = 0;
};

inline std::string format_filter_report(const std::string& filter, const FilterReport& r) {
  std::string s = "filter " + filter + "\n";
  s += "source_points " + std::to_string(r.source_total) + "\n";
  s += "source_removed " + std::to_string(r.source_removed) + "\n";
  s += "reference_points " + std::to_string(r.reference_total) + "\n";
  s += "reference_removed " + std::to_string(r.reference_removed) + "\n";
  s += "voxels_cleared " + std::to_string(r.voxels_cleared) + "\n";
  s += "total_removed " + std::to_string(r.source_removed + r.reference_removed) + "\n";
  return s;
}

inline int cmd_filter(const FilterArgs& args, std::ostream& out, std::ostream& err) {
  try {
    prepare_out_dir(args.out);
    FramePair pair;
    RigidTransform estimate;
    if (args.source_bin || args.reference_bin) {
      if (!args.source_bin || !args.reference_bin) {
        throw CommandError("--source and --reference must be given together");
      }
      pair.source = load_velodyne_bin(*args.source_bin).cloud;
      pair.reference = load_velodyne_bin(*args.reference_bin).cloud;
      if (args.estimate_file) {
        const auto poses = load_poses(*args.estimate_file);
        if (poses.size() != 1) {
          throw CommandError("--estimate-file must hold exactly one pose line");
        }
        estimate = poses.front();
      }
    } else {
      pair = load_frame_pair(args.source);
      estimate = *resolve_estimate(args.estimate, pair);
    }

    FilterResult result;
    if (args.filter == "ocf") {
      result = octree_correspondence_filter(pair.source, pair.reference, {args.voxel_size, estimate});
    } else if (args.filter == "ego") {
      result = ego_blind_spot_filter(pair.source, pair.reference, {args.blindspot_radius, estimate});
    } else if (args.filter == "blind-spot") {
      result.source = artificial_blind_spot(pair.source, args.blindspot_radius);
      result.reference = artificial_blind_spot(pair.reference, args.blindspot_radius);
    } else {
      throw CommandError("unknown filter '" + args.filter + "' (valid: ocf, ego, blind-spot)");
    }
    FilterReport report;
    report.source_total = pair.source.size();
    report.reference_total = pair.reference.size();
    report.source_removed = pair.source.size() - result.source.size();
    report.reference_removed = pair.reference.size() - result.reference.size();
    report.voxels_cleared = result.voxels_cleared;

    OutputGuard guard(args.out);
    write_velodyne_bin(result.source, guard.add("source_filtered.bin"));
    write_velodyne_bin(result.reference, guard.add("reference_filtered.bin"));
    const std::string text = format_filter_report(args.filter, report);
    write_text(guard.add("report.txt"), text);
    guard.commit();
    out << text;
    return 0;
  } catch (const std::exception& e) {
    err << "icpviz filter: " << e.what() << "\n";
    return 1;
  }
}

// ------------------------------------------------------------------- features

struct FeaturesArgs {
  SourceArgs source;
  std::optional<fs::path> input;  // velodyne bin; otherwise the source cloud of the data source
  std::size_t neighbors = FeatureParams{}.neighborhood_size;
  double planar_threshold = FeatureParams{}.planar_threshold;
  fs::path out;  // output table file
};

inline std::string format_feature_table(const FeatureLabels& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.label.size(); ++i) {
    const double v = labels.smoothness[i];
    s += std::to_string(i) + " " + (std::isnan(v) ? std::string("nan") : fmt(v)) + " " +
         std::string(to_string(labels.label[i])) + "\n";
  }
  return s;
}

inline int cmd_features(const FeaturesArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.out.empty()) {
      throw CommandError("--out is required");
    }
    const PointCloud cloud = args.input ? load_velodyne_bin(*args.input).cloud : load_frame_pair(args.source).source;
    const FeatureLabels labels = smoothness(cloud, args.neighbors, args.planar_threshold);
    if (args.out.has_parent_path()) {
      fs::create_directories(args.out.parent_path());
    }
    OutputGuard guard(args.out.has_parent_path() ? args.out.parent_path() : fs::path("."));
    write_text(guard.add(args.out.filename().string()), format_feature_table(labels));
    guard.commit();
    out << "edge " << labels.count(FeatureLabel::Edge) << "\nplanar " << labels.count(FeatureLabel::Planar)
        << "\ninvalid " << labels.count(FeatureLabel::Invalid) << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "icpviz features: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------- synth

struct SynthArgs {
  fs::path scene_spec;
  std::optional<std::uint64_t> seed;
  fs::path out;
};

inline std::string format_labels(const std::vector<SceneLabel>& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    s += std::to_string(i) + " " + std::string(to_string(labels[i])) + "\n";
  }
  return s;
}

inline int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.scene_spec.empty()) {
      throw CommandError("--scene-spec is required");
    }
    prepare_out_dir(args.out);
    SceneSpec spec = load_scene_spec(args.scene_spec);
    if (args.seed) {
      spec.seed = *args.seed;
    }
    const SyntheticScene scene = make_scene(spec);
    OutputGuard guard(args.out);
    write_velodyne_bin(scene.reference, guard.add("reference.bin"));
    write_velodyne_bin(scene.source, guard.add("source.bin"));
    write_text(guard.add("ground_truth.txt"), format_pose_line(scene.ground_truth) + "\n");
    write_text(guard.add("initial.txt"), format_pose_line(scene.initial) + "\n");
    write_text(guard.add("reference_labels.txt"), format_labels(scene.reference_labels));
    write_text(guard.add("source_labels.txt"), format_labels(scene.source_labels));
    guard.commit();
    out << "reference " << scene.reference.size() << " points\nsource " << scene.source.size() << " points\n";
    return 0;
  } catch (const std::exception& e) {
    err << "icpviz synth: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace icpviz::cli

#pragma once

#include "icpviz/correspondence.hpp"
#include "icpviz/features.hpp"
#include "icpviz/filters.hpp"
#include "icpviz/objectives.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <variant>
#include <vector>

namespace icpviz {

// Data filter stages. An empty estimate means "use the ground-truth transform".
struct ArtificialBlindSpotStage {
  double radius = 5.0;
};

struct EgoBlindSpotStage {
  double radius = 5.0;
  std::optional<RigidTransform> estimate;
};

struct OcfStage {
  double voxel_size = kDefaultVoxelSize;
  std::optional<RigidTransform> estimate;
};

using DataFilter = std::variant<ArtificialBlindSpotStage, EgoBlindSpotStage, OcfStage>;

struct ClosestPointMode {};

struct ReciprocalMode {
  double relaxation = 0.0;
};

using CorrespondenceMode = std::variant<ClosestPointMode, ReciprocalMode>;

/// One ICP variant, described stage by stage.
struct PipelineConfig {
  std::string name;
  std::vector<DataFilter> data_filters;
  Objective objective = Objective::PointToPoint;
  CorrespondenceMode correspondence = ClosestPointMode{};
  FeatureParams features;
  std::size_t normal_k = kDefaultNormalNeighbors;
  double planar_offset = 0.0;
  double u_min = kDefaultUMin;
  double u_max = kDefaultUMax;
  std::size_t n_samples = kDefaultSamples;

  bool reciprocal() const { return std::holds_alternative<ReciprocalMode>(correspondence); }

  void validate() const {
    if (reciprocal() && is_feature_objective(objective)) {
      throw std::invalid_argument("reciprocal correspondences only apply to point-pair objectives");
    }
    if (reciprocal() && !(std::get<ReciprocalMode>(correspondence).relaxation >= 0.0)) {
      throw std::invalid_argument("reciprocal relaxation must be non-negative");
    }
    if (n_samples < 2 || !(u_min < u_max)) {
      throw std::invalid_argument("sweep needs at least two samples and u_min < u_max");
    }
    if (normal_k < 3) {
      throw std::invalid_argument("normal estimation needs k >= 3");
    }
    if (features.fit_neighbors < 3 || features.neighborhood_size == 0) {
      throw std::invalid_argument("feature neighborhoods are too small");
    }
    for (const auto& f : data_filters) {
      std::visit(
          [](const auto& stage) {
            using S = std::decay_t<decltype(stage)>;
            if constexpr (std::is_same_v<S, OcfStage>) {
              if (!(stage.voxel_size > 0.0)) {
                throw std::invalid_argument("OCF voxel size must be positive");
              }
            } else {
              if (!(stage.radius > 0.0)) {
                throw std::invalid_argument("blind spot radius must be positive");
              }
            }
          },
          f);
    }
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string describe_estimate(const std::optional<RigidTransform>& t) {
  if (!t) {
    return "gt";
  }
  std::string s = "[";
  const Mat4 m = t->matrix();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      s += format_double(m(r, c));
      s += (r == 2 && c == 3) ? "]" : ",";
    }
  }
  return s;
}

inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

/// Canonical one-line description of every parameter that influences a curve.
inline std::string describe(const PipelineConfig& c) {
  using detail::format_double;
  std::string s = "objective=" + std::string(to_string(c.objective));
  s += ";correspondence=";
  s += c.reciprocal() ? "reciprocal(" + format_double(std::get<ReciprocalMode>(c.correspondence).relaxation) + ")"
                      : "closest-point";
  s += ";filters=[";
  for (const auto& f : c.data_filters) {
    s += std::visit(
        [](const auto& st) -> std::string {
          using S = std::decay_t<decltype(st)>;
          if constexpr (std::is_same_v<S, ArtificialBlindSpotStage>) {
            return "artificial-blind-spot(" + format_double(st.radius) + ")";
          } else if constexpr (std::is_same_v<S, EgoBlindSpotStage>) {
            return "ego-blind-spot(" + format_double(st.radius) + "," + detail::describe_estimate(st.estimate) + ")";
          } else {
            return "ocf(" + format_double(st.voxel_size) + "," + detail::describe_estimate(st.estimate) + ")";
          }
        },
        f);
    s += ";";
  }
  s += "]";
  const auto& fp = c.features;
  s += ";features=(" + std::to_string(fp.neighborhood_size) + "," + format_double(fp.planar_threshold) + "," +
       std::to_string(fp.fit_neighbors) + "," + format_double(fp.ratio_threshold) + "," +
       format_double(fp.flatness_max) + "," + format_double(fp.half_width) + ",labels-on-filtered)";
  s += ";normal_k=" + std::to_string(c.normal_k);
  s += ";planar_offset=" + format_double(c.planar_offset);
  s += ";u=[" + format_double(c.u_min) + "," + format_double(c.u_max) + "]x" + std::to_string(c.n_samples);
  return s;
}

inline std::string config_digest(const PipelineConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(detail::fnv1a(describe(c))));
  return buf;
}

struct SweepEntry {
  double u;
  std::optional<double> rmse;  // empty: no correspondence survived
  std::size_t n_correspondences;
};

struct SweepCurve {
  std::string name;
  std::string config_digest;
  std::string reference_id;
  std::string source_id;
  std::vector<SweepEntry> entries;

  /// Index of the smallest defined rmse (first one on ties).
  std::optional<std::size_t> argmin() const {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].rmse && (!best || *entries[i].rmse < *entries[*best].rmse)) {
        best = i;
      }
    }
    return best;
  }

  std::optional<double> argmin_u() const {
    const auto i = argmin();
    return i ? std::optional<double>(entries[*i].u) : std::nullopt;
  }
};

/// Filtered clouds plus everything derived from them once per sweep.
struct PreparedPipeline {
  PointCloud source;
  PointCloud reference;
  KdTree reference_index;
  std::vector<std::size_t> edge_points;
  std::vector<std::size_t> planar_points;
};

inline FilterResult apply_data_filter(const DataFilter& filter, const PointCloud& source,
                                      const PointCloud& reference, const RigidTransform& ground_truth) {
  return std::visit(
      [&](const auto& st) -> FilterResult {
        using S = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<S, ArtificialBlindSpotStage>) {
          FilterResult r;
          r.source = artificial_blind_spot(source, st.radius);
          r.reference = artificial_blind_spot(reference, st.radius);
          return r;
        } else if constexpr (std::is_same_v<S, EgoBlindSpotStage>) {
          return ego_blind_spot_filter(source, reference, {st.radius, st.estimate.value_or(ground_truth)});
        } else {
          return octree_correspondence_filter(source, reference, {st.voxel_size, st.estimate.value_or(ground_truth)});
        }
      },
      filter);
}

inline PreparedPipeline prepare_pipeline(const PointCloud& source_in, const PointCloud& reference_in,
                                         const RigidTransform& ground_truth, const PipelineConfig& config) {
  PointCloud source = source_in;
  PointCloud reference = reference_in;
  for (const auto& filter : config.data_filters) {
    FilterResult r = apply_data_filter(filter, source, reference, ground_truth);
    source = std::move(r.source);
    reference = std::move(r.reference);
  }
  if (source.empty() || reference.empty()) {
    throw std::runtime_error("data filtering removed every point of a cloud");
  }

  std::vector<std::size_t> edges;
  std::vector<std::size_t> planars;
  switch (config.objective) {
    case Objective::PointToPoint:
      break;
    case Objective::PointToPlane:
      reference = estimate_normals(reference, config.normal_k);
      break;
    case Objective::Symmetric:
      reference = estimate_normals(reference, config.normal_k);
      source = estimate_normals(source, config.normal_k);
      break;
    case Objective::EdgeToEdgeLine:
    case Objective::PlanarToPlanarPatch: {
      if (reference.size() < config.features.fit_neighbors) {
        throw std::runtime_error("reference cloud is smaller than the feature fitting set");
      }
      const FeatureLabels labels =
          smoothness(source, config.features.neighborhood_size, config.features.planar_threshold);
      const FeatureLabel wanted =
          config.objective == Objective::EdgeToEdgeLine ? FeatureLabel::Edge : FeatureLabel::Planar;
      auto& out = config.objective == Objective::EdgeToEdgeLine ? edges : planars;
      for (std::size_t i = 0; i < labels.label.size(); ++i) {
        if (labels.label[i] == wanted) {
          out.push_back(i);
        }
      }
      break;
    }
  }
  KdTree index(reference);
  return {std::move(source), std::move(reference), std::move(index), std::move(edges), std::move(planars)};
}

/// Residuals of one pipeline at one query transform. Correspondences (and
/// line/patch fits) are re-established for this transform.
inline ResidualSet evaluate_at(const PreparedPipeline& prep, const PipelineConfig& config,
                               const RigidTransform& t) {
  const auto& fp = config.features;
  switch (config.objective) {
    case Objective::PointToPoint:
    case Objective::PointToPlane:
    case Objective::Symmetric: {
      const std::vector<Vec3> moved = t.apply(prep.source.points());
      const PointCorrespondenceSet pairs =
          config.reciprocal()
              ? reciprocal(moved, prep.reference_index, std::get<ReciprocalMode>(config.correspondence).relaxation)
              : closest_point(moved, prep.reference_index);
      if (config.objective == Objective::PointToPoint) {
        return point_to_point(t, pairs, prep.source, prep.reference);
      }
      if (config.objective == Objective::PointToPlane) {
        return point_to_plane(t, pairs, prep.source, prep.reference);
      }
      return symmetric(t, pairs, prep.source, prep.reference);
    }
    case Objective::EdgeToEdgeLine: {
      std::vector<Vec3> points;
      std::vector<EdgeLine> lines;
      std::vector<Vec3> hood(fp.fit_neighbors);
      for (std::size_t i : prep.edge_points) {
        const Vec3 x = t.apply(prep.source[i]);
        const auto nn = prep.reference_index.knn(x, fp.fit_neighbors);
        for (std::size_t j = 0; j < nn.size(); ++j) {
          hood[j] = prep.reference[nn[j].index];
        }
        if (auto line = fit_edge_line(hood, fp.ratio_threshold, fp.half_width)) {
          points.push_back(prep.source[i]);
          lines.push_back(*line);
        }
      }
      return edge_to_edge_line(t, points, lines);
    }
    case Objective::PlanarToPlanarPatch: {
      std::vector<Vec3> points;
      std::vector<PlanarPatch> patches;
      std::vector<Vec3> hood(fp.fit_neighbors);
      for (std::size_t i : prep.planar_points) {
        const Vec3 x = t.apply(prep.source[i]);
        const auto nn = prep.reference_index.knn(x, fp.fit_neighbors);
        for (std::size_t j = 0; j < nn.size(); ++j) {
          hood[j] = prep.reference[nn[j].index];
        }
        if (auto patch = fit_planar_patch(hood, fp.ratio_threshold, fp.flatness_max, fp.half_width)) {
          points.push_back(prep.source[i]);
          patches.push_back(*patch);
        }
      }
      return planar_to_planar_patch(t, points, patches, config.planar_offset);
    }
  }
  throw std::logic_error("unhandled objective");
}

namespace detail {

// Runs body(i) for i in [0, count) on up to `threads` workers. Rethrows the
// first exception after all workers have joined.
template <typename Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  if (threads == 0) {
    threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  }
  threads = std::min(threads, count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) {
          error = std::current_exception();
        }
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back(worker);
    }
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

}  // namespace detail

struct SweepOptions {
  std::string reference_id;
  std::string source_id;
  std::size_t threads = 0;  // 0: one per hardware thread
};

/// Open-loop evaluation of a pipeline along the interpolated path from start to
/// ground truth. Filters, normals and feature labels are computed once; the
/// correspondences are rebuilt for every sample.
inline SweepCurve run_sweep(const PointCloud& source, const PointCloud& reference, const RigidTransform& start,
                            const RigidTransform& ground_truth, const PipelineConfig& config,
                            const SweepOptions& options = {}) {
  config.validate();
  if (source.empty() || reference.empty()) {
    throw std::invalid_argument("run_sweep: clouds must be non-empty");
  }
  const PreparedPipeline prep = prepare_pipeline(source, reference, ground_truth, config);
  const InterpolationPath path = make_path(start, ground_truth, config.u_min, config.u_max, config.n_samples);

  SweepCurve curve;
  curve.name = config.name.empty() ? std::string(to_string(config.objective)) : config.name;
  curve.config_digest = config_digest(config);
  curve.reference_id = options.reference_id;
  curve.source_id = options.source_id;
  curve.entries.resize(path.size());
  detail::parallel_for(path.size(), options.threads, [&](std::size_t k) {
    const ResidualSet res = evaluate_at(prep, config, path[k].transform);
    curve.entries[k] = {path[k].u, rmse(res), res.size()};
  });
  return curve;
}

struct SuiteResult {
  std::string name;
  std::optional<SweepCurve> curve;
  std::string error;  // set when the configuration failed
};

/// One curve per configuration over the same path. A failing configuration is
/// reported in its slot without affecting the others.
inline std::vector<SuiteResult> run_sweep_suite(const PointCloud& source, const PointCloud& reference,
                                                const RigidTransform& start, const RigidTransform& ground_truth,
                                                const std::vector<PipelineConfig>& configs,
                                                const SweepOptions& options = {}) {
  if (configs.empty()) {
    throw std::invalid_argument("run_sweep_suite: no configurations given");
  }
  std::vector<SuiteResult> out;
  out.reserve(configs.size());
  for (const auto& config : configs) {
    SuiteResult r;
    r.name = config.name.empty() ? std::string(to_string(config.objective)) : config.name;
    try {
      const auto& first = configs.front();
      if (config.u_min != first.u_min || config.u_max != first.u_max || config.n_samples != first.n_samples) {
        throw std::invalid_argument("configuration samples a different u grid than the rest of the suite");
      }
      r.curve = run_sweep(source, reference, start, ground_truth, config, options);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace icpviz

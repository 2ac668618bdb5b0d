#include "icpviz/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace icpviz::cli;

void add_source_options(CLI::App* cmd, SourceArgs& s) {
  cmd->add_option("--kitti-root", s.kitti_root, "KITTI odometry root (sequences/, poses/)");
  cmd->add_option("--sequence", s.sequence, "KITTI sequence id")->capture_default_str();
  cmd->add_option("--frame", s.frame, "reference frame index; the source is frame+1");
  cmd->add_option("--scene-spec", s.scene_spec, "synthetic scene JSON");
  cmd->add_option("--seed", s.seed, "override the scene noise seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visualize ICP objective landscapes along an interpolated pose path", "icpviz"};
  app.set_version_flag("--version", std::string(ICPVIZ_VERSION));
  app.require_subcommand(1);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sample objective RMSE along the path from T_0 to T_gt");
  add_source_options(sweep_cmd, sweep.source);
  sweep_cmd->add_option("--variant", sweep.variants,
                        "objective[+ocf|+ego-overlap|+blind-spot|+reciprocal[=m]] (repeatable)");
  sweep_cmd->add_option("--voxel-size", sweep.voxel_size, "OCF voxel edge (m)")->capture_default_str();
  sweep_cmd->add_option("--blindspot-radius", sweep.blindspot_radius, "blind spot radius (m)")->capture_default_str();
  sweep_cmd->add_option("--u-min", sweep.u_min)->capture_default_str();
  sweep_cmd->add_option("--u-max", sweep.u_max)->capture_default_str();
  sweep_cmd->add_option("--samples", sweep.samples)->capture_default_str();
  sweep_cmd->add_option("--estimate", sweep.estimate, "filter pose estimate: ground-truth, previous-frame, identity")
      ->capture_default_str();
  sweep_cmd->add_option("--manifest", sweep.manifest, "re-run the sweep recorded in a manifest.json");
  sweep_cmd->add_option("--threads", sweep.threads, "worker threads (0: hardware concurrency)");
  sweep_cmd->add_option("--out", sweep.out, "output directory")->required();

  FilterArgs filter;
  auto* filter_cmd = app.add_subcommand("filter", "Apply a data filter and write the surviving points");
  add_source_options(filter_cmd, filter.source);
  filter_cmd->add_option("--source", filter.source_bin, "source scan (.bin)");
  filter_cmd->add_option("--reference", filter.reference_bin, "reference scan (.bin)");
  filter_cmd->add_option("--estimate-file", filter.estimate_file, "pose line mapping source into reference");
  filter_cmd->add_option("--filter", filter.filter, "ocf, ego, blind-spot")->capture_default_str();
  filter_cmd->add_option("--voxel-size", filter.voxel_size)->capture_default_str();
  filter_cmd->add_option("--blindspot-radius", filter.blindspot_radius)->capture_default_str();
  filter_cmd->add_option("--estimate", filter.estimate, "ground-truth, previous-frame, identity")
      ->capture_default_str();
  filter_cmd->add_option("--out", filter.out, "output directory")->required();

  FeaturesArgs features;
  auto* features_cmd = app.add_subcommand("features", "Write per-point smoothness and edge/planar labels");
  add_source_options(features_cmd, features.source);
  features_cmd->add_option("--input", features.input, "scan (.bin)");
  features_cmd->add_option("--neighbors", features.neighbors)->capture_default_str();
  features_cmd->add_option("--planar-threshold", features.planar_threshold)->capture_default_str();
  features_cmd->add_option("--out", features.out, "output table")->required();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scan pair from a scene spec");
  synth_cmd->add_option("--scene-spec", synth.scene_spec)->required();
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--out", synth.out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (sweep_cmd->parsed()) {
    return cmd_sweep(sweep, std::cout, std::cerr);
  }
  if (filter_cmd->parsed()) {
    return cmd_filter(filter, std::cout, std::cerr);
  }
  if (features_cmd->parsed()) {
    return cmd_features(features, std::cout, std::cerr);
  }
  return cmd_synth(synth, std::cout, std::cerr);
}

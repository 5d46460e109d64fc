#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sgfloc/camera_geometry.hpp"
#include "sgfloc/evaluation.hpp"
#include "sgfloc/kv_file.hpp"
#include "sgfloc/loop_closure.hpp"
#include "sgfloc/pose_graph.hpp"
#include "sgfloc/se2.hpp"
#include "sgfloc/sgf_description.hpp"
#include "sgfloc/sim_world.hpp"

namespace sgfloc {

/// Every tunable of the pipeline. Keys in config files and on the command line
/// use the member names.
struct PipelineConfig {
  int queue_size = 50;
  double pitch_gate = 0.025;
  bool motion_compensation = true;
  double hu_threshold = 0.005;
  int min_pixels = 50;
  double track_gate = 0.5;
  int track_gap = 3;
  double l_max = 2.0;
  int n_sectors = 90;
  int n_rings = 10;
  double grid_pitch = 0.025;
  double group_threshold = 0.7;
  double symmetry_tol = 0.1;
  int min_loop_gap = 30;
  int icp_max_iter = 50;
  double icp_tol = 1e-4;
  double icp_rms_ok = 0.05;
  double icp_reject = 3.0;
  double icp_inlier_radius = 0.05;
  double icp_min_inlier = 0.95;
  int opt_max_iter = 100;
  double opt_tol = 1e-9;
  double opt_lambda = 1e-4;
  bool robust_loops = true;
  double huber_delta = 1.0;
  double odom_sigma_x = 0.005;
  double odom_sigma_y = 0.002;
  double odom_sigma_yaw = 0.002;
  int workers = 0;  // 0 = hardware concurrency

  /// Parses and range-checks one key. Throws InvalidInput for unknown keys
  /// and out-of-range or malformed values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  std::string to_string() const;

  static PipelineConfig from_file(const KeyValueFile& kv);
  static const std::vector<std::string>& keys();
  /// One-line description with the valid range, for --help.
  static std::string describe(const std::string& key);
};

/// Frame stream consumed by run_pipeline. Masks are fetched lazily so large
/// sequences need not be resident.
struct PipelineInput {
  CameraModel camera;
  VirtualCamera virtual_camera;
  std::vector<Pose6> odometry;
  std::function<BinaryImage(int)> mask;
};

struct PipelineResult {
  std::vector<Pose6> odometry;
  std::vector<Se2> optimized;
  std::vector<SgfInstance> instances;
  std::vector<LoopConstraint> constraints;
  std::vector<LoopAttempt> attempts;
  std::vector<DetectionRecord> detections;
  std::size_t group_count = 0;
  std::size_t track_count = 0;
  std::optional<GraphSolution> solution;
  std::vector<std::string> track_log;
  std::vector<std::string> warnings;

  /// Optimized poses with timestamps, z, roll and pitch from odometry.
  std::vector<Pose6> optimized_poses() const;
};

/// warp -> detect -> describe/cluster -> loop-close -> optimize.
PipelineResult run_pipeline(const PipelineInput& input, const PipelineConfig& config);

/// Optional references used to enrich metrics.json.
struct Reference {
  std::vector<Pose6> groundtruth;
  std::optional<SequenceAnnotations> annotations;
};

/// Writes trajectory.tum, odometry.tum, constraints.log, tracks.log,
/// descriptors.log, metrics.json, trajectory.svg and, with annotations,
/// counters.csv. Output bytes depend only on the inputs.
void write_outputs(const std::filesystem::path& out, const PipelineResult& r, const PipelineConfig& config,
                   const Reference* ref = nullptr);

/// Loads a dataset directory, runs the pipeline and writes outputs.
PipelineResult run_dataset(const std::filesystem::path& dataset, const PipelineConfig& config,
                           const std::filesystem::path& out);

/// Frame index -> ground-truth planar pose by nearest timestamp.
std::vector<Se2> groundtruth_by_frame(const std::vector<Pose6>& odometry, const std::vector<Pose6>& groundtruth);

struct SimulateOptions {
  double noise_scale = 1.0;
};

/// Generates a scenario and writes it as a dataset directory.
Scenario run_simulate(ScenarioKind kind, std::uint64_t seed, const std::filesystem::path& out,
                      const SimulateOptions& opts = {});

std::string version_string();

}  // namespace sgfloc

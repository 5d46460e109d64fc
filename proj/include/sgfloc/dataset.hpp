#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgfloc/camera_geometry.hpp"
#include "sgfloc/kv_file.hpp"
#include "sgfloc/se2.hpp"
#include "sgfloc/sim_world.hpp"

namespace sgfloc {

// On-disk dataset layout:
//   calib.txt          camera and virtual-camera parameters (key = value)
//   odometry.csv       timestamp,x,y,z,roll,pitch,yaw (absolute, integrated)
//   masks/%06d.png     1-bit saliency masks, one per odometry row
//   groundtruth.tum    optional
//   annotations.json   optional, simulator marking visits

struct Calibration {
  CameraModel camera;
  VirtualCamera virtual_camera;
};

std::string format_calibration(const Calibration& c);
Calibration parse_calibration(const KeyValueFile& kv);
Calibration load_calibration(const std::filesystem::path& path);

void write_odometry_csv(const std::filesystem::path& path, std::span<const Pose6> poses);
std::vector<Pose6> read_odometry_csv(const std::filesystem::path& path);

/// "t x y z qx qy qz qw" per line; attitude from roll/pitch/yaw (ZYX).
void write_tum(const std::filesystem::path& path, std::span<const Pose6> poses);
std::vector<Pose6> read_tum(const std::filesystem::path& path);

void write_annotations(const std::filesystem::path& path, const SequenceAnnotations& ann);
SequenceAnnotations read_annotations(const std::filesystem::path& path);

struct DatasetManifest {
  std::filesystem::path root;
  std::filesystem::path calibration;
  std::filesystem::path odometry;
  std::filesystem::path mask_dir;
  int frame_count = 0;
  std::optional<std::filesystem::path> groundtruth;
  std::optional<std::filesystem::path> annotations;

  std::filesystem::path mask_path(int frame) const;

  /// Checks the layout: every file present, one mask per odometry row with
  /// consecutive zero-padded names. Throws InvalidInput.
  static DatasetManifest load(const std::filesystem::path& root);
};

std::string mask_filename(int frame);

/// Writes a complete dataset for a scenario. Byte-identical for equal inputs.
void write_dataset(const std::filesystem::path& root, const Scenario& s, std::span<const Pose6> odometry,
                   const SequenceAnnotations& ann);

}  // namespace sgfloc

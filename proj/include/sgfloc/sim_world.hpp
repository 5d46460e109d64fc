#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "sgfloc/camera_geometry.hpp"
#include "sgfloc/image.hpp"
#include "sgfloc/se2.hpp"

namespace sgfloc {

struct Polygon {
  std::vector<Eigen::Vector2d> vertices;
};

enum class MarkingKind { arrow, glyph, diamond, disk, stripe };

std::string to_string(MarkingKind k);

/// A painted ground marking. Polygons are in the marking's local frame
/// (meters); `pose` places that frame on the world ground plane.
struct MarkingTemplate {
  int id = 0;
  std::string name;
  MarkingKind kind = MarkingKind::arrow;
  std::vector<Polygon> polygons;
  Se2 pose;
  bool symmetric = false;

  /// Area-weighted centroid in world coordinates.
  Eigen::Vector2d world_centroid() const;
  std::vector<Polygon> world_polygons() const;
};

/// Template factory. `variant` in [0, 1) perturbs proportions so markings of
/// one kind stay distinguishable; glyphs use it to pick the letter form.
MarkingTemplate make_marking(MarkingKind kind, double variant, const Se2& pose, int id = 0);

/// Region of rough ground: pitch and roll oscillate with traveled distance.
struct RoughPatch {
  Eigen::Vector2d center;
  double radius = 4.0;
  double amplitude = 0.03;  // radians
  double wavelength = 0.8;  // meters
};

/// Short transverse bump centered on a world point.
struct SpeedBump {
  Eigen::Vector2d center;
  double half_width = 0.35;  // meters along the direction of travel
  double amplitude = 0.06;   // radians
};

/// Straight ramp with a sustained grade; the sign of the pitch seen by the
/// robot depends on its heading along the ramp.
struct SlopeSegment {
  Eigen::Vector2d start;
  Eigen::Vector2d end;
  double half_width = 3.0;
  double grade = 0.06;  // radians
  double ramp = 3.0;    // meters to reach full grade
};

struct OdometryNoise {
  double sigma_x = 0.005;    // m per step
  double sigma_y = 0.002;    // m per step
  double sigma_yaw = 0.002;  // rad per step
};

enum class ScenarioKind { delivery, reverse_slope, large_loop };

std::string to_string(ScenarioKind k);
ScenarioKind scenario_kind_from_string(const std::string& s);

struct Scenario {
  ScenarioKind kind = ScenarioKind::delivery;
  std::uint64_t seed = 0;
  double frame_period = 0.1;
  std::vector<Pose6> trajectory;     // ground truth, one per frame
  std::vector<double> ground_pitch;  // attitude of the ground under the robot, per frame
  std::vector<MarkingTemplate> markings;
  std::vector<RoughPatch> rough;
  std::vector<SpeedBump> bumps;
  std::vector<SlopeSegment> slopes;
  OdometryNoise noise;
  CameraModel camera;
  VirtualCamera virtual_camera;

  int frame_count() const { return static_cast<int>(trajectory.size()); }
};

/// Incremental trajectory builder at constant speed. Each command appends
/// whole frames; headings evolve linearly within a command.
class PathBuilder {
 public:
  PathBuilder(const Se2& start, double speed = 1.0, double frame_period = 0.1);

  PathBuilder& straight(double length);
  /// Positive angle turns left (counter-clockwise).
  PathBuilder& arc(double radius, double angle);
  PathBuilder& turn_in_place(double angle, double rate = 0.6);

  const std::vector<Se2>& poses() const { return poses_; }
  double frame_period() const { return dt_; }

 private:
  void step(double ds, double dyaw);

  double speed_;
  double dt_;
  std::vector<Se2> poses_;
};

/// Fills Pose6 trajectory, ground pitch and z from planar poses plus the
/// scenario's terrain (slopes, bumps, rough patches).
void apply_terrain(Scenario& s, const std::vector<Se2>& planar);

/// Camera attitude relative to the local ground at a frame (ground truth for
/// motion compensation).
MotionState true_motion(const Scenario& s, int frame);

/// Polygon fill with pixel-center sampling (even-odd rule).
void rasterize_polygon(const std::vector<Eigen::Vector2d>& vertices, BinaryImage& img);

/// Front-camera saliency mask at a frame.
BinaryImage render_mask(const Scenario& s, int frame);

/// Orthographic BEV footprint of the markings at a frame, or of a single
/// marking when `marking` >= 0.
BinaryImage render_bev_footprint(const Scenario& s, int frame, int marking = -1);

/// Integrated odometry with per-step Gaussian noise in the robot frame.
/// Roll, pitch and z pass through from ground truth. Deterministic per seed.
std::vector<Pose6> noisy_odometry(const Scenario& s, std::uint64_t seed);

Scenario make_scenario(ScenarioKind kind, std::uint64_t seed);

// Ground-truth annotation of when each marking is observable.

struct MarkingVisit {
  int first_frame = 0;
  int last_frame = 0;
  double heading = 0.0;     // robot yaw at the first fully visible frame
  bool detectable = false;  // fully inside the visible BEV in at least one frame
};

struct MarkingAnnotation {
  int id = 0;
  std::string name;
  bool symmetric = false;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  std::vector<MarkingVisit> visits;
};

struct SequenceAnnotations {
  std::string sequence;  // scenario name, labels counters.csv
  std::vector<MarkingAnnotation> markings;
};

SequenceAnnotations annotate(const Scenario& s);

}  // namespace sgfloc

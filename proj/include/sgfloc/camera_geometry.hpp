#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <deque>

#include "sgfloc/image.hpp"
#include "sgfloc/se2.hpp"

namespace sgfloc {

/// Front-view pinhole camera looking down at the ground.
///
/// Pixel (u, v) converts to metric image coordinates as
///   c = (u - u0) * pixel_pitch   (right)
///   r = (v - v0) * pixel_pitch   (down)
/// so that a ray through (c, r) meets the ground at
///   x = h_c * cot(alpha + atan(r / f_m) + theta).
/// Pixel coordinates address pixel centers (pixel i covers [i - 0.5, i + 0.5)).
struct CameraModel {
  double f_m = 0.0025;          // focal length, meters
  double h_c = 1.2;             // height above ground, meters
  double alpha = 0.45;          // optical axis below horizontal, radians
  double pixel_pitch = 5.0e-6;  // meters per pixel on the sensor
  Eigen::Vector2d principal_point{319.5, 239.5};
  int width = 640;
  int height = 480;

  double focal_px() const { return f_m / pixel_pitch; }
  void validate() const;
};

/// Nadir-looking virtual camera that renders the bird's-eye view.
/// Placed at (X_c, 0, Z_c) in the front-camera ground frame.
struct VirtualCamera {
  /// Defaults: 400 x 400 px at 12.5 mm/px covering 1..6 m ahead, +-2.5 m.
  Eigen::Matrix3d K = (Eigen::Matrix3d() << 800.0, 0.0, 199.5, 0.0, 800.0, 199.5, 0.0, 0.0, 1.0).finished();
  double X_c = 3.5;
  double Z_c = 10.0;
  int width = 400;
  int height = 400;

  void validate() const;

  /// Square-pixel BEV covering `forward_range` meters starting `near` meters
  /// ahead of the camera and the same lateral width centered on the axis.
  static VirtualCamera nadir(double near, double forward_range, int size_px, double z_c = 10.0);

  /// Ground distance covered by one BEV pixel along u.
  double meters_per_pixel() const { return Z_c / K(0, 0); }
};

/// Roll / pitch change of the camera relative to the locally estimated ground.
struct MotionState {
  double psi = 0.0;    // roll about the optical axis, radians
  double theta = 0.0;  // additional downward pitch, radians
};

/// Point on the ground plane (z = 0) in the front-camera frame:
/// x forward, y left.
struct GroundPoint {
  double x = 0.0;
  double y = 0.0;

  Eigen::Vector2d vec() const { return {x, y}; }
};

/// Rotates metric image coordinates by -psi.
Eigen::Vector2d roll_compensate(double c, double r, double psi);

/// Motion-compensated IPM of a single pixel. Throws HorizonError when the
/// pixel ray does not meet the ground ahead of the camera.
GroundPoint pixel_to_ground(double u, double v, const CameraModel& cam, const MotionState& m);

/// Exact inverse of pixel_to_ground. Throws HorizonError for ground points
/// behind the camera's image plane.
Eigen::Vector2d ground_to_pixel(const GroundPoint& p, const CameraModel& cam, const MotionState& m);

/// The plane-to-image homography equivalent to ground_to_pixel, mapping
/// homogeneous (x, y, 1) to homogeneous pixel coordinates.
Eigen::Matrix3d ground_to_image_homography(const CameraModel& cam, const MotionState& m);

/// Fixed remap from the ground frame into the virtual camera's normalized
/// plane, followed by K.
Eigen::Vector2d ground_to_bev(const GroundPoint& p, const VirtualCamera& vc);
GroundPoint bev_to_ground(double u_bev, double v_bev, const VirtualCamera& vc);

/// Sliding window of recent poses used to estimate the local ground attitude.
/// Single writer; no internal locking.
class PoseQueue {
 public:
  explicit PoseQueue(std::size_t capacity = 50, double pitch_gate = 0.025);

  void push(const Pose6& pose);
  void clear() { entries_.clear(); }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  double pitch_gate() const { return pitch_gate_; }
  const std::deque<Pose6>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  double pitch_gate_;
  std::deque<Pose6> entries_;
};

/// Roll/pitch of `current` relative to the gated mean attitude of the queue.
/// Entries whose pitch deviates from the queue mean by more than the pitch
/// gate are dropped before the final mean. Throws EmptyQueue.
MotionState compensation_from_queue(const PoseQueue& q, const Pose6& current);

/// BEV rendering of a front-camera mask. `valid` marks BEV pixels whose
/// ground point is visible in the front image; pixels outside it are unset.
struct BevMask {
  BinaryImage mask;
  BinaryImage valid;
};

/// Inverse warp with nearest-neighbor sampling. Throws DimensionMismatch when
/// the mask size differs from the camera's image size.
BevMask warp_mask_to_bev(const BinaryImage& mask, const CameraModel& cam, const VirtualCamera& vc,
                         const MotionState& m);

/// Visibility footprint alone (what warp_mask_to_bev reports as `valid`).
BinaryImage bev_valid_region(const CameraModel& cam, const VirtualCamera& vc, const MotionState& m);

}  // namespace sgfloc

#include "sgfloc/camera_geometry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <quadmath.h>

#include "sgfloc/errors.hpp"

namespace sgfloc {

void CameraModel::validate() const {
  if (!(h_c > 0.0)) throw InvalidArgument("camera: h_c must be > 0");
  if (!(alpha > 0.0 && alpha < std::numbers::pi / 2)) throw InvalidArgument("camera: alpha must be in (0, pi/2)");
  if (!(f_m > 0.0)) throw InvalidArgument("camera: f_m must be > 0");
  if (!(pixel_pitch > 0.0)) throw InvalidArgument("camera: pixel_pitch must be > 0");
  if (width <= 0 || height <= 0) throw InvalidArgument("camera: image_size must be positive");
}

void VirtualCamera::validate() const {
  if (!(Z_c > 0.0)) throw InvalidArgument("virtual camera: Z_c must be > 0");
  if (!(K(0, 0) > 0.0 && K(1, 1) > 0.0)) throw InvalidArgument("virtual camera: K_v focal entries must be > 0");
  if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0 || K(2, 2) != 1.0) {
    throw InvalidArgument("virtual camera: K_v must be upper triangular with K(2,2) = 1");
  }
  if (width <= 0 || height <= 0) throw InvalidArgument("virtual camera: bev_size must be positive");
}

VirtualCamera VirtualCamera::nadir(double near, double forward_range, int size_px, double z_c) {
  VirtualCamera vc;
  const double mpp = forward_range / size_px;
  const double center = 0.5 * (size_px - 1);
  vc.K << z_c / mpp, 0.0, center, 0.0, z_c / mpp, center, 0.0, 0.0, 1.0;
  vc.X_c = near + 0.5 * forward_range;
  vc.Z_c = z_c;
  vc.width = size_px;
  vc.height = size_px;
  return vc;
}

Eigen::Vector2d roll_compensate(double c, double r, double psi) {
  // [cos(-psi) -sin(-psi); sin(-psi) cos(-psi)] * [c; r]
  const double cs = std::cos(psi);
  const double sn = std::sin(psi);
  return {cs * c + sn * r, -sn * c + cs * r};
}

namespace {

// Below this depression the angle sum cancels badly and the ground point is
// kilometres away; redo it in quad precision.
constexpr double kFarField = 0.01;

GroundPoint pixel_to_ground_far(double u, double v, const CameraModel& cam, const MotionState& m) {
  using Q = __float128;
  const Q c = (Q(u) - Q(cam.principal_point.x())) * Q(cam.pixel_pitch);
  const Q r = (Q(v) - Q(cam.principal_point.y())) * Q(cam.pixel_pitch);
  const Q cs = cosq(Q(m.psi));
  const Q sn = sinq(Q(m.psi));
  const Q lx = cs * c + sn * r;
  const Q ly = -sn * c + cs * r;
  const Q ray = atanq(ly / Q(cam.f_m));
  const Q depression = Q(cam.alpha) + ray + Q(m.theta);
  if (!(depression > 0)) throw HorizonError("pixel ray does not meet the ground ahead of the camera");
  const Q x = Q(cam.h_c) / tanq(depression);
  const Q y = -x * (lx / Q(cam.f_m)) * cosq(ray) / cosq(depression);
  return {static_cast<double>(x), static_cast<double>(y)};
}

}  // namespace

GroundPoint pixel_to_ground(double u, double v, const CameraModel& cam, const MotionState& m) {
  const double c = (u - cam.principal_point.x()) * cam.pixel_pitch;
  const double r = (v - cam.principal_point.y()) * cam.pixel_pitch;
  const Eigen::Vector2d level = roll_compensate(c, r, m.psi);
  const double ray = std::atan(level.y() / cam.f_m);
  const double depression = cam.alpha + ray + m.theta;
  if (std::abs(depression) < kFarField) return pixel_to_ground_far(u, v, cam, m);
  if (!(depression > 0.0 && depression < std::numbers::pi / 2)) {
    throw HorizonError("pixel ray does not meet the ground ahead of the camera");
  }
  const double x = cam.h_c / std::tan(depression);
  // Exact flat-plane intersection for a camera pitched by alpha + theta.
  const double y = -x * (level.x() / cam.f_m) * std::cos(ray) / std::cos(depression);
  return {x, y};
}

Eigen::Vector2d ground_to_pixel(const GroundPoint& p, const CameraModel& cam, const MotionState& m) {
  const double pitch = cam.alpha + m.theta;
  const double depression = std::atan2(cam.h_c, p.x);
  const double ray = depression - pitch;
  if (!(ray > -std::numbers::pi / 2 && ray < std::numbers::pi / 2)) {
    throw HorizonError("ground point is behind the camera");
  }
  const double r_level = cam.f_m * std::tan(ray);
  const double c_level = -p.y * cam.f_m / (std::hypot(p.x, cam.h_c) * std::cos(ray));
  // Undo roll_compensate: rotate by +psi.
  const double cs = std::cos(m.psi);
  const double sn = std::sin(m.psi);
  const double c = cs * c_level - sn * r_level;
  const double r = sn * c_level + cs * r_level;
  return {cam.principal_point.x() + c / cam.pixel_pitch, cam.principal_point.y() + r / cam.pixel_pitch};
}

Eigen::Matrix3d ground_to_image_homography(const CameraModel& cam, const MotionState& m) {
  const double pitch = cam.alpha + m.theta;
  const double sp = std::sin(pitch);
  const double cp = std::cos(pitch);
  // World (x fwd, y left, z up) -> level camera (right, down, forward).
  Eigen::Matrix3d level;
  level << 0.0, -1.0, 0.0,  //
      -sp, 0.0, -cp,         //
      cp, 0.0, -sp;
  Eigen::Matrix3d roll = Eigen::Matrix3d::Identity();
  roll(0, 0) = std::cos(m.psi);
  roll(0, 1) = -std::sin(m.psi);
  roll(1, 0) = std::sin(m.psi);
  roll(1, 1) = std::cos(m.psi);
  // Ground (x, y, 0) relative to the camera center (0, 0, h_c).
  Eigen::Matrix3d lift = Eigen::Matrix3d::Identity();
  lift(2, 2) = -cam.h_c;
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = k(1, 1) = cam.focal_px();
  k(0, 2) = cam.principal_point.x();
  k(1, 2) = cam.principal_point.y();
  return k * roll * level * lift;
}

namespace {

Eigen::Matrix3d bev_remap(const VirtualCamera& vc) {
  Eigen::Matrix3d remap;
  remap << 0.0, -1.0, 0.0,  //
      -1.0, 0.0, vc.X_c,    //
      0.0, 0.0, vc.Z_c;
  return remap;
}

}  // namespace

Eigen::Vector2d ground_to_bev(const GroundPoint& p, const VirtualCamera& vc) {
  const Eigen::Vector3d h = vc.K * bev_remap(vc) * Eigen::Vector3d(p.x, p.y, 1.0);
  return h.head<2>() / h.z();
}

GroundPoint bev_to_ground(double u_bev, double v_bev, const VirtualCamera& vc) {
  const Eigen::Vector3d h = bev_remap(vc).inverse() * vc.K.inverse() * Eigen::Vector3d(u_bev, v_bev, 1.0);
  return {h.x() / h.z(), h.y() / h.z()};
}

PoseQueue::PoseQueue(std::size_t capacity, double pitch_gate) : capacity_(capacity), pitch_gate_(pitch_gate) {
  if (capacity_ == 0) throw InvalidArgument("pose queue capacity must be > 0");
  if (!(pitch_gate_ > 0.0)) throw InvalidArgument("pose queue pitch gate must be > 0");
}

void PoseQueue::push(const Pose6& pose) {
  entries_.push_back(pose);
  while (entries_.size() > capacity_) {
    entries_.pop_front();
  }
}

MotionState compensation_from_queue(const PoseQueue& q, const Pose6& current) {
  if (q.empty()) {
    throw EmptyQueue("pose queue is empty");
  }
  double mean_pitch = 0.0;
  for (const Pose6& p : q.entries()) mean_pitch += p.pitch;
  mean_pitch /= static_cast<double>(q.size());

  double roll_sum = 0.0;
  double pitch_sum = 0.0;
  std::size_t kept = 0;
  for (const Pose6& p : q.entries()) {
    if (std::abs(p.pitch - mean_pitch) <= q.pitch_gate()) {
      roll_sum += p.roll;
      pitch_sum += p.pitch;
      ++kept;
    }
  }
  if (kept == 0) {
    // Attitudes spread wider than the gate: fall back to the plain mean.
    for (const Pose6& p : q.entries()) roll_sum += p.roll;
    return {current.roll - roll_sum / static_cast<double>(q.size()), current.pitch - mean_pitch};
  }
  const double n = static_cast<double>(kept);
  return {current.roll - roll_sum / n, current.pitch - pitch_sum / n};
}

namespace {

// BEV pixel (u, v, 1) -> homogeneous front-image pixel.
Eigen::Matrix3d bev_to_image(const CameraModel& cam, const VirtualCamera& vc, const MotionState& m) {
  return ground_to_image_homography(cam, m) * bev_remap(vc).inverse() * vc.K.inverse();
}

template <typename Visit>
void for_each_bev_source(const CameraModel& cam, const VirtualCamera& vc, const MotionState& m, Visit&& visit) {
  const Eigen::Matrix3d h = bev_to_image(cam, vc, m);
  const Eigen::Matrix3d to_ground = bev_remap(vc).inverse() * vc.K.inverse();
  for (int v = 0; v < vc.height; ++v) {
    const Eigen::Vector3d g0 = to_ground * Eigen::Vector3d(0.0, v, 1.0);
    const Eigen::Vector3d p0 = h * Eigen::Vector3d(0.0, v, 1.0);
    for (int u = 0; u < vc.width; ++u) {
      const Eigen::Vector3d g = g0 + u * to_ground.col(0);
      if (!(g.x() / g.z() > 0.0)) continue;
      const Eigen::Vector3d p = p0 + u * h.col(0);
      if (!(p.z() > 0.0)) continue;
      const double x = p.x() / p.z() + 0.5;
      const double y = p.y() / p.z() + 0.5;
      if (!(x >= 0.0 && y >= 0.0 && x < cam.width && y < cam.height)) continue;
      visit(u, v, static_cast<int>(x), static_cast<int>(y));
    }
  }
}

}  // namespace

BevMask warp_mask_to_bev(const BinaryImage& mask, const CameraModel& cam, const VirtualCamera& vc,
                         const MotionState& m) {
  if (mask.width != cam.width || mask.height != cam.height) {
    throw DimensionMismatch("mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                            ", camera expects " + std::to_string(cam.width) + "x" + std::to_string(cam.height));
  }
  BevMask out{BinaryImage(vc.width, vc.height), BinaryImage(vc.width, vc.height)};
  for_each_bev_source(cam, vc, m, [&](int u, int v, int su, int sv) {
    out.valid.at(u, v) = 1;
    out.mask.at(u, v) = mask.at(su, sv) ? 1 : 0;
  });
  return out;
}

BinaryImage bev_valid_region(const CameraModel& cam, const VirtualCamera& vc, const MotionState& m) {
  BinaryImage valid(vc.width, vc.height);
  for_each_bev_source(cam, vc, m, [&](int u, int v, int, int) { valid.at(u, v) = 1; });
  return valid;
}

}  // namespace sgfloc

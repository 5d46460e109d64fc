#pragma once

#include <Eigen/Core>
#include <cmath>

namespace sgfloc {

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

/// Planar rigid transform. Composition reads right to left:
/// (a * b).apply(p) == a.apply(b.apply(p)).
struct Se2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Se2() = default;
  Se2(double x_, double y_, double yaw_) : x(x_), y(y_), yaw(wrap_angle(yaw_)) {}

  static Se2 identity() { return {}; }

  Eigen::Vector2d translation() const { return {x, y}; }
  Eigen::Matrix2d rotation() const;
  Eigen::Matrix3d matrix() const;
  static Se2 from_matrix(const Eigen::Matrix3d& m);

  Se2 inverse() const;
  Se2 operator*(const Se2& rhs) const;
  Eigen::Vector2d apply(const Eigen::Vector2d& p) const;

  Eigen::Vector3d vec() const { return {x, y, yaw}; }
};

/// Timestamped 6-DoF robot pose. Roll and pitch follow the ROS body
/// convention (positive pitch = nose down); yaw is counter-clockwise.
struct Pose6 {
  double timestamp = 0.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  Se2 planar() const { return {x, y, yaw}; }
};

}  // namespace sgfloc

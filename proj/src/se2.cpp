#include "sgfloc/se2.hpp"

#include <Eigen/Dense>
#include <numbers>

namespace sgfloc {

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (a > -std::numbers::pi && a <= std::numbers::pi) {
    return a;
  }
  a = std::fmod(a + std::numbers::pi, kTwoPi);
  if (a <= 0.0) {
    a += kTwoPi;
  }
  return a - std::numbers::pi;
}

Eigen::Matrix2d Se2::rotation() const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

Eigen::Matrix3d Se2::matrix() const {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m.topLeftCorner<2, 2>() = rotation();
  m(0, 2) = x;
  m(1, 2) = y;
  return m;
}

Se2 Se2::from_matrix(const Eigen::Matrix3d& m) {
  return {m(0, 2), m(1, 2), std::atan2(m(1, 0), m(0, 0))};
}

Se2 Se2::inverse() const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {-(c * x + s * y), -(-s * x + c * y), -yaw};
}

Se2 Se2::operator*(const Se2& rhs) const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {x + c * rhs.x - s * rhs.y, y + s * rhs.x + c * rhs.y, yaw + rhs.yaw};
}

Eigen::Vector2d Se2::apply(const Eigen::Vector2d& p) const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {x + c * p.x() - s * p.y(), y + s * p.x() + c * p.y()};
}

}  // namespace sgfloc

#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. Nothing here calls into the library's geometry code.

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <optional>
#include <quadmath.h>
#include <random>
#include <vector>

#include "sgfloc/camera_geometry.hpp"
#include "sgfloc/image.hpp"
#include "sgfloc/se2.hpp"

namespace oracle {

// Cast the pixel ray of a pinhole at (0, 0, h_c) pitched down by alpha + theta
// and rolled by psi about its optical axis; intersect with z = 0.
inline std::optional<Eigen::Vector2d> ray_plane(double u, double v, const sgfloc::CameraModel& cam, double psi,
                                                double theta) {
  const double pitch = cam.alpha + theta;
  // camera axes expressed in the world (x fwd, y left, z up)
  const Eigen::Vector3d forward(std::cos(pitch), 0.0, -std::sin(pitch));
  const Eigen::Vector3d right(0.0, -1.0, 0.0);
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d level;
  level.col(0) = right;
  level.col(1) = down;
  level.col(2) = forward;
  const Eigen::Matrix3d world_from_cam = level * Eigen::AngleAxisd(-psi, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Vector3d d_cam((u - cam.principal_point.x()) * cam.pixel_pitch,
                              (v - cam.principal_point.y()) * cam.pixel_pitch, cam.f_m);
  const Eigen::Vector3d d = world_from_cam * d_cam;
  if (!(d.z() < 0.0)) return std::nullopt;
  const double t = cam.h_c / -d.z();
  if (!(t * d.x() > 0.0)) return std::nullopt;
  return Eigen::Vector2d(t * d.x(), t * d.y());
}

// Same ray cast in quad precision, for rays grazing the horizon where the
// double version loses centimetres at thousands of kilometres.
inline std::optional<Eigen::Vector2d> ray_plane_quad(double u, double v, const sgfloc::CameraModel& cam, double psi,
                                                     double theta) {
  using Q = __float128;
  const Q pitch = Q(cam.alpha) + Q(theta);
  const Q sp = sinq(pitch), cp = cosq(pitch);
  const Q x = (Q(u) - Q(cam.principal_point.x())) * Q(cam.pixel_pitch);
  const Q y = (Q(v) - Q(cam.principal_point.y())) * Q(cam.pixel_pitch);
  const Q f = cam.f_m;
  // roll by -psi about the optical axis, then the level camera axes
  const Q xr = cosq(Q(psi)) * x + sinq(Q(psi)) * y;
  const Q yr = -sinq(Q(psi)) * x + cosq(Q(psi)) * y;
  const Q dx = -sp * yr + cp * f;
  const Q dy = -xr;
  const Q dz = -cp * yr - sp * f;
  if (!(dz < 0)) return std::nullopt;
  const Q t = Q(cam.h_c) / -dz;
  if (!(t * dx > 0)) return std::nullopt;
  return Eigen::Vector2d(static_cast<double>(t * dx), static_cast<double>(t * dy));
}

inline Eigen::Matrix3d se2_matrix(double x, double y, double yaw) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = std::cos(yaw);
  m(0, 1) = -std::sin(yaw);
  m(1, 0) = std::sin(yaw);
  m(1, 1) = std::cos(yaw);
  m(0, 2) = x;
  m(1, 2) = y;
  return m;
}

inline Eigen::Matrix3d se2_matrix(const sgfloc::Se2& p) { return se2_matrix(p.x, p.y, p.yaw); }

// Random 4-connected polyomino grown cell by cell, each cell drawn as a
// cell_px square block. Returns a binary image with a margin.
inline sgfloc::BinaryImage polyomino(std::mt19937& rng, int cells, int cell_px, int grid = 8) {
  std::vector<std::vector<int>> occ(grid, std::vector<int>(grid, 0));
  std::vector<std::pair<int, int>> set{{grid / 2, grid / 2}};
  occ[grid / 2][grid / 2] = 1;
  std::uniform_int_distribution<int> dir(0, 3);
  const int dx[] = {1, -1, 0, 0};
  const int dy[] = {0, 0, 1, -1};
  while (static_cast<int>(set.size()) < cells) {
    std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
    const auto [x, y] = set[pick(rng)];
    const int k = dir(rng);
    const int nx = x + dx[k];
    const int ny = y + dy[k];
    if (nx < 0 || ny < 0 || nx >= grid || ny >= grid || occ[ny][nx]) continue;
    occ[ny][nx] = 1;
    set.push_back({nx, ny});
  }
  const int margin = cell_px;
  sgfloc::BinaryImage img(grid * cell_px + 2 * margin, grid * cell_px + 2 * margin);
  for (int y = 0; y < grid; ++y)
    for (int x = 0; x < grid; ++x)
      if (occ[y][x])
        for (int v = 0; v < cell_px; ++v)
          for (int u = 0; u < cell_px; ++u) img.at(margin + x * cell_px + u, margin + y * cell_px + v) = 1;
  return img;
}

// Similarity transform of a binary raster: output pixel centers are mapped
// back into the source, sampled bilinearly and thresholded at 0.5.
inline sgfloc::BinaryImage transform_raster(const sgfloc::BinaryImage& src, double angle, double scale, int tx,
                                            int ty) {
  const double diag = std::hypot(src.width, src.height) * scale;
  const int size = static_cast<int>(std::ceil(diag)) + 4;
  sgfloc::BinaryImage out(size + std::abs(tx), size + std::abs(ty));
  const double cx_src = 0.5 * (src.width - 1);
  const double cy_src = 0.5 * (src.height - 1);
  // off-lattice center so rotated edges never sample exactly on the 0.5 contour
  const double cx_dst = 0.5 * (size - 1) + std::max(tx, 0) + 0.3183;
  const double cy_dst = 0.5 * (size - 1) + std::max(ty, 0) + 0.2718;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  auto sample = [&](int u, int v) -> double {
    if (u < 0 || v < 0 || u >= src.width || v >= src.height) return 0.0;
    return src.at(u, v) ? 1.0 : 0.0;
  };
  for (int v = 0; v < out.height; ++v) {
    for (int u = 0; u < out.width; ++u) {
      const double du = (u - cx_dst) / scale;
      const double dv = (v - cy_dst) / scale;
      const double su = c * du + s * dv + cx_src;
      const double sv = -s * du + c * dv + cy_src;
      const int u0 = static_cast<int>(std::floor(su));
      const int v0 = static_cast<int>(std::floor(sv));
      const double fu = su - u0;
      const double fv = sv - v0;
      const double val = (1 - fu) * (1 - fv) * sample(u0, v0) + fu * (1 - fv) * sample(u0 + 1, v0) +
                         (1 - fu) * fv * sample(u0, v0 + 1) + fu * fv * sample(u0 + 1, v0 + 1);
      out.at(u, v) = val >= 0.5 ? 1 : 0;
    }
  }
  return out;
}

}  // namespace oracle

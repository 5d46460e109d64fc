#include "sgfloc/sim_world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sgfloc/errors.hpp"
#include "sgfloc/sgf_detection.hpp"

namespace sgfloc {

namespace {

constexpr double kPi = std::numbers::pi;

double polygon_area(const std::vector<Eigen::Vector2d>& v) {
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& p = v[i];
    const auto& q = v[(i + 1) % v.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

Eigen::Vector2d polygon_centroid(const std::vector<Polygon>& polys, double* total_area = nullptr) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  double area = 0.0;
  for (const Polygon& poly : polys) {
    const auto& v = poly.vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& p = v[i];
      const auto& q = v[(i + 1) % v.size()];
      const double cross = p.x() * q.y() - q.x() * p.y();
      c += (p + q) * cross;
    }
    area += polygon_area(v);
  }
  if (total_area) *total_area = area;
  return area == 0.0 ? c : Eigen::Vector2d(c / (6.0 * area));
}

Polygon from_points(std::initializer_list<std::pair<double, double>> pts) {
  Polygon p;
  for (const auto& [x, y] : pts) p.vertices.emplace_back(x, y);
  return p;
}

// Fractional part of a scaled variant, used to derive several independent
// proportions from one number.
double frac(double v, double k) { return v * k - std::floor(v * k); }

Polygon glyph_polygon(double variant) {
  const double s = 0.26 + 0.1 * frac(variant, 7.0);
  const double h = 1.3 + 0.8 * frac(variant, 13.0);
  const double w = 0.9 + 0.6 * frac(variant, 29.0);
  switch (static_cast<int>(variant * 6.0)) {
    case 0:  // L
      return from_points({{0, 0}, {w, 0}, {w, s}, {s, s}, {s, h}, {0, h}});
    case 1:  // T
      return from_points({{0, h}, {w, h}, {w, h - s}, {w / 2 + s / 2, h - s}, {w / 2 + s / 2, 0},
                          {w / 2 - s / 2, 0}, {w / 2 - s / 2, h - s}, {0, h - s}});
    case 2:  // F
      return from_points({{0, 0}, {s, 0}, {s, h / 2 - s / 2}, {0.75 * w, h / 2 - s / 2}, {0.75 * w, h / 2 + s / 2},
                          {s, h / 2 + s / 2}, {s, h - s}, {w, h - s}, {w, h}, {0, h}});
    case 3:  // J
      return from_points({{0, 0}, {w, 0}, {w, h}, {w - s, h}, {w - s, s}, {s, s}, {s, 0.4 * h}, {0, 0.4 * h}});
    case 4:  // C
      return from_points({{0, 0}, {w, 0}, {w, s}, {s, s}, {s, h - s}, {w, h - s}, {w, h}, {0, h}});
    default:  // 7 with a slanted stem
      return from_points({{0, h}, {w, h}, {w, h - s}, {0.3 * w + s, 0}, {0.3 * w, 0}, {w - 1.4 * s, h - s},
                          {0, h - s}});
  }
}

}  // namespace

std::string to_string(MarkingKind k) {
  switch (k) {
    case MarkingKind::arrow: return "arrow";
    case MarkingKind::glyph: return "glyph";
    case MarkingKind::diamond: return "diamond";
    case MarkingKind::disk: return "disk";
    case MarkingKind::stripe: return "stripe";
  }
  return "unknown";
}

Eigen::Vector2d MarkingTemplate::world_centroid() const { return pose.apply(polygon_centroid(polygons)); }

std::vector<Polygon> MarkingTemplate::world_polygons() const {
  std::vector<Polygon> out;
  for (const Polygon& p : polygons) {
    Polygon w;
    for (const auto& v : p.vertices) w.vertices.push_back(pose.apply(v));
    out.push_back(std::move(w));
  }
  return out;
}

MarkingTemplate make_marking(MarkingKind kind, double variant, const Se2& pose, int id) {
  if (!(variant >= 0.0 && variant < 1.0)) throw InvalidArgument("marking variant must lie in [0, 1)");
  MarkingTemplate m;
  m.id = id;
  m.kind = kind;
  m.pose = pose;
  switch (kind) {
    case MarkingKind::arrow: {
      const double sw = 0.3 + 0.15 * variant;
      const double sl = 1.0 + 0.9 * frac(variant, 3.0);
      const double hw = 0.9 + 0.4 * frac(variant, 5.0);
      const double hl = 0.6 + 0.3 * frac(variant, 11.0);
      const double x0 = -(sl + hl) / 2;
      const double xs = x0 + sl;
      m.polygons.push_back(from_points({{x0, -sw / 2}, {xs, -sw / 2}, {xs, -hw / 2}, {xs + hl, 0},
                                        {xs, hw / 2}, {xs, sw / 2}, {x0, sw / 2}}));
      break;
    }
    case MarkingKind::glyph:
      m.polygons.push_back(glyph_polygon(variant));
      break;
    case MarkingKind::diamond: {
      const double a = 0.9 * (1.0 + 0.3 * variant);
      m.polygons.push_back(from_points({{a, 0}, {0, 0.5}, {-a, 0}, {0, -0.5}}));
      m.symmetric = true;
      break;
    }
    case MarkingKind::disk: {
      Polygon p;
      const double r = 0.8;
      for (int k = 0; k < 64; ++k) {
        p.vertices.emplace_back(r * std::cos(2.0 * kPi * k / 64), r * std::sin(2.0 * kPi * k / 64));
      }
      m.polygons.push_back(std::move(p));
      m.symmetric = true;
      break;
    }
    case MarkingKind::stripe:
      m.polygons.push_back(from_points({{-1.1, -0.075}, {1.1, -0.075}, {1.1, 0.075}, {-1.1, 0.075}}));
      m.symmetric = true;
      break;
  }
  // Local frame centered on the area centroid.
  const Eigen::Vector2d c = polygon_centroid(m.polygons);
  for (Polygon& p : m.polygons) {
    for (auto& v : p.vertices) v -= c;
  }
  m.name = to_string(kind) + "_" + std::to_string(id);
  return m;
}

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::delivery: return "delivery";
    case ScenarioKind::reverse_slope: return "reverse_slope";
    case ScenarioKind::large_loop: return "large_loop";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
  if (s == "delivery") return ScenarioKind::delivery;
  if (s == "reverse_slope") return ScenarioKind::reverse_slope;
  if (s == "large_loop") return ScenarioKind::large_loop;
  throw InvalidInput("unknown scenario kind '" + s + "'");
}

PathBuilder::PathBuilder(const Se2& start, double speed, double frame_period) : speed_(speed), dt_(frame_period) {
  if (!(speed > 0.0 && frame_period > 0.0)) throw InvalidArgument("path speed and frame period must be > 0");
  poses_.push_back(start);
}

void PathBuilder::step(double ds, double dyaw) {
  const Se2& p = poses_.back();
  double fx = ds;
  double fy = 0.0;
  if (std::abs(dyaw) > 1e-12) {
    fx = ds * std::sin(dyaw) / dyaw;
    fy = ds * (1.0 - std::cos(dyaw)) / dyaw;
  }
  poses_.push_back(p * Se2(fx, fy, dyaw));
}

PathBuilder& PathBuilder::straight(double length) {
  const int n = std::max(1, static_cast<int>(std::lround(length / (speed_ * dt_))));
  for (int i = 0; i < n; ++i) step(length / n, 0.0);
  return *this;
}

PathBuilder& PathBuilder::arc(double radius, double angle) {
  const double length = radius * std::abs(angle);
  const int n = std::max(1, static_cast<int>(std::lround(length / (speed_ * dt_))));
  for (int i = 0; i < n; ++i) step(length / n, angle / n);
  return *this;
}

PathBuilder& PathBuilder::turn_in_place(double angle, double rate) {
  const int n = std::max(1, static_cast<int>(std::lround(std::abs(angle) / (rate * dt_))));
  for (int i = 0; i < n; ++i) step(0.0, angle / n);
  return *this;
}

void apply_terrain(Scenario& s, const std::vector<Se2>& planar) {
  s.trajectory.clear();
  s.ground_pitch.clear();
  double traveled = 0.0;
  double z = 0.0;
  for (std::size_t i = 0; i < planar.size(); ++i) {
    const Se2& p = planar[i];
    const Eigen::Vector2d pos = p.translation();
    const Eigen::Vector2d heading(std::cos(p.yaw), std::sin(p.yaw));
    double ds = 0.0;
    if (i > 0) {
      ds = (pos - planar[i - 1].translation()).norm();
      traveled += ds;
    }

    double ground = 0.0;
    double rise = 0.0;
    for (const SlopeSegment& sl : s.slopes) {
      const Eigen::Vector2d axis = sl.end - sl.start;
      const double len = axis.norm();
      const Eigen::Vector2d dir = axis / len;
      const double u = (pos - sl.start).dot(dir);
      const double lateral = std::abs((pos - sl.start).x() * dir.y() - (pos - sl.start).y() * dir.x());
      if (u < 0.0 || u > len || lateral > sl.half_width) continue;
      const double profile = sl.grade * std::clamp(std::min(u, len - u) / sl.ramp, 0.0, 1.0);
      const double along = heading.dot(dir);
      ground += -profile * along;  // nose up (negative pitch) when climbing
      rise += profile * along * ds;
    }
    z += rise;

    double pitch = ground;
    double roll = 0.0;
    for (const SpeedBump& b : s.bumps) {
      const Eigen::Vector2d rel = pos - b.center;
      const double along = rel.dot(heading);
      const double lateral = std::abs(rel.x() * heading.y() - rel.y() * heading.x());
      if (std::abs(along) < b.half_width && lateral < 2.0) {
        pitch += -b.amplitude * std::sin(kPi * (along + b.half_width) / b.half_width) * 0.5 *
                 (1.0 - std::cos(kPi * (along + b.half_width) / b.half_width));
      }
    }
    for (const RoughPatch& r : s.rough) {
      if ((pos - r.center).norm() < r.radius) {
        pitch += r.amplitude * std::sin(2.0 * kPi * traveled / r.wavelength);
        roll += 0.6 * r.amplitude * std::sin(2.0 * kPi * traveled / (1.37 * r.wavelength) + 0.7);
      }
    }

    Pose6 pose;
    pose.timestamp = static_cast<double>(i) * s.frame_period;
    pose.x = p.x;
    pose.y = p.y;
    pose.z = z;
    pose.roll = roll;
    pose.pitch = pitch;
    pose.yaw = p.yaw;
    s.trajectory.push_back(pose);
    s.ground_pitch.push_back(ground);
  }
}

MotionState true_motion(const Scenario& s, int frame) {
  const auto f = static_cast<std::size_t>(frame);
  return {s.trajectory[f].roll, s.trajectory[f].pitch - s.ground_pitch[f]};
}

void rasterize_polygon(const std::vector<Eigen::Vector2d>& vertices, BinaryImage& img) {
  if (vertices.size() < 3) return;
  double ymin = vertices.front().y();
  double ymax = ymin;
  for (const auto& p : vertices) {
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  const int v0 = std::max(0, static_cast<int>(std::ceil(ymin)));
  const int v1 = std::min(img.height - 1, static_cast<int>(std::floor(ymax)));
  std::vector<double> xs;
  for (int v = v0; v <= v1; ++v) {
    const double y = v;
    xs.clear();
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      const auto& a = vertices[i];
      const auto& b = vertices[(i + 1) % vertices.size()];
      if ((a.y() <= y && y < b.y()) || (b.y() <= y && y < a.y())) {
        xs.push_back(a.x() + (y - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int u0 = std::max(0, static_cast<int>(std::ceil(xs[k])));
      const int u1 = std::min(img.width - 1, static_cast<int>(std::ceil(xs[k + 1])) - 1);
      for (int u = u0; u <= u1; ++u) img.at(u, v) ^= 1;
    }
  }
}

namespace {

constexpr double kCullRadius = 10.0;
constexpr double kNearDepth = 0.05;

// Sutherland-Hodgman against depth(p) = row . (x, y, 1) >= kNearDepth.
std::vector<Eigen::Vector2d> clip_depth(const std::vector<Eigen::Vector2d>& poly, const Eigen::RowVector3d& row) {
  std::vector<Eigen::Vector2d> out;
  auto depth = [&](const Eigen::Vector2d& p) { return row.dot(Eigen::Vector3d(p.x(), p.y(), 1.0)) - kNearDepth; };
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    const double da = depth(a);
    const double db = depth(b);
    if (da >= 0.0) out.push_back(a);
    if ((da >= 0.0) != (db >= 0.0)) {
      out.push_back(a + (b - a) * (da / (da - db)));
    }
  }
  return out;
}

// Rasterizes each polygon into its own layer and ORs it into `img`, so
// overlapping markings do not cancel under the even-odd rule.
void or_polygon(const std::vector<Eigen::Vector2d>& pts, BinaryImage& img) {
  BinaryImage layer(img.width, img.height);
  rasterize_polygon(pts, layer);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] |= layer.data[i];
}

}  // namespace

BinaryImage render_mask(const Scenario& s, int frame) {
  const Pose6& pose = s.trajectory.at(static_cast<std::size_t>(frame));
  const Se2 robot = pose.planar();
  const Se2 to_robot = robot.inverse();
  const Eigen::Matrix3d h = ground_to_image_homography(s.camera, true_motion(s, frame));
  // third row of the homography is the camera depth of a ground point
  const Eigen::RowVector3d depth_row = h.row(2);

  BinaryImage img(s.camera.width, s.camera.height);
  for (const MarkingTemplate& m : s.markings) {
    if ((m.world_centroid() - robot.translation()).norm() > kCullRadius) continue;
    for (const Polygon& poly : m.world_polygons()) {
      std::vector<Eigen::Vector2d> local;
      for (const auto& v : poly.vertices) local.push_back(to_robot.apply(v));
      const auto clipped = clip_depth(local, depth_row);
      if (clipped.size() < 3) continue;
      std::vector<Eigen::Vector2d> px;
      for (const auto& g : clipped) {
        const Eigen::Vector3d q = h * Eigen::Vector3d(g.x(), g.y(), 1.0);
        px.emplace_back(q.x() / q.z(), q.y() / q.z());
      }
      or_polygon(px, img);
    }
  }
  return img;
}

BinaryImage render_bev_footprint(const Scenario& s, int frame, int marking) {
  const Se2 to_robot = s.trajectory.at(static_cast<std::size_t>(frame)).planar().inverse();
  BinaryImage img(s.virtual_camera.width, s.virtual_camera.height);
  for (const MarkingTemplate& m : s.markings) {
    if (marking >= 0 && m.id != marking) continue;
    if ((m.world_centroid() - s.trajectory[static_cast<std::size_t>(frame)].planar().translation()).norm() >
        kCullRadius) {
      continue;
    }
    for (const Polygon& poly : m.world_polygons()) {
      std::vector<Eigen::Vector2d> px;
      for (const auto& v : poly.vertices) {
        const Eigen::Vector2d g = to_robot.apply(v);
        px.push_back(ground_to_bev({g.x(), g.y()}, s.virtual_camera));
      }
      or_polygon(px, img);
    }
  }
  return img;
}

std::vector<Pose6> noisy_odometry(const Scenario& s, std::uint64_t seed) {
  std::vector<Pose6> out;
  if (s.trajectory.empty()) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  out.push_back(s.trajectory.front());
  Se2 est = s.trajectory.front().planar();
  for (std::size_t i = 1; i < s.trajectory.size(); ++i) {
    const Se2 delta = s.trajectory[i - 1].planar().inverse() * s.trajectory[i].planar();
    const double nx = n01(rng);
    const double ny = n01(rng);
    const double nyaw = n01(rng);
    est = est * Se2(delta.x + s.noise.sigma_x * nx, delta.y + s.noise.sigma_y * ny,
                    delta.yaw + s.noise.sigma_yaw * nyaw);
    Pose6 p = s.trajectory[i];
    p.x = est.x;
    p.y = est.y;
    p.yaw = est.yaw;
    out.push_back(p);
  }
  return out;
}

namespace {

// Draws template variants so that markings sharing a form differ by at
// least 25 cm in width or height (or 0.25 m^2 in area); glyph letters are used in turn.
class VariantPicker {
 public:
  explicit VariantPicker(std::mt19937_64& rng) : rng_(rng) {}

  double pick(MarkingKind kind) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double v = 0.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
      v = unit(rng_);
      if (kind == MarkingKind::glyph) v = (glyph_count_ % 6 + v) / 6.0;
      const int form = static_cast<int>(kind) * 10 + (kind == MarkingKind::glyph ? static_cast<int>(v * 6.0) : 0);
      const Eigen::Vector3d d = dims(make_marking(kind, v, Se2::identity()));
      bool distinct = true;
      for (const auto& [f, other] : used_) {
        if (f == form && (d - other).cwiseAbs().maxCoeff() < 0.25) distinct = false;
      }
      if (distinct || attempt == 199) {
        used_.emplace_back(form, d);
        break;
      }
    }
    if (kind == MarkingKind::glyph) ++glyph_count_;
    return v;
  }

 private:
  static Eigen::Vector3d dims(const MarkingTemplate& m) {
    Eigen::Vector2d lo(1e9, 1e9);
    Eigen::Vector2d hi(-1e9, -1e9);
    double area = 0.0;
    for (const Polygon& p : m.polygons) {
      for (const auto& v : p.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
      }
      area += std::abs(polygon_area(p.vertices));
    }
    return {hi.x() - lo.x(), hi.y() - lo.y(), area};
  }

  std::mt19937_64& rng_;
  int glyph_count_ = 0;
  std::vector<std::pair<int, Eigen::Vector3d>> used_;
};

// Places markings along a straight stretch that starts at `start` heading
// `yaw`, at the given distances, with small lateral offsets and rotations.
void place_along(Scenario& s, std::mt19937_64& rng, VariantPicker& variants, const Se2& start,
                 const std::vector<double>& at, const std::vector<MarkingKind>& kinds) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = 0; k < at.size(); ++k) {
    const double lateral = 0.4 * (unit(rng) - 0.5);
    const double rot = 2.0 * kPi * unit(rng);
    const double variant = variants.pick(kinds[k]);
    const Se2 pose = start * Se2(at[k], lateral, rot);
    s.markings.push_back(make_marking(kinds[k], variant, pose, static_cast<int>(s.markings.size())));
  }
}

// Rounded rectangle traversed counter-clockwise from the start of the first
// long side; returns the pose at the start of each straight side.
std::vector<Se2> rectangle_lap(PathBuilder& b, double long_side, double short_side, double r) {
  std::vector<Se2> starts;
  const double sides[4] = {long_side - 2 * r, short_side - 2 * r, long_side - 2 * r, short_side - 2 * r};
  for (double side : sides) {
    starts.push_back(b.poses().back());
    b.straight(side).arc(r, kPi / 2);
  }
  return starts;
}

// Retraces a counter-clockwise lap backwards after a U-turn at its start:
// clockwise corners, each followed by the side it leads into. `sides` limits
// how many straight sides are covered.
void rectangle_lap_reversed(PathBuilder& b, double long_side, double short_side, double r, int sides) {
  const double lengths[4] = {short_side - 2 * r, long_side - 2 * r, short_side - 2 * r, long_side - 2 * r};
  for (int k = 0; k < sides; ++k) b.arc(r, -kPi / 2).straight(lengths[k]);
}

std::vector<MarkingKind> kinds_cycle(std::mt19937_64& rng, std::size_t n) {
  std::vector<MarkingKind> k(n);
  std::uniform_int_distribution<int> pick(0, 3);
  for (auto& kind : k) kind = pick(rng) == 0 ? MarkingKind::arrow : MarkingKind::glyph;
  return k;
}

}  // namespace

Scenario make_scenario(ScenarioKind kind, std::uint64_t seed) {
  Scenario s;
  s.kind = kind;
  s.seed = seed;
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(kind) + 1);
  std::vector<Se2> planar;
  VariantPicker variants(rng);

  switch (kind) {
    case ScenarioKind::delivery: {
      PathBuilder b(Se2::identity());
      const Se2 s1 = b.poses().back();
      b.straight(25.0).arc(3.0, kPi / 2);
      const Se2 s2 = b.poses().back();
      b.straight(22.0).arc(3.0, -kPi / 2);
      const Se2 s3 = b.poses().back();
      b.straight(25.0).turn_in_place(kPi);
      b.straight(25.0).arc(3.0, kPi / 2).straight(22.0).arc(3.0, -kPi / 2).straight(25.0);
      planar = b.poses();
      place_along(s, rng, variants, s1, {8.0, 17.0}, kinds_cycle(rng, 2));
      place_along(s, rng, variants, s2, {7.5, 15.0}, {MarkingKind::glyph, MarkingKind::arrow});
      place_along(s, rng, variants, s3, {8.0, 17.0}, kinds_cycle(rng, 2));
      break;
    }
    case ScenarioKind::reverse_slope: {
      constexpr double kLong = 50.0;
      constexpr double kShort = 20.0;
      constexpr double kR = 3.0;
      PathBuilder b(Se2::identity());
      const auto sides = rectangle_lap(b, kLong, kShort, kR);
      b.turn_in_place(kPi);
      rectangle_lap_reversed(b, kLong, kShort, kR, 4);
      planar = b.poses();
      const double straight_long = kLong - 2 * kR;
      place_along(s, rng, variants, sides[0], {7.0, 15.5, 24.0, 32.5},
                  {MarkingKind::glyph, MarkingKind::arrow, MarkingKind::glyph, MarkingKind::disk});
      place_along(s, rng, variants, sides[1], {7.0}, {MarkingKind::glyph});
      place_along(s, rng, variants, sides[2], {16.0, 28.0}, {MarkingKind::arrow, MarkingKind::glyph});
      place_along(s, rng, variants, sides[3], {7.0}, {MarkingKind::glyph});
      // Sustained grade along the third side; rough ground around every
      // marking except the disk.
      const Se2 a = sides[2];
      const Se2 e = sides[2] * Se2(straight_long, 0.0, 0.0);
      s.slopes.push_back({a.translation(), e.translation(), 3.0, 0.06, 3.0});
      for (const MarkingTemplate& m : s.markings) {
        if (m.kind != MarkingKind::disk) s.rough.push_back({m.world_centroid(), 7.0, 0.05, 0.8});
      }
      s.bumps.push_back({(sides[0] * Se2(11.25, 0.0, 0.0)).translation(), 0.35, 0.06});
      s.bumps.push_back({(sides[0] * Se2(28.25, 0.0, 0.0)).translation(), 0.35, 0.06});
      break;
    }
    case ScenarioKind::large_loop: {
      constexpr double kLong = 80.0;
      constexpr double kShort = 40.0;
      constexpr double kR = 4.0;
      PathBuilder b(Se2::identity());
      const auto sides = rectangle_lap(b, kLong, kShort, kR);
      rectangle_lap(b, kLong, kShort, kR);
      b.turn_in_place(kPi);
      // Half a lap back the other way: the left short side, then the top long side.
      rectangle_lap_reversed(b, kLong, kShort, kR, 2);
      planar = b.poses();
      const std::vector<double> long_at = {7.0, 15.5, 24.0, 32.5, 41.0, 49.5, 58.0, 65.5};
      const std::vector<double> short_at = {7.0, 16.0, 25.0};
      auto long_kinds = kinds_cycle(rng, long_at.size());
      long_kinds[3] = MarkingKind::disk;
      place_along(s, rng, variants, sides[0], long_at, long_kinds);
      place_along(s, rng, variants, sides[1], short_at, kinds_cycle(rng, short_at.size()));
      place_along(s, rng, variants, sides[2], long_at, kinds_cycle(rng, long_at.size()));
      place_along(s, rng, variants, sides[3], short_at, kinds_cycle(rng, short_at.size()));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int k = 0; k < 6; ++k) {
        const double at = 4.0 + 60.0 * unit(rng);
        s.bumps.push_back({(sides[k % 2 == 0 ? 0 : 2] * Se2(at, 0.0, 0.0)).translation(), 0.35, 0.05});
      }
      break;
    }
  }
  apply_terrain(s, planar);
  return s;
}

SequenceAnnotations annotate(const Scenario& s) {
  SequenceAnnotations ann;
  ann.sequence = to_string(s.kind);
  for (const MarkingTemplate& m : s.markings) {
    MarkingAnnotation a;
    a.id = m.id;
    a.name = m.name;
    a.symmetric = m.symmetric;
    a.centroid = m.world_centroid();
    ann.markings.push_back(std::move(a));
  }
  constexpr int kGap = 3;
  const VirtualCamera& vc = s.virtual_camera;
  std::vector<int> last_seen(s.markings.size(), -1000);
  for (int f = 0; f < s.frame_count(); ++f) {
    const Eigen::Vector2d pos = s.trajectory[static_cast<std::size_t>(f)].planar().translation();
    BinaryImage valid;
    for (std::size_t k = 0; k < s.markings.size(); ++k) {
      if ((ann.markings[k].centroid - pos).norm() > kCullRadius) continue;
      const BinaryImage fp = render_bev_footprint(s, f, s.markings[k].id);
      if (fp.empty()) continue;
      if (valid.width == 0) valid = bev_valid_region(s.camera, vc, true_motion(s, f));
      const BinaryShape shape = BinaryShape::from_image(fp);
      bool visible = false;
      for (const PixelCoord& p : shape.pixels) {
        if (valid.at(p.u, p.v)) {
          visible = true;
          break;
        }
      }
      if (!visible) continue;
      const bool full = !touches_boundary(shape, vc.width, vc.height, &valid);
      auto& visits = ann.markings[k].visits;
      if (visits.empty() || f - last_seen[k] > kGap) {
        visits.push_back({f, f, s.trajectory[static_cast<std::size_t>(f)].yaw, false});
      }
      MarkingVisit& v = visits.back();
      v.last_frame = f;
      if (full && !v.detectable) {
        v.detectable = true;
        v.heading = s.trajectory[static_cast<std::size_t>(f)].yaw;
      }
      last_seen[k] = f;
    }
  }
  return ann;
}

}  // namespace sgfloc

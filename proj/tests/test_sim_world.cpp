#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "sgfloc/camera_geometry.hpp"
#include "sgfloc/sgf_detection.hpp"
#include "sgfloc/sim_world.hpp"

using namespace sgfloc;

namespace {

constexpr double kPi = std::numbers::pi;

bool inside_polygon(const std::vector<Eigen::Vector2d>& poly, const Eigen::Vector2d& p) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) && p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x()) {
      in = !in;
    }
  }
  return in;
}

// One robot pose on flat ground with a single marking.
Scenario single_frame(const MarkingTemplate& m, double pitch = 0.0, double roll = 0.0) {
  Scenario s;
  Pose6 p;
  p.pitch = pitch;
  p.roll = roll;
  s.trajectory.push_back(p);
  s.ground_pitch.push_back(0.0);
  s.markings.push_back(m);
  return s;
}

// Front-image classification by casting every pixel ray onto the ground.
BinaryImage oracle_mask(const Scenario& s, double psi, double theta) {
  BinaryImage img(s.camera.width, s.camera.height);
  const auto polys = s.markings.front().world_polygons();
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) {
      const auto g = oracle::ray_plane(u, v, s.camera, psi, theta);
      if (!g) continue;
      bool in = false;
      for (const auto& poly : polys) in = in || inside_polygon(poly.vertices, *g);
      img.at(u, v) = in ? 1 : 0;
    }
  return img;
}

// Pixels where the two masks disagree, and how many of those are not on an
// edge of the reference.
std::pair<int, int> disagreement(const BinaryImage& got, const BinaryImage& ref) {
  int diff = 0, interior = 0;
  for (int v = 0; v < ref.height; ++v)
    for (int u = 0; u < ref.width; ++u) {
      if (got.at(u, v) == ref.at(u, v)) continue;
      ++diff;
      bool edge = false;
      for (int dv = -1; dv <= 1; ++dv)
        for (int du = -1; du <= 1; ++du) {
          const int x = u + du, y = v + dv;
          if (x >= 0 && y >= 0 && x < ref.width && y < ref.height && ref.at(x, y) != ref.at(u, v)) edge = true;
        }
      if (!edge) ++interior;
    }
  return {diff, interior};
}

int count(const BinaryImage& img) {
  int n = 0;
  for (auto b : img.data) n += b ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("rasterize_polygon samples pixel centers") {
  BinaryImage img(8, 8);
  rasterize_polygon({{1.5, 1.5}, {4.5, 1.5}, {4.5, 4.5}, {1.5, 4.5}}, img);
  CHECK(count(img) == 9);
  CHECK(img.at(2, 2) == 1);
  CHECK(img.at(4, 4) == 1);
  CHECK(img.at(1, 1) == 0);
  CHECK(img.at(5, 4) == 0);
  // partly off-image polygons are clipped, not wrapped
  BinaryImage small(4, 4);
  rasterize_polygon({{-10, -10}, {10, -10}, {10, 10}, {-10, 10}}, small);
  CHECK(count(small) == 16);
}

TEST_CASE("a marking behind the robot renders nothing") {
  const Scenario s = single_frame(make_marking(MarkingKind::arrow, 0.3, Se2(-3.0, 0.0, 0.0)));
  CHECK(count(render_mask(s, 0)) == 0);
}

TEST_CASE("flat dead-ahead footprint agrees with ray casting") {
  const Scenario s = single_frame(make_marking(MarkingKind::diamond, 0.5, Se2(3.5, 0.2, 0.3)));
  const BinaryImage got = render_mask(s, 0);
  const BinaryImage ref = oracle_mask(s, 0.0, 0.0);
  REQUIRE(count(ref) > 500);
  const auto [diff, interior] = disagreement(got, ref);
  CHECK(interior == 0);
  CHECK(diff < count(ref) / 10);
}

TEST_CASE("footprint during a bump follows the extra pitch") {
  const double theta = 0.05;
  const Scenario s = single_frame(make_marking(MarkingKind::arrow, 0.4, Se2(3.5, 0.0, 0.0)), theta, 0.02);
  CHECK(true_motion(s, 0).theta == theta);
  const BinaryImage got = render_mask(s, 0);
  const auto [diff, interior] = disagreement(got, oracle_mask(s, 0.02, theta));
  CHECK(interior == 0);
  // the flat-ground footprint is clearly elsewhere
  const auto [flat_diff, flat_interior] = disagreement(got, oracle_mask(s, 0.0, 0.0));
  CHECK(flat_interior > 100);
  (void)diff;
  (void)flat_diff;
}

TEST_CASE("noise-free odometry reproduces relative poses") {
  Scenario s = make_scenario(ScenarioKind::delivery, 3);
  s.noise = {0.0, 0.0, 0.0};
  const auto odo = noisy_odometry(s, 42);
  REQUIRE(odo.size() == s.trajectory.size());
  for (std::size_t i = 1; i < odo.size(); i += 7) {
    const Se2 want = s.trajectory[i - 1].planar().inverse() * s.trajectory[i].planar();
    const Se2 got = odo[i - 1].planar().inverse() * odo[i].planar();
    CHECK(std::hypot(got.x - want.x, got.y - want.y) < 1e-9);
    CHECK(std::abs(wrap_angle(got.yaw - want.yaw)) < 1e-12);
  }
}

TEST_CASE("odometry and scenarios are seed-deterministic") {
  const Scenario a = make_scenario(ScenarioKind::delivery, 5);
  const Scenario b = make_scenario(ScenarioKind::delivery, 5);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  REQUIRE(a.markings.size() == b.markings.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(a.trajectory[i].x == b.trajectory[i].x);
    CHECK(a.trajectory[i].pitch == b.trajectory[i].pitch);
  }
  for (std::size_t k = 0; k < a.markings.size(); ++k) CHECK(a.markings[k].pose.vec() == b.markings[k].pose.vec());
  const auto o1 = noisy_odometry(a, 9);
  const auto o2 = noisy_odometry(a, 9);
  const auto o3 = noisy_odometry(a, 10);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < o1.size(); ++i) {
    same = same && o1[i].x == o2[i].x && o1[i].y == o2[i].y && o1[i].yaw == o2[i].yaw;
    differs = differs || o1[i].x != o3[i].x;
  }
  CHECK(same);
  CHECK(differs);
  CHECK(render_mask(a, 200).data == render_mask(b, 200).data);
  const Scenario c = make_scenario(ScenarioKind::delivery, 6);
  bool moved = false;
  for (std::size_t k = 0; k < std::min(a.markings.size(), c.markings.size()); ++k) {
    moved = moved || a.markings[k].pose.vec() != c.markings[k].pose.vec();
  }
  CHECK(moved);
}

TEST_CASE("heading drift follows random-walk statistics") {
  // 1000 straight steps, yaw noise only; terminal yaw error ~ N(0, 1000 s^2)
  Scenario s;
  for (int i = 0; i <= 1000; ++i) {
    Pose6 p;
    p.timestamp = 0.1 * i;
    p.x = 0.1 * i;
    s.trajectory.push_back(p);
    s.ground_pitch.push_back(0.0);
  }
  s.noise = {0.0, 0.0, 0.002};
  double chi2 = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const double e = noisy_odometry(s, seed).back().yaw;
    chi2 += e * e / (1000.0 * 0.002 * 0.002);
  }
  // two-sided 99.9% band of chi-square with 100 degrees of freedom
  CHECK(chi2 > 61.9);
  CHECK(chi2 < 149.4);
}

TEST_CASE("scenario contracts") {
  SUBCASE("delivery") {
    const Scenario s = make_scenario(ScenarioKind::delivery, 1);
    CHECK(s.markings.size() >= 5);
    for (std::size_t i = 1; i < s.trajectory.size(); ++i) CHECK(s.trajectory[i].timestamp > s.trajectory[i - 1].timestamp);
    const auto ann = annotate(s);
    int reverse = 0;
    for (const auto& m : ann.markings)
      if (m.visits.size() >= 2 && std::abs(wrap_angle(m.visits[1].heading - m.visits[0].heading)) > 2.8) ++reverse;
    CHECK(reverse >= 1);
  }
  SUBCASE("reverse_slope") {
    const Scenario s = make_scenario(ScenarioKind::reverse_slope, 1);
    const auto ann = annotate(s);
    for (const auto& m : ann.markings) {
      std::vector<double> headings;  // passing glimpses at corners are not revisits
      for (const auto& v : m.visits)
        if (v.detectable) headings.push_back(v.heading);
      REQUIRE(headings.size() == 2);
      CHECK(std::abs(wrap_angle(headings[1] - headings[0])) > kPi - 0.3);
    }
    double max_grade = 0.0;
    for (double g : s.ground_pitch) max_grade = std::max(max_grade, std::abs(g));
    CHECK(max_grade == doctest::Approx(0.06).epsilon(0.01));
  }
  SUBCASE("large_loop") {
    const Scenario s = make_scenario(ScenarioKind::large_loop, 1);
    CHECK(s.markings.size() >= 20);
    double length = 0.0;
    for (std::size_t i = 1; i < s.trajectory.size(); ++i) {
      length += std::hypot(s.trajectory[i].x - s.trajectory[i - 1].x, s.trajectory[i].y - s.trajectory[i - 1].y);
    }
    CHECK(length >= 500.0);
    const auto ann = annotate(s);
    int forward = 0, reverse = 0;
    for (const auto& m : ann.markings)
      for (std::size_t k = 1; k < m.visits.size(); ++k) {
        const double d = std::abs(wrap_angle(m.visits[k].heading - m.visits[0].heading));
        forward += d < 0.3 ? 1 : 0;
        reverse += d > kPi - 0.3 ? 1 : 0;
      }
    CHECK(forward > 0);
    CHECK(reverse > 0);
  }
}

TEST_CASE("rendered masks warp back onto the orthographic footprint") {
  const Scenario s = make_scenario(ScenarioKind::reverse_slope, 2);
  int frames = 0;
  double worst = 1.0;
  for (int f = 0; f < s.frame_count(); f += 4) {
    const BinaryImage fp = render_bev_footprint(s, f);
    if (count(fp) == 0) continue;
    const BevMask bev = warp_mask_to_bev(render_mask(s, f), s.camera, s.virtual_camera, true_motion(s, f));
    // every marking in view must sit fully inside the visible region
    bool full = true;
    for (std::size_t i = 0; i < fp.data.size(); ++i) full = full && (!fp.data[i] || bev.valid.data[i]);
    for (const auto& sh : connected_components(fp, 1)) full = full && !touches_boundary(sh, fp.width, fp.height, &bev.valid);
    if (!full) continue;
    int inter = 0, uni = 0;
    for (std::size_t i = 0; i < fp.data.size(); ++i) {
      inter += fp.data[i] && bev.mask.data[i];
      uni += fp.data[i] || bev.mask.data[i];
    }
    worst = std::min(worst, static_cast<double>(inter) / uni);
    ++frames;
  }
  CHECK(frames > 50);
  CHECK(worst >= 0.9);
}

TEST_CASE("templates") {
  const auto disk = make_marking(MarkingKind::disk, 0.2, Se2(1, 2, 0.5));
  CHECK(disk.symmetric);
  CHECK((disk.world_centroid() - Eigen::Vector2d(1, 2)).norm() < 0.02);
  // half-turn symmetric shapes count as symmetric too
  CHECK(make_marking(MarkingKind::diamond, 0.3, Se2()).symmetric);
  CHECK(make_marking(MarkingKind::stripe, 0.3, Se2()).symmetric);
  for (MarkingKind k : {MarkingKind::arrow, MarkingKind::glyph}) {
    const auto m = make_marking(k, 0.3, Se2(0, 0, 0));
    CHECK_FALSE(m.symmetric);
    CHECK_FALSE(m.polygons.empty());
  }
}

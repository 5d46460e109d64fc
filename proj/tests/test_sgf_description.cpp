#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <random>

#include "sgfloc/errors.hpp"
#include "sgfloc/sgf_description.hpp"
#include "sgfloc/sim_world.hpp"

using namespace sgfloc;

namespace {

constexpr double kPi = std::numbers::pi;

SgfPoints centered_points(std::vector<Eigen::Vector2d> pts) {
  SgfPoints p;
  for (const auto& q : pts) p.centroid += q;
  p.centroid /= static_cast<double>(pts.size());
  p.points = std::move(pts);
  p.anchor_pose = 0;
  return p;
}

SgfPoints rotated(const SgfPoints& p, double angle) {
  const Eigen::Rotation2Dd r(angle);
  SgfPoints out = p;
  for (auto& q : out.points) q = p.centroid + r * (q - p.centroid);
  return out;
}

bool inside(const std::vector<Eigen::Vector2d>& poly, const Eigen::Vector2d& q) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y() > q.y()) != (b.y() > q.y()) && q.x() < (b.x() - a.x()) * (q.y() - a.y()) / (b.y() - a.y()) + a.x()) {
      in = !in;
    }
  }
  return in;
}

// Grid samples inside a marking's polygons (local frame), 2.5 cm pitch.
SgfPoints sample_marking(const MarkingTemplate& m, double pitch = 0.025) {
  std::vector<Eigen::Vector2d> pts;
  Eigen::Vector2d lo(1e9, 1e9), hi(-1e9, -1e9);
  for (const auto& poly : m.polygons)
    for (const auto& v : poly.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  for (double y = lo.y() + pitch / 2; y < hi.y(); y += pitch)
    for (double x = lo.x() + pitch / 2; x < hi.x(); x += pitch) {
      bool in = false;
      for (const auto& poly : m.polygons) in ^= inside(poly.vertices, {x, y});
      if (in) pts.emplace_back(x, y);
    }
  return centered_points(std::move(pts));
}

SgfPoints l_shape() {
  std::vector<Eigen::Vector2d> pts;
  for (double y = 0.0; y < 1.4; y += 0.025)
    for (double x = 0.0; x < 0.9; x += 0.025)
      if (x < 0.25 || y < 0.25) pts.emplace_back(x, y);
  return centered_points(std::move(pts));
}

SgfPoints disk_points(double radius) {
  std::vector<Eigen::Vector2d> pts;
  for (double y = -radius; y <= radius; y += 0.025)
    for (double x = -radius; x <= radius; x += 0.025)
      if (std::hypot(x, y) <= radius) pts.emplace_back(x + 0.0123, y - 0.0071);
  return centered_points(std::move(pts));
}

Descriptor hand_descriptor(std::initializer_list<double> v) {
  Descriptor d{DescriptorParams{2.0, 4, 2}, Eigen::MatrixXd(2, 4)};
  auto it = v.begin();
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) d.bins(r, c) = *it++;
  return d;
}

// independently coded argmin over shifts, first minimum wins
ShiftMatch exhaustive_shift(const Descriptor& q, const Descriptor& g) {
  ShiftMatch best{-1, 0.0};
  for (int k = 0; k < q.params.n_sectors; ++k) {
    const double d = descriptor_distance(q, g, k);
    if (best.shift < 0 || d < best.distance) best = {k, d};
  }
  return best;
}

}  // namespace

TEST_CASE("build_descriptor: single point bin arithmetic") {
  SgfPoints p;
  p.centroid = {1.0, -2.0};
  p.points = {p.centroid + Eigen::Vector2d(0.11, 0.0)};
  const Descriptor d = build_descriptor(p);
  CHECK(d.bins.rows() == 10);
  CHECK(d.bins.cols() == 90);
  CHECK(d.bins(0, 0) == 1.0);
  CHECK(d.bins.sum() == 1.0);

  p.points = {p.centroid, p.centroid + Eigen::Vector2d(2.5, 0.0)};
  const Descriptor e = build_descriptor(p);
  CHECK(e.bins(0, 0) == 1.0);  // rho = 0 lands in ring 0, sector 0
  CHECK(e.bins.sum() == 1.0);  // rho >= L_max discarded
}

TEST_CASE("build_descriptor matches a per-point binning oracle") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> d(-1.6, 1.6);
  for (int trial = 0; trial < 20; ++trial) {
    SgfPoints p;
    p.centroid = {0.3, 0.2};
    for (int i = 0; i < 200; ++i) p.points.emplace_back(p.centroid.x() + d(rng), p.centroid.y() + d(rng));
    const DescriptorParams params;
    Eigen::MatrixXd want = Eigen::MatrixXd::Zero(10, 90);
    for (const auto& q : p.points) {
      const double dx = q.x() - p.centroid.x(), dy = q.y() - p.centroid.y();
      const double rho = std::sqrt(dx * dx + dy * dy);
      if (rho >= 2.0) continue;
      double phi = std::atan2(dy, dx);
      if (phi < 0) phi += 2 * kPi;
      int ring = static_cast<int>(std::floor(rho / 0.2));
      int sector = static_cast<int>(std::floor(phi / (2 * kPi / 90)));
      ring = std::min(ring, 9);
      sector = std::min(sector, 89);
      want(ring, sector) += 1.0;
    }
    CHECK(build_descriptor(p, params).bins == want);
  }
}

TEST_CASE("rotating the points by whole sectors shifts the columns exactly") {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> rho(0.05, 1.95), frac(0.05, 0.95);
  std::uniform_int_distribution<int> sector(0, 89);
  const double w = 2 * kPi / 90;
  SgfPoints p;
  p.centroid = {0.0, 0.0};
  std::vector<std::pair<double, double>> polar;
  for (int i = 0; i < 150; ++i) polar.emplace_back(rho(rng), (sector(rng) + frac(rng)) * w);
  for (const auto& [r, a] : polar) p.points.emplace_back(r * std::cos(a), r * std::sin(a));
  const Descriptor d = build_descriptor(p);
  for (int k : {1, 17, 45, 89}) {
    SgfPoints q;
    for (const auto& [r, a] : polar) q.points.emplace_back(r * std::cos(a + k * w), r * std::sin(a + k * w));
    CHECK(build_descriptor(q).bins == shift_columns(d, k).bins);
  }
}

TEST_CASE("descriptors are translation invariant and rebuild bit-exactly") {
  SgfPoints a = l_shape();
  SgfPoints b = a;
  for (auto& q : b.points) q += Eigen::Vector2d(17.0, -4.0);
  b.centroid += Eigen::Vector2d(17.0, -4.0);
  // the translation only moves the exact binary point of the offsets; bins must agree
  CHECK(build_descriptor(a).bins == build_descriptor(b).bins);
  CHECK(build_descriptor(a).bins == build_descriptor(a).bins);
}

TEST_CASE("descriptor_distance examples") {
  const Descriptor q = hand_descriptor({1, 0, 2, 0,  //
                                        1, 3, 0, 0});
  const Descriptor g = hand_descriptor({1, 1, 0, 0,  //
                                        0, 1, 2, 0});
  // columns: (1,1)·(1,0) cos = 1/√2; (0,3)·(1,1) cos = 1/√2; (2,0)·(0,2) cos = 0; both empty = 0
  const double want = ((1 - 1 / std::sqrt(2.0)) + (1 - 1 / std::sqrt(2.0)) + 1.0 + 0.0) / 4.0;
  CHECK(descriptor_distance(q, g, 0) == doctest::Approx(want).epsilon(1e-12));
  // shift 1: q col j vs g col j+1: (1,1)-(1,1) 0; (0,3)-(0,2) 0; (2,0)-(0,0) one-sided 1; (0,0)-(1,0) 1
  CHECK(descriptor_distance(q, g, 1) == doctest::Approx(0.5));
  CHECK(descriptor_distance(q, q, 0) == 0.0);
  for (int k = 0; k < 4; ++k) CHECK(descriptor_distance(q, shift_columns(q, k), k) == 0.0);
  CHECK_THROWS_AS(descriptor_distance(q, build_descriptor(l_shape()), 0), ParamMismatch);
}

TEST_CASE("best_shift equals the exhaustive search") {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> a(0, 2 * kPi);
  const SgfPoints base = l_shape();
  for (int trial = 0; trial < 30; ++trial) {
    const Descriptor q = build_descriptor(base);
    const Descriptor g = build_descriptor(rotated(base, a(rng)));
    const ShiftMatch got = best_shift(q, g);
    const ShiftMatch want = exhaustive_shift(q, g);
    CHECK(got.shift == want.shift);
    CHECK(got.distance == want.distance);
    CHECK(got.distance <= descriptor_distance(q, g, 0));
  }
  const Descriptor q = build_descriptor(base);
  CHECK(best_shift(q, q).shift == 0);
  CHECK(best_shift(q, q).distance == 0.0);
  CHECK(best_shift(q, shift_columns(q, 23)).shift == 23);
}

TEST_CASE("best_shift recovers a 137 degree rotation under point noise") {
  std::mt19937 rng(21);
  std::normal_distribution<double> noise(0.0, 0.02);
  const SgfPoints base = l_shape();
  SgfPoints r = rotated(base, 137.0 * kPi / 180.0);
  for (auto& q : r.points) q += Eigen::Vector2d(noise(rng), noise(rng));
  const int shift = best_shift(build_descriptor(base), build_descriptor(r)).shift;
  CHECK(std::abs(shift - static_cast<int>(std::lround(137.0 / 4.0))) <= 1);
}

TEST_CASE("symmetry_test examples") {
  CHECK(symmetry_test(build_descriptor(disk_points(0.8))));
  // annulus: ring of points at radius 1.2
  SgfPoints ring;
  for (int i = 0; i < 720; ++i) ring.points.emplace_back(1.2 * std::cos(i * kPi / 360), 1.2 * std::sin(i * kPi / 360));
  CHECK(symmetry_test(build_descriptor(ring)));

  const Descriptor l = build_descriptor(l_shape());
  CHECK_FALSE(symmetry_test(l));
  double min_self = 1e9;
  for (int k = 15; k <= 75; ++k) min_self = std::min(min_self, descriptor_distance(l, l, k));
  CHECK(min_self > 0.3);
}

TEST_CASE("groups: first instance seeds group 0, a rotated revisit joins it") {
  GroupSet groups;
  SgfInstance a;
  a.id = 0;
  a.points = l_shape();
  a.descriptor = build_descriptor(a.points);
  CHECK(assign_to_group(a, groups) == 0);
  CHECK(groups.group(0).members.size() == 1);

  std::mt19937 rng(2);
  std::normal_distribution<double> noise(0.0, 0.02);
  SgfInstance b;
  b.id = 1;
  b.points = rotated(a.points, kPi);
  for (auto& q : b.points.points) q += Eigen::Vector2d(noise(rng), noise(rng));
  b.descriptor = build_descriptor(b.points);
  CHECK(assign_to_group(b, groups) == 0);
  CHECK(std::abs(b.group_shift - 45) <= 1);

  // mean = arithmetic mean of the shift-aligned members
  const SgfGroup& g = groups.group(0);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(10, 90);
  for (const auto& m : g.members) sum += m.aligned.bins;
  CHECK((g.mean.bins - sum / 2.0).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_FALSE(g.symmetric);
  CHECK_THROWS_AS(groups.group(5), InvalidArgument);
}

TEST_CASE("group mean is idempotent under a repeated instance") {
  GroupSet groups;
  SgfInstance a;
  a.id = 0;
  a.points = l_shape();
  a.descriptor = build_descriptor(a.points);
  groups.assign(a);
  const Eigen::MatrixXd before = groups.group(0).mean.bins;
  SgfInstance again = a;
  again.id = 1;
  groups.assign(again);
  CHECK((groups.group(0).mean.bins - before).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("group symmetric flag follows the majority of members") {
  GroupSet groups(2.0);  // everything joins one group
  int id = 0;
  auto add = [&](const SgfPoints& p) {
    SgfInstance s;
    s.id = id++;
    s.points = p;
    s.descriptor = build_descriptor(p);
    groups.assign(s);
  };
  add(disk_points(0.8));
  CHECK(groups.group(0).symmetric);
  add(l_shape());
  CHECK_FALSE(groups.group(0).symmetric);  // 1 of 2 is not a majority
  add(disk_points(0.7));
  CHECK(groups.group(0).symmetric);
}

TEST_CASE("simulator templates: arrow and C glyph form distinct groups") {
  const MarkingTemplate arrow = make_marking(MarkingKind::arrow, 0.3, Se2::identity());
  const MarkingTemplate glyph = make_marking(MarkingKind::glyph, 4.5 / 6.0, Se2::identity());
  SgfInstance a, g;
  a.id = 0;
  a.points = sample_marking(arrow);
  a.descriptor = build_descriptor(a.points);
  g.id = 1;
  g.points = sample_marking(glyph);
  g.descriptor = build_descriptor(g.points);
  CHECK(best_shift(a.descriptor, g.descriptor).distance > 0.7);
  GroupSet groups;
  CHECK(groups.assign(a) == 0);
  CHECK(groups.assign(g) == 1);
  CHECK_FALSE(symmetry_test(a.descriptor));
  CHECK_FALSE(symmetry_test(g.descriptor));
  CHECK(symmetry_test(build_descriptor(sample_marking(make_marking(MarkingKind::disk, 0.0, Se2::identity())))));
}

TEST_CASE("back_project: BEV square to metric square") {
  const VirtualCamera vc;
  SgfCandidate c;
  // 40 x 40 px = 0.5 m at 12.5 mm/px
  for (int v = 100; v < 140; ++v)
    for (int u = 150; u < 190; ++u) c.shape.pixels.push_back({u, v});
  const SgfPoints p = back_project(c, vc, 3);
  CHECK(p.anchor_pose == 3);
  Eigen::Vector2d lo(1e9, 1e9), hi(-1e9, -1e9);
  for (const auto& q : p.points) {
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
    CHECK((q - p.centroid).norm() < 2.0);
  }
  CHECK(std::abs((hi.x() - lo.x()) - 0.5) <= 0.025 + 0.0125);
  CHECK(std::abs((hi.y() - lo.y()) - 0.5) <= 0.025 + 0.0125);

  SgfCandidate tiny;
  tiny.shape.pixels.push_back({10, 10});
  CHECK_THROWS_AS(back_project(tiny, vc, 0), DegenerateShape);
  CHECK_THROWS_AS(back_project(SgfCandidate{}, vc, 0), DegenerateShape);
}

TEST_CASE("back_project round-trips ground points within the grid pitch") {
  const VirtualCamera vc;
  SgfCandidate c;
  std::vector<Eigen::Vector2d> ground;
  for (double x = 3.0; x < 3.6; x += 0.05)
    for (double y = -0.3; y < 0.3; y += 0.05) {
      const Eigen::Vector2d b = ground_to_bev({x, y}, vc);
      c.shape.pixels.push_back({static_cast<int>(std::lround(b.x())), static_cast<int>(std::lround(b.y()))});
      ground.emplace_back(x, y);
    }
  const SgfPoints p = back_project(c, vc, 0);
  for (const auto& q : p.points) {
    double best = 1e9;
    for (const auto& g : ground) best = std::min(best, (g - q).norm());
    CHECK(best <= 0.025);
  }
}

TEST_CASE("voxel downsampling averages per cell in cell order") {
  const std::vector<Eigen::Vector2d> pts{{0.01, 0.01}, {0.03, 0.01}, {0.2, 0.2}, {-0.01, 0.0}};
  const auto out = voxel_downsample(pts, 0.05);
  REQUIRE(out.size() == 3);
  CHECK(out[0].x() == doctest::Approx(-0.01));
  CHECK(out[1].x() == doctest::Approx(0.02));
  CHECK(out[2].x() == doctest::Approx(0.2));
  CHECK_THROWS_AS(voxel_downsample(pts, 0.0), InvalidArgument);
}

TEST_CASE("descriptor record format") {
  SgfInstance s;
  s.id = 4;
  s.frame = 10;
  s.points = l_shape();
  s.descriptor = build_descriptor(s.points);
  const std::string rec = format_descriptor_record(s);
  CHECK(rec.rfind("4 10 0 -1 10 90 2 ", 0) == 0);
  CHECK(std::count(rec.begin(), rec.end(), ' ') == 8 + 900);
  CHECK(rec.back() == '\n');
}

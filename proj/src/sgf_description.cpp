#include "sgfloc/sgf_description.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

#include "sgfloc/errors.hpp"

namespace sgfloc {

double DescriptorParams::sector_angle() const { return 2.0 * std::numbers::pi / n_sectors; }

void DescriptorParams::validate() const {
  if (!(l_max > 0.0)) throw InvalidArgument("descriptor: l_max must be > 0");
  if (n_sectors < 1 || n_rings < 1) throw InvalidArgument("descriptor: n_sectors and n_rings must be >= 1");
}

std::vector<Eigen::Vector2d> SgfPoints::centered() const {
  std::vector<Eigen::Vector2d> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p - centroid);
  return out;
}

std::vector<Eigen::Vector2d> voxel_downsample(const std::vector<Eigen::Vector2d>& points, double pitch) {
  if (!(pitch > 0.0)) throw InvalidArgument("voxel pitch must be > 0");
  struct Cell {
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    int count = 0;
  };
  std::map<std::pair<long long, long long>, Cell> cells;
  for (const auto& p : points) {
    const auto key = std::make_pair(static_cast<long long>(std::floor(p.x() / pitch)),
                                    static_cast<long long>(std::floor(p.y() / pitch)));
    Cell& c = cells[key];
    c.sum += p;
    ++c.count;
  }
  std::vector<Eigen::Vector2d> out;
  out.reserve(cells.size());
  for (const auto& [key, c] : cells) {
    out.push_back(c.sum / c.count);
  }
  return out;
}

SgfPoints back_project(const SgfCandidate& candidate, const VirtualCamera& vc, int anchor_pose, double grid_pitch,
                       double l_max) {
  if (candidate.shape.empty()) {
    throw DegenerateShape("candidate shape is empty");
  }
  std::vector<Eigen::Vector2d> raw;
  raw.reserve(candidate.shape.size());
  for (const PixelCoord& px : candidate.shape.pixels) {
    raw.push_back(bev_to_ground(px.u, px.v, vc).vec());
  }
  std::vector<Eigen::Vector2d> down = voxel_downsample(raw, grid_pitch);

  SgfPoints out;
  out.anchor_pose = anchor_pose;
  for (const auto& p : down) out.centroid += p;
  out.centroid /= static_cast<double>(down.size());
  for (const auto& p : down) {
    if ((p - out.centroid).norm() < l_max) out.points.push_back(p);
  }
  if (out.points.size() < 10) {
    throw DegenerateShape("only " + std::to_string(out.points.size()) + " points survive downsampling");
  }
  return out;
}

Descriptor build_descriptor(const SgfPoints& p, const DescriptorParams& params) {
  params.validate();
  Descriptor d{params, Eigen::MatrixXd::Zero(params.n_rings, params.n_sectors)};
  const double gap = params.ring_gap();
  const double sector = params.sector_angle();
  for (const auto& pt : p.points) {
    const Eigen::Vector2d rel = pt - p.centroid;
    const double rho = rel.norm();
    if (rho >= params.l_max) continue;
    double phi = std::atan2(rel.y(), rel.x());
    if (phi < 0.0) phi += 2.0 * std::numbers::pi;
    const int ring = std::min(static_cast<int>(rho / gap), params.n_rings - 1);
    const int sec = std::min(static_cast<int>(phi / sector), params.n_sectors - 1);
    d.bins(ring, sec) += 1.0;
  }
  return d;
}

Descriptor shift_columns(const Descriptor& d, int k) {
  const int n = d.params.n_sectors;
  const int s = ((k % n) + n) % n;
  Descriptor out{d.params, Eigen::MatrixXd(d.bins.rows(), n)};
  for (int j = 0; j < n; ++j) {
    out.bins.col((j + s) % n) = d.bins.col(j);
  }
  return out;
}

double descriptor_distance(const Descriptor& q, const Descriptor& g, int shift) {
  if (!(q.params == g.params) || q.bins.rows() != g.bins.rows() || q.bins.cols() != g.bins.cols()) {
    throw ParamMismatch("descriptor parameters differ");
  }
  const int n = q.params.n_sectors;
  const int s = ((shift % n) + n) % n;
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    const auto a = q.bins.col(j);
    const auto b = g.bins.col((j + s) % n);
    const double na2 = a.squaredNorm();
    const double nb2 = b.squaredNorm();
    if (na2 == 0.0 && nb2 == 0.0) continue;
    if (na2 == 0.0 || nb2 == 0.0) {
      sum += 1.0;
      continue;
    }
    // sqrt of the product keeps identical count columns at exactly zero
    sum += std::max(0.0, 1.0 - a.dot(b) / std::sqrt(na2 * nb2));
  }
  return sum / n;
}

ShiftMatch best_shift(const Descriptor& q, const Descriptor& g) {
  ShiftMatch best{0, descriptor_distance(q, g, 0)};
  for (int k = 1; k < q.params.n_sectors; ++k) {
    const double d = descriptor_distance(q, g, k);
    if (d < best.distance) best = {k, d};
  }
  return best;
}

bool symmetry_test(const Descriptor& d, double tol) {
  const int n = d.params.n_sectors;
  const int lo = n / 6;
  for (int k = lo; k <= n - lo; ++k) {
    if (descriptor_distance(d, d, k) < tol) return true;
  }
  return false;
}

int GroupSet::assign(SgfInstance& inst) {
  int best_group = -1;
  ShiftMatch best{0, 0.0};
  for (const SgfGroup& g : groups_) {
    const ShiftMatch m = best_shift(inst.descriptor, g.mean);
    if (best_group < 0 || m.distance < best.distance) {
      best_group = g.id;
      best = m;
    }
  }

  if (best_group >= 0 && best.distance < d_new_) {
    SgfGroup& g = groups_[static_cast<std::size_t>(best_group)];
    g.members.push_back({inst.id, best.shift, shift_columns(inst.descriptor, best.shift),
                         symmetry_test(inst.descriptor, symmetry_tol_)});
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(g.mean.bins.rows(), g.mean.bins.cols());
    std::size_t symmetric = 0;
    for (const SgfGroupMember& m : g.members) {
      sum += m.aligned.bins;
      symmetric += m.symmetric ? 1 : 0;
    }
    g.mean.bins = sum / static_cast<double>(g.members.size());
    g.symmetric = 2 * symmetric > g.members.size();
    inst.group = g.id;
    inst.group_shift = best.shift;
    return g.id;
  }

  SgfGroup g;
  g.id = static_cast<int>(groups_.size());
  g.mean = inst.descriptor;
  g.members.push_back({inst.id, 0, inst.descriptor, symmetry_test(inst.descriptor, symmetry_tol_)});
  g.symmetric = g.members.back().symmetric;
  groups_.push_back(std::move(g));
  inst.group = groups_.back().id;
  inst.group_shift = 0;
  return inst.group;
}

const SgfGroup& GroupSet::group(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= groups_.size()) {
    throw InvalidArgument("unknown group id " + std::to_string(id));
  }
  return groups_[static_cast<std::size_t>(id)];
}

int assign_to_group(SgfInstance& inst, GroupSet& groups) { return groups.assign(inst); }

std::string format_descriptor_record(const SgfInstance& inst) {
  const Descriptor& d = inst.descriptor;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d %d %d %d %d %d %.6g %.6f %.6f", inst.id, inst.frame, inst.points.anchor_pose,
                inst.group, d.params.n_rings, d.params.n_sectors, d.params.l_max, inst.points.centroid.x(),
                inst.points.centroid.y());
  std::string out = buf;
  for (int r = 0; r < d.bins.rows(); ++r) {
    for (int c = 0; c < d.bins.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), " %.6g", d.bins(r, c));
      out += buf;
    }
  }
  out += '\n';
  return out;
}

}  // namespace sgfloc

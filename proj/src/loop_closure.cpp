#include "sgfloc/loop_closure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "sgfloc/errors.hpp"

namespace sgfloc {

namespace {

struct Matches {
  std::vector<std::size_t> source;
  std::vector<std::size_t> target;
  std::vector<double> dist;  // nearest-neighbour distance of every source point
  double objective = 0.0;
  double inlier_ms = 0.0;  // mean squared distance of the pairs kept
};

// Uniform bucket grid over the target bounding box. Exact nearest neighbour:
// rings of cells are searched until the ring lies beyond the best distance.
class NearestGrid {
 public:
  NearestGrid(std::span<const Eigen::Vector2d> pts, double cell) : pts_(pts), cell_(cell) {
    lo_ = pts[0];
    Eigen::Vector2d hi = pts[0];
    for (const auto& p : pts) {
      lo_ = lo_.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    nx_ = static_cast<int>((hi.x() - lo_.x()) / cell_) + 1;
    ny_ = static_cast<int>((hi.y() - lo_.y()) / cell_) + 1;
    start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    std::vector<int> key(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      key[i] = index(cx(pts[i].x()), cy(pts[i].y()));
      ++start_[static_cast<std::size_t>(key[i]) + 1];
    }
    for (std::size_t k = 1; k < start_.size(); ++k) start_[k] += start_[k - 1];
    order_.resize(pts.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < pts.size(); ++i) order_[fill[static_cast<std::size_t>(key[i])]++] = i;
  }

  // Index and squared distance of the closest point; ties go to the lower index.
  std::pair<std::size_t, double> nearest(const Eigen::Vector2d& q) const {
    const int qx = std::clamp(cx(q.x()), 0, nx_ - 1);
    const int qy = std::clamp(cy(q.y()), 0, ny_ - 1);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    const int max_ring = std::max(nx_, ny_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      // distance from q to anything outside the searched square
      if (ring > 0) {
        const double gx = std::min(q.x() - (lo_.x() + (qx - ring + 1) * cell_), lo_.x() + (qx + ring) * cell_ - q.x());
        const double gy = std::min(q.y() - (lo_.y() + (qy - ring + 1) * cell_), lo_.y() + (qy + ring) * cell_ - q.y());
        const double g = std::min(gx, gy);
        if (g > 0.0 && g * g > best) break;
      }
      for (int y = qy - ring; y <= qy + ring; ++y) {
        if (y < 0 || y >= ny_) continue;
        const bool edge_row = y == qy - ring || y == qy + ring;
        for (int x = qx - ring; x <= qx + ring; x += edge_row ? 1 : 2 * ring) {
          if (x >= 0 && x < nx_) {
            const int k = index(x, y);
            for (std::size_t s = start_[static_cast<std::size_t>(k)]; s < start_[static_cast<std::size_t>(k) + 1]; ++s) {
              const std::size_t j = order_[s];
              const double d = (pts_[j] - q).squaredNorm();
              if (d < best || (d == best && j < best_j)) {
                best = d;
                best_j = j;
              }
            }
          }
          if (ring == 0) break;
        }
      }
    }
    return {best_j, best};
  }

 private:
  int cx(double x) const { return static_cast<int>(std::floor((x - lo_.x()) / cell_)); }
  int cy(double y) const { return static_cast<int>(std::floor((y - lo_.y()) / cell_)); }
  int index(int x, int y) const { return y * nx_ + x; }

  std::span<const Eigen::Vector2d> pts_;
  double cell_;
  Eigen::Vector2d lo_;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<std::size_t> start_;
  std::vector<std::size_t> order_;
};

// Truncated quadratic: pairs beyond `cutoff` are dropped from the fit and
// contribute cutoff^2 to the objective. With a fixed cutoff the objective can
// only fall from one fit to the next.
Matches correspond(std::span<const Eigen::Vector2d> source, const NearestGrid& target, const Se2& t, double cutoff) {
  Matches m;
  m.dist.resize(source.size());
  double sq = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto [j, d2] = target.nearest(t.apply(source[i]));
    m.dist[i] = std::sqrt(d2);
    if (m.dist[i] > cutoff) {
      total += cutoff * cutoff;
      continue;
    }
    m.source.push_back(i);
    m.target.push_back(j);
    sq += d2;
    total += d2;
  }
  m.objective = total / static_cast<double>(source.size());
  m.inlier_ms = m.source.empty() ? 0.0 : sq / static_cast<double>(m.source.size());
  return m;
}

double median_cutoff(std::span<const Eigen::Vector2d> source, const NearestGrid& target, const Se2& t, double factor) {
  std::vector<double> d(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) d[i] = std::sqrt(target.nearest(t.apply(source[i])).second);
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  return factor * d[d.size() / 2];
}

Se2 fit_rigid(std::span<const Eigen::Vector2d> source, std::span<const Eigen::Vector2d> target, const Matches& m) {
  Eigen::Vector2d cs = Eigen::Vector2d::Zero();
  Eigen::Vector2d ct = Eigen::Vector2d::Zero();
  for (std::size_t k = 0; k < m.source.size(); ++k) {
    cs += source[m.source[k]];
    ct += target[m.target[k]];
  }
  const double n = static_cast<double>(m.source.size());
  cs /= n;
  ct /= n;
  Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
  for (std::size_t k = 0; k < m.source.size(); ++k) {
    h += (source[m.source[k]] - cs) * (target[m.target[k]] - ct).transpose();
  }
  const double yaw = std::atan2(h(0, 1) - h(1, 0), h(0, 0) + h(1, 1));
  const Se2 rot(0.0, 0.0, yaw);
  const Eigen::Vector2d t = ct - rot.apply(cs);
  return {t.x(), t.y(), yaw};
}

}  // namespace

IcpResult icp_2d(std::span<const Eigen::Vector2d> source, std::span<const Eigen::Vector2d> target, const Se2& init,
                 const IcpParams& params) {
  if (source.size() < 10 || target.size() < 10) {
    throw TooFewPoints("ICP needs at least 10 points per set");
  }
  IcpResult res;
  res.transform = init;
  const NearestGrid grid(target, 0.1);
  const double cutoff = median_cutoff(source, grid, init, params.reject_factor);
  Matches current = correspond(source, grid, init, cutoff);
  res.objective_history.push_back(current.objective);

  for (int it = 0; it < params.max_iter; ++it) {
    res.iterations = it + 1;
    if (current.source.empty()) break;
    const Se2 next = fit_rigid(source, target, current);
    Matches next_matches = correspond(source, grid, next, cutoff);
    if (next_matches.objective > current.objective) {
      break;
    }
    const Se2 delta = res.transform.inverse() * next;
    res.transform = next;
    current = std::move(next_matches);
    res.objective_history.push_back(current.objective);
    if (std::hypot(delta.x, delta.y) < params.tol && std::abs(delta.yaw) < params.tol) {
      break;
    }
  }
  res.rms = std::sqrt(current.inlier_ms);
  // Fitness in both directions, so a shape contained in a larger one fails.
  const auto explained = std::count_if(current.dist.begin(), current.dist.end(),
                                       [&](double d) { return d <= params.inlier_radius; });
  std::vector<Eigen::Vector2d> moved;
  moved.reserve(source.size());
  for (const auto& p : source) moved.push_back(res.transform.apply(p));
  const Matches back = correspond(target, NearestGrid(moved, 0.1), Se2::identity(), params.inlier_radius);
  const auto covered = std::count_if(back.dist.begin(), back.dist.end(),
                                     [&](double d) { return d <= params.inlier_radius; });
  res.inlier_fraction = std::min(static_cast<double>(explained) / static_cast<double>(source.size()),
                                 static_cast<double>(covered) / static_cast<double>(target.size()));
  res.converged = res.rms < params.rms_ok && res.inlier_fraction >= params.min_inlier_fraction;
  return res;
}

IcpResult icp_2d(const SgfPoints& source, const SgfPoints& target, const Se2& init, const IcpParams& params) {
  const auto s = source.centered();
  const auto t = target.centered();
  return icp_2d(std::span<const Eigen::Vector2d>(s), std::span<const Eigen::Vector2d>(t), init, params);
}

Se2 icp_init_from_shift(int shift, int n_sectors) {
  if (n_sectors < 1 || shift < 0 || shift >= n_sectors) {
    throw InvalidArgument("shift must lie in [0, n_sectors)");
  }
  return {0.0, 0.0, shift * 2.0 * std::numbers::pi / n_sectors};
}

std::optional<LoopCandidate> find_loop_candidate(const SgfInstance& query, const GroupSet& groups,
                                                 std::span<const SgfInstance> instances, int min_gap) {
  if (query.group < 0) {
    throw InvalidArgument("query instance has no group");
  }
  const SgfGroup& g = groups.group(query.group);
  std::optional<LoopCandidate> best;
  for (const SgfGroupMember& m : g.members) {
    if (m.instance == query.id) continue;
    const auto it = std::find_if(instances.begin(), instances.end(),
                                 [&](const SgfInstance& s) { return s.id == m.instance; });
    if (it == instances.end()) continue;
    if (it->id > query.id || query.frame - it->frame < min_gap) continue;
    const ShiftMatch sm = best_shift(query.descriptor, it->descriptor);
    if (!best || sm.distance < best->distance) {
      best = LoopCandidate{g.id, it->id, sm.shift, sm.distance};
    }
  }
  return best;
}

std::optional<LoopConstraint> make_loop_constraint(const SgfInstance& a, const SgfInstance& b, const IcpResult& icp,
                                                   const GroupSet& groups, int shift, double l_max) {
  if (a.group < 0 || a.group != b.group) {
    throw GroupMismatch("loop pair members belong to different groups");
  }
  if (groups.group(a.group).symmetric || a.symmetric || b.symmetric) {
    return std::nullopt;
  }
  if (!icp.converged || a.points.anchor_pose == b.points.anchor_pose) {
    return std::nullopt;
  }
  // ICP aligns b's centroid-relative points onto a's: p_a = T p_b.
  const Se2 ca(a.points.centroid.x(), a.points.centroid.y(), 0.0);
  const Se2 cb(b.points.centroid.x(), b.points.centroid.y(), 0.0);
  LoopConstraint c;
  c.pose_i = a.points.anchor_pose;
  c.pose_j = b.points.anchor_pose;
  c.z = ca * icp.transform * cb.inverse();
  const double sigma_t = std::max(icp.rms, 0.02);
  const double sigma_yaw = sigma_t / l_max;
  c.information = Eigen::Vector3d(1.0 / (sigma_t * sigma_t), 1.0 / (sigma_t * sigma_t), 1.0 / (sigma_yaw * sigma_yaw))
                      .asDiagonal();
  c.residual_rms = icp.rms;
  c.group = a.group;
  c.shift = shift;
  return c;
}

std::string format_constraint_record(const LoopConstraint& c) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d %d %.9f %.9f %.9f %.6f %d %d\n", c.pose_i, c.pose_j, c.z.x, c.z.y, c.z.yaw,
                c.residual_rms, c.group, c.shift);
  return buf;
}

}  // namespace sgfloc

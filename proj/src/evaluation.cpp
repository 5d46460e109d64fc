#include "sgfloc/evaluation.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sgfloc/errors.hpp"

namespace sgfloc {

std::vector<StampedPose> stamped(std::span<const Pose6> poses) {
  std::vector<StampedPose> out;
  out.reserve(poses.size());
  for (const Pose6& p : poses) out.push_back({p.timestamp, p.planar()});
  return out;
}

AteReport ate(std::span<const StampedPose> est, std::span<const StampedPose> gt, const AteOptions& opts) {
  std::vector<std::size_t> order(gt.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gt[a].timestamp < gt[b].timestamp; });

  std::vector<Eigen::Vector2d> src;
  std::vector<Eigen::Vector2d> dst;
  for (const StampedPose& e : est) {
    auto it = std::lower_bound(order.begin(), order.end(), e.timestamp,
                               [&](std::size_t k, double t) { return gt[k].timestamp < t; });
    double best = opts.max_dt + 1e-9;
    const StampedPose* match = nullptr;
    for (auto cand : {it, it == order.begin() ? order.end() : it - 1}) {
      if (cand == order.end()) continue;
      const double dt = std::abs(gt[*cand].timestamp - e.timestamp);
      if (dt <= best) {
        best = dt;
        match = &gt[*cand];
      }
    }
    if (match) {
      src.push_back(e.pose.translation());
      dst.push_back(match->pose.translation());
    }
  }
  if (src.empty()) throw NoOverlap("no estimate pose has a ground-truth pose within the association window");

  AteReport r;
  r.pairs = src.size();
  Eigen::Matrix2d rot = Eigen::Matrix2d::Identity();
  Eigen::Vector2d trans = Eigen::Vector2d::Zero();
  if (opts.align) {
    if (src.size() == 1) {
      trans = dst[0] - src[0];
    } else {
      Eigen::Matrix2Xd a(2, src.size());
      Eigen::Matrix2Xd b(2, dst.size());
      for (std::size_t i = 0; i < src.size(); ++i) {
        a.col(static_cast<Eigen::Index>(i)) = src[i];
        b.col(static_cast<Eigen::Index>(i)) = dst[i];
      }
      const Eigen::Matrix3d t = Eigen::umeyama(a, b, opts.with_scale);
      const Eigen::Matrix2d sr = t.topLeftCorner<2, 2>();
      r.scale = opts.with_scale ? std::sqrt(std::abs(sr.determinant())) : 1.0;
      rot = sr / r.scale;
      trans = t.topRightCorner<2, 1>();
    }
  }
  r.alignment = Se2(trans.x(), trans.y(), std::atan2(rot(1, 0), rot(0, 0)));

  double sq = 0.0;
  double sum = 0.0;
  r.errors.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double e = (r.scale * rot * src[i] + trans - dst[i]).norm();
    r.errors.push_back(e);
    sq += e * e;
    sum += e;
    r.max = std::max(r.max, e);
  }
  const double n = static_cast<double>(src.size());
  r.rmse = std::sqrt(sq / n);
  r.mean = sum / n;
  std::vector<double> sorted = r.errors;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  r.median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return r;
}

namespace {

struct VisitRef {
  int marking = -1;
  int visit = -1;
};

VisitRef match_detection(const DetectionRecord& d, std::span<const Se2> gt, const SequenceAnnotations& ann,
                         double radius) {
  VisitRef best;
  if (d.frame < 0 || static_cast<std::size_t>(d.frame) >= gt.size()) return best;
  const Eigen::Vector2d world = gt[static_cast<std::size_t>(d.frame)].apply(d.centroid);
  double best_dist = radius;
  for (std::size_t k = 0; k < ann.markings.size(); ++k) {
    const MarkingAnnotation& m = ann.markings[k];
    const double dist = (m.centroid - world).norm();
    if (dist > best_dist) continue;
    for (std::size_t v = 0; v < m.visits.size(); ++v) {
      if (d.frame >= m.visits[v].first_frame && d.frame <= m.visits[v].last_frame) {
        best = {static_cast<int>(k), static_cast<int>(v)};
        best_dist = dist;
      }
    }
  }
  return best;
}

}  // namespace

SequenceCounters count_sequence_metrics(std::span<const DetectionRecord> detections,
                                        std::span<const LoopAttempt> attempts, std::span<const Se2> gt_by_frame,
                                        const SequenceAnnotations& annotations, double match_radius) {
  SequenceCounters c;
  std::vector<std::vector<int>> seen(annotations.markings.size());
  std::vector<std::vector<int>> found(annotations.markings.size());
  std::vector<std::vector<int>> closed(annotations.markings.size());
  for (std::size_t k = 0; k < annotations.markings.size(); ++k) {
    const std::size_t n = annotations.markings[k].visits.size();
    seen[k].assign(n, 0);
    found[k].assign(n, 0);
    closed[k].assign(n, 0);
  }

  std::vector<std::pair<int, VisitRef>> by_instance;
  for (const DetectionRecord& d : detections) {
    const VisitRef v = match_detection(d, gt_by_frame, annotations, match_radius);
    by_instance.emplace_back(d.instance, v);
    if (v.marking >= 0) seen[static_cast<std::size_t>(v.marking)][static_cast<std::size_t>(v.visit)] = 1;
  }
  auto lookup = [&](int instance) {
    for (const auto& [id, v] : by_instance) {
      if (id == instance) return v;
    }
    return VisitRef{};
  };
  for (const LoopAttempt& a : attempts) {
    const VisitRef q = lookup(a.query);
    const VisitRef m = lookup(a.member);
    if (q.marking < 0 || q.marking != m.marking || m.visit >= q.visit) continue;
    const auto k = static_cast<std::size_t>(q.marking);
    const auto v = static_cast<std::size_t>(q.visit);
    found[k][v] = 1;
    if (a.closed) closed[k][v] = 1;
  }

  for (std::size_t k = 0; k < annotations.markings.size(); ++k) {
    const MarkingAnnotation& m = annotations.markings[k];
    std::vector<double> earlier_headings;
    for (std::size_t v = 0; v < m.visits.size(); ++v) {
      if (!m.visits[v].detectable) continue;
      ++c.expected;
      c.detected += seen[k][v];
      if (!earlier_headings.empty()) {
        RevisitOutcome r;
        r.marking = m.id;
        r.visit = static_cast<int>(v);
        r.symmetric = m.symmetric;
        r.reverse = std::all_of(earlier_headings.begin(), earlier_headings.end(), [&](double h) {
          return std::abs(wrap_angle(m.visits[v].heading - h)) > std::numbers::pi / 2;
        });
        r.found = found[k][v] != 0;
        r.closed = r.found && closed[k][v] != 0;
        ++c.loops_total;
        c.loops_found += r.found;
        c.closed += r.closed;
        if (r.reverse) {
          ++c.loops_total_reverse;
          c.loops_found_reverse += r.found;
          c.closed_reverse += r.closed;
        }
        c.revisits.push_back(r);
      }
      earlier_headings.push_back(m.visits[v].heading);
    }
  }
  return c;
}

std::string counters_csv(const std::string& sequence, const SequenceCounters& c) {
  std::ostringstream os;
  os << "sequence,detected,expected,loops_found,loops_total,loops_found_reverse,loops_total_reverse,closed,"
        "closed_reverse\n";
  os << sequence << ',' << c.detected << ',' << c.expected << ',' << c.loops_found << ',' << c.loops_total << ','
     << c.loops_found_reverse << ',' << c.loops_total_reverse << ',' << c.closed << ',' << c.closed_reverse << '\n';
  return os.str();
}

}  // namespace sgfloc

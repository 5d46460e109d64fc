#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "sgfloc/se2.hpp"
#include "sgfloc/sim_world.hpp"

namespace sgfloc {

struct StampedPose {
  double timestamp = 0.0;
  Se2 pose;
};

struct AteOptions {
  bool align = true;
  bool with_scale = false;  // similarity instead of rigid alignment
  double max_dt = 0.05;     // association window, seconds
};

struct AteReport {
  double rmse = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  Se2 alignment;  // applied to the estimate
  double scale = 1.0;
  std::size_t pairs = 0;
  std::vector<double> errors;  // per associated pair, in estimate order
};

/// Associates each estimate with the nearest ground-truth timestamp, aligns
/// (least squares, Umeyama) and reports translational error statistics.
/// Throws NoOverlap when no pair falls within max_dt.
AteReport ate(std::span<const StampedPose> est, std::span<const StampedPose> gt, const AteOptions& opts = {});

std::vector<StampedPose> stamped(std::span<const Pose6> poses);

/// One selected SGF: the frame it was anchored to and its centroid in that
/// frame's robot coordinates.
struct DetectionRecord {
  int instance = -1;
  int frame = -1;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
};

/// A loop candidate the pipeline tried to close.
struct LoopAttempt {
  int query = -1;   // instance ids
  int member = -1;
  double distance = 0.0;  // descriptor distance at the best shift
  double icp_rms = -1.0;  // -1 when ICP did not run
  double inlier_fraction = 0.0;
  bool closed = false;
};

/// Outcome for one annotated revisit (any detectable visit after the first).
struct RevisitOutcome {
  int marking = -1;
  int visit = -1;
  bool symmetric = false;
  bool reverse = false;
  bool found = false;
  bool closed = false;
};

struct SequenceCounters {
  int detected = 0;
  int expected = 0;
  int loops_found = 0;
  int loops_total = 0;
  int loops_found_reverse = 0;
  int loops_total_reverse = 0;
  int closed = 0;
  int closed_reverse = 0;
  std::vector<RevisitOutcome> revisits;
};

/// Matches detections to annotated marking visits (ground-truth pose at the
/// detection frame, centroid within `match_radius` of the marking) and counts
/// detections, loop pairs and closures. A revisit is reverse when its heading
/// differs by more than pi/2 from every earlier detectable visit.
SequenceCounters count_sequence_metrics(std::span<const DetectionRecord> detections,
                                        std::span<const LoopAttempt> attempts, std::span<const Se2> gt_by_frame,
                                        const SequenceAnnotations& annotations, double match_radius = 1.0);

/// Header plus one row: the counters in the column order of the header.
std::string counters_csv(const std::string& sequence, const SequenceCounters& c);

}  // namespace sgfloc

#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgfloc/se2.hpp"
#include "sgfloc/sgf_description.hpp"

namespace sgfloc {

struct IcpParams {
  int max_iter = 50;
  double tol = 1e-4;          // stop when the transform update falls below this (m, rad)
  double rms_ok = 0.05;       // converged iff final rms is below this
  double reject_factor = 3.0; // cutoff = this multiple of the median distance at the initial guess
  double inlier_radius = 0.05;      // m; a point within this of the other set counts as explained
  double min_inlier_fraction = 0.95; // required for convergence
};

struct IcpResult {
  Se2 transform;  // maps source points into the target frame
  int iterations = 0;
  double rms = 0.0;  // over pairs within the cutoff
  double inlier_fraction = 0.0;  // min over both directions of points explained by the other set
  bool converged = false;
  std::vector<double> objective_history;  // truncated mean squared distance per accepted state
};

/// Point-to-point ICP with exact grid-bucketed nearest neighbours and a closed-form
/// SE(2) fit per iteration. A step that would raise the objective is rejected
/// and ends the iteration. Convergence needs both a small inlier rms and
/// most source points explained by the target. Throws TooFewPoints below 10 points per side.
IcpResult icp_2d(std::span<const Eigen::Vector2d> source, std::span<const Eigen::Vector2d> target, const Se2& init,
                 const IcpParams& params = {});

/// Runs icp_2d on the centroid-relative point sets.
IcpResult icp_2d(const SgfPoints& source, const SgfPoints& target, const Se2& init, const IcpParams& params = {});

/// Rotation implied by a descriptor column shift; translation is zero because
/// descriptors are centroid-relative.
Se2 icp_init_from_shift(int shift, int n_sectors);

struct LoopCandidate {
  int group = -1;
  int member = -1;  // instance id of the earlier observation
  int shift = 0;    // best_shift(query, member)
  double distance = 0.0;
};

/// Nearest earlier member of the query's group by best-shift distance,
/// restricted to members at least `min_gap` frames older.
std::optional<LoopCandidate> find_loop_candidate(const SgfInstance& query, const GroupSet& groups,
                                                 std::span<const SgfInstance> instances, int min_gap = 30);

struct LoopConstraint {
  int pose_i = -1;
  int pose_j = -1;
  Se2 z;  // pose_i^-1 * pose_j
  Eigen::Matrix3d information = Eigen::Matrix3d::Identity();
  double residual_rms = 0.0;
  int group = -1;
  int shift = 0;
};

/// Relative pose between the anchor poses of `a` (earlier, ICP target) and
/// `b` (query, ICP source). Returns nullopt when ICP did not converge or the
/// group or either instance is rotationally symmetric. Throws GroupMismatch.
std::optional<LoopConstraint> make_loop_constraint(const SgfInstance& a, const SgfInstance& b, const IcpResult& icp,
                                                   const GroupSet& groups, int shift = 0, double l_max = 2.0);

/// pose_i pose_j z.x z.y z.yaw rms group shift
std::string format_constraint_record(const LoopConstraint& c);

}  // namespace sgfloc

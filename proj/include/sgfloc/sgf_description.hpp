#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "sgfloc/camera_geometry.hpp"
#include "sgfloc/sgf_detection.hpp"

namespace sgfloc {

struct DescriptorParams {
  double l_max = 2.0;
  int n_sectors = 90;
  int n_rings = 10;

  double ring_gap() const { return l_max / n_rings; }
  double sector_angle() const;
  void validate() const;
  friend bool operator==(const DescriptorParams&, const DescriptorParams&) = default;
};

/// Metric ground points of one selected feature, expressed in the robot frame
/// of the pose it was anchored to.
struct SgfPoints {
  std::vector<Eigen::Vector2d> points;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  int anchor_pose = -1;

  /// Points relative to the centroid.
  std::vector<Eigen::Vector2d> centered() const;
};

/// Polar occupancy: rows are rings, columns are azimuth sectors.
struct Descriptor {
  DescriptorParams params;
  Eigen::MatrixXd bins;
};

/// Grid-cell mean downsampling. Cells are keyed on floor(p / pitch); output
/// is ordered by cell index so results are reproducible.
std::vector<Eigen::Vector2d> voxel_downsample(const std::vector<Eigen::Vector2d>& points, double pitch);

/// Lifts a BEV candidate to metric ground points: inverse virtual-camera
/// projection, grid downsampling, centroid, then an L_max radius filter.
/// Throws DegenerateShape when fewer than 10 points remain.
SgfPoints back_project(const SgfCandidate& candidate, const VirtualCamera& vc, int anchor_pose,
                       double grid_pitch = 0.025, double l_max = 2.0);

Descriptor build_descriptor(const SgfPoints& p, const DescriptorParams& params = {});

/// out.col((j + k) mod N_s) = d.col(j); equals the descriptor of the point
/// set rotated by k sectors counter-clockwise.
Descriptor shift_columns(const Descriptor& d, int k);

/// Mean column-wise cosine distance between q.col(j) and g.col(j + shift).
/// A column pair where exactly one side is empty scores 1; two empty
/// columns agree and score 0. Throws ParamMismatch.
double descriptor_distance(const Descriptor& q, const Descriptor& g, int shift);

struct ShiftMatch {
  int shift = 0;
  double distance = 0.0;
};

/// Exhaustive argmin over all column shifts; ties go to the smallest shift.
ShiftMatch best_shift(const Descriptor& q, const Descriptor& g);

/// Nontrivial self-similarity: some shift in [N_s/6, N_s - N_s/6] brings the
/// descriptor within `tol` of itself.
bool symmetry_test(const Descriptor& d, double tol = 0.1);

struct SgfInstance {
  int id = -1;
  int frame = -1;
  SgfPoints points;
  Descriptor descriptor;
  HuVector hu;
  int group = -1;
  int group_shift = 0;  // columns that rotate this descriptor into the group frame
  bool symmetric = false;
};

struct SgfGroupMember {
  int instance = -1;
  int shift = 0;
  Descriptor aligned;
  bool symmetric = false;  // symmetry_test of the member's own descriptor
};

struct SgfGroup {
  int id = -1;
  Descriptor mean;
  std::vector<SgfGroupMember> members;
  bool symmetric = false;  // most members are rotationally self-similar
};

/// Online clustering of instance descriptors. Single writer.
class GroupSet {
 public:
  explicit GroupSet(double d_new = 0.7, double symmetry_tol = 0.1) : d_new_(d_new), symmetry_tol_(symmetry_tol) {}

  /// Joins the closest group when its best-shift distance is below d_new and
  /// refreshes that group's mean and symmetry flag; otherwise seeds a new group. Updates
  /// inst.group and inst.group_shift and returns the group id.
  int assign(SgfInstance& inst);

  const std::vector<SgfGroup>& groups() const { return groups_; }
  const SgfGroup& group(int id) const;
  std::size_t size() const { return groups_.size(); }

 private:
  double d_new_;
  double symmetry_tol_;
  std::vector<SgfGroup> groups_;
};

int assign_to_group(SgfInstance& inst, GroupSet& groups);

/// Line-delimited record:
/// instance frame anchor group n_rings n_sectors l_max cx cy bins(row-major)...
std::string format_descriptor_record(const SgfInstance& inst);

}  // namespace sgfloc

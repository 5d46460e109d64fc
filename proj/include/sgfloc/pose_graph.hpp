#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "sgfloc/se2.hpp"

namespace sgfloc {

struct PoseNode {
  int index = 0;
  Se2 estimate;
  double timestamp = 0.0;
};

/// Relative-pose factor between two nodes. Odometry edges link t -> t + 1;
/// loop edges link arbitrary pairs and may use the robust kernel.
struct PoseEdge {
  int from = 0;
  int to = 0;
  Se2 z;
  Eigen::Matrix3d information = Eigen::Matrix3d::Identity();
};

/// (dx, dy, dyaw) of z^-1 * (a^-1 * b), yaw wrapped to (-pi, pi].
Eigen::Vector3d residual(const Se2& z, const Se2& a, const Se2& b);

/// Analytic derivatives of residual() with respect to (x, y, yaw) of a and b.
void residual_jacobians(const Se2& z, const Se2& a, const Se2& b, Eigen::Matrix3d& ja, Eigen::Matrix3d& jb);

struct OptimizerOptions {
  int max_iterations = 100;
  double relative_tolerance = 1e-9;
  double initial_lambda = 1e-4;
  bool robust_loops = true;
  double huber_delta = 1.0;
  int fixed_node = 0;               // gauge; negative leaves the system singular
  int dense_below = 200;            // dense Cholesky for graphs smaller than this
};

struct GraphSolution {
  std::vector<Se2> poses;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;  // accepted costs, starting with the initial one
};

/// Weighted least-squares cost; loop terms pass through the Huber kernel
/// when enabled.
double graph_cost(std::span<const Se2> poses, std::span<const PoseEdge> odometry, std::span<const PoseEdge> loops,
                  const OptimizerOptions& opts);

/// Levenberg-damped Gauss-Newton over SE(2) poses. Throws SingularSystem
/// when the gauge node is missing or the normal equations are singular.
GraphSolution optimize(std::span<const PoseNode> nodes, std::span<const PoseEdge> odometry,
                       std::span<const PoseEdge> loops, const OptimizerOptions& opts = {});

/// node[t] = origin * z_0 * ... * z_{t-1}; returns deltas.size() + 1 poses.
std::vector<Se2> chain_integrate(const Se2& origin, std::span<const Se2> deltas);

}  // namespace sgfloc

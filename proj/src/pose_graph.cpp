#include "sgfloc/pose_graph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <cmath>

#include "sgfloc/errors.hpp"

namespace sgfloc {

Eigen::Vector3d residual(const Se2& z, const Se2& a, const Se2& b) {
  const Se2 e = z.inverse() * (a.inverse() * b);
  return {e.x, e.y, wrap_angle(b.yaw - a.yaw - z.yaw)};
}

void residual_jacobians(const Se2& z, const Se2& a, const Se2& b, Eigen::Matrix3d& ja, Eigen::Matrix3d& jb) {
  const Eigen::Matrix2d rz_t = z.rotation().transpose();
  const Eigen::Matrix2d ra_t = a.rotation().transpose();
  const double c = std::cos(a.yaw);
  const double s = std::sin(a.yaw);
  Eigen::Matrix2d dra_t;
  dra_t << -s, c, -c, -s;
  const Eigen::Vector2d dt(b.x - a.x, b.y - a.y);

  ja.setZero();
  jb.setZero();
  ja.topLeftCorner<2, 2>() = -rz_t * ra_t;
  ja.topRightCorner<2, 1>() = rz_t * dra_t * dt;
  ja(2, 2) = -1.0;
  jb.topLeftCorner<2, 2>() = rz_t * ra_t;
  jb(2, 2) = 1.0;
}

namespace {

struct Kernel {
  double cost;
  double weight;
};

Kernel apply_kernel(double s, bool robust, double delta) {
  if (!robust || s <= delta * delta) {
    return {s, 1.0};
  }
  const double r = std::sqrt(s);
  return {2.0 * delta * r - delta * delta, delta / r};
}

template <typename Fn>
void for_each_edge(std::span<const PoseEdge> odometry, std::span<const PoseEdge> loops, const OptimizerOptions& opts,
                   Fn&& fn) {
  for (const PoseEdge& e : odometry) fn(e, false);
  for (const PoseEdge& e : loops) fn(e, opts.robust_loops);
}

void check_edge(const PoseEdge& e, std::size_t n) {
  if (e.from < 0 || e.to < 0 || static_cast<std::size_t>(e.from) >= n || static_cast<std::size_t>(e.to) >= n) {
    throw InvalidArgument("edge references a missing node");
  }
}

}  // namespace

double graph_cost(std::span<const Se2> poses, std::span<const PoseEdge> odometry, std::span<const PoseEdge> loops,
                  const OptimizerOptions& opts) {
  double cost = 0.0;
  for_each_edge(odometry, loops, opts, [&](const PoseEdge& e, bool robust) {
    const Eigen::Vector3d r = residual(e.z, poses[static_cast<std::size_t>(e.from)], poses[static_cast<std::size_t>(e.to)]);
    cost += apply_kernel(r.dot(e.information * r), robust, opts.huber_delta).cost;
  });
  return cost;
}

GraphSolution optimize(std::span<const PoseNode> nodes, std::span<const PoseEdge> odometry,
                       std::span<const PoseEdge> loops, const OptimizerOptions& opts) {
  const std::size_t n = nodes.size();
  if (opts.fixed_node < 0 || static_cast<std::size_t>(opts.fixed_node) >= n) {
    throw SingularSystem("no gauge node fixed");
  }
  for (const PoseEdge& e : odometry) check_edge(e, n);
  for (const PoseEdge& e : loops) check_edge(e, n);

  GraphSolution sol;
  sol.poses.reserve(n);
  for (const PoseNode& node : nodes) sol.poses.push_back(node.estimate);

  // Column offset of each free node; -1 for the gauge.
  std::vector<int> column(n, -1);
  int dim = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<int>(i) != opts.fixed_node) {
      column[i] = dim;
      dim += 3;
    }
  }

  double cost = graph_cost(sol.poses, odometry, loops, opts);
  sol.initial_cost = cost;
  sol.cost_history.push_back(cost);
  if (dim == 0 || cost == 0.0) {
    sol.final_cost = cost;
    sol.converged = true;
    return sol;
  }

  const bool dense = static_cast<int>(n) < opts.dense_below;
  double lambda = opts.initial_lambda;
  for (int it = 0; it < opts.max_iterations; ++it) {
    sol.iterations = it + 1;

    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    for_each_edge(odometry, loops, opts, [&](const PoseEdge& e, bool robust) {
      const Se2& a = sol.poses[static_cast<std::size_t>(e.from)];
      const Se2& b = sol.poses[static_cast<std::size_t>(e.to)];
      const Eigen::Vector3d r = residual(e.z, a, b);
      const double w = apply_kernel(r.dot(e.information * r), robust, opts.huber_delta).weight;
      const Eigen::Matrix3d omega = w * e.information;
      Eigen::Matrix3d ja;
      Eigen::Matrix3d jb;
      residual_jacobians(e.z, a, b, ja, jb);
      const int ca = column[static_cast<std::size_t>(e.from)];
      const int cb = column[static_cast<std::size_t>(e.to)];
      const Eigen::Matrix3d* jac[2] = {&ja, &jb};
      const int col[2] = {ca, cb};
      for (int p = 0; p < 2; ++p) {
        if (col[p] < 0) continue;
        g.segment<3>(col[p]) += jac[p]->transpose() * omega * r;
        for (int q = 0; q < 2; ++q) {
          if (col[q] < 0) continue;
          const Eigen::Matrix3d block = jac[p]->transpose() * omega * *jac[q];
          for (int r0 = 0; r0 < 3; ++r0)
            for (int c0 = 0; c0 < 3; ++c0) triplets.emplace_back(col[p] + r0, col[q] + c0, block(r0, c0));
        }
      }
    });

    if (g.lpNorm<Eigen::Infinity>() < 1e-12) {
      sol.converged = true;  // already stationary; leave the poses bit-exact
      break;
    }

    Eigen::VectorXd step;
    if (dense) {
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
      for (const auto& t : triplets) h(t.row(), t.col()) += t.value();
      h.diagonal().array() += lambda;
      Eigen::LLT<Eigen::MatrixXd> llt(h);
      if (llt.info() != Eigen::Success) throw SingularSystem("normal equations are not positive definite");
      step = llt.solve(-g);
    } else {
      Eigen::SparseMatrix<double> h(dim, dim);
      h.setFromTriplets(triplets.begin(), triplets.end());
      for (int i = 0; i < dim; ++i) h.coeffRef(i, i) += lambda;
      Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(h);
      if (llt.info() != Eigen::Success) throw SingularSystem("normal equations are not positive definite");
      step = llt.solve(-g);
    }

    std::vector<Se2> trial = sol.poses;
    for (std::size_t i = 0; i < n; ++i) {
      if (column[i] < 0) continue;
      const auto d = step.segment<3>(column[i]);
      trial[i] = Se2(trial[i].x + d(0), trial[i].y + d(1), trial[i].yaw + d(2));
    }
    const double trial_cost = graph_cost(trial, odometry, loops, opts);
    // Below ~1e-9 the cost difference is rounding noise; trust the linear model.
    const bool tiny = step.norm() < 1e-9;
    if (trial_cost <= cost || tiny) {
      const double decrease = (cost - trial_cost) / cost;
      sol.poses = std::move(trial);
      if (trial_cost <= cost) {
        cost = trial_cost;
        sol.cost_history.push_back(cost);
      }
      lambda = std::max(lambda / 10.0, 1e-12);
      if ((decrease < opts.relative_tolerance && !tiny) || cost == 0.0 || step.norm() < 1e-12) {
        sol.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) {
        // No descent direction left at this damping: a stationary point.
        sol.converged = true;
        break;
      }
    }
  }
  sol.final_cost = graph_cost(sol.poses, odometry, loops, opts);
  return sol;
}

std::vector<Se2> chain_integrate(const Se2& origin, std::span<const Se2> deltas) {
  std::vector<Se2> out;
  out.reserve(deltas.size() + 1);
  out.push_back(origin);
  for (const Se2& d : deltas) {
    out.push_back(out.back() * d);
  }
  return out;
}

}  // namespace sgfloc

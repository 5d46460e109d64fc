#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sgfloc/errors.hpp"
#include "sgfloc/pose_graph.hpp"

using namespace sgfloc;

namespace {

// residual from 3x3 matrix products only
Eigen::Vector3d matrix_residual(const Se2& z, const Se2& a, const Se2& b) {
  const Eigen::Matrix3d e = oracle::se2_matrix(z).inverse() * oracle::se2_matrix(a).inverse() * oracle::se2_matrix(b);
  return {e(0, 2), e(1, 2), std::atan2(e(1, 0), e(0, 0))};
}

std::vector<PoseNode> nodes_from(const std::vector<Se2>& poses) {
  std::vector<PoseNode> n;
  for (std::size_t i = 0; i < poses.size(); ++i) n.push_back({static_cast<int>(i), poses[i], 0.1 * i});
  return n;
}

// Plain Gauss-Newton with numeric Jacobians on a dense state, node 0 held.
std::vector<Se2> oracle_solve(std::vector<Se2> x, const std::vector<PoseEdge>& edges, int iters) {
  const int n = static_cast<int>(x.size());
  for (int it = 0; it < iters; ++it) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3 * (n - 1), 3 * (n - 1));
    Eigen::VectorXd g = Eigen::VectorXd::Zero(3 * (n - 1));
    for (const PoseEdge& e : edges) {
      const Eigen::Vector3d r = matrix_residual(e.z, x[e.from], x[e.to]);
      Eigen::MatrixXd j = Eigen::MatrixXd::Zero(3, 3 * (n - 1));
      for (int node : {e.from, e.to}) {
        if (node == 0) continue;
        for (int k = 0; k < 3; ++k) {
          auto plus = x, minus = x;
          Eigen::Vector3d vp = x[node].vec(), vm = x[node].vec();
          vp[k] += 1e-6;
          vm[k] -= 1e-6;
          plus[node] = Se2(vp[0], vp[1], vp[2]);
          minus[node] = Se2(vm[0], vm[1], vm[2]);
          j.col(3 * (node - 1) + k) += (matrix_residual(e.z, plus[e.from], plus[e.to]) -
                                        matrix_residual(e.z, minus[e.from], minus[e.to])) / 2e-6;
        }
      }
      h += j.transpose() * e.information * j;
      g += j.transpose() * e.information * r;
    }
    const Eigen::VectorXd dx = h.ldlt().solve(-g);
    for (int i = 1; i < n; ++i) {
      x[i] = Se2(x[i].x + dx[3 * (i - 1)], x[i].y + dx[3 * (i - 1) + 1], x[i].yaw + dx[3 * (i - 1) + 2]);
    }
  }
  return x;
}

OptimizerOptions plain() {
  OptimizerOptions o;
  o.robust_loops = false;
  return o;
}

}  // namespace

TEST_CASE("residual examples") {
  const Se2 a(0.3, -1.0, 0.7);
  const Se2 z(1.0, 0.5, -0.2);
  const Eigen::Vector3d r0 = residual(z, a, a * z);
  CHECK(r0.norm() < 1e-12);
  const Eigen::Vector3d r1 = residual(Se2(1, 0, 0), Se2::identity(), Se2::identity());
  CHECK(r1.x() == doctest::Approx(-1.0));
  CHECK(std::abs(r1.y()) < 1e-15);
  CHECK(std::abs(r1.z()) < 1e-15);
}

TEST_CASE("residual matches the matrix-composition oracle") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> t(-10, 10), ang(-3.1, 3.1);
  for (int k = 0; k < 1000; ++k) {
    const Se2 z(t(rng), t(rng), ang(rng)), a(t(rng), t(rng), ang(rng)), b(t(rng), t(rng), ang(rng));
    const Eigen::Vector3d r = residual(z, a, b);
    const Eigen::Vector3d o = matrix_residual(z, a, b);
    CHECK((r.head<2>() - o.head<2>()).norm() < 1e-12);
    CHECK(std::abs(wrap_angle(r.z() - o.z())) < 1e-12);
    CHECK(r.z() > -M_PI);
    CHECK(r.z() <= M_PI);
  }
}

TEST_CASE("analytic jacobians agree with central differences") {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> t(-5, 5), ang(-3.1, 3.1);
  int checked = 0;
  while (checked < 1000) {
    const Se2 z(t(rng), t(rng), ang(rng)), a(t(rng), t(rng), ang(rng)), b(t(rng), t(rng), ang(rng));
    if (std::abs(residual(z, a, b).z()) > 3.0) continue;  // keep the difference stencil off the yaw wrap
    Eigen::Matrix3d ja, jb;
    residual_jacobians(z, a, b, ja, jb);
    Eigen::Matrix3d fa, fb;
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d p = a.vec(), m = a.vec();
      p[k] += 1e-6;
      m[k] -= 1e-6;
      fa.col(k) = (residual(z, Se2(p[0], p[1], p[2]), b) - residual(z, Se2(m[0], m[1], m[2]), b)) / 2e-6;
      p = b.vec();
      m = b.vec();
      p[k] += 1e-6;
      m[k] -= 1e-6;
      fb.col(k) = (residual(z, a, Se2(p[0], p[1], p[2])) - residual(z, a, Se2(m[0], m[1], m[2]))) / 2e-6;
    }
    CHECK((ja - fa).norm() <= 1e-5 * std::max(1.0, fa.norm()));
    CHECK((jb - fb).norm() <= 1e-5 * std::max(1.0, fb.norm()));
    ++checked;
  }
}

TEST_CASE("perfect measurements leave the chain untouched") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> d(-0.5, 1.0), ang(-0.3, 0.3);
  std::vector<Se2> deltas;
  for (int i = 0; i < 30; ++i) deltas.emplace_back(d(rng), 0.2 * d(rng), ang(rng));
  const auto poses = chain_integrate(Se2::identity(), deltas);
  std::vector<PoseEdge> odom, loops;
  for (int i = 0; i < 30; ++i) odom.push_back({i, i + 1, deltas[static_cast<std::size_t>(i)], Eigen::Matrix3d::Identity()});
  loops.push_back({2, 25, poses[2].inverse() * poses[25], Eigen::Matrix3d::Identity() * 4.0});
  const GraphSolution s = optimize(nodes_from(poses), odom, loops);
  CHECK(s.final_cost < 1e-20);
  CHECK(s.iterations <= 2);
  CHECK(s.converged);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    CHECK((s.poses[i].vec() - poses[i].vec()).norm() < 1e-12);
  }
}

TEST_CASE("zero loops reproduce the odometry chain exactly") {
  std::vector<Se2> deltas{{1, 0, 0.1}, {0.5, 0.2, -0.3}, {2, -0.1, 0.05}};
  const auto poses = chain_integrate(Se2(1, 2, 0.5), deltas);
  std::vector<PoseEdge> odom;
  for (int i = 0; i < 3; ++i) odom.push_back({i, i + 1, deltas[static_cast<std::size_t>(i)], Eigen::Matrix3d::Identity()});
  const GraphSolution s = optimize(nodes_from(poses), odom, {});
  CHECK(s.initial_cost < 1e-25);
  for (std::size_t i = 0; i < poses.size(); ++i) CHECK(s.poses[i].vec() == poses[i].vec());
}

TEST_CASE("three-node chain with a conflicting loop") {
  // identity information everywhere, loop disagrees with the chain
  const std::vector<Se2> deltas{{1, 0, 0}, {1, 0, 0}};
  const auto init = chain_integrate(Se2::identity(), deltas);
  std::vector<PoseEdge> odom{{0, 1, deltas[0], Eigen::Matrix3d::Identity()}, {1, 2, deltas[1], Eigen::Matrix3d::Identity()}};

  SUBCASE("small conflict: one linear least-squares step") {
    const double e = 1e-4;
    std::vector<PoseEdge> loops{{0, 2, Se2(2 + e, -e, e), Eigen::Matrix3d::Identity()}};
    // linearized at the chain: r = r0 + J dx, with J from matrix-oracle differences
    std::vector<PoseEdge> all = odom;
    all.push_back(loops[0]);
    const auto want = oracle_solve(init, all, 1);
    const GraphSolution s = optimize(nodes_from(init), odom, loops, plain());
    for (std::size_t i = 0; i < 3; ++i) CHECK((s.poses[i].vec() - want[i].vec()).norm() < 1e-6);
  }
  SUBCASE("large conflict: converged optimum") {
    std::vector<PoseEdge> loops{{0, 2, Se2(2.3, 0.4, 0.2), Eigen::Matrix3d::Identity()}};
    std::vector<PoseEdge> all = odom;
    all.push_back(loops[0]);
    const auto want = oracle_solve(init, all, 30);
    const GraphSolution s = optimize(nodes_from(init), odom, loops, plain());
    CHECK(s.converged);
    for (std::size_t i = 0; i < 3; ++i) CHECK((s.poses[i].vec() - want[i].vec()).norm() < 1e-6);
    CHECK(s.final_cost < s.initial_cost);
  }
}

TEST_CASE("cost never rises across accepted steps") {
  std::mt19937 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Se2> truth_deltas, noisy;
  for (int i = 0; i < 120; ++i) {
    const Se2 d(0.5, 0.0, (i % 30 == 0) ? M_PI / 2 : 0.0);
    truth_deltas.push_back(d);
    noisy.push_back(d * Se2(0.02 * n(rng), 0.02 * n(rng), 0.01 * n(rng)));
  }
  const auto truth = chain_integrate(Se2::identity(), truth_deltas);
  const auto init = chain_integrate(Se2::identity(), noisy);
  std::vector<PoseEdge> odom, loops;
  const Eigen::Matrix3d info = Eigen::Vector3d(2500, 2500, 10000).asDiagonal();
  for (int i = 0; i < 120; ++i) odom.push_back({i, i + 1, noisy[static_cast<std::size_t>(i)], info});
  for (int i = 0; i + 60 <= 120; i += 10) loops.push_back({i, i + 60, truth[i].inverse() * truth[i + 60], info});
  loops.push_back({5, 70, Se2(3, -2, 1), info});  // a wrong match
  for (bool robust : {false, true}) {
    OptimizerOptions o;
    o.robust_loops = robust;
    const GraphSolution s = optimize(nodes_from(init), odom, loops, o);
    REQUIRE(s.cost_history.size() >= 2);
    for (std::size_t k = 1; k < s.cost_history.size(); ++k) CHECK(s.cost_history[k] <= s.cost_history[k - 1]);
    CHECK(s.final_cost == doctest::Approx(graph_cost(s.poses, odom, loops, o)).epsilon(1e-12));
    CHECK(s.final_cost <= s.initial_cost);
  }
}

TEST_CASE("sparse and dense solvers agree") {
  std::mt19937 rng(10);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Se2> deltas;
  for (int i = 0; i < 300; ++i) deltas.push_back(Se2(0.3, 0.0, 0.02) * Se2(0.01 * n(rng), 0.01 * n(rng), 0.005 * n(rng)));
  const auto init = chain_integrate(Se2::identity(), deltas);
  std::vector<PoseEdge> odom, loops;
  for (int i = 0; i < 300; ++i) odom.push_back({i, i + 1, deltas[static_cast<std::size_t>(i)], Eigen::Matrix3d::Identity() * 100});
  loops.push_back({0, 300, Se2(0.5, 0.2, 0.1), Eigen::Matrix3d::Identity() * 100});
  loops.push_back({50, 250, Se2(-1.0, 3.0, 2.0), Eigen::Matrix3d::Identity() * 100});
  OptimizerOptions sparse;
  sparse.dense_below = 0;
  OptimizerOptions dense;
  dense.dense_below = 1000;
  const GraphSolution a = optimize(nodes_from(init), odom, loops, sparse);
  const GraphSolution b = optimize(nodes_from(init), odom, loops, dense);
  for (std::size_t i = 0; i < init.size(); ++i) CHECK((a.poses[i].vec() - b.poses[i].vec()).norm() < 1e-8);
}

TEST_CASE("gauge invariance") {
  std::mt19937 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Se2> deltas;
  for (int i = 0; i < 40; ++i) deltas.push_back(Se2(1.0, 0.0, 2 * M_PI / 40) * Se2(0.05 * n(rng), 0.05 * n(rng), 0.02 * n(rng)));
  const auto init = chain_integrate(Se2::identity(), deltas);
  const auto truth = chain_integrate(Se2::identity(), std::vector<Se2>(40, Se2(1.0, 0.0, 2 * M_PI / 40)));
  std::vector<PoseEdge> odom, loops;
  for (int i = 0; i < 40; ++i) odom.push_back({i, i + 1, deltas[static_cast<std::size_t>(i)], Eigen::Matrix3d::Identity() * 50});
  loops.push_back({0, 40, Se2::identity(), Eigen::Matrix3d::Identity() * 50});
  loops.push_back({10, 30, truth[10].inverse() * truth[30], Eigen::Matrix3d::Identity() * 50});
  OptimizerOptions o;
  o.relative_tolerance = 1e-15;
  const GraphSolution base = optimize(nodes_from(init), odom, loops, o);
  const Se2 g(12.0, -3.0, 2.2);
  std::vector<Se2> moved;
  for (const auto& p : init) moved.push_back(g * p);
  const GraphSolution s = optimize(nodes_from(moved), odom, loops, o);
  for (std::size_t i = 0; i < init.size(); ++i) {
    const Se2 want = g * base.poses[i];
    CHECK(std::hypot(s.poses[i].x - want.x, s.poses[i].y - want.y) < 1e-8);
    CHECK(std::abs(wrap_angle(s.poses[i].yaw - want.yaw)) < 1e-8);
  }
}

TEST_CASE("missing gauge is singular") {
  const std::vector<Se2> deltas{{1, 0, 0}, {1, 0, 0}};
  const auto init = chain_integrate(Se2::identity(), deltas);
  std::vector<PoseEdge> odom{{0, 1, deltas[0], Eigen::Matrix3d::Identity()}, {1, 2, deltas[1], Eigen::Matrix3d::Identity()}};
  OptimizerOptions o;
  o.fixed_node = -1;
  CHECK_THROWS_AS(optimize(nodes_from(init), odom, {}, o), SingularSystem);
  std::vector<PoseEdge> bad{{0, 5, deltas[0], Eigen::Matrix3d::Identity()}};
  CHECK_THROWS_AS(optimize(nodes_from(init), bad, {}), InvalidArgument);
}

TEST_CASE("chain_integrate") {
  const auto same = chain_integrate(Se2::identity(), std::vector<Se2>(5, Se2::identity()));
  REQUIRE(same.size() == 6);
  for (const auto& p : same) CHECK(p.vec().norm() == 0.0);
  const auto line = chain_integrate(Se2::identity(), std::vector<Se2>(4, Se2(0.5, 0, 0)));
  for (std::size_t i = 0; i < line.size(); ++i) {
    CHECK(line[i].x == doctest::Approx(0.5 * i));
    CHECK(line[i].y == 0.0);
  }
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(-2, 2);
  std::vector<Se2> deltas;
  for (int i = 0; i < 50; ++i) deltas.emplace_back(u(rng), u(rng), u(rng));
  const Se2 origin(3, -1, 0.4);
  const auto chain = chain_integrate(origin, deltas);
  Eigen::Matrix3d m = oracle::se2_matrix(origin);
  CHECK((chain[0].vec() - origin.vec()).norm() < 1e-12);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    m = m * oracle::se2_matrix(deltas[i]);
    CHECK(std::hypot(chain[i + 1].x - m(0, 2), chain[i + 1].y - m(1, 2)) < 1e-12);
    CHECK(std::abs(wrap_angle(chain[i + 1].yaw - std::atan2(m(1, 0), m(0, 0)))) < 1e-12);
  }
}

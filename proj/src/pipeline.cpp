#include "sgfloc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>
#include <variant>

#include "json.hpp"
#include "sgfloc/dataset.hpp"
#include "sgfloc/errors.hpp"
#include "sgfloc/sgf_detection.hpp"

namespace sgfloc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Member = std::variant<int PipelineConfig::*, double PipelineConfig::*, bool PipelineConfig::*>;

struct KeySpec {
  const char* name;
  Member member;
  double lo;
  double hi;
  bool lo_open;  // lower bound excluded
  const char* help;
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"queue_size", &PipelineConfig::queue_size, 1, 100000, false, "pose queue length"},
      {"pitch_gate", &PipelineConfig::pitch_gate, 0, 1, true, "queue pitch gate, rad"},
      {"motion_compensation", &PipelineConfig::motion_compensation, 0, 1, false, "apply roll/pitch compensation"},
      {"hu_threshold", &PipelineConfig::hu_threshold, 0, 10, true, "stable-pair Hu distance"},
      {"min_pixels", &PipelineConfig::min_pixels, 1, 1e6, false, "smallest BEV blob kept"},
      {"track_gate", &PipelineConfig::track_gate, 0, 10, true, "track association gate, m"},
      {"track_gap", &PipelineConfig::track_gap, 0, 1000, false, "missed frames before a track closes"},
      {"l_max", &PipelineConfig::l_max, 0, 100, true, "descriptor radius, m"},
      {"n_sectors", &PipelineConfig::n_sectors, 6, 3600, false, "descriptor azimuth sectors"},
      {"n_rings", &PipelineConfig::n_rings, 1, 1000, false, "descriptor rings"},
      {"grid_pitch", &PipelineConfig::grid_pitch, 0, 1, true, "point downsampling cell, m"},
      {"group_threshold", &PipelineConfig::group_threshold, 0, 2, true, "new-group descriptor distance"},
      {"symmetry_tol", &PipelineConfig::symmetry_tol, 0, 2, false, "self-similarity tolerance"},
      {"min_loop_gap", &PipelineConfig::min_loop_gap, 0, 1e9, false, "frames between loop poses"},
      {"icp_max_iter", &PipelineConfig::icp_max_iter, 1, 10000, false, "ICP iterations"},
      {"icp_tol", &PipelineConfig::icp_tol, 0, 1, true, "ICP update tolerance"},
      {"icp_rms_ok", &PipelineConfig::icp_rms_ok, 0, 10, true, "ICP convergence rms, m"},
      {"icp_reject", &PipelineConfig::icp_reject, 1, 100, false, "ICP outlier factor over median"},
      {"icp_inlier_radius", &PipelineConfig::icp_inlier_radius, 0, 1, true, "ICP fitness radius, m"},
      {"icp_min_inlier", &PipelineConfig::icp_min_inlier, 0, 1, false, "ICP fitness fraction required"},
      {"opt_max_iter", &PipelineConfig::opt_max_iter, 1, 10000, false, "optimizer iterations"},
      {"opt_tol", &PipelineConfig::opt_tol, 0, 1, true, "relative cost decrease to stop"},
      {"opt_lambda", &PipelineConfig::opt_lambda, 0, 1e6, true, "initial damping"},
      {"robust_loops", &PipelineConfig::robust_loops, 0, 1, false, "Huber kernel on loop edges"},
      {"huber_delta", &PipelineConfig::huber_delta, 0, 1e6, true, "Huber threshold"},
      {"odom_sigma_x", &PipelineConfig::odom_sigma_x, 0, 10, true, "odometry sigma x per step, m"},
      {"odom_sigma_y", &PipelineConfig::odom_sigma_y, 0, 10, true, "odometry sigma y per step, m"},
      {"odom_sigma_yaw", &PipelineConfig::odom_sigma_yaw, 0, 10, true, "odometry sigma yaw per step, rad"},
      {"workers", &PipelineConfig::workers, 0, 256, false, "warp threads, 0 = all cores"},
  };
  return specs;
}

const KeySpec& spec_for(const std::string& key) {
  for (const KeySpec& s : key_specs()) {
    if (key == s.name) return s;
  }
  throw InvalidInput("unknown config key '" + key + "'");
}

double value_of(const PipelineConfig& c, const KeySpec& s) {
  return std::visit([&](auto m) { return static_cast<double>(c.*m); }, s.member);
}

bool in_range(double v, const KeySpec& s) { return (s.lo_open ? v > s.lo : v >= s.lo) && v <= s.hi; }

std::string range_text(const KeySpec& s) {
  return std::string(s.lo_open ? "(" : "[") + format_double(s.lo) + ", " + format_double(s.hi) + "]";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const KeySpec& s = spec_for(key);
  std::visit(
      [&](auto m) {
        using T = std::remove_reference_t<decltype(this->*m)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (value == "1" || value == "true") {
            this->*m = true;
          } else if (value == "0" || value == "false") {
            this->*m = false;
          } else {
            throw InvalidInput("config key '" + key + "' expects true/false, got '" + value + "'");
          }
        } else {
          double v = 0.0;
          try {
            v = parse_double(value, key);
          } catch (const Error&) {
            throw InvalidInput("config key '" + key + "' expects a number, got '" + value + "'");
          }
          if (!in_range(v, s)) {
            throw InvalidInput("config key '" + key + "' = " + value + " outside " + range_text(s));
          }
          if constexpr (std::is_same_v<T, int>) {
            if (v != std::floor(v)) throw InvalidInput("config key '" + key + "' expects an integer");
            this->*m = static_cast<int>(v);
          } else {
            this->*m = v;
          }
        }
      },
      s.member);
}

void PipelineConfig::validate() const {
  for (const KeySpec& s : key_specs()) {
    const double v = value_of(*this, s);
    if (!in_range(v, s)) {
      throw InvalidInput(std::string("config key '") + s.name + "' = " + format_double(v) + " outside " +
                         range_text(s));
    }
  }
}

std::string PipelineConfig::to_string() const {
  std::string out;
  for (const KeySpec& s : key_specs()) out += std::string(s.name) + " = " + format_double(value_of(*this, s)) + '\n';
  return out;
}

PipelineConfig PipelineConfig::from_file(const KeyValueFile& kv) {
  PipelineConfig c;
  for (const auto& [key, value] : kv.entries()) c.set(key, value);
  return c;
}

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const KeySpec& s : key_specs()) out.emplace_back(s.name);
    return out;
  }();
  return k;
}

std::string PipelineConfig::describe(const std::string& key) {
  const KeySpec& s = spec_for(key);
  const bool is_bool = std::holds_alternative<bool PipelineConfig::*>(s.member);
  return std::string(s.help) + (is_bool ? " (true/false)" : " " + range_text(s));
}

std::vector<Pose6> PipelineResult::optimized_poses() const {
  std::vector<Pose6> out = odometry;
  for (std::size_t i = 0; i < out.size() && i < optimized.size(); ++i) {
    out[i].x = optimized[i].x;
    out[i].y = optimized[i].y;
    out[i].yaw = optimized[i].yaw;
  }
  return out;
}

PipelineResult run_pipeline(const PipelineInput& input, const PipelineConfig& config) {
  config.validate();
  try {
    input.camera.validate();
    input.virtual_camera.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidInput(e.what());
  }
  if (input.odometry.empty()) throw InvalidInput("empty odometry stream");

  PipelineResult res;
  res.odometry = input.odometry;
  const int n = static_cast<int>(input.odometry.size());
  const VirtualCamera& vc = input.virtual_camera;

  // Attitude compensation depends only on odometry, so it is computed up front.
  std::vector<MotionState> motion(static_cast<std::size_t>(n));
  std::vector<Se2> deltas(static_cast<std::size_t>(n));
  {
    PoseQueue queue(static_cast<std::size_t>(config.queue_size), config.pitch_gate);
    for (int i = 0; i < n; ++i) {
      const Pose6& p = input.odometry[static_cast<std::size_t>(i)];
      if (config.motion_compensation && !queue.empty()) motion[static_cast<std::size_t>(i)] = compensation_from_queue(queue, p);
      queue.push(p);
      if (i > 0) deltas[static_cast<std::size_t>(i)] = input.odometry[static_cast<std::size_t>(i) - 1].planar().inverse() * p.planar();
    }
  }

  DescriptorParams dp;
  dp.l_max = config.l_max;
  dp.n_sectors = config.n_sectors;
  dp.n_rings = config.n_rings;
  dp.validate();
  IcpParams icp_params;
  icp_params.max_iter = config.icp_max_iter;
  icp_params.tol = config.icp_tol;
  icp_params.rms_ok = config.icp_rms_ok;
  icp_params.reject_factor = config.icp_reject;
  icp_params.inlier_radius = config.icp_inlier_radius;
  icp_params.min_inlier_fraction = config.icp_min_inlier;
  TrackerParams tp;
  tp.gate_m = config.track_gate;
  tp.gap_frames = config.track_gap;
  tp.min_pixels = static_cast<std::size_t>(config.min_pixels);

  FeatureTracker tracker(vc, tp);
  GroupSet groups(config.group_threshold, config.symmetry_tol);

  auto process = [&](const FeatureTrack& t) {
    ++res.track_count;
    res.track_log.push_back(format_track_records(t));
    const auto cand = select_optimal_sgf(t, config.hu_threshold);
    if (!cand) return;
    SgfInstance inst;
    try {
      inst.points = back_project(*cand, vc, cand->frame, config.grid_pitch, config.l_max);
    } catch (const DegenerateShape&) {
      return;
    }
    inst.id = static_cast<int>(res.instances.size());
    inst.frame = cand->frame;
    inst.hu = cand->hu;
    inst.descriptor = build_descriptor(inst.points, dp);
    inst.symmetric = symmetry_test(inst.descriptor, config.symmetry_tol);
    groups.assign(inst);
    res.detections.push_back({inst.id, inst.frame, inst.points.centroid});
    const auto lc = find_loop_candidate(inst, groups, res.instances, config.min_loop_gap);
    res.instances.push_back(inst);
    if (!lc) return;
    const SgfInstance& member = res.instances[static_cast<std::size_t>(lc->member)];
    LoopAttempt attempt;
    attempt.query = inst.id;
    attempt.member = member.id;
    attempt.distance = lc->distance;
    try {
      const IcpResult icp = icp_2d(inst.points, member.points, icp_init_from_shift(lc->shift, dp.n_sectors), icp_params);
      attempt.icp_rms = icp.rms;
      attempt.inlier_fraction = icp.inlier_fraction;
      auto c = make_loop_constraint(member, inst, icp, groups, lc->shift, config.l_max);
      if (c) {
        res.constraints.push_back(*c);
        attempt.closed = true;
      }
    } catch (const Error& e) {
      res.warnings.push_back("frame " + std::to_string(inst.frame) + ": loop closure: " + e.what());
    }
    res.attempts.push_back(attempt);
  };

  // Warping is independent per frame and runs on a worker pool in blocks;
  // tracking consumes the block in frame order.
  const int workers = config.workers > 0 ? config.workers
                                         : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  constexpr int kBlock = 128;
  std::vector<BevMask> block(kBlock);
  std::vector<std::string> block_errors(kBlock);
  auto warp_one = [&](int frame, BevMask& out, std::string& err) {
    err.clear();
    try {
      const BinaryImage mask = input.mask(frame);
      if (mask.width != input.camera.width || mask.height != input.camera.height) {
        throw DimensionMismatch("mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height));
      }
      if (mask.empty()) {
        out = {BinaryImage(vc.width, vc.height), BinaryImage(vc.width, vc.height)};
      } else {
        out = warp_mask_to_bev(mask, input.camera, vc, motion[static_cast<std::size_t>(frame)]);
      }
    } catch (const std::exception& e) {
      out = {BinaryImage(vc.width, vc.height), BinaryImage(vc.width, vc.height)};
      err = e.what();
    }
  };

  for (int start = 0; start < n; start += kBlock) {
    const int count = std::min(kBlock, n - start);
    if (workers <= 1) {
      for (int k = 0; k < count; ++k) warp_one(start + k, block[static_cast<std::size_t>(k)], block_errors[static_cast<std::size_t>(k)]);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (int k = w; k < count; k += workers) {
            warp_one(start + k, block[static_cast<std::size_t>(k)], block_errors[static_cast<std::size_t>(k)]);
          }
        });
      }
      for (auto& t : pool) t.join();
    }
    for (int k = 0; k < count; ++k) {
      const int frame = start + k;
      if (!block_errors[static_cast<std::size_t>(k)].empty()) {
        res.warnings.push_back("frame " + std::to_string(frame) + ": " + block_errors[static_cast<std::size_t>(k)]);
      }
      try {
        for (const FeatureTrack& t : tracker.push(frame, block[static_cast<std::size_t>(k)], deltas[static_cast<std::size_t>(frame)])) process(t);
      } catch (const Error& e) {
        res.warnings.push_back("frame " + std::to_string(frame) + ": detection: " + e.what());
      }
    }
  }
  for (const FeatureTrack& t : tracker.flush()) process(t);
  res.group_count = groups.size();

  // Pose graph over every frame.
  std::vector<PoseNode> nodes;
  nodes.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Pose6& p = input.odometry[static_cast<std::size_t>(i)];
    nodes.push_back({i, p.planar(), p.timestamp});
  }
  res.optimized.reserve(nodes.size());
  for (const PoseNode& node : nodes) res.optimized.push_back(node.estimate);
  if (res.constraints.empty()) return res;

  const Eigen::Matrix3d odo_info = Eigen::Vector3d(1.0 / (config.odom_sigma_x * config.odom_sigma_x),
                                                   1.0 / (config.odom_sigma_y * config.odom_sigma_y),
                                                   1.0 / (config.odom_sigma_yaw * config.odom_sigma_yaw))
                                       .asDiagonal();
  std::vector<PoseEdge> odometry_edges;
  odometry_edges.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i < n; ++i) odometry_edges.push_back({i - 1, i, deltas[static_cast<std::size_t>(i)], odo_info});
  std::vector<PoseEdge> loop_edges;
  for (const LoopConstraint& c : res.constraints) loop_edges.push_back({c.pose_i, c.pose_j, c.z, c.information});

  OptimizerOptions opts;
  opts.max_iterations = config.opt_max_iter;
  opts.relative_tolerance = config.opt_tol;
  opts.initial_lambda = config.opt_lambda;
  opts.robust_loops = config.robust_loops;
  opts.huber_delta = config.huber_delta;
  res.solution = optimize(nodes, odometry_edges, loop_edges, opts);
  res.optimized = res.solution->poses;
  return res;
}

std::vector<Se2> groundtruth_by_frame(const std::vector<Pose6>& odometry, const std::vector<Pose6>& groundtruth) {
  std::vector<Se2> out;
  if (groundtruth.empty()) return out;
  out.reserve(odometry.size());
  for (const Pose6& p : odometry) {
    auto it = std::lower_bound(groundtruth.begin(), groundtruth.end(), p.timestamp,
                               [](const Pose6& g, double t) { return g.timestamp < t; });
    if (it == groundtruth.end()) {
      --it;
    } else if (it != groundtruth.begin() && p.timestamp - (it - 1)->timestamp < it->timestamp - p.timestamp) {
      --it;
    }
    out.push_back(it->planar());
  }
  return out;
}

namespace {

json ate_json(const AteReport& r) {
  return {{"rmse", r.rmse}, {"mean", r.mean}, {"median", r.median}, {"max", r.max}, {"pairs", r.pairs}};
}

std::string svg_polyline(const std::vector<Eigen::Vector2d>& pts, const std::string& color,
                         const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& map) {
  std::string out = "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"";
  char buf[64];
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Eigen::Vector2d q = map(pts[i]);
    std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", q.x(), q.y());
    out += buf;
  }
  return out + "\"/>\n";
}

std::string trajectory_svg(const std::vector<std::pair<std::string, std::vector<Eigen::Vector2d>>>& lines) {
  Eigen::Vector2d lo(1e300, 1e300);
  Eigen::Vector2d hi(-1e300, -1e300);
  for (const auto& [color, pts] : lines) {
    for (const auto& p : pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  if (lo.x() > hi.x()) lo = hi = Eigen::Vector2d::Zero();
  constexpr double kSize = 800.0;
  constexpr double kMargin = 20.0;
  const double span = std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1e-6});
  const double scale = (kSize - 2 * kMargin) / span;
  auto map = [&](const Eigen::Vector2d& p) {
    return Eigen::Vector2d(kMargin + (p.x() - lo.x()) * scale, kSize - kMargin - (p.y() - lo.y()) * scale);
  };
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" viewBox=\"0 0 800 800\">\n";
  out += "<rect width=\"800\" height=\"800\" fill=\"white\"/>\n";
  for (const auto& [color, pts] : lines) out += svg_polyline(pts, color, map);
  return out + "</svg>\n";
}

std::vector<Eigen::Vector2d> xy(const std::vector<Pose6>& poses) {
  std::vector<Eigen::Vector2d> out;
  for (const Pose6& p : poses) out.emplace_back(p.x, p.y);
  return out;
}

}  // namespace

void write_outputs(const fs::path& out, const PipelineResult& r, const PipelineConfig& config, const Reference* ref) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());

  const std::vector<Pose6> optimized = r.optimized_poses();
  write_tum(out / "trajectory.tum", optimized);
  write_tum(out / "odometry.tum", r.odometry);

  std::string constraints = "# pose_i pose_j x y yaw rms group shift\n";
  for (const LoopConstraint& c : r.constraints) constraints += format_constraint_record(c) + '\n';
  write_text(out / "constraints.log", constraints);

  std::string tracks = "# frame track centroid_x centroid_y hu1 hu2 hu3 hu4 hu5 hu6 hu7 d_hu_prev\n";
  for (const std::string& t : r.track_log) tracks += t;
  write_text(out / "tracks.log", tracks);

  std::string descriptors;
  for (const SgfInstance& inst : r.instances) descriptors += format_descriptor_record(inst);
  write_text(out / "descriptors.log", descriptors);

  json metrics;
  metrics["schema_version"] = 1;
  metrics["version"] = version_string();
  metrics["frames"] = r.odometry.size();
  metrics["tracks"] = r.track_count;
  metrics["instances"] = r.instances.size();
  metrics["groups"] = r.group_count;
  metrics["loop_attempts"] = r.attempts.size();
  metrics["constraints"] = r.constraints.size();
  metrics["warnings"] = r.warnings;
  json cfg = json::object();
  for (const std::string& key : PipelineConfig::keys()) {
    const KeySpec& s = spec_for(key);
    std::visit([&](auto m) { cfg[key] = config.*m; }, s.member);
  }
  metrics["config"] = cfg;
  if (r.solution) {
    metrics["optimizer"] = {{"initial_cost", r.solution->initial_cost},
                            {"final_cost", r.solution->final_cost},
                            {"iterations", r.solution->iterations},
                            {"converged", r.solution->converged}};
  } else {
    metrics["optimizer"] = nullptr;
  }

  std::vector<std::pair<std::string, std::vector<Eigen::Vector2d>>> lines;
  if (ref && !ref->groundtruth.empty()) {
    const auto gt = stamped(ref->groundtruth);
    const auto odo = stamped(r.odometry);
    const auto opt = stamped(optimized);
    const AteReport a_odo = ate(odo, gt);
    const AteReport a_opt = ate(opt, gt);
    metrics["ate"] = {{"odometry", ate_json(a_odo)}, {"optimized", ate_json(a_opt)}};
    lines.emplace_back("#2a9d2a", xy(ref->groundtruth));
  }
  lines.emplace_back("#999999", xy(r.odometry));
  lines.emplace_back("#d03030", xy(optimized));
  write_text(out / "trajectory.svg", trajectory_svg(lines));

  if (ref && ref->annotations && !ref->groundtruth.empty()) {
    const auto gt_frames = groundtruth_by_frame(r.odometry, ref->groundtruth);
    const SequenceCounters c = count_sequence_metrics(r.detections, r.attempts, gt_frames, *ref->annotations);
    metrics["counters"] = {{"detected", c.detected},
                           {"expected", c.expected},
                           {"loops_found", c.loops_found},
                           {"loops_total", c.loops_total},
                           {"loops_found_reverse", c.loops_found_reverse},
                           {"loops_total_reverse", c.loops_total_reverse},
                           {"closed", c.closed},
                           {"closed_reverse", c.closed_reverse}};
    write_text(out / "counters.csv", counters_csv(ref->annotations->sequence.empty() ? "sequence" : ref->annotations->sequence, c));
  }
  write_text(out / "metrics.json", metrics.dump(2) + '\n');
}

PipelineResult run_dataset(const fs::path& dataset, const PipelineConfig& config, const fs::path& out) {
  const DatasetManifest m = DatasetManifest::load(dataset);
  const Calibration calib = load_calibration(m.calibration);
  PipelineInput input;
  input.camera = calib.camera;
  input.virtual_camera = calib.virtual_camera;
  input.odometry = read_odometry_csv(m.odometry);
  input.mask = [&m](int frame) { return read_png(m.mask_path(frame)); };

  Reference ref;
  if (m.groundtruth) ref.groundtruth = read_tum(*m.groundtruth);
  if (m.annotations) ref.annotations = read_annotations(*m.annotations);

  PipelineResult r = run_pipeline(input, config);
  write_outputs(out, r, config, &ref);
  return r;
}

Scenario run_simulate(ScenarioKind kind, std::uint64_t seed, const fs::path& out, const SimulateOptions& opts) {
  if (!(opts.noise_scale >= 0.0)) throw InvalidInput("noise scale must be >= 0");
  Scenario s = make_scenario(kind, seed);
  s.noise.sigma_x *= opts.noise_scale;
  s.noise.sigma_y *= opts.noise_scale;
  s.noise.sigma_yaw *= opts.noise_scale;
  const std::vector<Pose6> odometry = noisy_odometry(s, seed + 0x5eed);
  write_dataset(out, s, odometry, annotate(s));
  return s;
}

std::string version_string() { return "0.1.0"; }

}  // namespace sgfloc

// Command-line front end: simulate datasets, run the pipeline, score
// trajectories.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <map>

#include "json.hpp"
#include "sgfloc/dataset.hpp"
#include "sgfloc/errors.hpp"
#include "sgfloc/evaluation.hpp"
#include "sgfloc/pipeline.hpp"

namespace {

constexpr int kInvalidInput = 2;
constexpr int kPipelineFailure = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground-marking localization: MC-IPM, SGF loop closure and pose-graph optimization"};
  app.require_subcommand(1);

  std::string kind = "delivery";
  std::uint64_t seed = 1;
  std::string sim_out;
  double noise_scale = 1.0;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset directory");
  sim->add_option("--kind", kind, "delivery | reverse_slope | large_loop")->capture_default_str();
  sim->add_option("--seed", seed, "Random seed")->capture_default_str();
  sim->add_option("--out", sim_out, "Output dataset directory")->required();
  sim->add_option("--noise-scale", noise_scale, "Multiplier on the odometry noise")->capture_default_str();

  std::string dataset;
  std::string config_path;
  std::string run_out;
  std::map<std::string, std::string> overrides;
  auto* run = app.add_subcommand("run", "Run the pipeline on a dataset directory");
  run->add_option("--dataset", dataset, "Dataset directory")->required();
  run->add_option("--config", config_path, "Config file (key = value)");
  run->add_option("--out", run_out, "Output directory")->required();
  for (const std::string& key : sgfloc::PipelineConfig::keys()) {
    run->add_option_function<std::string>(
        "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; },
        sgfloc::PipelineConfig::describe(key));
  }

  std::string est_path;
  std::string gt_path;
  bool no_align = false;
  bool with_scale = false;
  auto* eval = app.add_subcommand("eval", "Absolute trajectory error of a TUM trajectory");
  eval->add_option("--est", est_path, "Estimated trajectory (TUM)")->required();
  eval->add_option("--gt", gt_path, "Ground truth (TUM)")->required();
  eval->add_flag("--no-align", no_align, "Skip rigid alignment");
  eval->add_flag("--scale", with_scale, "Similarity alignment");

  auto* version = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInvalidInput;
  }

  try {
    if (*version) {
      std::cout << "sgfloc " << sgfloc::version_string() << '\n';
    } else if (*sim) {
      const auto s = sgfloc::run_simulate(sgfloc::scenario_kind_from_string(kind), seed, sim_out,
                                          sgfloc::SimulateOptions{noise_scale});
      std::cout << "wrote " << s.frame_count() << " frames, " << s.markings.size() << " markings to " << sim_out
                << '\n';
    } else if (*run) {
      sgfloc::PipelineConfig config;
      if (!config_path.empty()) config = sgfloc::PipelineConfig::from_file(sgfloc::KeyValueFile::load(config_path));
      for (const auto& [key, value] : overrides) config.set(key, value);
      const auto r = sgfloc::run_dataset(dataset, config, run_out);
      std::cout << r.odometry.size() << " frames, " << r.instances.size() << " SGFs, " << r.constraints.size()
                << " loop constraints\n";
      for (const std::string& w : r.warnings) std::cerr << "warning: " << w << '\n';
    } else if (*eval) {
      const auto est = sgfloc::read_tum(est_path);
      const auto gt = sgfloc::read_tum(gt_path);
      sgfloc::AteOptions opts;
      opts.align = !no_align;
      opts.with_scale = with_scale;
      const auto r = sgfloc::ate(sgfloc::stamped(est), sgfloc::stamped(gt), opts);
      nlohmann::json j = {{"rmse", r.rmse}, {"mean", r.mean}, {"median", r.median},
                          {"max", r.max},   {"pairs", r.pairs}, {"scale", r.scale}};
      std::cout << j.dump(2) << '\n';
    }
  } catch (const sgfloc::InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const sgfloc::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const sgfloc::NoOverlap& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "pipeline failure: " << e.what() << '\n';
    return kPipelineFailure;
  }
  return 0;
}

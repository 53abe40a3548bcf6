#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hba/errors.hpp"
#include "hba/evaluation.hpp"
#include "hba/frame_io.hpp"
#include "hba/pipeline.hpp"
#include "hba/pyramid.hpp"
#include "hba/run_config.hpp"
#include "hba/synth.hpp"

namespace fs = std::filesystem;
using namespace hba;

namespace {

void require_file(const std::string& path, const std::string& label) {
  if (!fs::is_regular_file(path)) throw InputError(label + ": not found");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct RunArgs {
  std::string scans;
  std::string poses;
  std::string config;
  std::string mode;
  std::string out_poses;
  std::string out_map;
  std::string report;
};

void write_report_file(const std::string& path, PipelineMode mode,
                       const std::vector<PassReport>& reports) {
  std::ofstream out(path);
  if (!out) throw InputError("report: cannot open " + path + " for writing");
  out << "# mode: " << mode_to_string(mode) << "\n";
  write_reports(out, reports);
}

void write_merged_map(const std::string& path, const std::vector<Frame>& frames,
                      const Trajectory& trajectory) {
  std::size_t total = 0;
  for (const Frame& f : frames) total += f.points.size();
  std::vector<Vec3> merged;
  merged.reserve(total);
  for (std::size_t i = 0; i < frames.size(); ++i)
    for (const Vec3& p : frames[i].points) merged.push_back(trajectory[i].act(p));
  write_map_ply(path, merged);
}

int cmd_run(const RunArgs& args) {
  RunSettings settings;
  if (!args.config.empty()) {
    require_file(args.config, "config");
    settings = load_run_settings(args.config);
  }
  if (!args.mode.empty()) settings.pipeline.mode = mode_from_string(args.mode);

  require_file(args.poses, "poses");
  const Trajectory init = load_trajectory(args.poses, settings.pose_format);
  if (!fs::is_directory(args.scans)) throw InputError("scans: not found");
  const std::vector<std::string> files = list_scan_files(args.scans, settings.scan_format);
  if (files.size() != init.size())
    throw LengthMismatch("scans: " + std::to_string(files.size()) + " files vs " +
                         std::to_string(init.size()) + " poses");

  std::fprintf(stderr, "hba: loading %zu scans from %s\n", files.size(), args.scans.c_str());
  std::vector<Frame> frames(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    frames[i].points = filter_points(load_scan(files[i], settings.scan_format),
                                     settings.filter_size, settings.filter_enabled);
    frames[i].pose = init[i];
    if ((i + 1) % 100 == 0 || i + 1 == files.size())
      std::fprintf(stderr, "hba: loaded %zu/%zu scans\n", i + 1, files.size());
  }

  const PipelineMode mode = settings.pipeline.mode;
  std::fprintf(stderr, "hba: mode %s, %zu frames\n", mode_to_string(mode).c_str(), frames.size());

  Trajectory refined;
  std::vector<PassReport> reports;
  std::string failure;
  const auto t0 = std::chrono::steady_clock::now();
  if (mode == PipelineMode::Hierarchical) {
    const RunResult r = run(frames, init, settings.pipeline);
    refined = r.trajectory;
    reports = r.reports;
    if (r.failed) failure = r.error;
  } else {
    refined = mode == PipelineMode::OriginalBa ? run_original_ba(frames, init, settings.pipeline)
              : mode == PipelineMode::ReducedBa
                  ? run_reduced_ba(frames, init, settings.pipeline)
                  : run_direct_assign(frames, init, settings.pipeline);
    PassReport rep;
    rep.pass = 1;
    rep.t_ba_s = seconds_since(t0);
    reports.push_back(rep);
  }
  const double wall = seconds_since(t0);

  if (!args.out_poses.empty()) {
    write_trajectory(args.out_poses, refined, settings.pose_format);
    std::fprintf(stderr, "hba: wrote %s\n", args.out_poses.c_str());
  }
  if (!args.out_map.empty()) {
    write_merged_map(args.out_map, frames, refined);
    std::fprintf(stderr, "hba: wrote %s\n", args.out_map.c_str());
  }
  if (!args.report.empty()) {
    write_report_file(args.report, mode, reports);
    std::fprintf(stderr, "hba: wrote %s\n", args.report.c_str());
  }

  if (!failure.empty()) {
    std::fprintf(stderr, "error: %s\n", failure.c_str());
    return 1;
  }
  if (mode == PipelineMode::Hierarchical) {
    std::printf("mode=%s frames=%zu passes=%zu top_cost=%.6e wall_s=%.3f\n",
                mode_to_string(mode).c_str(), frames.size(), reports.size(),
                reports.empty() ? 0.0 : reports.back().cost_ba, wall);
  } else {
    std::printf("mode=%s frames=%zu wall_s=%.3f\n", mode_to_string(mode).c_str(), frames.size(),
                wall);
  }
  return 0;
}

int cmd_eval_ate(const std::string& gt_path, const std::string& est_path,
                 const std::string& pose_format) {
  require_file(gt_path, "gt");
  require_file(est_path, "est");
  const PoseFormat pf = pose_format_from_string(pose_format);
  const AteResult r = ate(load_trajectory(est_path, pf), load_trajectory(gt_path, pf));
  std::printf("rot_rmse_deg=%.6f trans_rmse_m=%.6f\n", r.rot_rmse_deg, r.trans_rmse_m);
  return 0;
}

int cmd_eval_mme(const std::string& map_path, double radius, int workers) {
  require_file(map_path, "map");
  const double score = mme(load_map_ply(map_path), radius, workers);
  std::printf("mme=%.6f radius=%.3f\n", score, radius);
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  require_file(spec_path, "spec");
  const SceneSpec spec = parse_scene_file(spec_path);
  const SynthResult result = generate(spec);
  write_dataset(out_dir, result);
  std::size_t total = 0;
  for (const Frame& f : result.frames) total += f.points.size();
  std::fprintf(stderr, "hba: wrote %zu scans to %s\n", result.frames.size(), out_dir.c_str());
  std::printf("frames=%zu points=%zu out=%s\n", result.frames.size(), total, out_dir.c_str());
  return 0;
}

int cmd_plan(int n_frames, int w, int s, int n) {
  if (n_frames < 2) throw ConfigError("plan: need at least two frames");
  if (s < 2 || s >= w) throw ConfigError("plan: need 2 <= stride < window");
  if (n < 1) throw ConfigError("plan: workers must be >= 1");
  int cap = 1;
  if (n_frames >= w)
    cap = 1 + static_cast<int>(std::floor(std::log(static_cast<double>(n_frames) / w) /
                                              std::log(static_cast<double>(s)) +
                                          1e-9));
  for (int l = 1; l <= cap; ++l)
    std::printf("l=%d T_l=%.6e\n", l, predict_cost(n_frames, w, s, n, l));
  std::printf("closed_form_l=%d\n", closed_form_l(n_frames, w, s, n));
  std::printf("chosen_layers=%d\n", select_layers(n_frames, w, s, n));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical LiDAR map refinement"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* c_run = app.add_subcommand("run", "Refine a trajectory against its scans");
  c_run->add_option("--scans", run_args.scans, "Directory of scan files")->required();
  c_run->add_option("--poses", run_args.poses, "Initial trajectory file")->required();
  c_run->add_option("--config", run_args.config, "key=value settings file");
  c_run->add_option("--mode", run_args.mode,
                    "hierarchical | original_ba | reduced_ba | direct_assign");
  c_run->add_option("--out-poses", run_args.out_poses, "Refined trajectory output");
  c_run->add_option("--out-map", run_args.out_map, "Merged PLY map output");
  c_run->add_option("--report", run_args.report, "CSV pass report output");

  CLI::App* c_eval = app.add_subcommand("eval", "Trajectory and map metrics");
  c_eval->require_subcommand(1);
  std::string gt_path, est_path, eval_pose_format = "kitti";
  CLI::App* c_ate = c_eval->add_subcommand("ate", "Absolute trajectory error after alignment");
  c_ate->add_option("--gt", gt_path, "Ground-truth trajectory")->required();
  c_ate->add_option("--est", est_path, "Estimated trajectory")->required();
  c_ate->add_option("--pose-format", eval_pose_format, "kitti | tum");
  std::string map_path;
  double mme_radius = 0.5;
  int mme_workers = 8;
  CLI::App* c_mme = c_eval->add_subcommand("mme", "Mean map entropy of a point cloud");
  c_mme->add_option("--map", map_path, "PLY point cloud")->required();
  c_mme->add_option("--radius", mme_radius, "Neighborhood radius, meters");
  c_mme->add_option("--workers", mme_workers, "Worker threads");

  std::string spec_path, synth_out;
  CLI::App* c_synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  c_synth->add_option("--spec", spec_path, "Scene description file")->required();
  c_synth->add_option("--out", synth_out, "Output directory")->required();

  int plan_frames = 0, plan_w = 10, plan_s = 5, plan_n = 8;
  CLI::App* c_plan = app.add_subcommand("plan", "Predicted solve effort per layer count");
  c_plan->add_option("--frames", plan_frames, "Trajectory length")->required();
  c_plan->add_option("--w", plan_w, "Window size");
  c_plan->add_option("--s", plan_s, "Stride");
  c_plan->add_option("--n", plan_n, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(c_run)) return cmd_run(run_args);
    if (app.got_subcommand(c_eval)) {
      if (c_eval->got_subcommand(c_ate)) return cmd_eval_ate(gt_path, est_path, eval_pose_format);
      return cmd_eval_mme(map_path, mme_radius, mme_workers);
    }
    if (app.got_subcommand(c_synth)) return cmd_synth(spec_path, synth_out);
    return cmd_plan(plan_frames, plan_w, plan_s, plan_n);
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

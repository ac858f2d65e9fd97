// Copyright 2026 The Stereopick Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// stereopick command line: dataset generation, stereo matching, head
// decoding, evaluation and manipulation planning.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 domain failure
// (nothing to grasp, incomplete fold state, plane fit failure).

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "stereopick/dataset.hpp"
#include "stereopick/eval.hpp"
#include "stereopick/pipeline.hpp"
#include "stereopick/serial.hpp"
#include "stereopick/stereopick.hpp"

namespace fs = std::filesystem;
using namespace stereopick;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDomain = 3;

/// Scope guard that marks an output directory as incomplete until release().
class PartialMarker {
 public:
  explicit PartialMarker(const fs::path& dir) : marker_(dir / ".partial") {
    fs::create_directories(dir);
    std::ofstream(marker_.string()) << "incomplete\n";
  }
  void release() {
    std::error_code ec;
    fs::remove(marker_, ec);
    released_ = true;
  }
  ~PartialMarker() = default;  // marker intentionally survives on failure

 private:
  fs::path marker_;
  bool released_ = false;
};

void write_file_atomic(const std::string& path, const Json& j) {
  const std::string tmp = path + ".partial";
  write_json_file(tmp, j);
  fs::rename(tmp, path);
}

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;

  RunConfig build() const {
    RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const std::string& kv : overrides) {
      const size_t eq = kv.find('=');
      if (eq == std::string::npos)
        throw ConfigError("--set expects key=value, got: " + kv);
      cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed_set) cfg.seed = seed;
    if (threads > 0) cfg.threads = threads;
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_file, "flat key = value config file");
  cmd->add_option("--set", opts.overrides, "config override key=value (repeatable, wins over file)");
  cmd->add_option("--seed", opts.seed, "master random seed")->each([&](const std::string&) {
    opts.seed_set = true;
  });
  cmd->add_option("--threads", opts.threads, "worker threads");
}

StereoRig rig_from_scene_or_file(const std::string& scene_dir, const std::string& rig_file) {
  if (!rig_file.empty()) return rig_from_json(read_json_file(rig_file));
  if (!scene_dir.empty()) {
    const Json labels = read_json_file((fs::path(scene_dir) / "labels.json").string());
    return rig_from_json(labels.at("camera"));
  }
  throw ConfigError("stereo rig metadata required: pass --rig or --scene");
}

// ---------------------------------------------------------------------------

int cmd_generate(const CommonOptions& common, const std::string& out_dir, int scenes) {
  const RunConfig cfg = common.build();
  PartialMarker marker{fs::path(out_dir)};
  const auto start = std::chrono::steady_clock::now();
  const DatasetManifest manifest =
      write_dataset(out_dir, scenes, cfg.synth, cfg.seed, cfg.threads);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  marker.release();
  std::cout << "manifest: " << (fs::path(out_dir) / "manifest.json").string() << "\n";
  std::cout << "scenes: " << scenes << "  (" << (secs > 0 ? scenes / secs : 0.0)
            << " scenes/s)\n";
  return 0;
}

int cmd_match(const CommonOptions& common, std::string left_path, std::string right_path,
              const std::string& scene_dir, const std::string& rig_file,
              const std::string& out_dir) {
  const RunConfig cfg = common.build();
  if (!scene_dir.empty()) {
    if (left_path.empty()) left_path = (fs::path(scene_dir) / "left.png").string();
    if (right_path.empty()) right_path = (fs::path(scene_dir) / "right.png").string();
  }
  if (left_path.empty() || right_path.empty())
    throw ConfigError("match needs --left/--right or --scene");
  const StereoRig rig = rig_from_scene_or_file(scene_dir, rig_file);
  rig.validate();

  const ImageRgb left = read_png_rgb(left_path);
  const ImageRgb right = read_png_rgb(right_path);
  if (!left.same_shape(right)) throw ShapeError("stereo pair differs in shape");
  if (left.width() != rig.intrinsics.width || left.height() != rig.intrinsics.height)
    throw ShapeError("image size does not match rig metadata");

  PartialMarker marker{fs::path(out_dir)};
  const StereoResult result = run_stereo_pipeline(left, right, cfg);
  write_pfm((fs::path(out_dir) / "low.pfm").string(), result.low);
  write_png_disparity16((fs::path(out_dir) / "low.png").string(), result.low);
  write_pfm((fs::path(out_dir) / "disparity.pfm").string(), result.fused);
  write_png_disparity16((fs::path(out_dir) / "disparity.png").string(), result.fused);
  marker.release();

  std::vector<double> valid;
  for (int y = 0; y < result.fused.height(); ++y)
    for (int x = 0; x < result.fused.width(); ++x)
      if (result.fused.valid(x, y)) valid.push_back(result.fused.values(x, y));
  double median = 0.0;
  if (!valid.empty()) {
    std::nth_element(valid.begin(), valid.begin() + valid.size() / 2, valid.end());
    median = valid[valid.size() / 2];
  }
  std::cout << "valid pixels: " << valid.size() << "  median disparity: " << median << " px\n";
  return 0;
}

int cmd_decode(const CommonOptions& common, const std::string& tensors_dir,
               const std::string& out_dir, const std::string& rig_file,
               const std::string& scene_dir) {
  const RunConfig cfg = common.build();
  const HeadTensors tensors = load_head_tensors(tensors_dir);
  StereoRig rig;
  try {
    rig = rig_from_scene_or_file(scene_dir, rig_file);
  } catch (const ConfigError&) {
    // Fall back to the tensor dimensions with the default focal model.
    rig = SynthConfig{}.rig();
    rig.intrinsics.width = tensors.width;
    rig.intrinsics.height = tensors.height;
    rig.intrinsics.cx = tensors.width / 2.0;
    rig.intrinsics.cy = tensors.height / 2.0;
  }

  PartialMarker marker{fs::path(out_dir)};
  DecodeDiagnostics diag;
  const std::vector<Detection> detections =
      decode_obbs(tensors, rig.intrinsics, cfg.codec.peak_threshold, cfg.codec, &diag);
  const KeypointSet keypoints = decode_keypoints(tensors, cfg.codec);
  write_file_atomic((fs::path(out_dir) / "detections.json").string(),
                    detections_to_json(detections));
  write_file_atomic((fs::path(out_dir) / "keypoints.json").string(), to_json(keypoints));
  marker.release();
  std::cout << "detections: " << detections.size() << " (peaks " << diag.peaks << ", dropped "
            << diag.dropped_degenerate + diag.dropped_covariance + diag.dropped_unsupervised
            << ")\n";
  return 0;
}

int cmd_evaluate(const CommonOptions& common, const std::string& pred_dir,
                 const std::string& gt_dir, const std::string& task, const std::string& out_file,
                 bool plots) {
  const RunConfig cfg = common.build();
  const std::vector<std::string> scenes = read_manifest_scenes(gt_dir);

  // When the prediction side carries a manifest it must agree scene-by-scene.
  if (fs::exists(fs::path(pred_dir) / "manifest.json")) {
    const std::vector<std::string> pred_scenes = read_manifest_scenes(pred_dir);
    if (pred_scenes != scenes) throw ConfigError("prediction/ground-truth manifest mismatch");
  }

  Json results;
  results["task"] = task;
  if (task == "obb") {
    std::vector<SceneDetections> all;
    for (const std::string& scene : scenes) {
      SceneDetections sd;
      const fs::path pred_file = fs::path(pred_dir) / scene / "detections.json";
      if (!fs::exists(pred_file))
        throw ConfigError("missing predictions for " + scene + " (manifest mismatch)");
      sd.preds = detections_from_json(read_json_file(pred_file.string()));
      const Json labels = read_json_file((fs::path(gt_dir) / scene / "labels.json").string());
      for (const LabeledBox& lb : labeled_boxes_from_json(labels)) sd.gts.push_back(lb.box);
      all.push_back(std::move(sd));
    }
    IouParams iou{cfg.eval.iou_samples, derive_seed(cfg.seed, 0x10fu)};
    const MapResult map = compute_map_3d(all, cfg.eval.iou_thresh, cfg.eval.method(), iou);
    results["map"] = map.map;
    Json curve = Json::array();
    for (const auto& [r, p] : map.curve.points) curve.push_back(Json::array({r, p}));
    results["pr_curve"] = curve;
    if (plots) {
      const std::string svg = (fs::path(out_file).parent_path() / "pr_obb.svg").string();
      svg_pr_curve(map.curve, svg);
      results["plot"] = svg;
    }
  } else if (task == "keypoint") {
    std::vector<KeypointScenePair> all;
    for (const std::string& scene : scenes) {
      KeypointScenePair pair;
      const fs::path pred_file = fs::path(pred_dir) / scene / "keypoints.json";
      if (!fs::exists(pred_file))
        throw ConfigError("missing predictions for " + scene + " (manifest mismatch)");
      pair.preds = keypoints_from_json(read_json_file(pred_file.string()));
      const Json labels = read_json_file((fs::path(gt_dir) / scene / "labels.json").string());
      pair.gts = keypoints_from_json(labels.at("keypoints"));
      all.push_back(std::move(pair));
    }
    const KeypointMapResult kp =
        compute_keypoint_map(all, cfg.eval.kp_radius, cfg.eval.sweep_steps, cfg.eval.method());
    results["map"] = kp.map;
    for (const auto& [cls, ap] : kp.per_class_ap) results["per_class_ap"][cls] = ap;
    for (const std::string& cls : kp.skipped_classes) results["skipped_classes"].push_back(cls);
    if (plots) {
      for (const auto& [cls, curve] : kp.per_class_curve) {
        const std::string svg =
            (fs::path(out_file).parent_path() / ("pr_kp_" + cls + ".svg")).string();
        svg_pr_curve(curve, svg);
        results["plots"].push_back(svg);
      }
    }
  } else if (task == "disparity") {
    double sum_abs = 0.0;
    long outliers = 0, pixels = 0;
    for (const std::string& scene : scenes) {
      const fs::path pred_file = fs::path(pred_dir) / scene / "disparity.pfm";
      if (!fs::exists(pred_file))
        throw ConfigError("missing predictions for " + scene + " (manifest mismatch)");
      const DisparityMap pred = read_pfm_disparity(pred_file.string());
      const DisparityMap gt =
          read_pfm_disparity((fs::path(gt_dir) / scene / "disparity.pfm").string());
      const EpeResult epe = disparity_epe(pred, gt);
      sum_abs += epe.mean_abs * epe.valid_pixels;
      outliers += static_cast<long>(epe.outlier_fraction * epe.valid_pixels + 0.5);
      pixels += epe.valid_pixels;
    }
    if (pixels == 0) throw UndefinedMetric("no overlapping valid pixels in any scene");
    results["epe"] = sum_abs / pixels;
    results["outlier_fraction"] = static_cast<double>(outliers) / pixels;
    results["pixels"] = pixels;
  } else {
    throw ConfigError("unknown evaluate task: " + task);
  }

  write_file_atomic(out_file, results);
  std::cout << results.dump(2) << "\n";
  return 0;
}

int cmd_plan(const CommonOptions& common, const std::string& task,
             const std::string& detections_file, const std::string& keypoints_file,
             const std::string& scene_dir, const std::string& out_file) {
  const RunConfig cfg = common.build();
  if (task == "grasp") {
    if (detections_file.empty()) throw ConfigError("grasp planning needs --detections");
    const std::vector<Detection> detections =
        detections_from_json(read_json_file(detections_file));
    const Detection* target = nullptr;
    for (const Detection& det : detections) {
      if (det.confidence < cfg.grasp.confidence_threshold) continue;
      if (!target || det.box.t.z() < target->box.t.z()) target = &det;  // foremost object
    }
    if (!target) {
      std::cerr << "error: nothing to grasp (no detection above confidence threshold)\n";
      return kExitDomain;
    }
    const GraspPlan plan = plan_grasp(target->box, cfg.grasp.config);
    Json out = to_json(plan);
    out["target"] = to_json(target->box);
    out["confidence"] = target->confidence;
    write_file_atomic(out_file, out);
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  if (task == "fold") {
    if (keypoints_file.empty() || scene_dir.empty())
      throw ConfigError("fold planning needs --keypoints and --scene (for the table plane)");
    const KeypointSet kps2d = keypoints_from_json(read_json_file(keypoints_file));
    const Json labels = read_json_file((fs::path(scene_dir) / "labels.json").string());
    const StereoRig rig = rig_from_json(labels.at("camera"));
    const DisparityMap disparity =
        read_pfm_disparity((fs::path(scene_dir) / "disparity.pfm").string());
    const ImageMask seg = read_png_gray8((fs::path(scene_dir) / "seg.png").string());
    const Plane table = fit_table_plane(disparity, seg, rig, cfg.plane);

    Keypoints3d kps3d;
    for (const auto& [cls, points] : kps2d)
      for (const Keypoint& kp : points)
        kps3d[cls].push_back(lift_keypoint(kp.u, kp.v, table, rig.intrinsics));
    const FoldStep step = plan_fold_step(kps3d);
    Json out = to_json(step);
    out["plane"] = to_json(table);
    write_file_atomic(out_file, out);
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  throw ConfigError("unknown plan task: " + task);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stereo perception toolkit: synthetic data, cost-volume matching, box/keypoint "
               "decoding, evaluation and manipulation planning"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* gen = app.add_subcommand("generate", "generate a domain-randomized stereo dataset");
  std::string gen_out;
  int gen_scenes = 0;
  gen->add_option("--out", gen_out, "output dataset directory")->required();
  gen->add_option("--scenes", gen_scenes, "number of scenes")->required();
  add_common(gen, common);

  auto* match = app.add_subcommand("match", "stereo matching on a rectified pair");
  std::string match_left, match_right, match_scene, match_rig, match_out;
  match->add_option("--left", match_left, "left image PNG");
  match->add_option("--right", match_right, "right image PNG");
  match->add_option("--scene", match_scene, "dataset scene directory (images + rig)");
  match->add_option("--rig", match_rig, "rig metadata JSON");
  match->add_option("--out", match_out, "output directory")->required();
  add_common(match, common);

  auto* decode = app.add_subcommand("decode", "decode head tensors into detections/keypoints");
  std::string dec_tensors, dec_out, dec_rig, dec_scene;
  decode->add_option("--tensors", dec_tensors, "head tensor directory")->required();
  decode->add_option("--out", dec_out, "output directory")->required();
  decode->add_option("--rig", dec_rig, "rig metadata JSON");
  decode->add_option("--scene", dec_scene, "dataset scene directory (for rig metadata)");
  add_common(decode, common);

  auto* evaluate = app.add_subcommand("evaluate", "evaluate predictions against ground truth");
  std::string eval_pred, eval_gt, eval_task, eval_out;
  bool eval_plots = false;
  evaluate->add_option("--pred", eval_pred, "prediction directory")->required();
  evaluate->add_option("--gt", eval_gt, "ground-truth dataset directory")->required();
  evaluate->add_option("--task", eval_task, "obb | keypoint | disparity")->required();
  evaluate->add_option("--out", eval_out, "results JSON path")->required();
  evaluate->add_flag("--plots", eval_plots, "write PR-curve SVG plots");
  add_common(evaluate, common);

  auto* plan = app.add_subcommand("plan", "grasp or fold planning from perception outputs");
  std::string plan_task, plan_detections, plan_keypoints, plan_scene, plan_out;
  plan->add_option("--task", plan_task, "grasp | fold")->required();
  plan->add_option("--detections", plan_detections, "detections JSON (grasp)");
  plan->add_option("--keypoints", plan_keypoints, "keypoints JSON (fold)");
  plan->add_option("--scene", plan_scene, "scene directory for the table plane (fold)");
  plan->add_option("--out", plan_out, "plan JSON path")->required();
  add_common(plan, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(common, gen_out, gen_scenes);
    if (match->parsed())
      return cmd_match(common, match_left, match_right, match_scene, match_rig, match_out);
    if (decode->parsed()) return cmd_decode(common, dec_tensors, dec_out, dec_rig, dec_scene);
    if (evaluate->parsed())
      return cmd_evaluate(common, eval_pred, eval_gt, eval_task, eval_out, eval_plots);
    if (plan->parsed())
      return cmd_plan(common, plan_task, plan_detections, plan_keypoints, plan_scene, plan_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Ungraspable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const IncompleteState& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const PlaneFitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const UndefinedMetric& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stereopick/parallel.hpp"
#include "stereopick/serial.hpp"
#include "stereopick/synth.hpp"

namespace stereopick {

// ---------------------------------------------------------------------------
// Config and scene serialization
// ---------------------------------------------------------------------------

inline Json to_json(const DepthNoiseParams& p) {
  return Json{{"sigma_mult", p.sigma_mult}, {"sigma_add", p.sigma_add},
              {"min_ellipses", p.min_ellipses}, {"max_ellipses", p.max_ellipses},
              {"min_axis", p.min_axis}, {"max_axis", p.max_axis},
              {"edge_bias", p.edge_bias}, {"edge_threshold", p.edge_threshold}};
}

inline Json to_json(const SynthConfig& cfg) {
  return Json{{"image_width", cfg.image_width},
              {"image_height", cfg.image_height},
              {"fx", cfg.fx},
              {"fy", cfg.fy},
              {"baseline", cfg.baseline},
              {"min_objects", cfg.min_objects},
              {"max_objects", cfg.max_objects},
              {"min_distractors", cfg.min_distractors},
              {"max_distractors", cfg.max_distractors},
              {"min_lights", cfg.min_lights},
              {"max_lights", cfg.max_lights},
              {"camera_radius_min", cfg.camera_radius_min},
              {"camera_radius_max", cfg.camera_radius_max},
              {"target_jitter", cfg.target_jitter},
              {"roll_jitter_deg", cfg.roll_jitter_deg},
              {"scene_kind", cfg.scene_kind},
              {"surface_samples", cfg.surface_samples},
              {"max_placement_attempts", cfg.max_placement_attempts},
              {"noise", to_json(cfg.noise)}};
}

inline std::string synth_config_hash(const SynthConfig& cfg) {
  return hex64(fnv1a64(to_json(cfg).dump()));
}

inline Json to_json(const TextureParams& tex) {
  static const char* names[] = {"solid", "checker", "perlin", "gradient"};
  return Json{{"type", names[static_cast<int>(tex.type)]},
              {"color_a", Json::array({tex.color_a[0], tex.color_a[1], tex.color_a[2]})},
              {"color_b", Json::array({tex.color_b[0], tex.color_b[1], tex.color_b[2]})},
              {"scale", tex.scale},
              {"axis", to_json(tex.axis)},
              {"seed", tex.seed}};
}

inline Json to_json(const SceneObject& obj) {
  Json j{{"kind", obj.kind}, {"R", to_json(obj.R)}, {"t", to_json(obj.t)},
         {"label", obj.label}, {"texture", to_json(obj.tex)},
         {"vertices", obj.mesh.vertices.size()}, {"faces", obj.mesh.faces.size()}};
  // Geometry digest keeps the serialization faithful without dumping meshes.
  std::string blob;
  blob.reserve(obj.mesh.vertices.size() * 24);
  for (const Vec3& v : obj.mesh.vertices) {
    blob.append(reinterpret_cast<const char*>(v.data()), 3 * sizeof(double));
  }
  j["mesh_digest"] = hex64(fnv1a64(blob));
  return j;
}

inline Json to_json(const SceneGraph& scene) {
  Json objects = Json::array();
  for (const SceneObject& o : scene.objects) objects.push_back(to_json(o));
  Json distractors = Json::array();
  for (const SceneObject& o : scene.distractors) distractors.push_back(to_json(o));
  Json lights = Json::array();
  for (const DirectionalLight& l : scene.lights)
    lights.push_back(Json{{"direction", to_json(l.direction)},
                          {"color", Json::array({l.color[0], l.color[1], l.color[2]})},
                          {"intensity", l.intensity}});
  return Json{{"rng_seed", scene.rng_seed},
              {"table", to_json(scene.table)},
              {"floor", to_json(scene.floor)},
              {"objects", objects},
              {"distractors", distractors},
              {"lights", lights},
              {"ambient", scene.ambient},
              {"camera", Json{{"position", to_json(scene.camera.position)},
                              {"target", to_json(scene.camera.target)},
                              {"roll_deg", scene.camera.roll_deg}}},
              {"noise", to_json(scene.noise)},
              {"table_top_z", scene.table_top_z}};
}

// ---------------------------------------------------------------------------
// Per-scene labels
// ---------------------------------------------------------------------------

inline Json labels_to_json(const SceneSample& sample, const StereoRig& rig, uint64_t seed) {
  Json boxes = Json::array();
  for (const LabeledBox& lb : sample.boxes) {
    Json j = to_json(lb.box);
    j["sigma"] = to_json(lb.sigma);
    boxes.push_back(j);
  }
  return Json{{"camera", to_json(rig)},
              {"boxes", boxes},
              {"keypoints", to_json(sample.keypoints)},
              {"seed", seed}};
}

inline std::vector<LabeledBox> labeled_boxes_from_json(const Json& labels) {
  std::vector<LabeledBox> out;
  for (const Json& j : labels.at("boxes")) {
    LabeledBox lb;
    lb.box = obb_from_json(j);
    lb.sigma = mat3_from_json(j.at("sigma"));
    out.push_back(lb);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset writing
// ---------------------------------------------------------------------------

struct DatasetManifest {
  std::string root;
  uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::string> scene_dirs;
};

inline std::string scene_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%06d", index);
  return buf;
}

/// Generates and writes n scenes plus a manifest with per-file checksums.
/// Scene i derives its own stream from (seed, i), so output is byte-identical
/// for every thread count.
inline DatasetManifest write_dataset(const std::string& dir, int n_scenes, const SynthConfig& cfg,
                                     uint64_t seed, int threads = 1) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const StereoRig rig = cfg.rig();

  std::vector<Json> entries(n_scenes);
  std::vector<std::string> failures(n_scenes);
  parallel_for(n_scenes, threads, [&](int i) {
    try {
      const uint64_t scene_seed = derive_seed(seed, static_cast<uint64_t>(i));
      Rng rng(scene_seed);
      SceneGraph scene = sample_scene(rng, cfg);
      scene.rng_seed = scene_seed;
      const SceneSample sample = render_stereo(scene, rig);

      const fs::path scene_dir = fs::path(dir) / scene_dir_name(i);
      fs::create_directories(scene_dir);
      auto path = [&](const char* name) { return (scene_dir / name).string(); };
      write_png_rgb8(path("left.png"), sample.left);
      write_png_rgb8(path("right.png"), sample.right);
      write_pfm(path("disparity.pfm"), sample.gt_disparity);
      write_png_gray8(path("seg.png"), sample.seg);
      write_pfm(path("depth_noisy.pfm"), sample.noisy_depth);
      write_json_file(path("labels.json"), labels_to_json(sample, rig, scene_seed));

      Json files = Json::object();
      for (const char* name : {"left.png", "right.png", "disparity.pfm", "seg.png",
                               "depth_noisy.pfm", "labels.json"})
        files[name] = file_crc32((scene_dir / name).string());
      entries[i] = Json{{"dir", scene_dir_name(i)}, {"files", files}};
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });
  for (int i = 0; i < n_scenes; ++i)
    if (!failures[i].empty())
      throw IoError("scene " + std::to_string(i) + " failed: " + failures[i]);

  DatasetManifest manifest;
  manifest.root = dir;
  manifest.seed = seed;
  manifest.config_hash = synth_config_hash(cfg);
  Json scenes = Json::array();
  for (int i = 0; i < n_scenes; ++i) {
    scenes.push_back(entries[i]);
    manifest.scene_dirs.push_back(entries[i].at("dir"));
  }
  write_json_file((fs::path(dir) / "manifest.json").string(),
                  Json{{"seed", seed},
                       {"config_hash", manifest.config_hash},
                       {"config", to_json(cfg)},
                       {"scenes", scenes}});
  return manifest;
}

/// Reads back the scene directory list (and validates presence).
inline std::vector<std::string> read_manifest_scenes(const std::string& dir) {
  const Json manifest = read_json_file((std::filesystem::path(dir) / "manifest.json").string());
  std::vector<std::string> out;
  for (const Json& s : manifest.at("scenes")) out.push_back(s.at("dir"));
  return out;
}

}  // namespace stereopick

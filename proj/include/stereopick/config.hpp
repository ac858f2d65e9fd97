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

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stereopick/eval.hpp"
#include "stereopick/heads.hpp"
#include "stereopick/plan.hpp"
#include "stereopick/stereo.hpp"
#include "stereopick/synth.hpp"

namespace stereopick {

/// Stereo pipeline profile. Function-level defaults elsewhere follow the
/// module contracts (stride 2, temperature 1); this profile is what the CLI
/// pipeline runs with, tuned for the unit-normalized census descriptors
/// (similarity gaps are small, so the softmax needs a low temperature).
struct StereoParams {
  int num_slices = 65;
  int stride = 1;
  double temperature = 0.03;
  double delta = 1.0;
  std::string agg_kernel = "box";  // box | gaussian | none
  int agg_size = 5;
  double agg_sigma = 1.0;
  bool ratio_test = true;
  double min_ratio = 1.2;
  bool lr_consistency = true;
  double lr_threshold = 1.0;  // feature pixels
  int census_radius = 3;
  int patch_radius = 2;

  FeatureConfig feature_config() const { return {census_radius, patch_radius, true}; }
  AggregationConfig aggregation_config() const {
    AggregationConfig cfg;
    cfg.kernel = agg_kernel == "gaussian" ? AggregationConfig::Kernel::gaussian
                                          : AggregationConfig::Kernel::box;
    cfg.size = agg_kernel == "none" ? 1 : agg_size;
    cfg.sigma = agg_sigma;
    return cfg;
  }
  RatioTest ratio_config() const { return {ratio_test, min_ratio}; }
};

struct EvalParams {
  double iou_thresh = 0.25;
  double kp_radius = 20.0;
  long iou_samples = 100000;
  std::string ap_method = "eleven_point";  // eleven_point | continuous
  int sweep_steps = 101;

  ApMethod method() const {
    return ap_method == "continuous" ? ApMethod::continuous : ApMethod::eleven_point;
  }
};

struct GraspParams {
  double confidence_threshold = 0.3;
  GraspConfig config;  // geometric rule thresholds
};

/// Flat key oriented run configuration: config file plus command-line
/// overrides, overrides win. Unknown keys and out-of-range values are
/// rejected with the offending key named.
struct RunConfig {
  uint64_t seed = 0;
  int threads = 1;
  StereoParams stereo;
  CodecConfig codec;
  FuseConfig fuse;
  EvalParams eval;
  SynthConfig synth;
  GraspParams grasp;
  PlaneFitConfig plane;

  void apply(const std::string& key, const std::string& value);
  void load_file(const std::string& path);
};

namespace detail_config {

inline double parse_double(const std::string& key, const std::string& value, double lo,
                           double hi) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    if (v < lo || v > hi)
      throw ConfigError("config key '" + key + "' out of range [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]: " + value);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got: " + value);
  }
}

inline long parse_int(const std::string& key, const std::string& value, long lo, long hi) {
  const double v = parse_double(key, value, static_cast<double>(lo), static_cast<double>(hi));
  if (v != static_cast<long>(v))
    throw ConfigError("config key '" + key + "' expects an integer, got: " + value);
  return static_cast<long>(v);
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw ConfigError("config key '" + key + "' expects a boolean, got: " + value);
}

inline std::string parse_enum(const std::string& key, const std::string& value,
                              const std::vector<std::string>& allowed) {
  for (const std::string& a : allowed)
    if (value == a) return value;
  std::string msg = "config key '" + key + "' expects one of {";
  for (size_t i = 0; i < allowed.size(); ++i) msg += (i ? ", " : "") + allowed[i];
  throw ConfigError(msg + "}, got: " + value);
}

}  // namespace detail_config

inline void RunConfig::apply(const std::string& key, const std::string& value) {
  using namespace detail_config;
  if (key == "seed") {
    seed = static_cast<uint64_t>(parse_double(key, value, 0, 1.8e19));
  } else if (key == "threads") {
    threads = static_cast<int>(parse_int(key, value, 1, 64));
  } else if (key == "stereo.num_slices") {
    stereo.num_slices = static_cast<int>(parse_int(key, value, 1, 257));
  } else if (key == "stereo.stride") {
    stereo.stride = static_cast<int>(parse_int(key, value, 1, 8));
  } else if (key == "stereo.temperature") {
    stereo.temperature = parse_double(key, value, 1e-6, 100.0);
  } else if (key == "stereo.delta") {
    stereo.delta = parse_double(key, value, 1e-6, 100.0);
  } else if (key == "stereo.agg_kernel") {
    stereo.agg_kernel = parse_enum(key, value, {"box", "gaussian", "none"});
  } else if (key == "stereo.agg_size") {
    stereo.agg_size = static_cast<int>(parse_int(key, value, 1, 31));
    if (stereo.agg_size % 2 == 0)
      throw ConfigError("config key 'stereo.agg_size' must be odd: " + value);
  } else if (key == "stereo.agg_sigma") {
    stereo.agg_sigma = parse_double(key, value, 0.1, 16.0);
  } else if (key == "stereo.ratio_test") {
    stereo.ratio_test = parse_bool(key, value);
  } else if (key == "stereo.min_ratio") {
    stereo.min_ratio = parse_double(key, value, 1.0, 10.0);
  } else if (key == "stereo.lr_consistency") {
    stereo.lr_consistency = parse_bool(key, value);
  } else if (key == "stereo.lr_threshold") {
    stereo.lr_threshold = parse_double(key, value, 0.1, 32.0);
  } else if (key == "stereo.census_radius") {
    stereo.census_radius = static_cast<int>(parse_int(key, value, 1, 5));
  } else if (key == "stereo.patch_radius") {
    stereo.patch_radius = static_cast<int>(parse_int(key, value, 0, 4));
  } else if (key == "codec.sigma") {
    codec.sigma = parse_double(key, value, 1.0, 64.0);
  } else if (key == "codec.threshold") {
    codec.peak_threshold = parse_double(key, value, 0.01, 0.99);
  } else if (key == "codec.nms_window") {
    codec.nms_window = static_cast<int>(parse_int(key, value, 3, 99));
    if (codec.nms_window % 2 == 0)
      throw ConfigError("config key 'codec.nms_window' must be odd: " + value);
  } else if (key == "codec.kp_sigma") {
    codec.kp_sigma = parse_double(key, value, 1.0, 64.0);
  } else if (key == "codec.kp_nms_radius") {
    codec.kp_nms_radius = static_cast<int>(parse_int(key, value, 1, 64));
  } else if (key == "fuse.radius") {
    fuse.radius = static_cast<int>(parse_int(key, value, 1, 8));
  } else if (key == "fuse.sigma_spatial") {
    fuse.sigma_spatial = parse_double(key, value, 0.1, 8.0);
  } else if (key == "fuse.sigma_range") {
    fuse.sigma_range = parse_double(key, value, 0.005, 1.0);
  } else if (key == "eval.iou_thresh") {
    eval.iou_thresh = parse_double(key, value, 0.01, 0.99);
  } else if (key == "eval.kp_radius") {
    eval.kp_radius = parse_double(key, value, 1.0, 200.0);
  } else if (key == "eval.iou_samples") {
    eval.iou_samples = parse_int(key, value, 10000, 100000000);
  } else if (key == "eval.ap_method") {
    eval.ap_method = parse_enum(key, value, {"eleven_point", "continuous"});
  } else if (key == "eval.sweep_steps") {
    eval.sweep_steps = static_cast<int>(parse_int(key, value, 2, 1001));
  } else if (key == "synth.image_width") {
    synth.image_width = static_cast<int>(parse_int(key, value, 64, 4096));
    if (synth.image_width % 8 != 0)
      throw ConfigError("config key 'synth.image_width' must be divisible by 8: " + value);
  } else if (key == "synth.image_height") {
    synth.image_height = static_cast<int>(parse_int(key, value, 64, 4096));
    if (synth.image_height % 8 != 0)
      throw ConfigError("config key 'synth.image_height' must be divisible by 8: " + value);
  } else if (key == "synth.fx") {
    synth.fx = parse_double(key, value, 10.0, 10000.0);
  } else if (key == "synth.fy") {
    synth.fy = parse_double(key, value, 10.0, 10000.0);
  } else if (key == "synth.baseline") {
    synth.baseline = parse_double(key, value, 0.001, 2.0);
  } else if (key == "synth.min_objects") {
    synth.min_objects = static_cast<int>(parse_int(key, value, 0, 16));
  } else if (key == "synth.max_objects") {
    synth.max_objects = static_cast<int>(parse_int(key, value, 0, 16));
  } else if (key == "synth.min_distractors") {
    synth.min_distractors = static_cast<int>(parse_int(key, value, 0, 16));
  } else if (key == "synth.max_distractors") {
    synth.max_distractors = static_cast<int>(parse_int(key, value, 0, 16));
  } else if (key == "synth.min_lights") {
    synth.min_lights = static_cast<int>(parse_int(key, value, 1, 8));
  } else if (key == "synth.max_lights") {
    synth.max_lights = static_cast<int>(parse_int(key, value, 1, 8));
  } else if (key == "synth.radius_min") {
    synth.camera_radius_min = parse_double(key, value, 0.1, 10.0);
  } else if (key == "synth.radius_max") {
    synth.camera_radius_max = parse_double(key, value, 0.1, 10.0);
  } else if (key == "synth.scene_kind") {
    synth.scene_kind = parse_enum(key, value, {"tabletop", "shirts"});
  } else if (key == "synth.noise_sigma_mult") {
    synth.noise.sigma_mult = parse_double(key, value, 0.0, 1.0);
  } else if (key == "synth.noise_sigma_add") {
    synth.noise.sigma_add = parse_double(key, value, 0.0, 1.0);
  } else if (key == "synth.noise_min_ellipses") {
    synth.noise.min_ellipses = static_cast<int>(parse_int(key, value, 0, 64));
  } else if (key == "synth.noise_max_ellipses") {
    synth.noise.max_ellipses = static_cast<int>(parse_int(key, value, 0, 64));
  } else if (key == "synth.noise_edge_bias") {
    synth.noise.edge_bias = parse_double(key, value, 0.0, 1.0);
  } else if (key == "grasp.max_opening") {
    grasp.config.max_opening = parse_double(key, value, 0.01, 1.0);
  } else if (key == "grasp.clearance") {
    grasp.config.clearance = parse_double(key, value, 0.0, 0.1);
  } else if (key == "grasp.confidence_threshold") {
    grasp.confidence_threshold = parse_double(key, value, 0.0, 1.0);
  } else if (key == "plane.inlier_band") {
    plane.inlier_band = parse_double(key, value, 0.0001, 0.5);
  } else if (key == "plane.ransac_iterations") {
    plane.ransac_iterations = static_cast<int>(parse_int(key, value, 1, 100000));
  } else if (key == "plane.stride") {
    plane.pixel_stride = static_cast<int>(parse_int(key, value, 1, 32));
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

/// Flat "key = value" file; '#' starts a comment.
inline void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " is not 'key = value'");
    apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

}  // namespace stereopick

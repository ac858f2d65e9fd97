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

#include "stereopick/config.hpp"
#include "stereopick/heads.hpp"
#include "stereopick/stereo.hpp"

namespace stereopick {

struct StereoResult {
  DisparityMap low;    // quarter resolution, full-resolution pixel units
  DisparityMap fused;  // full resolution
};

namespace detail_pipeline {

inline FeatureVolume mirror_features(const FeatureVolume& f) {
  FeatureVolume out;
  out.data = Tensor3(f.channels(), f.height(), f.width());
  for (int c = 0; c < f.channels(); ++c)
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x) out.data(c, y, x) = f.data(c, y, f.width() - 1 - x);
  return out;
}

inline DisparityMap mirror_disparity(const DisparityMap& d) {
  DisparityMap out(d.width(), d.height());
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x) {
      out.values(x, y) = d.values(d.width() - 1 - x, y);
      out.valid(x, y) = d.valid(d.width() - 1 - x, y);
    }
  return out;
}

inline DisparityMap match_volume(const FeatureVolume& fl, const FeatureVolume& fr,
                                 const RunConfig& cfg) {
  CostVolume vol =
      build_cost_volume(fl, fr, cfg.stereo.num_slices, cfg.stereo.stride, cfg.threads);
  vol = aggregate_cost(vol, cfg.stereo.aggregation_config(), cfg.threads);
  return soft_argmin(vol, cfg.stereo.temperature, cfg.stereo.ratio_config(), cfg.threads);
}

}  // namespace detail_pipeline

/// Feature extraction, cost volume, aggregation, soft argmin, the optional
/// left-right consistency check, and edge-guided upsampling in one call.
/// Low-resolution values are converted from feature-pixel units to
/// full-resolution pixels at this boundary (x4).
inline StereoResult run_stereo_pipeline(const ImageRgb& left, const ImageRgb& right,
                                        const RunConfig& cfg) {
  if (!left.same_shape(right)) throw ShapeError("stereo pair differs in shape");
  const FeatureVolume fl = extract_features(left, cfg.stereo.feature_config());
  const FeatureVolume fr = extract_features(right, cfg.stereo.feature_config());
  DisparityMap feature_units = detail_pipeline::match_volume(fl, fr, cfg);

  if (cfg.stereo.lr_consistency) {
    // Right-referenced pass on mirrored feature volumes: the mirrored "left"
    // is the right image, so slice i scores right column b against left
    // column b + i. Pixels whose two estimates disagree are invalidated.
    const DisparityMap right_units = detail_pipeline::mirror_disparity(detail_pipeline::match_volume(
        detail_pipeline::mirror_features(fr), detail_pipeline::mirror_features(fl), cfg));
    for (int y = 0; y < feature_units.height(); ++y)
      for (int x = 0; x < feature_units.width(); ++x) {
        if (!feature_units.is_valid(x, y)) continue;
        const double d = feature_units.values(x, y);
        const int xr = static_cast<int>(std::lround(x - d));
        const bool ok = xr >= 0 && xr < feature_units.width() && right_units.is_valid(xr, y) &&
                        std::abs(right_units.values(xr, y) - d) <= cfg.stereo.lr_threshold;
        if (!ok) feature_units.valid(x, y) = 0;
      }
  }

  StereoResult out;
  out.low = feature_units.scaled(4.0);
  out.fused = fuse_full_res_disparity(out.low, left, cfg.fuse);
  return out;
}

}  // namespace stereopick

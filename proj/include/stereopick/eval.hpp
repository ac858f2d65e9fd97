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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "stereopick/geometry.hpp"
#include "stereopick/heads.hpp"
#include "stereopick/image.hpp"

namespace stereopick {

struct IouParams {
  long samples = 100000;
  uint64_t seed = 9001;
};

/// Precision-recall sweep with its area-under-curve summary.
struct PrCurve {
  std::vector<std::pair<double, double>> points;  // (recall, precision)
  double ap = 0.0;
};

enum class ApMethod { eleven_point, continuous };

namespace detail_eval {

/// Interpolated precision at recall >= r over a PR point set.
inline double precision_at(const std::vector<std::pair<double, double>>& points, double recall) {
  double best = 0.0;
  for (const auto& [r, p] : points)
    if (r >= recall - 1e-12) best = std::max(best, p);
  return best;
}

inline double area_under_curve(const std::vector<std::pair<double, double>>& points,
                               ApMethod method) {
  if (points.empty()) return 0.0;
  if (method == ApMethod::eleven_point) {
    double sum = 0.0;
    for (int k = 0; k <= 10; ++k) sum += precision_at(points, k / 10.0);
    return sum / 11.0;
  }
  // Continuous: step integration of interpolated precision over recall.
  std::vector<std::pair<double, double>> sorted = points;
  std::sort(sorted.begin(), sorted.end());
  double area = 0.0;
  double prev_recall = 0.0;
  for (const auto& [r, p] : sorted) {
    if (r <= prev_recall) continue;
    area += (r - prev_recall) * precision_at(points, r);
    prev_recall = r;
  }
  return area;
}

}  // namespace detail_eval

// ---------------------------------------------------------------------------
// 3D detection matching and mAP
// ---------------------------------------------------------------------------

struct MatchResult {
  std::vector<int> pred_to_gt;  // -1 for false positives
  int tp = 0, fp = 0, fn = 0;
};

/// Greedy assignment in descending confidence: each prediction takes the
/// highest-IoU still-unmatched ground truth with IoU strictly above the
/// threshold.
inline MatchResult match_detections(const std::vector<Detection>& preds,
                                    const std::vector<Obb>& gts, double iou_thresh = 0.25,
                                    const IouParams& iou = {}) {
  std::vector<int> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return preds[a].confidence > preds[b].confidence; });

  MatchResult result;
  result.pred_to_gt.assign(preds.size(), -1);
  std::vector<bool> taken(gts.size(), false);
  for (int idx : order) {
    int best_gt = -1;
    double best_iou = iou_thresh;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double value =
          obb_iou_3d(preds[idx].box, gts[g], iou.samples,
                     derive_seed(iou.seed, static_cast<uint64_t>(idx) * 131 + g));
      if (value > best_iou) {
        best_iou = value;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      taken[best_gt] = true;
      result.pred_to_gt[idx] = best_gt;
      ++result.tp;
    } else {
      ++result.fp;
    }
  }
  result.fn = static_cast<int>(gts.size()) - result.tp;
  return result;
}

/// One evaluated image: predictions plus ground truth.
struct SceneDetections {
  std::vector<Detection> preds;
  std::vector<Obb> gts;
};

struct MapResult {
  double map = 0.0;
  PrCurve curve;
};

/// Detection AP over a confidence-ranked pooled sweep (single foreground
/// class, so mAP equals AP). Eleven-point interpolation by default; a
/// continuous integrator is available behind the method flag.
inline MapResult compute_map_3d(const std::vector<SceneDetections>& scenes,
                                double iou_thresh = 0.25, ApMethod method = ApMethod::eleven_point,
                                const IouParams& iou = {}) {
  long total_gt = 0;
  for (const auto& s : scenes) total_gt += static_cast<long>(s.gts.size());
  if (total_gt == 0) throw UndefinedMetric("no ground-truth boxes in any scene");

  struct Ranked {
    double confidence;
    int scene;
    int index;
  };
  std::vector<Ranked> ranked;
  for (size_t s = 0; s < scenes.size(); ++s)
    for (size_t i = 0; i < scenes[s].preds.size(); ++i)
      ranked.push_back({scenes[s].preds[i].confidence, static_cast<int>(s), static_cast<int>(i)});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });

  std::vector<std::vector<bool>> taken(scenes.size());
  for (size_t s = 0; s < scenes.size(); ++s) taken[s].assign(scenes[s].gts.size(), false);

  MapResult out;
  long tp = 0, fp = 0;
  for (const Ranked& r : ranked) {
    const auto& scene = scenes[r.scene];
    int best_gt = -1;
    double best_iou = iou_thresh;
    for (size_t g = 0; g < scene.gts.size(); ++g) {
      if (taken[r.scene][g]) continue;
      const double value =
          obb_iou_3d(scene.preds[r.index].box, scene.gts[g], iou.samples,
                     derive_seed(iou.seed, static_cast<uint64_t>(r.scene) * 65537 +
                                               static_cast<uint64_t>(r.index) * 131 + g));
      if (value > best_iou) {
        best_iou = value;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      taken[r.scene][best_gt] = true;
      ++tp;
    } else {
      ++fp;
    }
    out.curve.points.emplace_back(static_cast<double>(tp) / total_gt,
                                  static_cast<double>(tp) / (tp + fp));
  }
  out.curve.ap = detail_eval::area_under_curve(out.curve.points, method);
  out.map = out.curve.ap;
  return out;
}

// ---------------------------------------------------------------------------
// Keypoint mAP
// ---------------------------------------------------------------------------

struct KeypointScenePair {
  KeypointSet preds;
  KeypointSet gts;
};

struct KeypointMapResult {
  std::map<std::string, double> per_class_ap;
  std::map<std::string, PrCurve> per_class_curve;
  double map = 0.0;
  std::vector<std::string> skipped_classes;  // absent from all ground truth
};

namespace detail_eval {

struct KpCounts {
  long tp = 0, fp = 0, fn = 0;
};

/// Greedy one-to-one matching under the pixel-radius rule for one class in
/// one image at a fixed score threshold.
inline KpCounts match_keypoints(const std::vector<Keypoint>& preds,
                                const std::vector<Keypoint>& gts, double radius,
                                double threshold) {
  std::vector<const Keypoint*> kept;
  for (const Keypoint& p : preds)
    if (p.score >= threshold) kept.push_back(&p);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const Keypoint* a, const Keypoint* b) { return a->score > b->score; });
  std::vector<bool> taken(gts.size(), false);
  KpCounts c;
  for (const Keypoint* p : kept) {
    int best = -1;
    double best_dist = radius;  // inclusive boundary
    for (size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double dist = std::hypot(p->u - gts[g].u, p->v - gts[g].v);
      if (dist <= best_dist) {
        best_dist = dist;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      taken[best] = true;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = static_cast<long>(gts.size()) - c.tp;
  return c;
}

}  // namespace detail_eval

/// Per-class AP under the fixed pixel-radius rule, sweeping the heatmap score
/// threshold linearly from 0 to 1. Classes absent from all ground truth are
/// excluded from the mean and reported.
inline KeypointMapResult compute_keypoint_map(const std::vector<KeypointScenePair>& scenes,
                                              double radius_px = 20.0, int sweep_steps = 101,
                                              ApMethod method = ApMethod::eleven_point) {
  std::map<std::string, bool> class_has_gt;
  for (const auto& s : scenes) {
    for (const auto& [cls, pts] : s.gts)
      if (!pts.empty()) class_has_gt[cls] = true;
    for (const auto& [cls, pts] : s.preds) class_has_gt.try_emplace(cls, false);
  }

  KeypointMapResult out;
  double sum = 0.0;
  int counted = 0;
  static const std::vector<Keypoint> kEmpty;
  for (const auto& [cls, has_gt] : class_has_gt) {
    if (!has_gt) {
      out.skipped_classes.push_back(cls);
      continue;
    }
    PrCurve curve;
    for (int step = 0; step < sweep_steps; ++step) {
      const double threshold = static_cast<double>(step) / (sweep_steps - 1);
      long tp = 0, fp = 0, fn = 0;
      for (const auto& s : scenes) {
        const auto pit = s.preds.find(cls);
        const auto git = s.gts.find(cls);
        const auto c = detail_eval::match_keypoints(pit == s.preds.end() ? kEmpty : pit->second,
                                                    git == s.gts.end() ? kEmpty : git->second,
                                                    radius_px, threshold);
        tp += c.tp;
        fp += c.fp;
        fn += c.fn;
      }
      if (tp + fp == 0) continue;  // nothing kept at this threshold
      const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
      curve.points.emplace_back(recall, static_cast<double>(tp) / (tp + fp));
    }
    curve.ap = detail_eval::area_under_curve(curve.points, method);
    out.per_class_ap[cls] = curve.ap;
    out.per_class_curve[cls] = std::move(curve);
    sum += out.per_class_ap[cls];
    ++counted;
  }
  out.map = counted > 0 ? sum / counted : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Disparity end-point error
// ---------------------------------------------------------------------------

struct EpeResult {
  double mean_abs = 0.0;
  double outlier_fraction = 0.0;  // |error| > 3 px
  long valid_pixels = 0;
};

inline EpeResult disparity_epe(const DisparityMap& pred, const DisparityMap& gt,
                               double outlier_px = 3.0) {
  if (!pred.values.same_shape(gt.values)) throw ShapeError("disparity maps differ in shape");
  EpeResult out;
  double sum = 0.0;
  long outliers = 0;
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x) {
      if (!pred.valid(x, y) || !gt.valid(x, y)) continue;
      const double err = std::abs(pred.values(x, y) - gt.values(x, y));
      sum += err;
      if (err > outlier_px) ++outliers;
      ++out.valid_pixels;
    }
  if (out.valid_pixels == 0) throw UndefinedMetric("no overlapping valid pixels");
  out.mean_abs = sum / out.valid_pixels;
  out.outlier_fraction = static_cast<double>(outliers) / out.valid_pixels;
  return out;
}

}  // namespace stereopick

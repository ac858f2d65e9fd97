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

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "stereopick/geometry.hpp"
#include "stereopick/image.hpp"
#include "stereopick/rng.hpp"

namespace stereopick {

// ---------------------------------------------------------------------------
// Grasp planning
// ---------------------------------------------------------------------------

enum class GraspStyle { top, side };

struct GraspPlan {
  Vec3 point = Vec3::Zero();      // meters, camera frame
  Vec3 approach = Vec3::Zero();   // unit, direction of gripper travel
  Vec3 jaw_axis = Vec3::Zero();   // unit, jaw-closing direction
  GraspStyle style = GraspStyle::side;
  double width = 0.0;             // meters, object span along jaw_axis + clearance
};

struct GraspConfig {
  double max_opening = 0.10;        // meters
  double clearance = 0.01;          // meters
  double top_horizontal_deg = 30.0; // largest axis within this of horizontal
  double top_height_ratio = 0.6;    // ... and height below this fraction of it
  double near_tie_ratio = 0.10;     // two largest extents within 10%
  Vec3 up = Vec3(0, 0, 1);          // gravity-up in the working frame
  Vec3 robot_origin = Vec3::Zero();
};

namespace detail_plan {

inline Vec3 horizontal_part(const Vec3& v, const Vec3& up) { return v - v.dot(up) * up; }

/// Direction from the robot toward the box, projected to horizontal. Falls
/// back to a fixed horizontal direction when the box sits on the vertical
/// axis through the robot.
inline Vec3 approach_toward(const Vec3& box_center, const GraspConfig& cfg) {
  Vec3 a = horizontal_part(box_center - cfg.robot_origin, cfg.up);
  if (a.norm() < 1e-9) {
    a = horizontal_part(Vec3(1, 0, 0), cfg.up);
    if (a.norm() < 1e-9) a = horizontal_part(Vec3(0, 1, 0), cfg.up);
  }
  return a.normalized();
}

}  // namespace detail_plan

/// Grasp synthesis from an oriented box. The gripper is organized around the
/// largest principal axis: near-cubic objects get a side grasp at the face
/// closest to the robot, low flat objects with a horizontal major axis get a
/// top grasp, everything else a side grasp across its smaller axes.
inline GraspPlan plan_grasp(const Obb& box, const GraspConfig& cfg = {}) {
  const Vec3 up = cfg.up.normalized();
  const Vec3 extents = 2.0 * box.half_extents;
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return extents[a] > extents[b]; });
  const int major = order[0];
  const Vec3 major_axis = box.R.col(major);

  GraspPlan plan;
  const bool near_tie = extents[order[0]] - extents[order[1]] <= cfg.near_tie_ratio * extents[order[0]];
  const double sin_limit = std::sin(cfg.top_horizontal_deg * M_PI / 180.0);
  const double height = 2.0 * box.support(up);

  auto try_jaw = [&](const Vec3& jaw) {
    const double width = 2.0 * box.support(jaw) + cfg.clearance;
    if (width > cfg.max_opening) return false;
    plan.jaw_axis = jaw;
    plan.width = width;
    return true;
  };
  auto fail = [&]() -> GraspPlan {
    throw Ungraspable("no jaw direction fits within the gripper opening");
  };

  if (near_tie) {
    // No dominant axis: side grasp at the point of the box nearest the robot.
    plan.style = GraspStyle::side;
    plan.approach = detail_plan::approach_toward(box.t, cfg);
    const Vec3 local = box.R.transpose() * (cfg.robot_origin - box.t);
    const Vec3 clamped = local.cwiseMax(-box.half_extents).cwiseMin(box.half_extents);
    plan.point = box.t + box.R * clamped;
    if (try_jaw(up.cross(plan.approach).normalized())) return plan;
    return fail();
  }

  if (std::abs(major_axis.dot(up)) <= sin_limit && height < cfg.top_height_ratio * extents[major]) {
    // Low object with a horizontal major axis: vertical approach, jaws across.
    plan.style = GraspStyle::top;
    plan.approach = -up;
    plan.point = box.t + 0.5 * height * up;
    Vec3 major_h = detail_plan::horizontal_part(major_axis, up);
    if (major_h.norm() < 1e-9) major_h = detail_plan::approach_toward(box.t, cfg);
    if (try_jaw(up.cross(major_h.normalized()).normalized())) return plan;
    return fail();
  }

  // Default side grasp: jaws close across the most horizontal minor axis,
  // falling back to the other minor axis if the first does not fit.
  plan.style = GraspStyle::side;
  plan.point = box.t;
  const Vec3 toward = detail_plan::approach_toward(box.t, cfg);
  std::array<int, 2> candidates = {order[1], order[2]};
  {
    const double tilt1 = std::abs(box.R.col(order[1]).dot(up));
    const double tilt2 = std::abs(box.R.col(order[2]).dot(up));
    bool swap;
    if (std::abs(tilt1 - tilt2) <= 1e-9) {
      // Equal tilt: prefer the axis most perpendicular to the approach.
      swap = std::abs(box.R.col(order[1]).dot(toward)) > std::abs(box.R.col(order[2]).dot(toward));
    } else {
      swap = tilt1 > tilt2;
    }
    if (swap) std::swap(candidates[0], candidates[1]);
  }
  for (int jaw_index : candidates) {
    Vec3 jaw_h = detail_plan::horizontal_part(box.R.col(jaw_index), up);
    if (jaw_h.norm() < 1e-9) jaw_h = up.cross(toward);
    const Vec3 jaw = jaw_h.normalized();
    if (!try_jaw(jaw)) continue;
    plan.approach = jaw.cross(up).normalized();
    if (plan.approach.dot(box.t - cfg.robot_origin) < 0.0) plan.approach = -plan.approach;
    return plan;
  }
  return fail();
}

// ---------------------------------------------------------------------------
// Table plane fitting
// ---------------------------------------------------------------------------

struct PlaneFitConfig {
  double inlier_band = 0.01;  // meters
  int ransac_iterations = 256;
  uint64_t seed = 7;
  int min_pixels = 100;
  double min_inlier_ratio = 0.5;
  int pixel_stride = 1;  // subsampling of surface pixels
};

namespace detail_plan {

struct PlaneLsq {
  Plane plane;
  Vec3 centroid;
};

inline PlaneLsq fit_plane_lsq(const std::vector<Vec3>& points) {
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> solver(scatter);
  PlaneLsq out;
  out.centroid = centroid;
  out.plane.n = solver.eigenvectors().col(0).normalized();  // smallest eigenvalue
  out.plane.d = -out.plane.n.dot(centroid);
  return out;
}

}  // namespace detail_plan

/// Robust plane from the surface-class disparity pixels: seeded RANSAC with a
/// least-squares refit over the winning inliers; the normal is oriented
/// toward the camera.
inline Plane fit_table_plane(const DisparityMap& disparity, const ImageMask& seg,
                             const StereoRig& rig, const PlaneFitConfig& cfg = {}) {
  if (!disparity.values.same_shape(seg)) throw ShapeError("disparity and segmentation differ");
  const CameraIntrinsics& cam = rig.intrinsics;
  std::vector<Vec3> points;
  const int stride = std::max(1, cfg.pixel_stride);
  for (int y = 0; y < disparity.height(); y += stride)
    for (int x = 0; x < disparity.width(); x += stride) {
      if (seg(x, y) != 0) continue;  // SegClass::surface
      if (!disparity.valid(x, y) || !(disparity.values(x, y) > 0.0)) continue;
      const double z = cam.fx * rig.baseline / disparity.values(x, y);
      points.emplace_back((x - cam.cx) / cam.fx * z, (y - cam.cy) / cam.fy * z, z);
    }
  if (static_cast<int>(points.size()) < cfg.min_pixels)
    throw PlaneFitError("only " + std::to_string(points.size()) + " surface pixels");

  Rng rng(cfg.seed);
  const int n = static_cast<int>(points.size());
  int best_count = -1;
  std::array<int, 3> best_sample = {0, 1, 2};
  for (int it = 0; it < cfg.ransac_iterations; ++it) {
    const int a = rng.uniform_int(0, n - 1);
    const int b = rng.uniform_int(0, n - 1);
    const int c = rng.uniform_int(0, n - 1);
    if (a == b || b == c || a == c) continue;
    const Vec3 normal = (points[b] - points[a]).cross(points[c] - points[a]);
    if (normal.norm() < 1e-12) continue;
    const Vec3 nn = normal.normalized();
    const double d = -nn.dot(points[a]);
    int count = 0;
    for (const Vec3& p : points)
      if (std::abs(nn.dot(p) + d) <= cfg.inlier_band) ++count;
    if (count > best_count) {
      best_count = count;
      best_sample = {a, b, c};
    }
  }
  if (best_count <= 0) throw PlaneFitError("RANSAC found no valid model");

  const Vec3 nref = (points[best_sample[1]] - points[best_sample[0]])
                        .cross(points[best_sample[2]] - points[best_sample[0]])
                        .normalized();
  const double dref = -nref.dot(points[best_sample[0]]);
  std::vector<Vec3> inliers;
  inliers.reserve(best_count);
  for (const Vec3& p : points)
    if (std::abs(nref.dot(p) + dref) <= cfg.inlier_band) inliers.push_back(p);
  if (static_cast<double>(inliers.size()) < cfg.min_inlier_ratio * n)
    throw PlaneFitError("inlier ratio below threshold");

  Plane plane = detail_plan::fit_plane_lsq(inliers).plane;
  if (plane.d < 0.0) {  // orient the normal toward the camera at the origin
    plane.n = -plane.n;
    plane.d = -plane.d;
  }
  return plane;
}

// ---------------------------------------------------------------------------
// Keypoint lifting
// ---------------------------------------------------------------------------

/// Intersects the camera ray through pixel (u, v) with the plane.
inline Vec3 lift_keypoint(double u, double v, const Plane& plane, const CameraIntrinsics& cam) {
  const Vec3 ray = cam.ray(u, v).normalized();
  const double denom = plane.n.dot(ray);
  if (std::abs(denom) <= 1e-6) throw NoIntersection("ray parallel to plane");
  const double s = -plane.d / denom;
  if (!(s > 0.0)) throw NoIntersection("intersection behind the camera");
  return s * ray;
}

// ---------------------------------------------------------------------------
// T-shirt fold planning
// ---------------------------------------------------------------------------

struct FoldStep {
  int step = 0;  // 1..4
  std::string name;
  Vec3 pick = Vec3::Zero();
  Vec3 place = Vec3::Zero();
  std::vector<Vec3> anchors;  // keypoints the step was derived from
};

struct FoldPlan {
  std::vector<FoldStep> steps;  // exactly 4 when complete

  void validate(const Plane& table, double tol = 0.005) const {
    if (steps.size() != 4) throw Error("fold plan must have exactly 4 steps");
    for (const FoldStep& s : steps)
      if (std::abs(table.signed_distance(s.pick)) > tol ||
          std::abs(table.signed_distance(s.place)) > tol)
        throw Error("fold step leaves the table plane");
  }
};

using Keypoints3d = std::map<std::string, std::vector<Vec3>>;

namespace detail_plan {

inline const Vec3* extreme_x(const std::vector<Vec3>& pts, bool leftmost) {
  const Vec3* best = nullptr;
  for (const Vec3& p : pts)
    if (!best || (leftmost ? p.x() < best->x() : p.x() > best->x())) best = &p;
  return best;
}

}  // namespace detail_plan

/// Plans the pick/place pair for the currently visible fold state. The state
/// is identified by the visible keypoint-class signature; the four canonical
/// states chain into the sideways-column sequence (sleeve to sleeve, bottom to
/// bottom, sleeves inward to the neck line, bottom over top).
inline FoldStep plan_fold_step(const Keypoints3d& kps) {
  auto list = [&](const char* cls) -> const std::vector<Vec3>& {
    static const std::vector<Vec3> empty;
    const auto it = kps.find(cls);
    return it == kps.end() ? empty : it->second;
  };
  const auto& sleeves = list("sleeve");
  const auto& necks = list("neck");
  const auto& bottoms = list("bottom_corner");

  std::vector<std::string> missing;
  if (necks.empty()) missing.push_back("neck");
  if (sleeves.empty() && bottoms.empty()) {
    missing.push_back("sleeve");
    missing.push_back("bottom_corner");
  } else if (bottoms.empty()) {
    missing.push_back("bottom_corner");
  }
  if (!missing.empty()) throw IncompleteState(std::move(missing));

  FoldStep step;
  if (sleeves.size() >= 2 && bottoms.size() >= 2) {
    step.step = 1;
    step.name = "sleeve_to_sleeve";
    step.pick = *detail_plan::extreme_x(sleeves, true);
    step.place = *detail_plan::extreme_x(sleeves, false);
    step.anchors = {step.pick, step.place};
  } else if (sleeves.size() == 1 && bottoms.size() >= 2) {
    step.step = 2;
    step.name = "bottom_to_bottom";
    step.pick = *detail_plan::extreme_x(bottoms, true);
    step.place = *detail_plan::extreme_x(bottoms, false);
    step.anchors = {step.pick, step.place};
  } else if (sleeves.size() >= 2 && bottoms.size() == 1) {
    step.step = 3;
    step.name = "sleeves_to_neck";
    Vec3 mid = Vec3::Zero();
    for (const Vec3& s : sleeves) mid += s;
    mid /= static_cast<double>(sleeves.size());
    step.pick = mid;
    step.place = mid;
    step.place.x() = necks.front().x();  // align the stack with the neck line
    step.anchors.assign(sleeves.begin(), sleeves.end());
  } else {
    step.step = 4;
    step.name = "bottom_over_top";
    step.pick = bottoms.front();
    step.place = necks.front();
    step.anchors = {step.pick, step.place};
  }
  return step;
}

/// Chains per-state plans across the four canonical fixture states and
/// verifies the sideways-column order.
inline FoldPlan plan_fold_sequence(const std::vector<Keypoints3d>& states) {
  FoldPlan plan;
  for (const Keypoints3d& kps : states) plan.steps.push_back(plan_fold_step(kps));
  for (size_t i = 0; i < plan.steps.size(); ++i)
    if (plan.steps[i].step != static_cast<int>(i) + 1)
      throw Error("fold states out of sequence at step " + std::to_string(i + 1));
  return plan;
}

}  // namespace stereopick

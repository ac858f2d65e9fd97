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
#include <numeric>
#include <string>

#include "stereopick/common.hpp"
#include "stereopick/rng.hpp"

namespace stereopick {

/// Rectified pinhole camera. Pixel coordinates are (u, v) with u along +x.
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error("intrinsics: focal length must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw Error("intrinsics: principal point outside image");
  }

  /// Pinhole projection; requires positive depth.
  Vec2 project(const Vec3& p) const {
    if (!(p.z() > 0.0)) throw BehindCamera("projection of point with non-positive depth");
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }

  /// Unit-free ray direction through pixel (u, v); z component is 1.
  Vec3 ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }
};

/// Rectified stereo pair sharing the left camera's intrinsics.
struct StereoRig {
  CameraIntrinsics intrinsics;
  double baseline = 0.0;  // meters

  void validate() const {
    intrinsics.validate();
    if (!(baseline > 0.0)) throw Error("rig: baseline must be positive");
  }
};

// Baselines of the two supported capture rigs. The robot-head pair is the
// one the default 960x512 rendering resolution corresponds to.
inline constexpr double kHandheldRigBaseline = 0.10;
inline constexpr double kRobotHeadRigBaseline = 0.12;

inline double disparity_to_depth(double d, const StereoRig& rig) {
  if (!(d > 0.0)) throw DegenerateDisparity("disparity must be positive, got " + std::to_string(d));
  return rig.intrinsics.fx * rig.baseline / d;
}

inline double depth_to_disparity(double z, const StereoRig& rig) {
  if (!(z > 0.0)) throw DegenerateDisparity("depth must be positive, got " + std::to_string(z));
  return rig.intrinsics.fx * rig.baseline / z;
}

// ---------------------------------------------------------------------------
// Oriented bounding box
// ---------------------------------------------------------------------------

/// Canonical corner sign pattern. Corner k uses bit 0 for x, bit 1 for y,
/// bit 2 for z; a set bit selects +1. Encode and decode both rely on this
/// fixed enumeration.
inline Vec3 corner_signs(int k) {
  return {(k & 1) ? 1.0 : -1.0, (k & 2) ? 1.0 : -1.0, (k & 4) ? 1.0 : -1.0};
}

/// 9-DOF oriented box: rotation columns are the box axes, half_extents are the
/// positive per-axis half sizes.
struct Obb {
  Vec3 t = Vec3::Zero();             // centroid, meters
  Vec3 half_extents = Vec3::Zero();  // positive, meters
  Mat3 R = Mat3::Identity();

  void validate(double tol = 1e-9) const {
    if (!(half_extents.x() > 0 && half_extents.y() > 0 && half_extents.z() > 0))
      throw Error("obb: half extents must be positive");
    const Mat3 err = R.transpose() * R - Mat3::Identity();
    if (err.cwiseAbs().maxCoeff() > tol) throw Error("obb: rotation not orthonormal");
    if (std::abs(R.determinant() - 1.0) > tol) throw Error("obb: rotation determinant != +1");
  }

  Vec3 corner(int k) const { return R * half_extents.cwiseProduct(corner_signs(k)) + t; }

  std::array<Vec3, 8> corners() const {
    std::array<Vec3, 8> out;
    for (int k = 0; k < 8; ++k) out[k] = corner(k);
    return out;
  }

  double volume() const { return 8.0 * half_extents.prod(); }

  bool contains(const Vec3& p) const {
    const Vec3 q = R.transpose() * (p - t);
    return std::abs(q.x()) <= half_extents.x() && std::abs(q.y()) <= half_extents.y() &&
           std::abs(q.z()) <= half_extents.z();
  }

  /// Half width of the box along an arbitrary unit direction (support radius).
  double support(const Vec3& dir) const {
    return half_extents.x() * std::abs(dir.dot(R.col(0))) +
           half_extents.y() * std::abs(dir.dot(R.col(1))) +
           half_extents.z() * std::abs(dir.dot(R.col(2)));
  }
};

/// Projects the 8 canonical corners; throws BehindCamera if any corner has
/// non-positive depth. Output order follows corner_signs.
inline std::array<Vec2, 8> project_obb_vertices(const Obb& box, const CameraIntrinsics& cam) {
  std::array<Vec2, 8> out;
  for (int k = 0; k < 8; ++k) {
    const Vec3 p = box.corner(k);
    if (!(p.z() > 0.0)) throw BehindCamera("obb corner behind camera");
    out[k] = cam.project(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// 3D IoU
// ---------------------------------------------------------------------------

namespace detail {

inline bool near_identity(const Mat3& R, double tol = 1e-12) {
  return (R - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol;
}

inline double axis_aligned_iou(const Obb& a, const Obb& b) {
  // All three volumes derive from the same interval arithmetic so identical
  // boxes evaluate to exactly one.
  double inter = 1.0, vol_a = 1.0, vol_b = 1.0;
  for (int i = 0; i < 3; ++i) {
    const double a_lo = a.t[i] - a.half_extents[i], a_hi = a.t[i] + a.half_extents[i];
    const double b_lo = b.t[i] - b.half_extents[i], b_hi = b.t[i] + b.half_extents[i];
    vol_a *= a_hi - a_lo;
    vol_b *= b_hi - b_lo;
    const double lo = std::max(a_lo, b_lo);
    const double hi = std::min(a_hi, b_hi);
    if (hi <= lo) return 0.0;
    inter *= hi - lo;
  }
  return std::min(1.0, inter / (vol_a + vol_b - inter));
}

}  // namespace detail

/// Intersection-over-union of two oriented boxes. Exact interval arithmetic
/// when both boxes are axis aligned; otherwise a seeded Monte-Carlo estimate
/// over the joint bounding volume. Symmetric in its arguments by construction.
inline double obb_iou_3d(const Obb& a, const Obb& b, long samples = 200000, uint64_t seed = 12345) {
  if (detail::near_identity(a.R) && detail::near_identity(b.R))
    return detail::axis_aligned_iou(a, b);

  samples = std::max<long>(samples, 10000);
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Obb* box : {&a, &b})
    for (int k = 0; k < 8; ++k) {
      const Vec3 c = box->corner(k);
      lo = lo.cwiseMin(c);
      hi = hi.cwiseMax(c);
    }
  Rng rng(seed);
  long inter = 0, uni = 0;
  for (long s = 0; s < samples; ++s) {
    const Vec3 p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()),
                 rng.uniform(lo.z(), hi.z()));
    const bool in_a = a.contains(p);
    const bool in_b = b.contains(p);
    inter += (in_a && in_b) ? 1 : 0;
    uni += (in_a || in_b) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Rotation from covariance
// ---------------------------------------------------------------------------

namespace detail {

/// Index of the largest-magnitude entry; equal magnitudes resolve to the
/// smallest index so encode and decode agree bit-for-bit.
inline int dominant_entry(const Vec3& c) {
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(c[i]) > std::abs(c[best])) best = i;
  return best;
}

inline void fix_column_signs(Mat3& R) {
  for (int j = 0; j < 3; ++j) {
    Vec3 c = R.col(j);
    if (c[dominant_entry(c)] < 0.0) R.col(j) = -c;
  }
}

inline void fix_determinant(Mat3& R) {
  if (R.determinant() < 0.0) R.col(2) = -R.col(2);
}

}  // namespace detail

/// Recovers a proper rotation from a symmetric PSD covariance: eigenvectors
/// ordered by descending eigenvalue, each column's dominant entry forced
/// positive, last column flipped if the determinant is negative. Groups of
/// (near-)equal eigenvalues are re-aligned toward the canonical axes of their
/// slots so isotropic input maps to the identity.
inline Mat3 rotation_from_covariance(const Mat3& sigma, double symmetry_tol = 1e-6) {
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > symmetry_tol)
    throw InvalidCovariance("covariance not symmetric");
  const Mat3 sym = 0.5 * (sigma + sigma.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> solver(sym);
  if (solver.info() != Eigen::Success) throw InvalidCovariance("eigendecomposition failed");
  Vec3 evals = solver.eigenvalues();  // ascending
  Mat3 evecs = solver.eigenvectors();
  const double scale = std::max(std::abs(evals[0]), std::abs(evals[2]));
  if (evals[0] < -1e-8 * std::max(scale, 1.0))
    throw InvalidCovariance("covariance not positive semi-definite");

  // Reorder to descending eigenvalues.
  Mat3 R;
  Vec3 lam;
  for (int j = 0; j < 3; ++j) {
    R.col(j) = evecs.col(2 - j);
    lam[j] = evals[2 - j];
  }

  // Re-align groups of equal eigenvalues toward the identity columns of their
  // slots; the eigenbasis inside such a group is arbitrary.
  const double group_tol = 1e-9 * std::max(scale, 1.0) + 1e-12;
  int i = 0;
  while (i < 3) {
    int j = i + 1;
    while (j < 3 && std::abs(lam[j - 1] - lam[j]) <= group_tol) ++j;
    if (j - i > 1) {
      const Eigen::Matrix<double, 3, Eigen::Dynamic> basis = R.block(0, i, 3, j - i);
      const Mat3 proj = basis * basis.transpose();
      int filled = 0;
      Mat3 cand = Mat3::Zero();
      for (int axis = i; axis < j && filled < j - i; ++axis) {
        Vec3 v = proj * Vec3::Unit(axis);
        for (int k = 0; k < filled; ++k) v -= v.dot(cand.col(k)) * cand.col(k);
        if (v.norm() > 1e-6) cand.col(filled++) = v.normalized();
      }
      // Fall back to the original eigenvectors if projection degenerated.
      for (int k = i; k < j && filled < j - i; ++k) {
        Vec3 v = R.col(k);
        for (int m = 0; m < filled; ++m) v -= v.dot(cand.col(m)) * cand.col(m);
        if (v.norm() > 1e-9) cand.col(filled++) = v.normalized();
      }
      for (int k = 0; k < j - i; ++k) R.col(i + k) = cand.col(k);
    }
    i = j;
  }

  detail::fix_column_signs(R);
  detail::fix_determinant(R);
  return R;
}

/// Reorders box axes by descending half extent and applies the same sign
/// conventions as rotation_from_covariance, so that a box and the covariance
/// of its surface cloud resolve to the same frame. The box geometry is
/// unchanged.
inline Obb canonicalize_obb(const Obb& box) {
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return box.half_extents[a] > box.half_extents[b]; });
  Obb out;
  out.t = box.t;
  for (int j = 0; j < 3; ++j) {
    out.R.col(j) = box.R.col(order[j]);
    out.half_extents[j] = box.half_extents[order[j]];
  }
  detail::fix_column_signs(out.R);
  detail::fix_determinant(out.R);
  return out;
}

/// Covariance of a deterministic uniform-by-area sampling of the box surface,
/// expressed in the frame of `box` (i.e. about its centroid, world axes).
/// The per-face grids are symmetric, so in the box's own frame the result is
/// diagonal up to floating point rounding.
inline Mat3 obb_surface_covariance(const Obb& box, int total_points = 2048) {
  const Vec3& s = box.half_extents;
  const std::array<double, 3> face_area = {s.y() * s.z(), s.x() * s.z(), s.x() * s.y()};
  const double area_sum = 2.0 * (face_area[0] + face_area[1] + face_area[2]);

  Mat3 second = Mat3::Zero();
  double count = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    const int u_axis = (axis + 1) % 3;
    const int v_axis = (axis + 2) % 3;
    // Points for both faces perpendicular to `axis`, proportional to area.
    const double want = total_points * 2.0 * face_area[axis] / area_sum;
    const double aspect = s[u_axis] / s[v_axis];
    int nu = std::max(2, static_cast<int>(std::lround(std::sqrt(want / 2.0 * aspect))));
    int nv = std::max(2, static_cast<int>(std::lround(want / 2.0 / nu)));
    for (int sign = -1; sign <= 1; sign += 2) {
      for (int iu = 0; iu < nu; ++iu) {
        for (int iv = 0; iv < nv; ++iv) {
          Vec3 q;
          q[axis] = sign * s[axis];
          q[u_axis] = s[u_axis] * ((2.0 * iu + 1.0) / nu - 1.0);
          q[v_axis] = s[v_axis] * ((2.0 * iv + 1.0) / nv - 1.0);
          second += q * q.transpose();
          count += 1.0;
        }
      }
    }
  }
  const Mat3 local = second / count;  // grid is symmetric about the centroid
  return box.R * local * box.R.transpose();
}

// ---------------------------------------------------------------------------
// Plane
// ---------------------------------------------------------------------------

/// Plane {x : n.dot(x) + d = 0} with unit normal.
struct Plane {
  Vec3 n = Vec3::UnitZ();
  double d = 0.0;

  double signed_distance(const Vec3& p) const { return n.dot(p) + d; }
};

// ---------------------------------------------------------------------------
// Rotation distance helpers
// ---------------------------------------------------------------------------

inline double rotation_geodesic_deg(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

/// Geodesic distance modulo the four 180-degree axis flips (proper rotations
/// mapping a box onto itself without axis exchange).
inline double rotation_geodesic_mod_flips_deg(const Mat3& a, const Mat3& b) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 4; ++k) {
    Vec3 diag(1, 1, 1);
    if (k == 1) diag = Vec3(1, -1, -1);
    if (k == 2) diag = Vec3(-1, 1, -1);
    if (k == 3) diag = Vec3(-1, -1, 1);
    best = std::min(best, rotation_geodesic_deg(a * diag.asDiagonal(), b));
  }
  return best;
}

}  // namespace stereopick

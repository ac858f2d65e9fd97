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

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "stereopick/geometry.hpp"

namespace stereopick {

/// Triangle mesh in its own object frame. face_labels, when non-empty, holds
/// one SurfaceLabel id per face (used by the table slab to mark its top).
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<uint8_t> face_labels;
  std::map<std::string, std::vector<Vec3>> keypoints;  // object-frame annotations

  void add_face(int a, int b, int c) { faces.push_back({a, b, c}); }
};

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  bool overlaps(const Aabb& o) const {
    for (int i = 0; i < 3; ++i)
      if (hi[i] < o.lo[i] || o.hi[i] < lo[i]) return false;
    return true;
  }
};

inline Aabb mesh_aabb(const Mesh& m) {
  Aabb box;
  for (const Vec3& v : m.vertices) box.extend(v);
  return box;
}

inline Mesh transformed(const Mesh& m, const Mat3& R, const Vec3& t) {
  Mesh out = m;
  for (Vec3& v : out.vertices) v = R * v + t;
  for (auto& [cls, pts] : out.keypoints)
    for (Vec3& p : pts) p = R * p + t;
  return out;
}

// ---------------------------------------------------------------------------
// Primitive generators
// ---------------------------------------------------------------------------

inline Mesh make_box(const Vec3& half) {
  Mesh m;
  for (int k = 0; k < 8; ++k) m.vertices.push_back(half.cwiseProduct(corner_signs(k)));
  // Corner index bit 0 = x, bit 1 = y, bit 2 = z.
  const int quads[6][4] = {
      {0, 2, 6, 4},  // -x
      {1, 5, 7, 3},  // +x
      {0, 4, 5, 1},  // -y
      {2, 3, 7, 6},  // +y
      {0, 1, 3, 2},  // -z
      {4, 6, 7, 5},  // +z
  };
  for (const auto& q : quads) {
    m.add_face(q[0], q[1], q[2]);
    m.add_face(q[0], q[2], q[3]);
  }
  return m;
}

inline Mesh make_cylinder(double radius, double half_height, int segments = 24) {
  Mesh m;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * M_PI * i / segments;
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), -half_height);
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), half_height);
  }
  const int bottom_center = static_cast<int>(m.vertices.size());
  m.vertices.emplace_back(0, 0, -half_height);
  const int top_center = static_cast<int>(m.vertices.size());
  m.vertices.emplace_back(0, 0, half_height);
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    m.add_face(2 * i, 2 * j, 2 * j + 1);
    m.add_face(2 * i, 2 * j + 1, 2 * i + 1);
    m.add_face(bottom_center, 2 * j, 2 * i);
    m.add_face(top_center, 2 * i + 1, 2 * j + 1);
  }
  return m;
}

inline Mesh make_sphere(double radius, int rings = 10, int segments = 20) {
  Mesh m;
  m.vertices.emplace_back(0, 0, radius);
  for (int r = 1; r < rings; ++r) {
    const double phi = M_PI * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double theta = 2.0 * M_PI * s / segments;
      m.vertices.emplace_back(radius * std::sin(phi) * std::cos(theta),
                              radius * std::sin(phi) * std::sin(theta), radius * std::cos(phi));
    }
  }
  m.vertices.emplace_back(0, 0, -radius);
  const int south = static_cast<int>(m.vertices.size()) - 1;
  auto ring_idx = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  for (int s = 0; s < segments; ++s) m.add_face(0, ring_idx(1, s), ring_idx(1, s + 1));
  for (int r = 1; r + 1 < rings; ++r)
    for (int s = 0; s < segments; ++s) {
      m.add_face(ring_idx(r, s), ring_idx(r + 1, s), ring_idx(r + 1, s + 1));
      m.add_face(ring_idx(r, s), ring_idx(r + 1, s + 1), ring_idx(r, s + 1));
    }
  for (int s = 0; s < segments; ++s)
    m.add_face(south, ring_idx(rings - 1, s + 1), ring_idx(rings - 1, s));
  return m;
}

inline Mesh make_superellipsoid(const Vec3& half, double e1, double e2, int rings = 10,
                                int segments = 20) {
  auto spow = [](double v, double e) {
    return v >= 0.0 ? std::pow(v, e) : -std::pow(-v, e);
  };
  Mesh m;
  m.vertices.emplace_back(0, 0, half.z());
  for (int r = 1; r < rings; ++r) {
    const double phi = -M_PI / 2.0 + M_PI * r / rings;  // latitude from south pole
    for (int s = 0; s < segments; ++s) {
      const double theta = 2.0 * M_PI * s / segments;
      const double cphi = std::cos(phi), sphi = std::sin(phi);
      m.vertices.emplace_back(half.x() * spow(cphi, e1) * spow(std::cos(theta), e2),
                              half.y() * spow(cphi, e1) * spow(std::sin(theta), e2),
                              half.z() * spow(sphi, e1));
    }
  }
  m.vertices.emplace_back(0, 0, -half.z());
  const int south = static_cast<int>(m.vertices.size()) - 1;
  auto ring_idx = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  // Ring r=1 is just above the south pole; the north pole is vertex 0.
  for (int s = 0; s < segments; ++s) m.add_face(south, ring_idx(1, s + 1), ring_idx(1, s));
  for (int r = 1; r + 1 < rings; ++r)
    for (int s = 0; s < segments; ++s) {
      m.add_face(ring_idx(r, s), ring_idx(r, s + 1), ring_idx(r + 1, s + 1));
      m.add_face(ring_idx(r, s), ring_idx(r + 1, s + 1), ring_idx(r + 1, s));
    }
  for (int s = 0; s < segments; ++s) m.add_face(0, ring_idx(rings - 1, s), ring_idx(rings - 1, s + 1));
  return m;
}

namespace detail_mesh {

/// Appends a fan-triangulated prism over a convex outline, spanning z0..z1.
inline void add_prism(Mesh& m, const std::vector<Vec2>& outline, double z0, double z1) {
  const int base = static_cast<int>(m.vertices.size());
  const int n = static_cast<int>(outline.size());
  for (const Vec2& p : outline) m.vertices.emplace_back(p.x(), p.y(), z0);
  for (const Vec2& p : outline) m.vertices.emplace_back(p.x(), p.y(), z1);
  for (int i = 1; i + 1 < n; ++i) {
    m.add_face(base, base + i, base + i + 1);
    m.add_face(base + n, base + n + i + 1, base + n + i);
  }
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    m.add_face(base + i, base + j, base + n + j);
    m.add_face(base + i, base + n + j, base + n + i);
  }
}

}  // namespace detail_mesh

/// Flat t-shirt plate in one of the four fold states, lying in the z = 0
/// plane with a small thickness. Built from convex prisms (torso plus
/// sleeves) so triangulation stays valid. Keypoint classes: sleeve, neck,
/// bottom_corner.
inline Mesh make_shirt(int fold_state, double width, double height, double thickness = 0.004) {
  if (fold_state < 0 || fold_state > 3) throw Error("fold state must be in [0, 3]");
  const double w = width / 2.0;   // half width
  const double h = height / 2.0;  // half height, collar toward +y
  Mesh m;
  const double z0 = 0.0, z1 = thickness;

  switch (fold_state) {
    case 0: {
      // Flat shirt: torso rectangle plus two sleeve quads.
      const double sw = 0.35 * w;  // sleeve length beyond the torso
      const double sh = 0.30 * h;  // sleeve drop from the shoulder
      detail_mesh::add_prism(
          m, {{-0.8 * w, h}, {0.8 * w, h}, {0.8 * w, -h}, {-0.8 * w, -h}}, z0, z1);
      detail_mesh::add_prism(
          m, {{-0.8 * w, h}, {-0.8 * w, h - 1.4 * sh}, {-w - sw, h - sh}, {-w, h}}, z0, z1);
      detail_mesh::add_prism(
          m, {{0.8 * w, h}, {w, h}, {w + sw, h - sh}, {0.8 * w, h - 1.4 * sh}}, z0, z1);
      m.keypoints["sleeve"] = {{-w - sw, h - sh, z1}, {w + sw, h - sh, z1}};
      m.keypoints["neck"] = {{0.0, h, z1}};
      m.keypoints["bottom_corner"] = {{-0.8 * w, -h, z1}, {0.8 * w, -h, z1}};
      break;
    }
    case 1: {
      // Left sleeve folded across: torso spans [-0.1w, 0.8w].
      detail_mesh::add_prism(
          m, {{-0.1 * w, h}, {0.8 * w, h}, {0.8 * w, -h}, {-0.1 * w, -h}}, z0, z1);
      m.keypoints["sleeve"] = {{0.8 * w, 0.7 * h, z1}};
      m.keypoints["neck"] = {{0.35 * w, h, z1}};
      m.keypoints["bottom_corner"] = {{-0.1 * w, -h, z1}, {0.8 * w, -h, z1}};
      break;
    }
    case 2: {
      // Bottom folded up: half height, both sleeve marks on the fold stack.
      detail_mesh::add_prism(
          m, {{-0.1 * w, h}, {0.8 * w, h}, {0.8 * w, 0.0}, {-0.1 * w, 0.0}}, z0, z1);
      m.keypoints["sleeve"] = {{0.7 * w, 0.8 * h, z1}, {0.7 * w, 0.2 * h, z1}};
      m.keypoints["neck"] = {{0.35 * w, h, z1}};
      m.keypoints["bottom_corner"] = {{0.35 * w, 0.0, z1}};
      break;
    }
    case 3: {
      // Final column: compact rectangle.
      detail_mesh::add_prism(
          m, {{0.1 * w, h}, {0.6 * w, h}, {0.6 * w, 0.0}, {0.1 * w, 0.0}}, z0, z1);
      m.keypoints["neck"] = {{0.35 * w, h, z1}};
      m.keypoints["bottom_corner"] = {{0.35 * w, 0.05 * h, z1}};
      break;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Surface sampling and covariance
// ---------------------------------------------------------------------------

namespace detail_mesh {

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace detail_mesh

/// Deterministic area-weighted surface sampling: points are allocated to
/// triangles by largest remainder and placed with a fixed low-discrepancy
/// pattern inside each triangle.
inline std::vector<Vec3> sample_surface(const Mesh& m, int total_points) {
  std::vector<double> area(m.faces.size());
  double area_sum = 0.0;
  for (size_t f = 0; f < m.faces.size(); ++f) {
    const auto& tri = m.faces[f];
    area[f] = detail_mesh::triangle_area(m.vertices[tri[0]], m.vertices[tri[1]],
                                         m.vertices[tri[2]]);
    area_sum += area[f];
  }
  if (area_sum <= 0.0) throw Error("mesh has zero surface area");

  std::vector<int> counts(m.faces.size(), 0);
  std::vector<std::pair<double, size_t>> remainders(m.faces.size());
  int assigned = 0;
  for (size_t f = 0; f < m.faces.size(); ++f) {
    const double want = total_points * area[f] / area_sum;
    counts[f] = static_cast<int>(want);
    assigned += counts[f];
    remainders[f] = {want - counts[f], f};
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < total_points - assigned; ++k) ++counts[remainders[k].second];

  constexpr double phi = 0.6180339887498949;  // golden-ratio stride
  std::vector<Vec3> points;
  points.reserve(total_points);
  for (size_t f = 0; f < m.faces.size(); ++f) {
    const auto& tri = m.faces[f];
    const Vec3& a = m.vertices[tri[0]];
    const Vec3& b = m.vertices[tri[1]];
    const Vec3& c = m.vertices[tri[2]];
    for (int k = 0; k < counts[f]; ++k) {
      double u = (k + 0.5) / counts[f];
      double v = std::fmod((k + 1) * phi, 1.0);
      if (u + v > 1.0) {
        u = 1.0 - u;
        v = 1.0 - v;
      }
      points.push_back(a + u * (b - a) + v * (c - a));
    }
  }
  return points;
}

/// Covariance of a point cloud about its mean.
inline Mat3 point_covariance(const std::vector<Vec3>& points) {
  if (points.empty()) throw Error("covariance of empty point set");
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  return cov / static_cast<double>(points.size());
}

/// Tight oriented box around the mesh whose axes are the principal axes of
/// the supplied covariance. All vertices (hence the whole surface) are inside.
inline Obb principal_axis_obb(const Mesh& m, const Mat3& sigma, double min_half_extent = 1e-3) {
  const Mat3 R = rotation_from_covariance(sigma);
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& v : m.vertices) {
    const Vec3 q = R.transpose() * v;
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  Obb box;
  box.R = R;
  box.t = R * (0.5 * (lo + hi));
  box.half_extents = (0.5 * (hi - lo)).cwiseMax(min_half_extent);
  return box;
}

// ---------------------------------------------------------------------------
// Intersection tests
// ---------------------------------------------------------------------------

namespace detail_mesh {

/// Segment-triangle intersection (non-coplanar case).
inline bool segment_hits_triangle(const Vec3& p0, const Vec3& p1, const Vec3& a, const Vec3& b,
                                  const Vec3& c) {
  const Vec3 dir = p1 - p0;
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-15) return false;
  const double inv = 1.0 / det;
  const Vec3 tvec = p0 - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = e2.dot(qvec) * inv;
  return t > 0.0 && t < 1.0;
}

inline bool triangles_intersect(const std::array<Vec3, 3>& ta, const std::array<Vec3, 3>& tb) {
  for (int i = 0; i < 3; ++i) {
    if (segment_hits_triangle(ta[i], ta[(i + 1) % 3], tb[0], tb[1], tb[2])) return true;
    if (segment_hits_triangle(tb[i], tb[(i + 1) % 3], ta[0], ta[1], ta[2])) return true;
  }
  return false;
}

}  // namespace detail_mesh

/// World-space mesh intersection: AABB pre-check, then per-triangle AABB
/// filtering and exact segment-triangle tests. Coplanar touching does not
/// count as penetration.
inline bool meshes_intersect(const Mesh& a, const Mesh& b) {
  if (!mesh_aabb(a).overlaps(mesh_aabb(b))) return false;

  std::vector<Aabb> boxes_b(b.faces.size());
  for (size_t f = 0; f < b.faces.size(); ++f) {
    Aabb box;
    for (int k = 0; k < 3; ++k) box.extend(b.vertices[b.faces[f][k]]);
    boxes_b[f] = box;
  }
  for (const auto& fa : a.faces) {
    const std::array<Vec3, 3> ta = {a.vertices[fa[0]], a.vertices[fa[1]], a.vertices[fa[2]]};
    Aabb box_a;
    for (const Vec3& v : ta) box_a.extend(v);
    for (size_t f = 0; f < b.faces.size(); ++f) {
      if (!box_a.overlaps(boxes_b[f])) continue;
      const auto& fb = b.faces[f];
      const std::array<Vec3, 3> tb = {b.vertices[fb[0]], b.vertices[fb[1]], b.vertices[fb[2]]};
      if (detail_mesh::triangles_intersect(ta, tb)) return true;
    }
  }
  return false;
}

}  // namespace stereopick

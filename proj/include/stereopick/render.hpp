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
#include <vector>

#include "stereopick/heads.hpp"
#include "stereopick/image.hpp"
#include "stereopick/mesh.hpp"
#include "stereopick/rng.hpp"

namespace stereopick {

struct DirectionalLight {
  Vec3 direction = Vec3(0, 0, -1);  // propagation direction, world frame
  Rgb color = {1, 1, 1};
  double intensity = 1.0;
};

struct TextureParams {
  enum class Type { solid, checker, perlin, gradient };
  Type type = Type::solid;
  Rgb color_a = {0.5f, 0.5f, 0.5f};
  Rgb color_b = {0.1f, 0.1f, 0.1f};
  double scale = 0.05;  // meters
  Vec3 axis = Vec3(1, 0, 0);
  uint64_t seed = 0;
};

namespace detail_render {

inline double value_noise_hash(uint64_t seed, int64_t x, int64_t y, int64_t z) {
  uint64_t h = splitmix64(seed ^ splitmix64(static_cast<uint64_t>(x) * 0x8da6b343ull ^
                                            static_cast<uint64_t>(y) * 0xd8163841ull ^
                                            static_cast<uint64_t>(z) * 0xcb1ab31full));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

/// Trilinear value noise in [0, 1].
inline double value_noise(uint64_t seed, const Vec3& p) {
  const int64_t xi = static_cast<int64_t>(std::floor(p.x()));
  const int64_t yi = static_cast<int64_t>(std::floor(p.y()));
  const int64_t zi = static_cast<int64_t>(std::floor(p.z()));
  const double fx = smooth(p.x() - xi), fy = smooth(p.y() - yi), fz = smooth(p.z() - zi);
  double value = 0.0;
  for (int dz = 0; dz <= 1; ++dz)
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
        value += w * value_noise_hash(seed, xi + dx, yi + dy, zi + dz);
      }
  return value;
}

inline Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  const float ft = static_cast<float>(std::clamp(t, 0.0, 1.0));
  return {a[0] + ft * (b[0] - a[0]), a[1] + ft * (b[1] - a[1]), a[2] + ft * (b[2] - a[2])};
}

}  // namespace detail_render

/// Procedural albedo evaluated at an object-frame position, so texture sticks
/// to the surface and both stereo views see the same pattern.
inline Rgb texture_color(const TextureParams& tex, const Vec3& p) {
  switch (tex.type) {
    case TextureParams::Type::solid:
      return tex.color_a;
    case TextureParams::Type::checker: {
      const int64_t ix = static_cast<int64_t>(std::floor(p.x() / tex.scale));
      const int64_t iy = static_cast<int64_t>(std::floor(p.y() / tex.scale));
      const int64_t iz = static_cast<int64_t>(std::floor(p.z() / tex.scale));
      return ((ix + iy + iz) & 1) ? tex.color_b : tex.color_a;
    }
    case TextureParams::Type::perlin: {
      const double t = detail_render::value_noise(tex.seed, p / tex.scale);
      return detail_render::lerp(tex.color_a, tex.color_b, t);
    }
    case TextureParams::Type::gradient: {
      const double t = 0.5 + p.dot(tex.axis) / tex.scale;
      return detail_render::lerp(tex.color_a, tex.color_b, t);
    }
  }
  return tex.color_a;
}

/// World-to-camera transform: p_cam = R * (p_world - position). Camera axes
/// are +x right (image u), +y down (image v), +z forward.
struct Camera {
  Mat3 R = Mat3::Identity();
  Vec3 position = Vec3::Zero();

  Vec3 to_camera(const Vec3& p_world) const { return R * (p_world - position); }
  /// Unit x axis of the camera expressed in world coordinates (stereo shift).
  Vec3 x_axis_world() const { return R.row(0).transpose(); }
};

inline Camera look_at(const Vec3& eye, const Vec3& target, double roll_deg = 0.0) {
  const Vec3 up_world(0, 0, 1);
  Vec3 forward = (target - eye).normalized();
  Vec3 hint = std::abs(forward.dot(up_world)) > 0.999 ? Vec3(1, 0, 0) : up_world;
  Vec3 x = forward.cross(hint).normalized();
  Vec3 y = forward.cross(x);  // points "down" when forward is horizontal
  if (roll_deg != 0.0) {
    const double a = roll_deg * M_PI / 180.0;
    const Vec3 xr = std::cos(a) * x + std::sin(a) * y;
    y = -std::sin(a) * x + std::cos(a) * y;
    x = xr;
  }
  Camera cam;
  cam.R.row(0) = x;
  cam.R.row(1) = y;
  cam.R.row(2) = forward;
  cam.position = eye;
  return cam;
}

/// Mesh instance bound for rendering: object-frame geometry plus world pose.
struct RenderMesh {
  const Mesh* mesh = nullptr;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  TextureParams tex;
  uint8_t label = static_cast<uint8_t>(SurfaceLabel::none);
};

struct RenderOutput {
  ImageRgb color;
  Image<double> depth;  // camera-frame z, 0 where nothing was hit
  ImageMask labels;     // SurfaceLabel ids
};

namespace detail_render {

struct ClipVertex {
  Vec3 cam;    // camera-frame position
  Vec3 local;  // object-frame position (texture attribute)
};

/// Clips a polygon against z >= z_near.
inline void clip_near(std::vector<ClipVertex>& poly, double z_near) {
  std::vector<ClipVertex> out;
  out.reserve(poly.size() + 1);
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const ClipVertex& a = poly[i];
    const ClipVertex& b = poly[(i + 1) % n];
    const bool ina = a.cam.z() >= z_near;
    const bool inb = b.cam.z() >= z_near;
    if (ina) out.push_back(a);
    if (ina != inb) {
      const double t = (z_near - a.cam.z()) / (b.cam.z() - a.cam.z());
      out.push_back({a.cam + t * (b.cam - a.cam), a.local + t * (b.local - a.local)});
    }
  }
  poly = std::move(out);
}

}  // namespace detail_render

/// Perspective z-buffer rasterizer with flat Lambertian shading. Pixel (x, y)
/// samples the continuous image position (x, y), matching the pinhole
/// projection convention used everywhere else.
inline RenderOutput render_view(const std::vector<RenderMesh>& meshes,
                                const std::vector<DirectionalLight>& lights, double ambient,
                                const Camera& camera, const CameraIntrinsics& cam,
                                double z_near = 0.05) {
  RenderOutput out;
  out.color = ImageRgb(cam.width, cam.height, Rgb{0, 0, 0});
  out.depth = Image<double>(cam.width, cam.height, 0.0);
  out.labels = ImageMask(cam.width, cam.height, static_cast<uint8_t>(SurfaceLabel::none));
  Image<double> zbuf(cam.width, cam.height, std::numeric_limits<double>::infinity());

  std::vector<detail_render::ClipVertex> poly;
  for (const RenderMesh& rm : meshes) {
    const Mesh& mesh = *rm.mesh;
    std::vector<Vec3> cam_verts(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
      cam_verts[i] = camera.to_camera(rm.R * mesh.vertices[i] + rm.t);

    for (size_t f = 0; f < mesh.faces.size(); ++f) {
      const auto& tri = mesh.faces[f];
      const uint8_t label = mesh.face_labels.empty() ? rm.label : mesh.face_labels[f];

      // World-frame face normal, flipped toward the camera (two-sided).
      const Vec3 w0 = rm.R * mesh.vertices[tri[0]] + rm.t;
      const Vec3 w1 = rm.R * mesh.vertices[tri[1]] + rm.t;
      const Vec3 w2 = rm.R * mesh.vertices[tri[2]] + rm.t;
      Vec3 normal = (w1 - w0).cross(w2 - w0);
      const double nlen = normal.norm();
      if (nlen < 1e-15) continue;
      normal /= nlen;
      if (normal.dot(camera.position - w0) < 0.0) normal = -normal;

      double shade[3];
      for (int c = 0; c < 3; ++c) shade[c] = ambient;
      for (const DirectionalLight& light : lights) {
        const double lambert = std::max(0.0, -normal.dot(light.direction));
        for (int c = 0; c < 3; ++c) shade[c] += lambert * light.intensity * light.color[c];
      }

      poly.clear();
      for (int k = 0; k < 3; ++k) poly.push_back({cam_verts[tri[k]], mesh.vertices[tri[k]]});
      detail_render::clip_near(poly, z_near);
      if (poly.size() < 3) continue;

      for (size_t k = 1; k + 1 < poly.size(); ++k) {
        const detail_render::ClipVertex* v[3] = {&poly[0], &poly[k], &poly[k + 1]};
        Vec2 p[3];
        for (int i = 0; i < 3; ++i)
          p[i] = Vec2(cam.fx * v[i]->cam.x() / v[i]->cam.z() + cam.cx,
                      cam.fy * v[i]->cam.y() / v[i]->cam.z() + cam.cy);
        const double area =
            (p[1] - p[0]).x() * (p[2] - p[0]).y() - (p[1] - p[0]).y() * (p[2] - p[0]).x();
        if (std::abs(area) < 1e-12) continue;
        const double inv_area = 1.0 / area;
        const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({p[0].x(), p[1].x(), p[2].x()}))));
        const int x1 = std::min(cam.width - 1,
                                static_cast<int>(std::floor(std::max({p[0].x(), p[1].x(), p[2].x()}))));
        const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({p[0].y(), p[1].y(), p[2].y()}))));
        const int y1 = std::min(cam.height - 1,
                                static_cast<int>(std::floor(std::max({p[0].y(), p[1].y(), p[2].y()}))));
        const double iz[3] = {1.0 / v[0]->cam.z(), 1.0 / v[1]->cam.z(), 1.0 / v[2]->cam.z()};

        for (int y = y0; y <= y1; ++y) {
          for (int x = x0; x <= x1; ++x) {
            const Vec2 q(x, y);
            double l0 = ((p[1] - q).x() * (p[2] - q).y() - (p[1] - q).y() * (p[2] - q).x()) * inv_area;
            double l1 = ((p[2] - q).x() * (p[0] - q).y() - (p[2] - q).y() * (p[0] - q).x()) * inv_area;
            double l2 = 1.0 - l0 - l1;
            if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;
            const double inv_z = l0 * iz[0] + l1 * iz[1] + l2 * iz[2];
            const double z = 1.0 / inv_z;
            if (z >= zbuf(x, y)) continue;
            zbuf(x, y) = z;
            const Vec3 local =
                (l0 * iz[0] * v[0]->local + l1 * iz[1] * v[1]->local + l2 * iz[2] * v[2]->local) * z;
            const Rgb albedo = texture_color(rm.tex, local);
            Rgb& dst = out.color(x, y);
            for (int c = 0; c < 3; ++c)
              dst[c] = static_cast<float>(std::clamp(albedo[c] * shade[c], 0.0, 1.0));
            out.depth(x, y) = z;
            out.labels(x, y) = label;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace stereopick

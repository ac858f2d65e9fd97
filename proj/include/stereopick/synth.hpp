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

#include <cmath>
#include <string>
#include <vector>

#include "stereopick/heads.hpp"
#include "stereopick/mesh.hpp"
#include "stereopick/render.hpp"
#include "stereopick/rng.hpp"

namespace stereopick {

struct DepthNoiseParams {
  double sigma_mult = 0.01;       // multiplicative noise
  double sigma_add = 0.002;       // additive noise, meters
  int min_ellipses = 2;
  int max_ellipses = 8;
  double min_axis = 4.0;          // ellipse semi-axes, pixels
  double max_axis = 20.0;
  double edge_bias = 0.8;         // fraction of centers drawn from edge pixels
  double edge_threshold = 0.03;   // depth step that counts as an edge, meters
};

struct SynthConfig {
  int image_width = 960;
  int image_height = 512;
  double fx = 500.0;
  double fy = 500.0;
  double baseline = kRobotHeadRigBaseline;

  int min_objects = 1;
  int max_objects = 8;
  int min_distractors = 0;
  int max_distractors = 5;
  int min_lights = 1;
  int max_lights = 4;

  double camera_radius_min = 0.5;
  double camera_radius_max = 2.0;
  double target_jitter = 0.05;    // meters
  double roll_jitter_deg = 5.0;

  std::string scene_kind = "tabletop";  // "tabletop" or "shirts"
  int surface_samples = 2048;
  int max_placement_attempts = 1000;
  DepthNoiseParams noise;

  StereoRig rig() const {
    StereoRig r;
    r.intrinsics = {fx, fy, image_width / 2.0, image_height / 2.0, image_width, image_height};
    r.baseline = baseline;
    return r;
  }
};

struct CameraPose {
  Vec3 position = Vec3::Zero();
  Vec3 target = Vec3::Zero();
  double roll_deg = 0.0;

  Camera to_camera() const { return look_at(position, target, roll_deg); }
};

struct SceneObject {
  std::string kind;
  Mesh mesh;  // object frame
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  TextureParams tex;
  uint8_t label = static_cast<uint8_t>(SurfaceLabel::object);

  Mesh world_mesh() const { return transformed(mesh, R, t); }
};

struct SceneGraph {
  uint64_t rng_seed = 0;
  SceneObject table;  // slab; top faces carry the surface label
  SceneObject floor;
  std::vector<SceneObject> objects;
  std::vector<SceneObject> distractors;
  std::vector<DirectionalLight> lights;
  double ambient = 0.25;
  CameraPose camera;
  DepthNoiseParams noise;
  double table_top_z = 0.4;
};

/// One generated training example.
struct SceneSample {
  ImageRgb left, right;
  DisparityMap gt_disparity;  // left-referenced, full-resolution pixels
  ImageMask seg;              // SegClass ids
  std::vector<LabeledBox> boxes;
  KeypointSet keypoints;      // left-image pixels, score 1
  Image<double> depth;        // clean metric depth, 0 invalid
  Image<double> noisy_depth;  // depth with sensor-style corruption
};

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Camera position uniform on the upper half-sphere around the table center
/// with radius uniform in [radius_min, radius_max]; the view is aimed at the
/// table center with small target and roll jitter.
inline CameraPose sample_camera(Rng& rng, const SynthConfig& cfg, const Vec3& table_center) {
  const double radius = rng.uniform(cfg.camera_radius_min, cfg.camera_radius_max);
  const double z = rng.uniform();  // uniform area on the upper hemisphere
  const double azimuth = rng.uniform(0.0, 2.0 * M_PI);
  const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
  CameraPose pose;
  pose.position =
      table_center + radius * Vec3(rxy * std::cos(azimuth), rxy * std::sin(azimuth), z);
  pose.target = table_center + Vec3(rng.uniform(-cfg.target_jitter, cfg.target_jitter),
                                    rng.uniform(-cfg.target_jitter, cfg.target_jitter),
                                    rng.uniform(-cfg.target_jitter, cfg.target_jitter));
  pose.roll_deg = rng.uniform(-cfg.roll_jitter_deg, cfg.roll_jitter_deg);
  return pose;
}

namespace detail_synth {

inline Rgb random_color(Rng& rng, double lo = 0.05, double hi = 0.95) {
  return {static_cast<float>(rng.uniform(lo, hi)), static_cast<float>(rng.uniform(lo, hi)),
          static_cast<float>(rng.uniform(lo, hi))};
}

inline TextureParams random_texture(Rng& rng) {
  TextureParams tex;
  const int kind = rng.uniform_int(0, 3);
  tex.type = static_cast<TextureParams::Type>(kind);
  tex.color_a = random_color(rng);
  tex.color_b = random_color(rng);
  tex.scale = rng.uniform(0.02, 0.2);
  const double az = rng.uniform(0.0, 2.0 * M_PI);
  const double el = rng.uniform(-1.0, 1.0);
  const double r = std::sqrt(std::max(0.0, 1.0 - el * el));
  tex.axis = Vec3(r * std::cos(az), r * std::sin(az), el);
  tex.seed = rng.next_u64();
  return tex;
}

inline Mat3 rot_z(double a) {
  Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

inline Mat3 rot_x(double a) {
  Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}

inline Mat3 rot_y(double a) {
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

struct ObjectDraw {
  std::string kind;
  Mesh mesh;
  Mat3 R;
};

inline ObjectDraw draw_tabletop_object(Rng& rng) {
  ObjectDraw draw;
  const double pick = rng.uniform();
  const double yaw = rng.uniform(0.0, 2.0 * M_PI);
  if (pick < 0.35) {
    draw.kind = "box";
    const Vec3 half(rng.uniform(0.02, 0.10), rng.uniform(0.02, 0.10), rng.uniform(0.02, 0.10));
    draw.mesh = make_box(half);
    const int rest = rng.uniform_int(0, 2);  // which local axis points up
    Mat3 resting = Mat3::Identity();
    if (rest == 0) resting = rot_y(M_PI / 2.0);
    if (rest == 1) resting = rot_x(M_PI / 2.0);
    draw.R = rot_z(yaw) * resting;
  } else if (pick < 0.60) {
    draw.kind = "cylinder";
    const double r = rng.uniform(0.02, 0.06);
    const double hh = rng.uniform(0.03, 0.12);
    draw.mesh = make_cylinder(r, hh);
    draw.R = rng.uniform() < 0.5 ? rot_z(yaw) : rot_z(yaw) * rot_x(M_PI / 2.0);
  } else if (pick < 0.75) {
    draw.kind = "sphere";
    draw.mesh = make_sphere(rng.uniform(0.025, 0.07));
    draw.R = rot_z(yaw);
  } else {
    draw.kind = "superellipsoid";
    const Vec3 half(rng.uniform(0.02, 0.09), rng.uniform(0.02, 0.09), rng.uniform(0.02, 0.09));
    draw.mesh = make_superellipsoid(half, rng.uniform(0.4, 1.6), rng.uniform(0.4, 1.6));
    draw.R = rot_z(yaw);
  }
  return draw;
}

inline ObjectDraw draw_shirt(Rng& rng) {
  ObjectDraw draw;
  draw.kind = "shirt";
  const int state = rng.uniform_int(0, 3);
  const double width = rng.uniform(0.22, 0.32);
  const double aspect = rng.uniform(0.9, 1.25);
  draw.mesh = make_shirt(state, width, width * aspect);
  draw.R = rot_z(rng.uniform(0.0, 2.0 * M_PI));
  return draw;
}

inline double min_z(const Mesh& mesh, const Mat3& R) {
  double z = std::numeric_limits<double>::infinity();
  for (const Vec3& v : mesh.vertices) z = std::min(z, (R * v).z());
  return z;
}

inline double horizontal_reach(const Mesh& mesh, const Mat3& R) {
  double r = 0.0;
  for (const Vec3& v : mesh.vertices) {
    const Vec3 w = R * v;
    r = std::max({r, std::abs(w.x()), std::abs(w.y())});
  }
  return r;
}

}  // namespace detail_synth

/// Rejection-samples a full randomized scene: objects resting on the table
/// without penetration, distractor furniture around it, random lights and
/// procedural textures.
inline SceneGraph sample_scene(Rng& rng, const SynthConfig& cfg) {
  SceneGraph scene;
  scene.noise = cfg.noise;

  // Table slab; top faces are the room-level "surface" class. Shirt scenes
  // use a larger table so the flat plates can be placed without penetration.
  const bool shirts = cfg.scene_kind == "shirts";
  const double table_hx = shirts ? rng.uniform(0.60, 0.80) : rng.uniform(0.45, 0.70);
  const double table_hy = shirts ? rng.uniform(0.50, 0.65) : rng.uniform(0.35, 0.55);
  const double slab_hz = 0.025;
  scene.table_top_z = rng.uniform(0.35, 0.45);
  scene.table.kind = "table";
  scene.table.mesh = make_box(Vec3(table_hx, table_hy, slab_hz));
  scene.table.mesh.face_labels.assign(12, static_cast<uint8_t>(SurfaceLabel::table_other));
  scene.table.mesh.face_labels[10] = static_cast<uint8_t>(SurfaceLabel::table_top);
  scene.table.mesh.face_labels[11] = static_cast<uint8_t>(SurfaceLabel::table_top);
  scene.table.t = Vec3(0, 0, scene.table_top_z - slab_hz);
  scene.table.label = static_cast<uint8_t>(SurfaceLabel::table_other);
  scene.table.tex = detail_synth::random_texture(rng);

  scene.floor.kind = "floor";
  scene.floor.mesh = make_box(Vec3(4.0, 4.0, 0.01));
  scene.floor.t = Vec3(0, 0, -0.01);
  scene.floor.label = static_cast<uint8_t>(SurfaceLabel::floor);
  scene.floor.tex = detail_synth::random_texture(rng);

  // Objects on the table.
  const int n_objects = shirts ? rng.uniform_int(1, 2)
                               : rng.uniform_int(cfg.min_objects, cfg.max_objects);
  std::vector<Mesh> placed_world;
  for (int i = 0; i < n_objects; ++i) {
    const detail_synth::ObjectDraw draw =
        shirts ? detail_synth::draw_shirt(rng) : detail_synth::draw_tabletop_object(rng);
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_placement_attempts && !placed; ++attempt) {
      const double reach = detail_synth::horizontal_reach(draw.mesh, draw.R);
      const double mx = std::max(0.0, table_hx - reach);
      const double my = std::max(0.0, table_hy - reach);
      SceneObject obj;
      obj.kind = draw.kind;
      obj.mesh = draw.mesh;
      obj.R = draw.R;
      obj.t = Vec3(rng.uniform(-mx, mx), rng.uniform(-my, my),
                   scene.table_top_z - detail_synth::min_z(draw.mesh, draw.R));
      obj.label = static_cast<uint8_t>(draw.kind == "shirt" ? SurfaceLabel::shirt
                                                            : SurfaceLabel::object);
      obj.tex = detail_synth::random_texture(rng);
      Mesh world = obj.world_mesh();
      bool collides = false;
      for (const Mesh& other : placed_world)
        if (meshes_intersect(world, other)) {
          collides = true;
          break;
        }
      if (!collides) {
        placed_world.push_back(std::move(world));
        scene.objects.push_back(std::move(obj));
        placed = true;
      }
    }
    if (!placed) throw PlacementError("object placement failed after max attempts");
  }

  // Distractor furniture in a ring around the table.
  const int n_distractors = rng.uniform_int(cfg.min_distractors, cfg.max_distractors);
  for (int i = 0; i < n_distractors; ++i) {
    SceneObject d;
    d.kind = "distractor";
    const Vec3 half(rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5), rng.uniform(0.2, 0.6));
    d.mesh = make_box(half);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    const double radius = rng.uniform(1.3, 2.6);
    d.R = detail_synth::rot_z(rng.uniform(0.0, 2.0 * M_PI));
    d.t = Vec3(radius * std::cos(angle), radius * std::sin(angle), half.z());
    d.label = static_cast<uint8_t>(SurfaceLabel::distractor);
    d.tex = detail_synth::random_texture(rng);
    scene.distractors.push_back(std::move(d));
  }

  const int n_lights = rng.uniform_int(cfg.min_lights, cfg.max_lights);
  for (int i = 0; i < n_lights; ++i) {
    DirectionalLight light;
    const double az = rng.uniform(0.0, 2.0 * M_PI);
    const double elevation = rng.uniform(30.0, 80.0) * M_PI / 180.0;
    light.direction = Vec3(std::cos(elevation) * std::cos(az), std::cos(elevation) * std::sin(az),
                           -std::sin(elevation));
    light.color = detail_synth::random_color(rng, 0.6, 1.0);
    light.intensity = rng.uniform(0.4, 1.0);
    scene.lights.push_back(light);
  }
  scene.ambient = rng.uniform(0.15, 0.35);

  scene.camera = sample_camera(rng, cfg, Vec3(0, 0, scene.table_top_z));
  return scene;
}

// ---------------------------------------------------------------------------
// Depth noise
// ---------------------------------------------------------------------------

/// Sensor-style corruption: per-pixel multiplicative and additive noise plus
/// elliptical dropout regions whose centers are biased toward depth edges.
/// `centers_out`, when given, records the sampled ellipse centers.
inline Image<double> inject_depth_noise(
    const Image<double>& depth, Rng& rng, const DepthNoiseParams& params,
    std::vector<std::pair<double, double>>* centers_out = nullptr) {
  const int w = depth.width(), h = depth.height();
  Image<double> out(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double z = depth(x, y);
      if (z <= 0.0) continue;
      double v = z;
      if (params.sigma_mult > 0.0) v *= 1.0 + rng.normal(0.0, params.sigma_mult);
      if (params.sigma_add > 0.0) v += rng.normal(0.0, params.sigma_add);
      out(x, y) = std::max(v, 0.0);
    }

  // Depth edges: a step against any 4-neighbor (validity changes count too).
  std::vector<std::pair<int, int>> edges;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double z = depth(x, y);
      bool edge = false;
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4 && !edge; ++k) {
        if (!depth.in_bounds(nx[k], ny[k])) continue;
        if (std::abs(depth(nx[k], ny[k]) - z) > params.edge_threshold) edge = true;
      }
      if (edge) edges.emplace_back(x, y);
    }

  const int n_ellipses = rng.uniform_int(params.min_ellipses, params.max_ellipses);
  for (int e = 0; e < n_ellipses; ++e) {
    double cx, cy;
    if (!edges.empty() && rng.uniform() < params.edge_bias) {
      const auto& [ex, ey] = edges[rng.uniform_int(0, static_cast<int>(edges.size()) - 1)];
      cx = ex;
      cy = ey;
    } else {
      cx = rng.uniform(0.0, w);
      cy = rng.uniform(0.0, h);
    }
    if (centers_out) centers_out->emplace_back(cx, cy);
    const double a = rng.uniform(params.min_axis, params.max_axis);
    const double b = rng.uniform(params.min_axis, params.max_axis);
    const double theta = rng.uniform(0.0, M_PI);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double reach = std::max(a, b);
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + reach)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = (ct * dx + st * dy) / a;
        const double v = (-st * dx + ct * dy) / b;
        if (u * u + v * v <= 1.0) out(x, y) = 0.0;
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering a stereo sample
// ---------------------------------------------------------------------------

/// Renders both rectified views and derives every ground-truth channel.
/// Labeled boxes are principal-axis aligned in the camera frame; for box
/// primitives the surface covariance uses the exact symmetric grid sampling,
/// for other shapes the deterministic mesh sampling.
inline SceneSample render_stereo(const SceneGraph& scene, const StereoRig& rig) {
  rig.validate();
  const CameraIntrinsics& cam = rig.intrinsics;
  const Camera left_cam = scene.camera.to_camera();
  Camera right_cam = left_cam;
  right_cam.position += rig.baseline * left_cam.x_axis_world();

  std::vector<RenderMesh> meshes;
  auto bind = [&](const SceneObject& obj) {
    meshes.push_back({&obj.mesh, obj.R, obj.t, obj.tex, obj.label});
  };
  bind(scene.floor);
  bind(scene.table);
  for (const SceneObject& o : scene.distractors) bind(o);
  for (const SceneObject& o : scene.objects) bind(o);

  const RenderOutput left = render_view(meshes, scene.lights, scene.ambient, left_cam, cam);
  const RenderOutput right = render_view(meshes, scene.lights, scene.ambient, right_cam, cam);

  SceneSample sample;
  sample.left = left.color;
  sample.right = right.color;
  sample.seg = encode_segmentation(left.labels);
  sample.depth = left.depth;

  sample.gt_disparity = DisparityMap(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x)
      if (left.depth(x, y) > 0.0)
        sample.gt_disparity.set(x, y, cam.fx * rig.baseline / left.depth(x, y));

  // Labels: principal-axis OBB and surface covariance in the camera frame.
  for (const SceneObject& obj : scene.objects) {
    const Mesh cam_mesh = transformed(obj.world_mesh(), left_cam.R, -left_cam.R * left_cam.position);
    LabeledBox lb;
    if (obj.kind == "box") {
      // Exact symmetric sampling: the covariance is diagonal in the box frame.
      const Mat3 pose_R = left_cam.R * obj.R;
      Obb raw;
      raw.R = pose_R;
      raw.t = left_cam.to_camera(obj.t);
      raw.half_extents = 0.5 * (mesh_aabb(obj.mesh).hi - mesh_aabb(obj.mesh).lo);
      lb.sigma = obb_surface_covariance(raw);
      lb.box = principal_axis_obb(cam_mesh, lb.sigma);
    } else {
      lb.sigma = point_covariance(sample_surface(cam_mesh, 2048));
      lb.box = principal_axis_obb(cam_mesh, lb.sigma);
    }
    sample.boxes.push_back(lb);
  }

  // Keypoints: project annotated object-frame points, keep the visible ones.
  for (const SceneObject& obj : scene.objects) {
    for (const auto& [cls, points] : obj.mesh.keypoints) {
      for (const Vec3& p_obj : points) {
        const Vec3 p_cam = left_cam.to_camera(obj.R * p_obj + obj.t);
        if (!(p_cam.z() > 0.0)) continue;
        const Vec2 px = cam.project(p_cam);
        const int u = static_cast<int>(std::lround(px.x()));
        const int v = static_cast<int>(std::lround(px.y()));
        if (u < 0 || u >= cam.width || v < 0 || v >= cam.height) continue;
        const double zbuf = left.depth(u, v);
        if (zbuf <= 0.0 || std::abs(zbuf - p_cam.z()) > 0.01) continue;  // occluded
        sample.keypoints[cls].push_back({px.x(), px.y(), 1.0});
      }
    }
  }

  Rng noise_rng = Rng(scene.rng_seed).child(0xdeb7);
  sample.noisy_depth = inject_depth_noise(sample.depth, noise_rng, scene.noise);
  return sample;
}

/// Full target-tensor stack for a rendered sample (the encoder side of every
/// head at once).
inline HeadTensors encode_scene_targets(const SceneSample& sample, const StereoRig& rig,
                                        const CodecConfig& cfg = {}) {
  HeadTensors t = encode_obb_targets(sample.boxes, rig.intrinsics, cfg);
  t.seg = sample.seg;
  t.disparity_full = sample.gt_disparity;
  encode_keypoints(sample.keypoints, t, cfg);
  return t;
}

}  // namespace stereopick

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
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stereopick/eval.hpp"
#include "stereopick/geometry.hpp"
#include "stereopick/heads.hpp"
#include "stereopick/pfm.hpp"
#include "stereopick/plan.hpp"
#include "stereopick/png.hpp"

namespace stereopick {

using Json = nlohmann::json;

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Basic JSON converters
// ---------------------------------------------------------------------------

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from_json(const Json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }

inline Json to_json(const Mat3& m) {
  Json rows = Json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(Json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

inline Mat3 mat3_from_json(const Json& j) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = j.at(r).at(c);
  return m;
}

inline Json to_json(const Obb& box) {
  return Json{{"t", to_json(box.t)}, {"S", to_json(box.half_extents)}, {"R", to_json(box.R)}};
}

inline Obb obb_from_json(const Json& j) {
  Obb box;
  box.t = vec3_from_json(j.at("t"));
  box.half_extents = vec3_from_json(j.at("S"));
  box.R = mat3_from_json(j.at("R"));
  return box;
}

inline Json to_json(const Detection& det) {
  Json j = to_json(det.box);
  j["confidence"] = det.confidence;
  return j;
}

inline Detection detection_from_json(const Json& j) {
  Detection det;
  det.box = obb_from_json(j);
  det.confidence = j.at("confidence");
  return det;
}

inline Json detections_to_json(const std::vector<Detection>& dets) {
  Json arr = Json::array();
  for (const Detection& d : dets) arr.push_back(to_json(d));
  return arr;
}

inline std::vector<Detection> detections_from_json(const Json& arr) {
  std::vector<Detection> out;
  for (const Json& j : arr) out.push_back(detection_from_json(j));
  return out;
}

inline Json to_json(const KeypointSet& kps) {
  Json j = Json::object();
  for (const auto& [cls, points] : kps) {
    Json arr = Json::array();
    for (const Keypoint& p : points)
      arr.push_back(Json{{"u", p.u}, {"v", p.v}, {"score", p.score}});
    j[cls] = arr;
  }
  return j;
}

inline KeypointSet keypoints_from_json(const Json& j) {
  KeypointSet out;
  for (const auto& [cls, arr] : j.items()) {
    std::vector<Keypoint>& list = out[cls];
    for (const Json& p : arr)
      list.push_back({p.at("u"), p.at("v"), p.value("score", 1.0)});
  }
  return out;
}

inline Json to_json(const Plane& plane) {
  return Json{{"n", to_json(plane.n)}, {"d", plane.d}};
}

inline Plane plane_from_json(const Json& j) {
  Plane p;
  p.n = vec3_from_json(j.at("n"));
  p.d = j.at("d");
  return p;
}

inline Json to_json(const CameraIntrinsics& cam) {
  return Json{{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx},
              {"cy", cam.cy}, {"width", cam.width}, {"height", cam.height}};
}

inline CameraIntrinsics intrinsics_from_json(const Json& j) {
  CameraIntrinsics cam;
  cam.fx = j.at("fx");
  cam.fy = j.at("fy");
  cam.cx = j.at("cx");
  cam.cy = j.at("cy");
  cam.width = j.at("width");
  cam.height = j.at("height");
  return cam;
}

inline Json to_json(const StereoRig& rig) {
  return Json{{"intrinsics", to_json(rig.intrinsics)}, {"baseline", rig.baseline}};
}

inline StereoRig rig_from_json(const Json& j) {
  StereoRig rig;
  rig.intrinsics = intrinsics_from_json(j.at("intrinsics"));
  rig.baseline = j.at("baseline");
  return rig;
}

inline Json to_json(const GraspPlan& plan) {
  return Json{{"point", to_json(plan.point)},
              {"approach", to_json(plan.approach)},
              {"jaw_axis", to_json(plan.jaw_axis)},
              {"style", plan.style == GraspStyle::top ? "top" : "side"},
              {"width", plan.width}};
}

inline Json to_json(const FoldPlan& plan) {
  Json steps = Json::array();
  for (const FoldStep& s : plan.steps) {
    Json anchors = Json::array();
    for (const Vec3& a : s.anchors) anchors.push_back(to_json(a));
    steps.push_back(Json{{"step", s.step},
                         {"name", s.name},
                         {"pick", to_json(s.pick)},
                         {"place", to_json(s.place)},
                         {"anchors", anchors}});
  }
  return Json{{"steps", steps}};
}

inline Json to_json(const FoldStep& s) {
  Json anchors = Json::array();
  for (const Vec3& a : s.anchors) anchors.push_back(to_json(a));
  return Json{{"step", s.step}, {"name", s.name}, {"pick", to_json(s.pick)},
              {"place", to_json(s.place)}, {"anchors", anchors}};
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

inline uint32_t file_crc32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  uLong crc = crc32(0L, Z_NULL, 0);
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    crc = crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(in.gcount()));
  return static_cast<uint32_t>(crc);
}

// ---------------------------------------------------------------------------
// PR-curve plot
// ---------------------------------------------------------------------------

/// Minimal standalone SVG: axes plus the recall/precision polyline.
inline void svg_pr_curve(const PrCurve& curve, const std::string& path) {
  const int size = 400, margin = 40;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
  auto px = [&](double r) { return margin + r * (size - 2 * margin); };
  auto py = [&](double p) { return size - margin - p * (size - 2 * margin); };
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\""
      << py(0) << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0) << "\" y2=\""
      << py(1) << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << size / 2 << "\" y=\"" << size - 8 << "\" font-size=\"14\" "
      << "text-anchor=\"middle\">recall</text>\n";
  svg << "<text x=\"12\" y=\"" << size / 2 << "\" font-size=\"14\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 12 " << size / 2 << ")\">precision</text>\n";
  svg << "<text x=\"" << size - margin << "\" y=\"" << margin << "\" font-size=\"13\" "
      << "text-anchor=\"end\">AP = " << curve.ap << "</text>\n";
  if (!curve.points.empty()) {
    svg << "<polyline fill=\"none\" stroke=\"#2060c0\" stroke-width=\"2\" points=\"";
    for (const auto& [r, p] : curve.points) svg << px(r) << "," << py(p) << " ";
    svg << "\"/>\n";
  }
  svg << "</svg>\n";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << svg.str();
}

// ---------------------------------------------------------------------------
// Head-tensor directory serialization
// ---------------------------------------------------------------------------

// Channel layout on disk: seg.png (8-bit class ids), every real-valued
// channel as float PFM, plus a manifest mapping channel name -> file/dtype.

inline void save_head_tensors(const std::string& dir, const HeadTensors& t) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto path = [&](const std::string& name) { return (fs::path(dir) / name).string(); };

  write_png_gray8(path("seg.png"), t.seg);
  write_pfm(path("inst_heatmap.pfm"), t.inst_heatmap);
  write_pfm(path("z_centroid.pfm"), t.z_centroid);
  Json channels = {
      {"seg", {{"file", "seg.png"}, {"dtype", "u8"}, {"scale", 1.0}}},
      {"inst_heatmap", {{"file", "inst_heatmap.pfm"}, {"dtype", "f32"}, {"scale", 1.0}}},
      {"z_centroid", {{"file", "z_centroid.pfm"}, {"dtype", "f32"}, {"scale", 1.0}}},
  };

  auto save_plane = [&](const std::string& name, const Tensor3& tensor, int c) {
    Image<double> img(tensor.width(), tensor.height());
    for (int y = 0; y < tensor.height(); ++y)
      for (int x = 0; x < tensor.width(); ++x) img(x, y) = tensor(c, y, x);
    write_pfm(path(name), img);
  };
  for (int c = 0; c < 16; ++c) {
    char name[48];
    std::snprintf(name, sizeof(name), "vertex_offsets_%02d.pfm", c);
    save_plane(name, t.vertex_offsets, c);
    channels["vertex_offsets"]["files"].push_back(name);
  }
  channels["vertex_offsets"]["dtype"] = "f32";
  channels["vertex_offsets"]["scale"] = 1.0;
  for (int c = 0; c < 6; ++c) {
    char name[48];
    std::snprintf(name, sizeof(name), "covariance_%02d.pfm", c);
    save_plane(name, t.covariance, c);
    channels["covariance"]["files"].push_back(name);
  }
  channels["covariance"]["dtype"] = "f32";
  channels["covariance"]["scale"] = 1.0;

  Json kp = Json::array();
  for (size_t c = 0; c < t.kp_classes.size(); ++c) {
    const std::string name = "kp_" + t.kp_classes[c] + ".pfm";
    write_pfm(path(name), t.kp_heatmaps[c]);
    kp.push_back(Json{{"class", t.kp_classes[c]}, {"file", name}});
  }
  channels["keypoints"] = kp;

  write_pfm(path("disparity_full.pfm"), t.disparity_full);
  channels["disparity_full"] = {{"file", "disparity_full.pfm"}, {"dtype", "f32"}, {"scale", 1.0}};

  write_json_file(path("tensors.json"),
                  Json{{"width", t.width}, {"height", t.height}, {"channels", channels}});
}

inline HeadTensors load_head_tensors(const std::string& dir) {
  namespace fs = std::filesystem;
  auto path = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
  const Json manifest = read_json_file(path("tensors.json"));
  const int width = manifest.at("width");
  const int height = manifest.at("height");

  HeadTensors t = make_head_tensors(width, height);
  t.seg = read_png_gray8(path("seg.png"));
  {
    const Image<double> img = read_pfm(path("inst_heatmap.pfm"));
    t.inst_heatmap = img;
  }
  {
    const Image<double> img = read_pfm(path("z_centroid.pfm"));
    t.z_centroid = img;
  }
  auto load_plane = [&](const std::string& name, Tensor3& tensor, int c) {
    const Image<double> img = read_pfm(path(name));
    if (img.width() != tensor.width() || img.height() != tensor.height())
      throw IoError("channel shape mismatch in " + name);
    for (int y = 0; y < tensor.height(); ++y)
      for (int x = 0; x < tensor.width(); ++x) tensor(c, y, x) = img(x, y);
  };
  for (int c = 0; c < 16; ++c) {
    char name[48];
    std::snprintf(name, sizeof(name), "vertex_offsets_%02d.pfm", c);
    load_plane(name, t.vertex_offsets, c);
  }
  for (int c = 0; c < 6; ++c) {
    char name[48];
    std::snprintf(name, sizeof(name), "covariance_%02d.pfm", c);
    load_plane(name, t.covariance, c);
  }
  for (const Json& kp : manifest.at("channels").at("keypoints")) {
    t.kp_classes.push_back(kp.at("class"));
    t.kp_heatmaps.push_back(read_pfm(path(kp.at("file"))));
  }
  t.disparity_full = read_pfm_disparity(path("disparity_full.pfm"));
  return t;
}

}  // namespace stereopick

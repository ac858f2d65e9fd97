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
#include <optional>
#include <string>
#include <vector>

#include "stereopick/geometry.hpp"
#include "stereopick/image.hpp"
#include "stereopick/stereo.hpp"
#include "stereopick/tensor.hpp"

namespace stereopick {

enum class SegClass : uint8_t { surface = 0, object = 1, background = 2 };
inline constexpr int kSegClasses = 3;

/// The prediction-head stack. Regression channels live on the /8 grid whose
/// cell (i, j) covers pixels [8j, 8j+8) x [8i, 8i+8) with center
/// (8j + 3.5, 8i + 3.5). Covariance channel order: xx, yy, zz, xy, xz, yz.
struct HeadTensors {
  int width = 0, height = 0;            // full resolution
  ImageMask seg;                        // SegClass ids
  Image<double> inst_heatmap;           // [0, 1]
  Tensor3 vertex_offsets;               // 16 x H/8 x W/8, /8-grid pixel units
  Image<double> z_centroid;             // H/8 x W/8, meters
  Tensor3 covariance;                   // 6 x H/8 x W/8
  std::vector<std::string> kp_classes;  // parallel to kp_heatmaps
  std::vector<Image<double>> kp_heatmaps;
  DisparityMap disparity_full;          // full-resolution pixels

  int grid_width() const { return width / 8; }
  int grid_height() const { return height / 8; }
};

inline HeadTensors make_head_tensors(int width, int height,
                                     std::vector<std::string> kp_classes = {}) {
  if (width % 8 != 0 || height % 8 != 0)
    throw ShapeError("head tensors require dimensions divisible by 8");
  HeadTensors t;
  t.width = width;
  t.height = height;
  t.seg = ImageMask(width, height, static_cast<uint8_t>(SegClass::background));
  t.inst_heatmap = Image<double>(width, height, 0.0);
  t.vertex_offsets = Tensor3(16, height / 8, width / 8, 0.0);
  t.z_centroid = Image<double>(width / 8, height / 8, 0.0);
  t.covariance = Tensor3(6, height / 8, width / 8, 0.0);
  t.kp_classes = std::move(kp_classes);
  t.kp_heatmaps.assign(t.kp_classes.size(), Image<double>(width, height, 0.0));
  t.disparity_full = DisparityMap(width, height);
  return t;
}

struct Detection {
  Obb box;
  double confidence = 0.0;  // heatmap density at the detected peak
};

struct Keypoint {
  double u = 0.0, v = 0.0;
  double score = 0.0;
};
using KeypointSet = std::map<std::string, std::vector<Keypoint>>;

struct CodecConfig {
  double sigma = 8.0;                // instance heatmap spread, full-res pixels
  double supervised_threshold = 0.3; // regression channels exist above this
  double peak_threshold = 0.3;
  int nms_window = 11;               // full window width for OBB peaks
  double kp_sigma = 4.0;
  int kp_nms_radius = 10;            // Chebyshev suppression radius
  double condition_limit = 1e8;      // vertex system acceptance bound
};

// ---------------------------------------------------------------------------
// Shared grid sampling helpers
// ---------------------------------------------------------------------------

namespace detail_heads {

inline double bilinear(const Image<double>& img, double x, double y) {
  const double cx = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = std::min(static_cast<int>(std::floor(cx)), img.width() - 2 >= 0 ? img.width() - 2 : 0);
  const int y0 = std::min(static_cast<int>(std::floor(cy)), img.height() - 2 >= 0 ? img.height() - 2 : 0);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = cx - x0, fy = cy - y0;
  return (1 - fx) * (1 - fy) * img(x0, y0) + fx * (1 - fy) * img(x1, y0) +
         (1 - fx) * fy * img(x0, y1) + fx * fy * img(x1, y1);
}

struct GridSample {
  int x0, y0, x1, y1;
  double w00, w10, w01, w11;
};

/// Bilinear footprint of a full-resolution pixel position on the /8 grid.
inline GridSample grid_sample(double u, double v, int grid_w, int grid_h) {
  const double gx = std::clamp((u - 3.5) / 8.0, 0.0, static_cast<double>(grid_w - 1));
  const double gy = std::clamp((v - 3.5) / 8.0, 0.0, static_cast<double>(grid_h - 1));
  GridSample s;
  s.x0 = std::min(static_cast<int>(std::floor(gx)), std::max(grid_w - 2, 0));
  s.y0 = std::min(static_cast<int>(std::floor(gy)), std::max(grid_h - 2, 0));
  s.x1 = std::min(s.x0 + 1, grid_w - 1);
  s.y1 = std::min(s.y0 + 1, grid_h - 1);
  const double fx = gx - s.x0, fy = gy - s.y0;
  s.w00 = (1 - fx) * (1 - fy);
  s.w10 = fx * (1 - fy);
  s.w01 = (1 - fx) * fy;
  s.w11 = fx * fy;
  return s;
}

}  // namespace detail_heads

/// Mask of /8 cells whose heatmap value (sampled at the cell center) clears
/// the supervision threshold. Encode writes regression targets exactly here
/// and decode reads exactly here, so the two sides always agree.
inline ImageMask supervised_cells(const Image<double>& heatmap, double threshold) {
  const int gw = heatmap.width() / 8;
  const int gh = heatmap.height() / 8;
  ImageMask mask(gw, gh, 0);
  for (int i = 0; i < gh; ++i)
    for (int j = 0; j < gw; ++j) {
      const double v = detail_heads::bilinear(heatmap, 8.0 * j + 3.5, 8.0 * i + 3.5);
      mask(j, i) = v > threshold ? 1 : 0;
    }
  return mask;
}

// ---------------------------------------------------------------------------
// Peak detection
// ---------------------------------------------------------------------------

struct Peak {
  int u = 0, v = 0;
  double score = 0.0;
};

/// Local maxima over a square window. A pixel wins a tie only against
/// lexicographically larger (v, u) positions, so plateaus yield exactly one
/// peak at their smallest position. Results are sorted by descending score.
inline std::vector<Peak> detect_peaks(const Image<double>& heatmap, double threshold,
                                      int nms_window) {
  if (nms_window < 1 || nms_window % 2 == 0) throw Error("nms window must be odd and positive");
  const int radius = nms_window / 2;
  std::vector<Peak> peaks;
  for (int v = 0; v < heatmap.height(); ++v) {
    for (int u = 0; u < heatmap.width(); ++u) {
      const double score = heatmap(u, v);
      if (score < threshold) continue;
      bool is_peak = true;
      for (int dv = -radius; dv <= radius && is_peak; ++dv) {
        const int nv = v + dv;
        if (nv < 0 || nv >= heatmap.height()) continue;
        for (int du = -radius; du <= radius; ++du) {
          const int nu = u + du;
          if ((du == 0 && dv == 0) || nu < 0 || nu >= heatmap.width()) continue;
          const double other = heatmap(nu, nv);
          if (other > score || (other == score && (nv < v || (nv == v && nu < u)))) {
            is_peak = false;
            break;
          }
        }
      }
      if (is_peak) peaks.push_back({u, v, score});
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.v != b.v ? a.v < b.v : a.u < b.u;
  });
  return peaks;
}

// ---------------------------------------------------------------------------
// OBB encode / decode
// ---------------------------------------------------------------------------

/// Ground-truth box paired with the covariance of its surface point cloud in
/// the camera frame (about the centroid). The box is expected to be expressed
/// in its principal-axis frame, i.e. box.R == rotation_from_covariance(sigma);
/// the labeling pipeline in scene synthesis guarantees this.
struct LabeledBox {
  Obb box;
  Mat3 sigma = Mat3::Identity();
};

/// Renders instance heatmap, vertex offsets, centroid depth and covariance
/// channels for the given boxes. Objects whose centroid projects outside the
/// image (or behind the camera) are skipped; their indices are reported.
inline HeadTensors encode_obb_targets(const std::vector<LabeledBox>& boxes,
                                      const CameraIntrinsics& cam, const CodecConfig& cfg = {},
                                      std::vector<int>* skipped = nullptr) {
  HeadTensors t = make_head_tensors(cam.width, cam.height);

  struct Visible {
    int index;
    Vec2 center;
    std::array<Vec2, 8> vertices;
  };
  std::vector<Visible> visible;
  for (int i = 0; i < static_cast<int>(boxes.size()); ++i) {
    const Obb& box = boxes[i].box;
    if (!(box.t.z() > 0.0)) {
      if (skipped) skipped->push_back(i);
      continue;
    }
    const Vec2 c = cam.project(box.t);
    if (c.x() < 0 || c.x() >= cam.width || c.y() < 0 || c.y() >= cam.height) {
      if (skipped) skipped->push_back(i);
      continue;
    }
    visible.push_back({i, c, project_obb_vertices(box, cam)});
  }

  // Gaussian bumps, max-combined. Support is truncated where the density
  // falls below 1e-4.
  const double inv2s2 = 1.0 / (2.0 * sqr(cfg.sigma));
  const int reach = static_cast<int>(std::ceil(cfg.sigma * 4.5));
  for (const Visible& obj : visible) {
    const int u0 = std::max(0, static_cast<int>(std::floor(obj.center.x())) - reach);
    const int u1 = std::min(cam.width - 1, static_cast<int>(std::ceil(obj.center.x())) + reach);
    const int v0 = std::max(0, static_cast<int>(std::floor(obj.center.y())) - reach);
    const int v1 = std::min(cam.height - 1, static_cast<int>(std::ceil(obj.center.y())) + reach);
    for (int v = v0; v <= v1; ++v)
      for (int u = u0; u <= u1; ++u) {
        const double g =
            std::exp(-(sqr(u - obj.center.x()) + sqr(v - obj.center.y())) * inv2s2);
        if (g > t.inst_heatmap(u, v)) t.inst_heatmap(u, v) = g;
      }
  }

  // Regression channels on the /8 grid, owned by the locally dominant object.
  const ImageMask mask = supervised_cells(t.inst_heatmap, cfg.supervised_threshold);
  for (int i = 0; i < t.grid_height(); ++i) {
    for (int j = 0; j < t.grid_width(); ++j) {
      if (!mask(j, i)) continue;
      const double cu = 8.0 * j + 3.5;
      const double cv = 8.0 * i + 3.5;
      const Visible* owner = nullptr;
      double best = -1.0;
      for (const Visible& obj : visible) {
        const double g = std::exp(-(sqr(cu - obj.center.x()) + sqr(cv - obj.center.y())) * inv2s2);
        if (g > best) {
          best = g;
          owner = &obj;
        }
      }
      if (!owner) continue;
      const LabeledBox& lb = boxes[owner->index];
      for (int k = 0; k < 8; ++k) {
        t.vertex_offsets(2 * k, i, j) = (owner->vertices[k].x() - cu) / 8.0;
        t.vertex_offsets(2 * k + 1, i, j) = (owner->vertices[k].y() - cv) / 8.0;
      }
      t.z_centroid(j, i) = lb.box.t.z();
      t.covariance(0, i, j) = lb.sigma(0, 0);
      t.covariance(1, i, j) = lb.sigma(1, 1);
      t.covariance(2, i, j) = lb.sigma(2, 2);
      t.covariance(3, i, j) = lb.sigma(0, 1);
      t.covariance(4, i, j) = lb.sigma(0, 2);
      t.covariance(5, i, j) = lb.sigma(1, 2);
    }
  }
  return t;
}

struct DecodeDiagnostics {
  int peaks = 0;
  int dropped_degenerate = 0;
  int dropped_covariance = 0;
  int dropped_unsupervised = 0;
};

namespace detail_heads {

/// Mask-weighted bilinear read of a /8 channel; unsupervised cells do not
/// contribute. Returns nothing when the whole footprint is unsupervised.
template <typename Getter>
inline std::optional<double> read_grid(const GridSample& s, const ImageMask& mask, Getter get) {
  double num = 0.0, den = 0.0;
  auto add = [&](int x, int y, double w) {
    if (w <= 0.0 || !mask(x, y)) return;
    num += w * get(x, y);
    den += w;
  };
  add(s.x0, s.y0, s.w00);
  add(s.x1, s.y0, s.w10);
  add(s.x0, s.y1, s.w01);
  add(s.x1, s.y1, s.w11);
  if (den <= 0.0) return std::nullopt;
  return num / den;
}

}  // namespace detail_heads

/// Recovers detections from the head stack: rotation from the covariance
/// channels, vertex pixels from the offset channels, then a least-squares
/// resection with known rotation for scale and translation up to the
/// projective ambiguity, made absolute by the regressed centroid depth.
inline std::vector<Detection> decode_obbs(const HeadTensors& t, const CameraIntrinsics& cam,
                                          double threshold, const CodecConfig& cfg = {},
                                          DecodeDiagnostics* diag = nullptr) {
  const std::vector<Peak> peaks = detect_peaks(t.inst_heatmap, threshold, cfg.nms_window);
  const ImageMask mask = supervised_cells(t.inst_heatmap, cfg.supervised_threshold);
  if (diag) diag->peaks = static_cast<int>(peaks.size());

  std::vector<Detection> detections;
  for (const Peak& peak : peaks) {
    const auto sample = detail_heads::grid_sample(peak.u, peak.v, t.grid_width(), t.grid_height());
    auto read = [&](auto getter) { return detail_heads::read_grid(sample, mask, getter); };

    std::array<double, 6> cov;
    std::array<Vec2, 8> vertices;
    double z = 0.0;
    bool ok = true;
    for (int c = 0; c < 6 && ok; ++c) {
      auto v = read([&](int x, int y) { return t.covariance(c, y, x); });
      ok = v.has_value();
      if (ok) cov[c] = *v;
    }
    for (int k = 0; k < 8 && ok; ++k) {
      auto du = read([&](int x, int y) { return t.vertex_offsets(2 * k, y, x); });
      auto dv = read([&](int x, int y) { return t.vertex_offsets(2 * k + 1, y, x); });
      ok = du.has_value() && dv.has_value();
      if (ok) vertices[k] = Vec2(peak.u + 8.0 * *du, peak.v + 8.0 * *dv);
    }
    if (ok) {
      auto v = read([&](int x, int y) { return t.z_centroid(x, y); });
      ok = v.has_value() && *v > 0.0;
      if (ok) z = *v;
    }
    if (!ok) {
      if (diag) ++diag->dropped_unsupervised;
      continue;
    }

    Mat3 sigma;
    sigma << cov[0], cov[3], cov[4], cov[3], cov[1], cov[5], cov[4], cov[5], cov[2];
    Mat3 R;
    try {
      R = rotation_from_covariance(sigma);
    } catch (const InvalidCovariance&) {
      if (diag) ++diag->dropped_covariance;
      continue;
    }

    // Homogeneous system in [S; t]: each vertex contributes the two pinhole
    // alignment constraints with rotation fixed.
    Eigen::Matrix<double, 16, 6> A;
    for (int k = 0; k < 8; ++k) {
      const Mat3 B = R * corner_signs(k).asDiagonal();
      const double a = (vertices[k].x() - cam.cx) / cam.fx;
      const double b = (vertices[k].y() - cam.cy) / cam.fy;
      A.row(2 * k) << (B.row(0) - a * B.row(2)), 1.0, 0.0, -a;
      A.row(2 * k + 1) << (B.row(1) - b * B.row(2)), 0.0, 1.0, -b;
    }
    Eigen::JacobiSVD<Eigen::Matrix<double, 16, 6>> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (!(sv(4) > 0.0) || sv(0) / sv(4) > cfg.condition_limit) {
      if (diag) ++diag->dropped_degenerate;
      continue;
    }
    Eigen::Matrix<double, 6, 1> w = svd.matrixV().col(5);
    if (std::abs(w(5)) < 1e-12) {
      if (diag) ++diag->dropped_degenerate;
      continue;
    }
    if (w(5) < 0.0) w = -w;
    const double scale = z / w(5);
    const Vec3 half = scale * w.head<3>();
    if (!(half.minCoeff() > 1e-6)) {
      if (diag) ++diag->dropped_degenerate;
      continue;
    }
    Detection det;
    det.box.half_extents = half;
    det.box.t = scale * w.tail<3>();
    det.box.R = R;
    det.confidence = peak.score;
    detections.push_back(det);
  }
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
  return detections;
}

// ---------------------------------------------------------------------------
// Keypoint encode / decode
// ---------------------------------------------------------------------------

inline void encode_keypoints(const KeypointSet& keypoints, HeadTensors& t,
                             const CodecConfig& cfg = {}) {
  t.kp_classes.clear();
  t.kp_heatmaps.clear();
  const double inv2s2 = 1.0 / (2.0 * sqr(cfg.kp_sigma));
  const int reach = static_cast<int>(std::ceil(cfg.kp_sigma * 4.5));
  for (const auto& [cls, points] : keypoints) {
    Image<double> map(t.width, t.height, 0.0);
    for (const Keypoint& kp : points) {
      if (kp.u < 0 || kp.u >= t.width || kp.v < 0 || kp.v >= t.height)
        throw Error("keypoint outside image bounds");
      const int u0 = std::max(0, static_cast<int>(std::floor(kp.u)) - reach);
      const int u1 = std::min(t.width - 1, static_cast<int>(std::ceil(kp.u)) + reach);
      const int v0 = std::max(0, static_cast<int>(std::floor(kp.v)) - reach);
      const int v1 = std::min(t.height - 1, static_cast<int>(std::ceil(kp.v)) + reach);
      for (int v = v0; v <= v1; ++v)
        for (int u = u0; u <= u1; ++u) {
          const double g = std::exp(-(sqr(u - kp.u) + sqr(v - kp.v)) * inv2s2);
          if (g > map(u, v)) map(u, v) = g;
        }
    }
    t.kp_classes.push_back(cls);
    t.kp_heatmaps.push_back(std::move(map));
  }
}

inline KeypointSet decode_keypoints(const HeadTensors& t, const CodecConfig& cfg = {}) {
  KeypointSet out;
  for (size_t c = 0; c < t.kp_classes.size(); ++c) {
    const auto peaks =
        detect_peaks(t.kp_heatmaps[c], cfg.peak_threshold, 2 * cfg.kp_nms_radius + 1);
    std::vector<Keypoint>& list = out[t.kp_classes[c]];
    for (const Peak& p : peaks)
      list.push_back({static_cast<double>(p.u), static_cast<double>(p.v), p.score});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full-resolution disparity fusion
// ---------------------------------------------------------------------------

struct FuseConfig {
  int radius = 2;             // low-res taps on each side
  double sigma_spatial = 1.0; // in low-res pixels
  double sigma_range = 0.08;  // in gray levels of [0, 1] guidance
};

/// Joint bilateral upsampling of a quarter-resolution disparity map guided by
/// the left image. Invalid low-res samples carry no weight; a full-res pixel
/// whose nearest sample is invalid stays invalid.
inline DisparityMap fuse_full_res_disparity(const DisparityMap& low, const ImageRgb& left,
                                            const FuseConfig& cfg = {}) {
  if (left.width() != 4 * low.width() || left.height() != 4 * low.height())
    throw ShapeError("left image must be 4x the low-res disparity in each dimension");
  const ImageGray guide = to_gray(left);

  // Low-res guidance by 4x4 block mean, matching the feature downsampling.
  Image<double> guide_low(low.width(), low.height(), 0.0);
  for (int y = 0; y < low.height(); ++y)
    for (int x = 0; x < low.width(); ++x) {
      double sum = 0.0;
      for (int dy = 0; dy < 4; ++dy)
        for (int dx = 0; dx < 4; ++dx) sum += guide(4 * x + dx, 4 * y + dy);
      guide_low(x, y) = sum / 16.0;
    }

  DisparityMap out(left.width(), left.height());
  const double inv2ss = 1.0 / (2.0 * sqr(cfg.sigma_spatial));
  const double inv2sr = 1.0 / (2.0 * sqr(cfg.sigma_range));
  for (int y = 0; y < left.height(); ++y) {
    const double ly = (y - 1.5) / 4.0;
    const int cy = std::clamp(static_cast<int>(std::lround(ly)), 0, low.height() - 1);
    for (int x = 0; x < left.width(); ++x) {
      const double lx = (x - 1.5) / 4.0;
      const int cx = std::clamp(static_cast<int>(std::lround(lx)), 0, low.width() - 1);
      if (!low.valid(cx, cy)) continue;  // invalid samples propagate
      const double g = guide(x, y);
      double num = 0.0, den = 0.0;
      for (int j = std::max(0, cy - cfg.radius); j <= std::min(low.height() - 1, cy + cfg.radius);
           ++j)
        for (int i = std::max(0, cx - cfg.radius); i <= std::min(low.width() - 1, cx + cfg.radius);
             ++i) {
          if (!low.valid(i, j)) continue;
          const double w = std::exp(-(sqr(i - lx) + sqr(j - ly)) * inv2ss -
                                    sqr(guide_low(i, j) - g) * inv2sr);
          num += w * low.values(i, j);
          den += w;
        }
      if (den > 1e-12) out.set(x, y, num / den);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation and the loss stack
// ---------------------------------------------------------------------------

/// Raw per-pixel labels emitted by the renderer.
enum class SurfaceLabel : uint8_t {
  none = 0,
  table_top = 1,
  table_other = 2,
  object = 3,
  distractor = 4,
  floor = 5,
  shirt = 6,
};
inline constexpr uint8_t kMaxSurfaceLabel = 6;

/// Collapses renderer labels into the three room-level classes.
inline ImageMask encode_segmentation(const ImageMask& labels) {
  ImageMask out(labels.width(), labels.height());
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x) {
      const uint8_t raw = labels(x, y);
      if (raw > kMaxSurfaceLabel) throw LabelError("unknown scene label id " + std::to_string(raw));
      switch (static_cast<SurfaceLabel>(raw)) {
        case SurfaceLabel::table_top:
          out(x, y) = static_cast<uint8_t>(SegClass::surface);
          break;
        case SurfaceLabel::object:
        case SurfaceLabel::shirt:
          out(x, y) = static_cast<uint8_t>(SegClass::object);
          break;
        default:
          out(x, y) = static_cast<uint8_t>(SegClass::background);
      }
    }
  return out;
}

/// Mean softmax cross entropy of K x H x W logits against a class map.
inline double cross_entropy(const Tensor3& logits, const ImageMask& target) {
  if (logits.width() != target.width() || logits.height() != target.height())
    throw ShapeError("logits and target differ in shape");
  const int k = logits.channels();
  double sum = 0.0;
  for (int y = 0; y < target.height(); ++y)
    for (int x = 0; x < target.width(); ++x) {
      if (target(x, y) >= k) throw LabelError("class id exceeds logit channels");
      double mx = logits(0, y, x);
      for (int c = 1; c < k; ++c) mx = std::max(mx, logits(c, y, x));
      double lse = 0.0;
      for (int c = 0; c < k; ++c) lse += std::exp(logits(c, y, x) - mx);
      sum += std::log(lse) + mx - logits(target(x, y), y, x);
    }
  return sum / (static_cast<double>(target.width()) * target.height());
}

struct LossWeights {
  double seg = 1.0;
  double kp = 1.0;
  double d = 1.0;  // applies to both the full and low resolution disparity terms
  double cov = 1.0;
  double inst = 1.0;
  double vrtx = 1.0;
  double cent = 1.0;
};

struct LossBreakdown {
  double seg = 0.0, kp = 0.0, d_full = 0.0, d_small = 0.0;
  double cov = 0.0, inst = 0.0, vrtx = 0.0, cent = 0.0;
  double total = 0.0;
};

namespace detail_heads {

inline double masked_l1(const Tensor3& pred, const Tensor3& target, const ImageMask& mask) {
  double sum = 0.0;
  long count = 0;
  for (int c = 0; c < target.channels(); ++c)
    for (int y = 0; y < target.height(); ++y)
      for (int x = 0; x < target.width(); ++x) {
        if (!mask(x, y)) continue;
        sum += std::abs(pred(c, y, x) - target(c, y, x));
        ++count;
      }
  return count ? sum / count : 0.0;
}

inline double masked_l1(const Image<double>& pred, const Image<double>& target,
                        const ImageMask& mask) {
  double sum = 0.0;
  long count = 0;
  for (int y = 0; y < target.height(); ++y)
    for (int x = 0; x < target.width(); ++x) {
      if (!mask(x, y)) continue;
      sum += std::abs(pred(x, y) - target(x, y));
      ++count;
    }
  return count ? sum / count : 0.0;
}

inline double full_l1(const Image<double>& pred, const Image<double>& target) {
  double sum = 0.0;
  for (int y = 0; y < target.height(); ++y)
    for (int x = 0; x < target.width(); ++x) sum += std::abs(pred(x, y) - target(x, y));
  return sum / (static_cast<double>(target.width()) * target.height());
}

/// Pixelwise binary KL divergence of the target bump against the prediction.
/// Zero exactly when the maps agree, which keeps the self-consistency
/// property of the loss stack testable.
inline double heatmap_divergence(const Image<double>& pred, const Image<double>& target) {
  double sum = 0.0;
  constexpr double eps = 1e-12;
  for (int y = 0; y < target.height(); ++y)
    for (int x = 0; x < target.width(); ++x) {
      const double q = std::clamp(target(x, y), 0.0, 1.0);
      const double p = std::clamp(pred(x, y), eps, 1.0 - eps);
      double v = 0.0;
      if (q == pred(x, y)) {
        v = 0.0;
      } else {
        if (q > 0.0) v += q * std::log(q / p);
        if (q < 1.0) v += (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
      }
      sum += v;
    }
  return sum / (static_cast<double>(target.width()) * target.height());
}

inline double huber_term(const DisparityMap& pred, const DisparityMap& target, double delta) {
  // Loss-stack variant: an empty supervision mask contributes zero.
  try {
    return huber_disparity_loss(pred, target, delta);
  } catch (const EmptyTarget&) {
    return 0.0;
  }
}

}  // namespace detail_heads

/// Weighted training objective over every head plus the low-resolution
/// auxiliary disparity term. Zero exactly on self-encoded targets.
inline LossBreakdown total_loss(const HeadTensors& pred, const HeadTensors& target,
                                const DisparityMap& pred_low, const DisparityMap& target_low,
                                const LossWeights& w = {}, const CodecConfig& cfg = {},
                                double huber_delta = 1.0) {
  LossBreakdown out;

  // Segmentation: class maps lifted to one-hot margin logits.
  {
    constexpr double margin = 1000.0;
    Tensor3 logits(kSegClasses, pred.height, pred.width, 0.0);
    for (int y = 0; y < pred.height; ++y)
      for (int x = 0; x < pred.width; ++x) {
        if (pred.seg(x, y) >= kSegClasses) throw LabelError("segmentation class id out of range");
        logits(pred.seg(x, y), y, x) = margin;
      }
    out.seg = cross_entropy(logits, target.seg);
  }

  // Keypoints: averaged divergence across classes present in the target.
  if (!target.kp_classes.empty()) {
    if (pred.kp_classes != target.kp_classes)
      throw LabelError("keypoint class lists differ between prediction and target");
    double sum = 0.0;
    for (size_t c = 0; c < target.kp_classes.size(); ++c)
      sum += detail_heads::heatmap_divergence(pred.kp_heatmaps[c], target.kp_heatmaps[c]);
    out.kp = sum / static_cast<double>(target.kp_classes.size());
  }

  out.d_full = detail_heads::huber_term(pred.disparity_full, target.disparity_full, huber_delta);
  out.d_small = detail_heads::huber_term(pred_low, target_low, huber_delta);

  const ImageMask mask = supervised_cells(target.inst_heatmap, cfg.supervised_threshold);
  out.inst = detail_heads::full_l1(pred.inst_heatmap, target.inst_heatmap);
  out.vrtx = detail_heads::masked_l1(pred.vertex_offsets, target.vertex_offsets, mask);
  out.cent = detail_heads::masked_l1(pred.z_centroid, target.z_centroid, mask);
  out.cov = detail_heads::masked_l1(pred.covariance, target.covariance, mask);

  out.total = w.seg * out.seg + w.kp * out.kp + w.d * out.d_full + w.d * out.d_small +
              w.cov * out.cov + w.inst * out.inst + w.vrtx * out.vrtx + w.cent * out.cent;
  return out;
}

}  // namespace stereopick

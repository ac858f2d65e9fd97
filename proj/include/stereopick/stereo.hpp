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

#include "stereopick/image.hpp"
#include "stereopick/parallel.hpp"
#include "stereopick/tensor.hpp"

namespace stereopick {

// Deterministic stand-in for a learned feature extractor: census transform
// bits plus a mean-removed intensity patch, computed at quarter resolution and
// L2-normalized per pixel. The census channels are invariant to photometric
// gain, which is what makes the correlation volume robust to the lighting
// randomization downstream.
struct FeatureConfig {
  int census_radius = 3;  // 7x7 window -> 48 sign channels
  int patch_radius = 2;   // 5x5 mean-removed patch -> 25 channels
  bool normalize = true;
};

/// C x H x W descriptor stack at quarter resolution.
struct FeatureVolume {
  Tensor3 data;
  int channels() const { return data.channels(); }
  int height() const { return data.height(); }
  int width() const { return data.width(); }
};

/// Correlation volume. Slice i scores matches at a horizontal shift of
/// disparity_stride * i feature pixels; columns [0, i) of slice i are zero.
struct CostVolume {
  Tensor3 data;
  int disparity_stride = 2;
  int slices() const { return data.channels(); }
  int height() const { return data.height(); }
  int width() const { return data.width(); }
  double max_disparity() const { return static_cast<double>(disparity_stride) * (slices() - 1); }
};

inline FeatureVolume extract_features(const ImageRgb& image, const FeatureConfig& cfg = {}) {
  if (image.width() % 4 != 0 || image.height() % 4 != 0)
    throw ShapeError("image dimensions must be divisible by 4");
  const int w = image.width() / 4;
  const int h = image.height() / 4;

  // Quarter-resolution gray by 4x4 block mean.
  const ImageGray gray = to_gray(image);
  ImageGray small(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int dy = 0; dy < 4; ++dy)
        for (int dx = 0; dx < 4; ++dx) sum += gray(4 * x + dx, 4 * y + dy);
      small(x, y) = sum / 16.0;
    }

  const int cr = cfg.census_radius;
  const int pr = cfg.patch_radius;
  const int census_ch = (2 * cr + 1) * (2 * cr + 1) - 1;
  const int patch_ch = (2 * pr + 1) * (2 * pr + 1);
  FeatureVolume out;
  out.data = Tensor3(census_ch + patch_ch, h, w);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double center = small(x, y);
      int c = 0;
      // Census signs; neighbors outside the image contribute 0.
      for (int dy = -cr; dy <= cr; ++dy)
        for (int dx = -cr; dx <= cr; ++dx) {
          if (dx == 0 && dy == 0) continue;
          double v = 0.0;
          if (small.in_bounds(x + dx, y + dy)) {
            const double n = small(x + dx, y + dy);
            v = n > center ? 1.0 : (n < center ? -1.0 : 0.0);
          }
          out.data(c++, y, x) = v;
        }
      // Mean-removed patch with border replication.
      double mean = 0.0;
      for (int dy = -pr; dy <= pr; ++dy)
        for (int dx = -pr; dx <= pr; ++dx) mean += small.at_clamped(x + dx, y + dy);
      mean /= patch_ch;
      for (int dy = -pr; dy <= pr; ++dy)
        for (int dx = -pr; dx <= pr; ++dx)
          out.data(c++, y, x) = small.at_clamped(x + dx, y + dy) - mean;
    }
  }

  if (cfg.normalize) {
    const int channels = out.data.channels();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double norm2 = 0.0;
        for (int c = 0; c < channels; ++c) norm2 += sqr(out.data(c, y, x));
        if (norm2 > 1e-24) {
          const double inv = 1.0 / std::sqrt(norm2);
          for (int c = 0; c < channels; ++c) out.data(c, y, x) *= inv;
        }
      }
  }
  return out;
}

/// Shifted-dot-product volume: slice i, column j >= i holds the per-pixel dot
/// product of the left descriptor at column j with the right descriptor at
/// column j - i; columns [0, i) stay zero. Accumulation runs in ascending
/// channel order so the result is bit-identical to the reference triple loop
/// for any thread count.
inline CostVolume build_cost_volume(const FeatureVolume& left, const FeatureVolume& right,
                                    int num_slices, int disparity_stride = 2, int threads = 1) {
  if (!left.data.same_shape(right.data)) throw ShapeError("feature volumes differ in shape");
  if (num_slices < 1) throw ShapeError("cost volume needs at least one slice");
  const int h = left.height();
  const int w = left.width();
  const int channels = left.channels();

  CostVolume vol;
  vol.disparity_stride = disparity_stride;
  vol.data = Tensor3(num_slices, h, w, 0.0);

  parallel_for(h, threads, [&](int y) {
    for (int i = 0; i < num_slices; ++i) {
      double* dst = vol.data.row(i, y);
      for (int c = 0; c < channels; ++c) {
        const double* l = left.data.row(c, y);
        const double* r = right.data.row(c, y);
        for (int x = i; x < w; ++x) dst[x] += l[x] * r[x - i];
      }
    }
  });
  return vol;
}

struct AggregationConfig {
  enum class Kernel { box, gaussian };
  Kernel kernel = Kernel::box;
  int size = 5;  // odd window width; 1 disables smoothing
  double sigma = 1.0;
};

/// Per-slice spatial smoothing with masked renormalization: the structural
/// zero region of slice i (columns < i) neither contributes weight nor gets
/// overwritten.
inline CostVolume aggregate_cost(const CostVolume& vol, const AggregationConfig& cfg = {},
                                 int threads = 1) {
  if (cfg.size <= 1) return vol;
  if (cfg.size % 2 == 0) throw ShapeError("aggregation window must be odd");
  const int radius = cfg.size / 2;
  std::vector<double> kernel(cfg.size, 1.0);
  if (cfg.kernel == AggregationConfig::Kernel::gaussian)
    for (int k = -radius; k <= radius; ++k) kernel[k + radius] = std::exp(-0.5 * sqr(k / cfg.sigma));

  const int h = vol.height();
  const int w = vol.width();
  CostVolume out;
  out.disparity_stride = vol.disparity_stride;
  out.data = Tensor3(vol.slices(), h, w, 0.0);

  parallel_for(vol.slices(), threads, [&](int i) {
    const int first_col = std::min(i, w);
    // Horizontal pass over the valid span, then vertical pass; numerator and
    // weight are filtered identically.
    Image<double> num(w, h, 0.0), den(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
      const double* src = vol.data.row(i, y);
      for (int x = first_col; x < w; ++x) {
        double n = 0.0, d = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int xx = x + k;
          if (xx < first_col || xx >= w) continue;
          n += kernel[k + radius] * src[xx];
          d += kernel[k + radius];
        }
        num(x, y) = n;
        den(x, y) = d;
      }
    }
    for (int y = 0; y < h; ++y) {
      double* dst = out.data.row(i, y);
      for (int x = first_col; x < w; ++x) {
        double n = 0.0, d = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int yy = y + k;
          if (yy < 0 || yy >= h) continue;
          n += kernel[k + radius] * num(x, yy);
          d += kernel[k + radius] * den(x, yy);
        }
        dst[x] = d > 0.0 ? n / d : 0.0;
      }
    }
  });
  return out;
}

// Volume entries are similarity scores, so the "soft argmin over cost" is a
// softmax-weighted expectation over scores: sharper temperature approaches the
// best-match slice.
struct RatioTest {
  bool enabled = true;
  double min_ratio = 1.2;  // best / second-best, neighbors of the best excluded
};

/// Expected disparity per pixel, in feature-pixel units at the volume's
/// stride. Pixels failing the uniqueness ratio test are flagged invalid but
/// still carry their expectation value.
inline DisparityMap soft_argmin(const CostVolume& vol, double temperature = 1.0,
                                const RatioTest& ratio = {}, int threads = 1) {
  if (!(temperature > 0.0)) throw Error("soft_argmin: temperature must be positive");
  const int h = vol.height();
  const int w = vol.width();
  const int n = vol.slices();
  DisparityMap map(w, h);

  parallel_for(h, threads, [&](int y) {
    std::vector<double> scores(n);
    for (int x = 0; x < w; ++x) {
      int best_i = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        scores[i] = vol.data(i, y, x);
        if (scores[i] > best) {
          best = scores[i];
          best_i = i;
        }
      }
      double weight_sum = 0.0, expectation = 0.0;
      for (int i = 0; i < n; ++i) {
        const double wgt = std::exp((scores[i] - best) / temperature);
        weight_sum += wgt;
        expectation += wgt * vol.disparity_stride * i;
      }
      map.values(x, y) = expectation / weight_sum;

      bool ok = true;
      if (ratio.enabled) {
        double second = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
          if (std::abs(i - best_i) <= 1) continue;
          second = std::max(second, scores[i]);
        }
        if (best <= 0.0)
          ok = false;
        else if (second > 0.0 && best / second < ratio.min_ratio)
          ok = false;
      }
      map.valid(x, y) = ok ? 1 : 0;
    }
  });
  return map;
}

inline double huber(double e, double delta) {
  const double a = std::abs(e);
  return a <= delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
}

inline double huber_derivative(double e, double delta) {
  if (std::abs(e) <= delta) return e;
  return e > 0.0 ? delta : -delta;
}

/// Mean Huber loss over pixels with a valid target. Validity of the
/// prediction is ignored; the target mask is the supervision mask.
inline double huber_disparity_loss(const DisparityMap& pred, const DisparityMap& target,
                                   double delta = 1.0) {
  if (!pred.values.same_shape(target.values)) throw ShapeError("disparity maps differ in shape");
  if (!(delta > 0.0)) throw Error("huber: delta must be positive");
  double sum = 0.0;
  long count = 0;
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x) {
      if (!target.valid(x, y)) continue;
      sum += huber(pred.values(x, y) - target.values(x, y), delta);
      ++count;
    }
  if (count == 0) throw EmptyTarget("no valid target pixels");
  return sum / static_cast<double>(count);
}

/// Block-median downsampling; invalid pixels are ignored, all-invalid blocks
/// stay invalid. Values keep their full-resolution pixel units. Even-sized
/// samples resolve to the lower median for determinism.
inline DisparityMap downsample_disparity(const DisparityMap& full, int factor) {
  if (factor < 1 || full.width() % factor != 0 || full.height() % factor != 0)
    throw ShapeError("downsample factor must divide both dimensions");
  if (factor == 1) return full;
  DisparityMap low(full.width() / factor, full.height() / factor);
  std::vector<double> block;
  block.reserve(static_cast<size_t>(factor) * factor);
  for (int y = 0; y < low.height(); ++y)
    for (int x = 0; x < low.width(); ++x) {
      block.clear();
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx)
          if (full.valid(x * factor + dx, y * factor + dy))
            block.push_back(full.values(x * factor + dx, y * factor + dy));
      if (block.empty()) continue;
      const size_t mid = (block.size() - 1) / 2;
      std::nth_element(block.begin(), block.begin() + mid, block.end());
      low.set(x, y, block[mid]);
    }
  return low;
}

/// Analytic gradient of huber(soft_argmin(vol), target) with respect to every
/// volume entry. The forward pass it differentiates is soft_argmin with the
/// ratio test disabled, averaged over valid target pixels.
inline Tensor3 loss_gradient(const CostVolume& vol, const DisparityMap& target, double temperature,
                             double delta) {
  if (vol.width() != target.width() || vol.height() != target.height())
    throw ShapeError("target shape does not match cost volume");
  if (!(temperature > 0.0)) throw Error("loss_gradient: temperature must be positive");
  const int n = vol.slices();
  Tensor3 grad(n, vol.height(), vol.width(), 0.0);

  long count = 0;
  for (int y = 0; y < target.height(); ++y)
    for (int x = 0; x < target.width(); ++x) count += target.valid(x, y) ? 1 : 0;
  if (count == 0) return grad;

  std::vector<double> weights(n);
  for (int y = 0; y < vol.height(); ++y)
    for (int x = 0; x < vol.width(); ++x) {
      if (!target.valid(x, y)) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) best = std::max(best, vol.data(i, y, x));
      double weight_sum = 0.0, expectation = 0.0;
      for (int i = 0; i < n; ++i) {
        weights[i] = std::exp((vol.data(i, y, x) - best) / temperature);
        weight_sum += weights[i];
        expectation += weights[i] * vol.disparity_stride * i;
      }
      const double pred = expectation / weight_sum;
      const double g = huber_derivative(pred - target.values(x, y), delta) / count;
      for (int i = 0; i < n; ++i) {
        const double wi = weights[i] / weight_sum;
        grad(i, y, x) = g * wi * (vol.disparity_stride * i - pred) / temperature;
      }
    }
  return grad;
}

/// Mask of pixels with enough local contrast to be matchable: the 5x5
/// standard deviation of the quarter-resolution gray image must clear
/// `min_std`. Upsampled back to full resolution.
inline ImageMask textured_mask(const ImageRgb& left, double min_std = 0.02) {
  if (left.width() % 4 != 0 || left.height() % 4 != 0)
    throw ShapeError("image dimensions must be divisible by 4");
  const ImageGray gray = to_gray(left);
  const int w = left.width() / 4, h = left.height() / 4;
  ImageGray small(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int dy = 0; dy < 4; ++dy)
        for (int dx = 0; dx < 4; ++dx) sum += gray(4 * x + dx, 4 * y + dy);
      small(x, y) = sum / 16.0;
    }
  ImageMask mask(left.width(), left.height(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double m = 0.0, m2 = 0.0;
      int n = 0;
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          const double v = small.at_clamped(x + dx, y + dy);
          m += v;
          m2 += v * v;
          ++n;
        }
      m /= n;
      if (std::sqrt(std::max(0.0, m2 / n - m * m)) > min_std)
        for (int dy = 0; dy < 4; ++dy)
          for (int dx = 0; dx < 4; ++dx) mask(4 * x + dx, 4 * y + dy) = 1;
    }
  return mask;
}

/// Left-referenced occlusion detection from geometric disparity alone: a
/// pixel is occluded when another pixel in its row lands on the same right
/// image column with strictly larger disparity.
inline ImageMask occlusion_mask(const DisparityMap& disp) {
  ImageMask occluded(disp.width(), disp.height(), 0);
  std::vector<double> claim(disp.width());
  std::vector<int> owner(disp.width());
  for (int y = 0; y < disp.height(); ++y) {
    std::fill(claim.begin(), claim.end(), -1.0);
    std::fill(owner.begin(), owner.end(), -1);
    for (int x = 0; x < disp.width(); ++x) {
      if (!disp.valid(x, y)) continue;
      const int rx = static_cast<int>(std::lround(x - disp.values(x, y)));
      if (rx < 0 || rx >= disp.width()) continue;
      if (disp.values(x, y) > claim[rx]) {
        if (owner[rx] >= 0) occluded(owner[rx], y) = 1;
        claim[rx] = disp.values(x, y);
        owner[rx] = x;
      } else {
        occluded(x, y) = 1;
      }
    }
  }
  return occluded;
}

}  // namespace stereopick

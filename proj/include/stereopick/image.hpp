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
#include <array>
#include <cassert>
#include <cstdint>
#include <vector>

#include "stereopick/common.hpp"

namespace stereopick {

/// Dense row-major 2D grid. (x, y) indexing with x = column, y = row.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  T& at(int x, int y) {
    assert(in_bounds(x, y));
    return data_[static_cast<size_t>(y) * width_ + x];
  }
  const T& at(int x, int y) const {
    assert(in_bounds(x, y));
    return data_[static_cast<size_t>(y) * width_ + x];
  }
  T& operator()(int x, int y) { return at(x, y); }
  const T& operator()(int x, int y) const { return at(x, y); }

  bool in_bounds(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }

  /// Value at clamped coordinates (border replication).
  const T& at_clamped(int x, int y) const {
    return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T* row(int y) { return data_.data() + static_cast<size_t>(y) * width_; }
  const T* row(int y) const { return data_.data() + static_cast<size_t>(y) * width_; }

  template <typename U>
  bool same_shape(const Image<U>& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  bool operator==(const Image& o) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Rgb = std::array<float, 3>;
using ImageRgb = Image<Rgb>;
using ImageGray = Image<double>;
using ImageMask = Image<uint8_t>;

/// Luma conversion used everywhere a single-channel guidance/feature image is needed.
inline ImageGray to_gray(const ImageRgb& img) {
  ImageGray out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const Rgb& c = img(x, y);
      out(x, y) = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
    }
  return out;
}

/// Disparity image plus validity mask. Units (feature-level or full-resolution
/// pixels) are a property of the producing call, documented at each site.
struct DisparityMap {
  Image<double> values;
  ImageMask valid;  // nonzero = valid

  DisparityMap() = default;
  DisparityMap(int width, int height, double fill = 0.0, bool valid_fill = false)
      : values(width, height, fill), valid(width, height, valid_fill ? 1 : 0) {}

  int width() const { return values.width(); }
  int height() const { return values.height(); }

  bool is_valid(int x, int y) const { return valid(x, y) != 0; }
  void set(int x, int y, double v) {
    values(x, y) = v;
    valid(x, y) = 1;
  }
  void invalidate(int x, int y) {
    values(x, y) = 0.0;
    valid(x, y) = 0;
  }

  int count_valid() const {
    int n = 0;
    for (int y = 0; y < height(); ++y)
      for (int x = 0; x < width(); ++x) n += valid(x, y) ? 1 : 0;
    return n;
  }

  /// Same validity, values multiplied by `factor` (unit conversion helper).
  DisparityMap scaled(double factor) const {
    DisparityMap out = *this;
    for (int y = 0; y < height(); ++y)
      for (int x = 0; x < width(); ++x)
        if (out.valid(x, y)) out.values(x, y) *= factor;
    return out;
  }
};

}  // namespace stereopick

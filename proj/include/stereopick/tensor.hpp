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

#include <cassert>
#include <cstddef>
#include <vector>

namespace stereopick {

/// Dense C x H x W tensor, channel-major, row-major within a channel.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int channels, int height, int width, double fill = 0.0)
      : c_(channels),
        h_(height),
        w_(width),
        data_(static_cast<size_t>(channels) * height * width, fill) {}

  int channels() const { return c_; }
  int height() const { return h_; }
  int width() const { return w_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  double& at(int c, int y, int x) {
    assert(c >= 0 && c < c_ && y >= 0 && y < h_ && x >= 0 && x < w_);
    return data_[(static_cast<size_t>(c) * h_ + y) * w_ + x];
  }
  double at(int c, int y, int x) const {
    assert(c >= 0 && c < c_ && y >= 0 && y < h_ && x >= 0 && x < w_);
    return data_[(static_cast<size_t>(c) * h_ + y) * w_ + x];
  }
  double& operator()(int c, int y, int x) { return at(c, y, x); }
  double operator()(int c, int y, int x) const { return at(c, y, x); }

  double* slice(int c) { return data_.data() + static_cast<size_t>(c) * h_ * w_; }
  const double* slice(int c) const { return data_.data() + static_cast<size_t>(c) * h_ * w_; }
  double* row(int c, int y) { return slice(c) + static_cast<size_t>(y) * w_; }
  const double* row(int c, int y) const { return slice(c) + static_cast<size_t>(y) * w_; }

  bool same_shape(const Tensor3& o) const { return c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }
  bool operator==(const Tensor3& o) const = default;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

 private:
  int c_ = 0, h_ = 0, w_ = 0;
  std::vector<double> data_;
};

}  // namespace stereopick

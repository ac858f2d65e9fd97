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

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "stereopick/image.hpp"

namespace stereopick {

// Grayscale PFM: "Pf", bottom-up row order, little-endian float32, scale -1.0.
// Invalid pixels are stored as 0.0 when writing a DisparityMap; readers treat
// values <= 0 or non-finite as invalid.

inline void write_pfm(const std::string& path, const Image<double>& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "Pf\n" << img.width() << " " << img.height() << "\n-1.000000\n";
  std::vector<float> row(img.width());
  for (int y = img.height() - 1; y >= 0; --y) {
    for (int x = 0; x < img.width(); ++x) row[x] = static_cast<float>(img(x, y));
    out.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
  }
  if (!out) throw IoError("write failed: " + path);
}

inline void write_pfm(const std::string& path, const DisparityMap& map) {
  Image<double> tmp(map.width(), map.height(), 0.0);
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x)
      if (map.valid(x, y)) tmp(x, y) = map.values(x, y);
  write_pfm(path, tmp);
}

inline Image<double> read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string magic;
  in >> magic;
  if (magic != "Pf") throw IoError("not a grayscale PFM: " + path);
  int w = 0, h = 0;
  double scale = 0.0;
  in >> w >> h >> scale;
  if (w <= 0 || h <= 0) throw IoError("bad PFM dimensions: " + path);
  in.get();  // single whitespace after the header
  const bool little_endian = scale < 0.0;
  Image<double> img(w, h);
  std::vector<float> row(w);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
    if (!in) throw IoError("truncated PFM: " + path);
    for (int x = 0; x < w; ++x) {
      float v = row[x];
      if (!little_endian) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        bits = __builtin_bswap32(bits);
        std::memcpy(&v, &bits, 4);
      }
      img(x, y) = v;
    }
  }
  return img;
}

inline DisparityMap read_pfm_disparity(const std::string& path) {
  const Image<double> raw = read_pfm(path);
  DisparityMap map(raw.width(), raw.height());
  for (int y = 0; y < raw.height(); ++y)
    for (int x = 0; x < raw.width(); ++x) {
      const double v = raw(x, y);
      if (v > 0.0 && std::isfinite(v)) map.set(x, y, v);
    }
  return map;
}

}  // namespace stereopick

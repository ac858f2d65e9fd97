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

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "stereopick/image.hpp"

namespace stereopick {

// Minimal PNG subset used by the dataset and disparity writers: 8-bit gray,
// 16-bit gray and 8-bit RGB, non-interlaced, filter "none" on every row,
// fixed zlib level. Keeping the encoder in-tree pins the output bytes, which
// the dataset reproducibility contract depends on.

struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 or 3
  int bit_depth = 0;  // 8 or 16
  std::vector<uint16_t> data;  // row-major, channel-interleaved

  uint16_t at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
};

namespace detail_png {

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

inline void write_chunk(std::ofstream& out, const char type[4], const uint8_t* payload,
                        size_t len) {
  std::vector<uint8_t> head;
  put_u32(head, static_cast<uint32_t>(len));
  out.write(reinterpret_cast<const char*>(head.data()), 4);
  out.write(type, 4);
  if (len) out.write(reinterpret_cast<const char*>(payload), static_cast<std::streamsize>(len));
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (len) crc = crc32(crc, payload, static_cast<uInt>(len));
  std::vector<uint8_t> tail;
  put_u32(tail, static_cast<uint32_t>(crc));
  out.write(reinterpret_cast<const char*>(tail.data()), 4);
}

inline void write_png(const std::string& path, int width, int height, int channels, int bit_depth,
                      const std::vector<uint8_t>& raw_rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  static const uint8_t signature[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.write(reinterpret_cast<const char*>(signature), 8);

  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(width));
  put_u32(ihdr, static_cast<uint32_t>(height));
  ihdr.push_back(static_cast<uint8_t>(bit_depth));
  ihdr.push_back(channels == 3 ? 2 : 0);  // color type
  ihdr.push_back(0);                      // compression
  ihdr.push_back(0);                      // filter method
  ihdr.push_back(0);                      // no interlace
  write_chunk(out, "IHDR", ihdr.data(), ihdr.size());

  uLongf bound = compressBound(static_cast<uLong>(raw_rows.size()));
  std::vector<uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw_rows.data(), static_cast<uLong>(raw_rows.size()),
                6) != Z_OK)
    throw IoError("zlib compression failed: " + path);
  compressed.resize(bound);
  write_chunk(out, "IDAT", compressed.data(), compressed.size());
  write_chunk(out, "IEND", nullptr, 0);
  if (!out) throw IoError("write failed: " + path);
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace detail_png

inline void write_png_rgb8(const std::string& path, const ImageRgb& img) {
  const int w = img.width(), h = img.height();
  std::vector<uint8_t> rows;
  rows.reserve(static_cast<size_t>(h) * (1 + 3 * w));
  for (int y = 0; y < h; ++y) {
    rows.push_back(0);  // filter: none
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img(x, y)[c], 0.0f, 1.0f);
        rows.push_back(static_cast<uint8_t>(std::lround(v * 255.0f)));
      }
  }
  detail_png::write_png(path, w, h, 3, 8, rows);
}

inline void write_png_gray8(const std::string& path, const Image<uint8_t>& img) {
  const int w = img.width(), h = img.height();
  std::vector<uint8_t> rows;
  rows.reserve(static_cast<size_t>(h) * (1 + w));
  for (int y = 0; y < h; ++y) {
    rows.push_back(0);
    for (int x = 0; x < w; ++x) rows.push_back(img(x, y));
  }
  detail_png::write_png(path, w, h, 1, 8, rows);
}

inline void write_png_gray16(const std::string& path, const Image<uint16_t>& img) {
  const int w = img.width(), h = img.height();
  std::vector<uint8_t> rows;
  rows.reserve(static_cast<size_t>(h) * (1 + 2 * w));
  for (int y = 0; y < h; ++y) {
    rows.push_back(0);
    for (int x = 0; x < w; ++x) {
      rows.push_back(static_cast<uint8_t>(img(x, y) >> 8));  // big-endian samples
      rows.push_back(static_cast<uint8_t>(img(x, y) & 0xff));
    }
  }
  detail_png::write_png(path, w, h, 1, 16, rows);
}

/// KITTI-style disparity PNG: value = round(disparity * 256), 0 means invalid.
inline void write_png_disparity16(const std::string& path, const DisparityMap& map) {
  Image<uint16_t> img(map.width(), map.height(), 0);
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x)
      if (map.valid(x, y)) {
        const long v = std::lround(map.values(x, y) * 256.0);
        img(x, y) = static_cast<uint16_t>(std::clamp<long>(v, 1, 65535));
      }
  write_png_gray16(path, img);
}

inline PngImage read_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<uint8_t> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  static const uint8_t signature[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (file.size() < 8 || std::memcmp(file.data(), signature, 8) != 0)
    throw IoError("not a PNG: " + path);

  auto read_u32 = [&](size_t off) {
    return (static_cast<uint32_t>(file[off]) << 24) | (static_cast<uint32_t>(file[off + 1]) << 16) |
           (static_cast<uint32_t>(file[off + 2]) << 8) | static_cast<uint32_t>(file[off + 3]);
  };

  PngImage img;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  int color_type = -1;
  while (pos + 8 <= file.size()) {
    const uint32_t len = read_u32(pos);
    const std::string type(reinterpret_cast<const char*>(&file[pos + 4]), 4);
    const size_t payload = pos + 8;
    if (payload + len + 4 > file.size()) throw IoError("truncated PNG: " + path);
    if (type == "IHDR") {
      img.width = static_cast<int>(read_u32(payload));
      img.height = static_cast<int>(read_u32(payload + 4));
      img.bit_depth = file[payload + 8];
      color_type = file[payload + 9];
      if (file[payload + 12] != 0) throw IoError("interlaced PNG unsupported: " + path);
      if (color_type == 0)
        img.channels = 1;
      else if (color_type == 2)
        img.channels = 3;
      else
        throw IoError("unsupported PNG color type: " + path);
      if (img.bit_depth != 8 && img.bit_depth != 16)
        throw IoError("unsupported PNG bit depth: " + path);
    } else if (type == "IDAT") {
      idat.insert(idat.end(), file.begin() + payload, file.begin() + payload + len);
    } else if (type == "IEND") {
      break;
    }
    pos = payload + len + 4;
  }
  if (img.width <= 0 || img.height <= 0 || idat.empty()) throw IoError("malformed PNG: " + path);

  const int bytes_per_sample = img.bit_depth / 8;
  const size_t stride = static_cast<size_t>(img.width) * img.channels * bytes_per_sample;
  std::vector<uint8_t> raw(static_cast<size_t>(img.height) * (stride + 1));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw IoError("PNG inflate failed: " + path);

  // Undo per-row filters.
  const int bpp = img.channels * bytes_per_sample;
  std::vector<uint8_t> prev(stride, 0);
  std::vector<uint8_t> cur(stride);
  img.data.resize(static_cast<size_t>(img.width) * img.height * img.channels);
  for (int y = 0; y < img.height; ++y) {
    const uint8_t* src = raw.data() + static_cast<size_t>(y) * (stride + 1);
    const int filter = src[0];
    for (size_t i = 0; i < stride; ++i) {
      const int x = src[1 + i];
      const int a = i >= static_cast<size_t>(bpp) ? cur[i - bpp] : 0;
      const int b = prev[i];
      const int c = i >= static_cast<size_t>(bpp) ? prev[i - bpp] : 0;
      int v = 0;
      switch (filter) {
        case 0: v = x; break;
        case 1: v = x + a; break;
        case 2: v = x + b; break;
        case 3: v = x + (a + b) / 2; break;
        case 4: v = x + detail_png::paeth(a, b, c); break;
        default: throw IoError("bad PNG filter byte: " + path);
      }
      cur[i] = static_cast<uint8_t>(v & 0xff);
    }
    for (int x = 0; x < img.width * img.channels; ++x) {
      uint16_t sample;
      if (bytes_per_sample == 1)
        sample = cur[x];
      else
        sample = static_cast<uint16_t>((cur[2 * x] << 8) | cur[2 * x + 1]);
      img.data[static_cast<size_t>(y) * img.width * img.channels + x] = sample;
    }
    std::swap(prev, cur);
  }
  return img;
}

inline ImageRgb read_png_rgb(const std::string& path) {
  const PngImage raw = read_png(path);
  if (raw.channels != 3 || raw.bit_depth != 8) throw IoError("expected 8-bit RGB PNG: " + path);
  ImageRgb img(raw.width, raw.height);
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x)
      img(x, y) = {raw.at(x, y, 0) / 255.0f, raw.at(x, y, 1) / 255.0f, raw.at(x, y, 2) / 255.0f};
  return img;
}

inline Image<uint8_t> read_png_gray8(const std::string& path) {
  const PngImage raw = read_png(path);
  if (raw.channels != 1 || raw.bit_depth != 8) throw IoError("expected 8-bit gray PNG: " + path);
  Image<uint8_t> img(raw.width, raw.height);
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x) img(x, y) = static_cast<uint8_t>(raw.at(x, y));
  return img;
}

inline DisparityMap read_png_disparity16(const std::string& path) {
  const PngImage raw = read_png(path);
  if (raw.channels != 1 || raw.bit_depth != 16)
    throw IoError("expected 16-bit gray PNG: " + path);
  DisparityMap map(raw.width, raw.height);
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x)
      if (raw.at(x, y) != 0) map.set(x, y, raw.at(x, y) / 256.0);
  return map;
}

}  // namespace stereopick

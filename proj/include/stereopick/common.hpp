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

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace stereopick {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};
struct DegenerateDisparity : Error {
  using Error::Error;
};
struct BehindCamera : Error {
  using Error::Error;
};
struct InvalidCovariance : Error {
  using Error::Error;
};
struct EmptyTarget : Error {
  using Error::Error;
};
struct LabelError : Error {
  using Error::Error;
};
struct PlacementError : Error {
  using Error::Error;
};
struct PlaneFitError : Error {
  using Error::Error;
};
struct NoIntersection : Error {
  using Error::Error;
};
struct Ungraspable : Error {
  using Error::Error;
};
struct UndefinedMetric : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

/// Raised when a fold step cannot be planned; carries the missing classes.
struct IncompleteState : Error {
  std::vector<std::string> missing;
  explicit IncompleteState(std::vector<std::string> missing_classes)
      : Error(make_message(missing_classes)), missing(std::move(missing_classes)) {}

 private:
  static std::string make_message(const std::vector<std::string>& m) {
    std::string s = "incomplete fold state, missing keypoint classes:";
    for (const auto& c : m) s += " " + c;
    return s;
  }
};

inline double sqr(double x) { return x * x; }

}  // namespace stereopick

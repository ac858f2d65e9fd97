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

#include "stereopick/common.hpp"
#include "stereopick/config.hpp"
#include "stereopick/dataset.hpp"
#include "stereopick/eval.hpp"
#include "stereopick/geometry.hpp"
#include "stereopick/heads.hpp"
#include "stereopick/image.hpp"
#include "stereopick/mesh.hpp"
#include "stereopick/pfm.hpp"
#include "stereopick/plan.hpp"
#include "stereopick/png.hpp"
#include "stereopick/render.hpp"
#include "stereopick/rng.hpp"
#include "stereopick/serial.hpp"
#include "stereopick/stereo.hpp"
#include "stereopick/synth.hpp"
#include "stereopick/tensor.hpp"

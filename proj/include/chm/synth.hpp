// Copyright 2026 The CHM Authors
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

// Deterministic synthetic datasets used for desk-scale experiments.

#include <cstdint>
#include <string>
#include <vector>

#include "chm/features.hpp"
#include "chm/model.hpp"

namespace chm {

enum class SynthKind { Textures, Bars, XorBlobs };

SynthKind parse_synth_kind(const std::string& name);
std::string to_string(SynthKind kind);

/// Noise textures whose foreground adds a smooth random field to the same iid
/// noise; the difference only shows over windows spanning several 8-pixel
/// cells. `classes` is 2 or 3 (class k scales the field by k).
std::vector<TrainingImage> synth_textures(int count, int size, std::uint64_t seed, int classes = 2);

/// Thick bars drawn as a thin bright outline around an interior that has the
/// same noise statistics as the background. Labels mark the whole bar.
std::vector<TrainingImage> synth_bars(int count, int size, std::uint64_t seed);

/// Four Gaussian clusters at (+-1, +-1); label 1 where the coordinate signs agree.
struct PointSet {
  FeatureMatrix points;
  std::vector<std::uint8_t> labels;
};
PointSet synth_xor_blobs(int count, std::uint64_t seed);

}  // namespace chm

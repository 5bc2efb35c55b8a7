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

// Per-pixel feature extraction. Appearance features come from the input image
// at the resolution of the level being processed; context features are sparse
// stencil samples of probability maps produced by earlier classifiers.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "chm/core.hpp"

namespace chm {

struct StencilOffset {
  int row = 0;
  int col = 0;
  friend bool operator==(const StencilOffset&, const StencilOffset&) = default;
};

inline constexpr std::size_t kStencilSize = 57;
inline constexpr int kStencilRadius = 7;

using StencilOffsets = std::array<StencilOffset, kStencilSize>;

/// Fixed 57-sample layout inside a 15x15 window: the full 5x5 core, every
/// second cell of the radius-3 ring, every fourth cell of the radius-5 ring
/// and ten evenly spaced cells of the radius-7 ring. Rings are walked
/// clockwise from their top-left corner.
const StencilOffsets& stencil_layout();

/// Dense per-pixel feature rows (row index = pixel index, row-major).
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> values, std::vector<std::string> labels);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const float> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  float at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  std::span<const float> values() const { return values_; }
  const std::vector<std::string>& labels() const { return labels_; }

  /// Column-wise concatenation; all parts must have equal row counts.
  static FeatureMatrix hconcat(std::span<const FeatureMatrix* const> parts);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> values_;
  std::vector<std::string> labels_;
};

/// Number of appearance columns the registry declares for `channels` input
/// planes; extract_appearance always returns exactly this many.
std::size_t appearance_width(const FeatureSelection& selection, int channels);
std::vector<std::string> appearance_labels(const FeatureSelection& selection, int channels);

FeatureMatrix extract_appearance(const ImagePlane& image, const FeatureSelection& selection);

/// 57 stencil samples per map, edge-replicated at the border.
FeatureMatrix extract_context(std::span<const ProbabilityMap> maps);
FeatureMatrix extract_context(std::span<const ProbabilityMap* const> maps);

// Individual blocks, exposed for testing. Each returns width*height rows.
namespace blocks {

inline constexpr std::array<int, 3> kHaarSizes{4, 8, 16};
inline constexpr int kOrientationBins = 9;
inline constexpr int kGaborRadius = 7;
inline constexpr std::array<double, 2> kGaborWavelengths{4.0, 8.0};
inline constexpr int kGaborOrientations = 4;

/// Haar responses of one plane: for each window size, horizontal two-box,
/// vertical two-box and checkerboard, normalized by window area.
std::vector<std::array<double, 9>> haar(const Plane& plane);
/// Normalized orientation histogram of each pixel's cell.
std::vector<std::array<double, kOrientationBins>> hog(const Plane& plane, int cellSize);
std::vector<std::array<double, 8>> gabor(const Plane& plane);
/// 1 on Canny edge pixels, 0 elsewhere.
std::vector<double> canny(const Plane& plane);
std::vector<std::array<double, 5>> position(Size size);

}  // namespace blocks

}  // namespace chm

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

// Resolution operators: 2x2 averaging (downsample), 2x2 max (maxpool) and
// pixel duplication (upsample), each applied l times, plus bilinear resize.
// Odd dimensions are handled by replicating the last row/column before each
// halving step.

#include <optional>

#include "chm/core.hpp"

namespace chm {

Plane downsample(const Plane& grid, int times);
Plane maxpool(const Plane& grid, int times);
/// Each pixel becomes a 2x2 block, `times` times. With `target`, the result is
/// cropped to it; a target larger than the produced grid is an error.
Plane upsample(const Plane& grid, int times, std::optional<Size> target = std::nullopt);

/// Bilinear interpolation with half-pixel-centred sampling. Output dimensions
/// are round(scale * dims), at least 1.
Plane resize_bilinear(const Plane& grid, double scale);
Plane resize_bilinear(const Plane& grid, Size target);

ImagePlane downsample(const ImagePlane& image, int times);
ImagePlane resize_bilinear(const ImagePlane& image, double scale);

ProbabilityMap downsample(const ProbabilityMap& map, int times);
ProbabilityMap maxpool(const ProbabilityMap& map, int times);
ProbabilityMap upsample(const ProbabilityMap& map, int times, std::optional<Size> target = std::nullopt);
ProbabilityMap resize_bilinear(const ProbabilityMap& map, double scale);
ProbabilityMap resize_bilinear(const ProbabilityMap& map, Size target);

/// Levels 1..L of the averaging pyramid.
Pyramid<ImagePlane> image_pyramid(const ImagePlane& image, int levels);

}  // namespace chm

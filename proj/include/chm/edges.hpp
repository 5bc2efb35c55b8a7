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

// Boundary post-processing: averaging predictions over a small scale set and
// thinning soft boundary maps by non-maximal suppression.

#include <functional>

#include "chm/core.hpp"
#include "chm/model.hpp"

namespace chm {

using MapPredictor = std::function<ProbabilityMap(const ImagePlane&)>;

inline constexpr double kMultiscaleFactors[] = {0.5, 1.0, 2.0};

/// Runs `predict` on the image resized by 0.5, 1 and 2, resizes each result
/// back to the input size and averages them.
ProbabilityMap multiscale_infer(const MapPredictor& predict, const ImagePlane& image);
/// Same with the final-stage output of a binary model.
ProbabilityMap multiscale_infer(const ChmModel& model, const ImagePlane& image);

/// Keeps a pixel only if it is a maximum along the ridge normal: strictly
/// above the forward neighbour, at least the backward one. The normal comes
/// from the Hessian of the map smoothed with a sigma-2 Gaussian; neighbours
/// are bilinear samples at +-1 px. Survivors keep their value, others are 0.
ProbabilityMap nms_thin(const ProbabilityMap& edgeMap);

}  // namespace chm

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

// Small filtering helpers shared by the feature extractors and edge thinning.

#include <algorithm>
#include <cmath>
#include <vector>

#include "chm/core.hpp"

namespace chm::detail {

inline std::vector<double> gaussian_kernel(double sigma, int radius) {
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double s = 0.0;
  for (int i = -radius; i <= radius; ++i) s += k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& x : k) x /= s;
  return k;
}

inline std::vector<double> separable_smooth(const Plane& p, const std::vector<double>& k) {
  const int w = p.width(), h = p.height();
  const int rad = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(p.size().area()), out(p.size().area());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int d = -rad; d <= rad; ++d) s += k[static_cast<std::size_t>(d + rad)] * p.clamped(r, c + d);
      tmp[static_cast<std::size_t>(r) * w + c] = s;
    }
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int d = -rad; d <= rad; ++d)
        s += k[static_cast<std::size_t>(d + rad)] * tmp[static_cast<std::size_t>(std::clamp(r + d, 0, h - 1)) * w + c];
      out[static_cast<std::size_t>(r) * w + c] = s;
    }
  return out;
}

}  // namespace chm::detail

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

#include "chm/pyramid.hpp"

#include <algorithm>
#include <cmath>

namespace chm {
namespace {

template <class Reduce>
Plane halve(const Plane& g, Reduce reduce) {
  const int w = (g.width() + 1) / 2;
  const int h = (g.height() + 1) / 2;
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r) {
    const int r0 = 2 * r;
    const int r1 = std::min(r0 + 1, g.height() - 1);
    for (int c = 0; c < w; ++c) {
      const int c0 = 2 * c;
      const int c1 = std::min(c0 + 1, g.width() - 1);
      out[static_cast<std::size_t>(r) * w + c] = reduce(g.at(r0, c0), g.at(r0, c1), g.at(r1, c0), g.at(r1, c1));
    }
  }
  return Plane(w, h, std::move(out));
}

void check_times(int times) {
  if (times < 0) throw std::invalid_argument("operator repeat count must be >= 0");
}

}  // namespace

Plane downsample(const Plane& grid, int times) {
  check_times(times);
  Plane g = grid;
  for (int i = 0; i < times; ++i)
    g = halve(g, [](double a, double b, double c, double d) { return (a + b + c + d) * 0.25; });
  return g;
}

Plane maxpool(const Plane& grid, int times) {
  check_times(times);
  Plane g = grid;
  for (int i = 0; i < times; ++i)
    g = halve(g, [](double a, double b, double c, double d) { return std::max(std::max(a, b), std::max(c, d)); });
  return g;
}

Plane upsample(const Plane& grid, int times, std::optional<Size> target) {
  check_times(times);
  const int factor = 1 << times;
  const int w = grid.width() * factor;
  const int h = grid.height() * factor;
  const Size out = target.value_or(Size{w, h});
  if (out.width > w || out.height > h)
    throw std::invalid_argument("upsample target larger than the upsampled grid");
  if (out.width <= 0 || out.height <= 0) throw std::invalid_argument("upsample target must be positive");
  std::vector<double> v(out.area());
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c)
      v[static_cast<std::size_t>(r) * out.width + c] = grid.at(r / factor, c / factor);
  return Plane(out.width, out.height, std::move(v));
}

Plane resize_bilinear(const Plane& grid, Size target) {
  if (target.width <= 0 || target.height <= 0) throw std::invalid_argument("resize target must be positive");
  if (target == grid.size()) return grid;
  const double sx = static_cast<double>(grid.width()) / target.width;
  const double sy = static_cast<double>(grid.height()) / target.height;
  const double maxX = grid.width() - 1;
  const double maxY = grid.height() - 1;
  std::vector<double> v(target.area());
  for (int r = 0; r < target.height; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, maxY);
    const int y0 = static_cast<int>(std::floor(y));
    const int y1 = std::min(y0 + 1, grid.height() - 1);
    const double fy = y - y0;
    for (int c = 0; c < target.width; ++c) {
      const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, maxX);
      const int x0 = static_cast<int>(std::floor(x));
      const int x1 = std::min(x0 + 1, grid.width() - 1);
      const double fx = x - x0;
      const double top = grid.at(y0, x0) * (1.0 - fx) + grid.at(y0, x1) * fx;
      const double bot = grid.at(y1, x0) * (1.0 - fx) + grid.at(y1, x1) * fx;
      v[static_cast<std::size_t>(r) * target.width + c] = top * (1.0 - fy) + bot * fy;
    }
  }
  return Plane(target.width, target.height, std::move(v));
}

Plane resize_bilinear(const Plane& grid, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("resize scale must be positive");
  const Size target{std::max(1, static_cast<int>(std::lround(scale * grid.width()))),
                    std::max(1, static_cast<int>(std::lround(scale * grid.height())))};
  return resize_bilinear(grid, target);
}

ImagePlane downsample(const ImagePlane& image, int times) {
  std::vector<Plane> planes;
  planes.reserve(static_cast<std::size_t>(image.channels()));
  for (const auto& p : image.planes()) planes.push_back(downsample(p, times));
  return ImagePlane(std::move(planes));
}

namespace {
Plane clamp01(const Plane& p) {
  std::vector<double> v(p.values().begin(), p.values().end());
  for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
  return Plane(p.width(), p.height(), std::move(v));
}
}  // namespace

ImagePlane resize_bilinear(const ImagePlane& image, double scale) {
  std::vector<Plane> planes;
  planes.reserve(static_cast<std::size_t>(image.channels()));
  for (const auto& p : image.planes()) planes.push_back(clamp01(resize_bilinear(p, scale)));
  return ImagePlane(std::move(planes));
}

// Averages of values in [0,1] can round a hair outside the range; clamp so
// the result still satisfies the probability invariant.
ProbabilityMap downsample(const ProbabilityMap& map, int times) {
  return ProbabilityMap(clamp01(downsample(map.plane(), times)));
}
ProbabilityMap maxpool(const ProbabilityMap& map, int times) { return ProbabilityMap(maxpool(map.plane(), times)); }
ProbabilityMap upsample(const ProbabilityMap& map, int times, std::optional<Size> target) {
  return ProbabilityMap(upsample(map.plane(), times, target));
}
ProbabilityMap resize_bilinear(const ProbabilityMap& map, double scale) {
  return ProbabilityMap(clamp01(resize_bilinear(map.plane(), scale)));
}
ProbabilityMap resize_bilinear(const ProbabilityMap& map, Size target) {
  return ProbabilityMap(clamp01(resize_bilinear(map.plane(), target)));
}

Pyramid<ImagePlane> image_pyramid(const ImagePlane& image, int levels) {
  if (levels < 1) throw std::invalid_argument("pyramid needs at least one level");
  Pyramid<ImagePlane> p;
  p.levels.push_back(image);
  for (int l = 2; l <= levels; ++l) p.levels.push_back(downsample(p.levels.back(), 1));
  return p;
}

}  // namespace chm

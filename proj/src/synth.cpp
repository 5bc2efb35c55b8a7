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

#include "chm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace chm {
namespace {

// Foreground carries a smooth random field on top of iid noise; the marginals
// barely differ, so the classes only separate over windows of several cells.
constexpr double kFieldAmplitude = 0.1;
constexpr double kFieldCell = 8.0;
constexpr double kNoiseLow = 0.25;

struct Blob {
  double cy, cx, ry, rx, angle;
  bool contains(int r, int c) const {
    const double dy = r + 0.5 - cy, dx = c + 0.5 - cx;
    const double u = dx * std::cos(angle) + dy * std::sin(angle);
    const double v = -dx * std::sin(angle) + dy * std::cos(angle);
    return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
  }
};

Blob random_blob(std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> centre(0.2 * size, 0.8 * size);
  std::uniform_real_distribution<double> radius(size / 6.0, size / 3.2);
  std::uniform_real_distribution<double> angle(0.0, 3.14159265358979);
  return {centre(rng), centre(rng), radius(rng), radius(rng), angle(rng)};
}

}  // namespace

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "textures") return SynthKind::Textures;
  if (name == "bars") return SynthKind::Bars;
  if (name == "xor-blobs") return SynthKind::XorBlobs;
  throw std::invalid_argument("unknown synthetic dataset kind '" + name + "'");
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::Textures: return "textures";
    case SynthKind::Bars: return "bars";
    case SynthKind::XorBlobs: return "xor-blobs";
  }
  return "?";
}

std::vector<TrainingImage> synth_textures(int count, int size, std::uint64_t seed, int classes) {
  if (classes != 2 && classes != 3) throw std::invalid_argument("textures support 2 or 3 classes");
  if (count < 0 || size < 4) throw std::invalid_argument("textures need count >= 0 and size >= 4");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(kNoiseLow, 1.0 - kNoiseLow);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<TrainingImage> out;
  for (int n = 0; n < count; ++n) {
    std::vector<int> labels(static_cast<std::size_t>(size) * size, 0);
    for (int cls = 1; cls < classes; ++cls) {
      const int blobs = 1 + static_cast<int>(rng() % 2);
      for (int b = 0; b < blobs; ++b) {
        const Blob blob = random_blob(rng, size);
        for (int r = 0; r < size; ++r)
          for (int c = 0; c < size; ++c)
            if (blob.contains(r, c)) labels[static_cast<std::size_t>(r) * size + c] = cls;
      }
    }
      const int gs = static_cast<int>(size / kFieldCell) + 2;
    std::vector<double> grid(static_cast<std::size_t>(gs) * gs);
    for (double& g : grid) g = gauss(rng);
    std::vector<double> pixels(labels.size());
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        const double y = (r + 0.5) / kFieldCell, x = (c + 0.5) / kFieldCell;
        const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
        const double fy = y - y0, fx = x - x0;
        const auto g = [&](int i, int j) { return grid[static_cast<std::size_t>(i) * gs + j]; };
        const double field = g(y0, x0) * (1 - fy) * (1 - fx) + g(y0, x0 + 1) * (1 - fy) * fx +
                             g(y0 + 1, x0) * fy * (1 - fx) + g(y0 + 1, x0 + 1) * fy * fx;
        const std::size_t i = static_cast<std::size_t>(r) * size + c;
        double v = u(rng);
        // class k scales the field by k
        if (labels[i] > 0) v += std::clamp(kFieldAmplitude * labels[i] * field, -kNoiseLow, kNoiseLow);
        pixels[i] = v;
      }
    out.push_back({new_image(size, size, 1, pixels), LabelMap(size, size, classes, std::move(labels))});
  }
  return out;
}

std::vector<TrainingImage> synth_bars(int count, int size, std::uint64_t seed) {
  if (count < 0 || size < 16) throw std::invalid_argument("bars need count >= 0 and size >= 16");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.3, 0.7);
  std::vector<TrainingImage> out;
  for (int n = 0; n < count; ++n) {
    std::vector<int> labels(static_cast<std::size_t>(size) * size, 0);
    std::vector<char> outline(labels.size(), 0);
    const int bars = 1 + static_cast<int>(rng() % 2);
    for (int b = 0; b < bars; ++b) {
      const bool horizontal = rng() % 2;
      const int thick = std::max(4, size / 6 + static_cast<int>(rng() % static_cast<unsigned>(std::max(1, size / 10))));
      const int length = size / 2 + static_cast<int>(rng() % static_cast<unsigned>(size / 3));
      const int r0 = static_cast<int>(rng() % static_cast<unsigned>(size - (horizontal ? thick : length)));
      const int c0 = static_cast<int>(rng() % static_cast<unsigned>(size - (horizontal ? length : thick)));
      const int h = horizontal ? thick : length, w = horizontal ? length : thick;
      for (int r = r0; r < r0 + h; ++r)
        for (int c = c0; c < c0 + w; ++c) {
          const std::size_t i = static_cast<std::size_t>(r) * size + c;
          labels[i] = 1;
          if (r == r0 || r == r0 + h - 1 || c == c0 || c == c0 + w - 1) outline[i] = 1;
        }
    }
    std::vector<double> pixels(labels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = outline[i] ? 1.0 : u(rng);
    out.push_back({new_image(size, size, 1, pixels), LabelMap(size, size, 2, std::move(labels))});
  }
  return out;
}

PointSet synth_xor_blobs(int count, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("count must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.25);
  std::vector<float> v;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < count; ++i) {
    const int q = i % 4;
    const double cx = (q & 1) ? 1.0 : -1.0, cy = (q & 2) ? 1.0 : -1.0;
    v.push_back(static_cast<float>(cx + noise(rng)));
    v.push_back(static_cast<float>(cy + noise(rng)));
    y.push_back(cx * cy > 0 ? 1 : 0);
  }
  return {FeatureMatrix(static_cast<std::size_t>(count), 2, std::move(v), {"x", "y"}), std::move(y)};
}

}  // namespace chm

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

#include "chm/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace chm {

Size level_size(Size base, int level) {
  if (level < 1) throw std::invalid_argument("pyramid level must be >= 1");
  Size s = base;
  for (int i = 1; i < level; ++i) {
    s.width = (s.width + 1) / 2;
    s.height = (s.height + 1) / 2;
  }
  return s;
}

Plane::Plane(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("grid dimensions must be positive");
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw std::invalid_argument("grid value count does not match dimensions");
  for (double v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument("grid contains a non-finite value");
}

Plane Plane::filled(int width, int height, double value) {
  return Plane(width, height,
               std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), value));
}

double Plane::clamped(int row, int col) const {
  row = std::clamp(row, 0, height_ - 1);
  col = std::clamp(col, 0, width_ - 1);
  return values_[static_cast<std::size_t>(row) * width_ + col];
}

ImagePlane::ImagePlane(int width, int height, int channels, std::span<const double> interleaved) {
  if (width <= 0 || height <= 0 || channels <= 0)
    throw std::invalid_argument("image dimensions must be positive");
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (interleaved.size() != n * static_cast<std::size_t>(channels))
    throw std::invalid_argument("dimension mismatch: expected " + std::to_string(n * channels) +
                                " values, got " + std::to_string(interleaved.size()));
  size_ = {width, height};
  planes_.reserve(static_cast<std::size_t>(channels));
  for (int c = 0; c < channels; ++c) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = interleaved[i * channels + c];
      if (!std::isfinite(x)) throw std::invalid_argument("image contains a non-finite value");
      v[i] = std::clamp(x, 0.0, 1.0);
    }
    planes_.emplace_back(width, height, std::move(v));
  }
}

ImagePlane::ImagePlane(std::vector<Plane> channels) : planes_(std::move(channels)) {
  if (planes_.empty()) throw std::invalid_argument("image needs at least one channel");
  size_ = planes_.front().size();
  for (const auto& p : planes_) {
    if (p.size() != size_) throw std::invalid_argument("image channels differ in size");
    for (double v : p.values())
      if (v < 0.0 || v > 1.0) throw std::invalid_argument("image values must lie in [0,1]");
  }
}

std::vector<double> ImagePlane::interleaved() const {
  const std::size_t n = size_.area();
  const auto ch = planes_.size();
  std::vector<double> out(n * ch);
  for (std::size_t c = 0; c < ch; ++c) {
    auto v = planes_[c].values();
    for (std::size_t i = 0; i < n; ++i) out[i * ch + c] = v[i];
  }
  return out;
}

Plane ImagePlane::luminance() const {
  if (planes_.size() == 1) return planes_.front();
  const std::size_t n = size_.area();
  std::vector<double> out(n, 0.0);
  if (planes_.size() == 3) {
    auto r = planes_[0].values(), g = planes_[1].values(), b = planes_[2].values();
    for (std::size_t i = 0; i < n; ++i) out[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  } else {
    for (const auto& p : planes_) {
      auto v = p.values();
      for (std::size_t i = 0; i < n; ++i) out[i] += v[i];
    }
    for (auto& x : out) x /= static_cast<double>(planes_.size());
  }
  return Plane(size_.width, size_.height, std::move(out));
}

ImagePlane new_image(int width, int height, int channels, std::span<const double> values) {
  return ImagePlane(width, height, channels, values);
}

LabelMap::LabelMap(int width, int height, int classCount, std::vector<int> values)
    : width_(width), height_(height), classCount_(classCount), values_(std::move(values)) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("label map dimensions must be positive");
  if (classCount < 2) throw std::invalid_argument("label map needs at least two classes");
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw std::invalid_argument("label value count does not match dimensions");
  for (int v : values_)
    if (v < 0 || v >= classCount)
      throw std::invalid_argument("class id " + std::to_string(v) + " outside [0," +
                                  std::to_string(classCount) + ")");
}

Plane LabelMap::indicator(int cls) const {
  std::vector<double> v(values_.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = values_[i] == cls ? 1.0 : 0.0;
  return Plane(width_, height_, std::move(v));
}

ProbabilityMap::ProbabilityMap(Plane plane) : plane_(std::move(plane)) {
  for (double v : plane_.values())
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("probability outside [0,1]");
}

ProbabilityMap::ProbabilityMap(int width, int height, std::vector<double> values)
    : ProbabilityMap(Plane(width, height, std::move(values))) {}

void ChmConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(levels >= 1, "levels must be >= 1");
  require(stages >= 1, "stages must be >= 1");
  require(groups >= 1, "groups must be >= 1");
  require(perGroup >= 1, "perGroup must be >= 1");
  require(classCount >= 2, "classCount must be >= 2");
  // Only multiclass hierarchies exchange context; binary configs ignore it.
  require(intraClassTopLevels >= 0, "intraClassTopLevels must be >= 0");
  require(classCount == 2 || intraClassTopLevels <= levels, "intraClassTopLevels must lie in [0, levels]");
  require(training.learningRate > 0.0, "learningRate must be positive");
  require(training.learningRateDecay > 0.0 && training.learningRateDecay <= 1.0, "learningRateDecay must lie in (0,1]");
  require(training.epochs >= 0, "epochs must be >= 0");
  require(training.batchSize >= 1, "batchSize must be >= 1");
  require(training.sampleRate > 0.0 && training.sampleRate <= 1.0, "sampleRate must lie in (0,1]");
  require(training.maxSamples >= 2, "maxSamples must be >= 2");
  require(training.kmeansSamples >= 1, "kmeansSamples must be >= 1");
}

namespace {
std::atomic<int> g_workers{0};
}

int worker_count() {
  const int w = g_workers.load();
  if (w > 0) return w;
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_worker_count(int workers) { g_workers.store(std::max(workers, 0)); }

}  // namespace chm

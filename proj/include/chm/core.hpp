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

// Domain types shared by every stage of the pipeline: dense grids for images,
// label maps and probability maps, plus the model configuration. All grids are
// immutable once constructed; every operator returns a new value.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chm {

/// Bad input data: malformed files, inconsistent datasets, mismatched grids.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant did not hold. Indicates a bug, not bad input.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Size {
  int width = 0;
  int height = 0;

  std::size_t area() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  friend bool operator==(const Size&, const Size&) = default;
};

/// Dimensions of pyramid level `level` (1-based) for a base grid: each
/// halving step rounds up.
Size level_size(Size base, int level);

/// Single-channel row-major grid of finite reals.
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, std::vector<double> values);

  static Plane filled(int width, int height, double value);

  int width() const { return width_; }
  int height() const { return height_; }
  Size size() const { return {width_, height_}; }
  bool empty() const { return values_.empty(); }

  double at(int row, int col) const { return values_[static_cast<std::size_t>(row) * width_ + col]; }
  /// Edge-replicating access for out-of-range coordinates.
  double clamped(int row, int col) const;
  std::span<const double> values() const { return values_; }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

/// Input image X: one plane per channel, values in [0,1]. Color images use
/// channel order R,G,B; an optional depth plane follows.
class ImagePlane {
 public:
  ImagePlane() = default;
  /// `interleaved` holds width*height*channels values, channel index fastest.
  /// Values are clamped to [0,1]; non-finite values are rejected.
  ImagePlane(int width, int height, int channels, std::span<const double> interleaved);
  explicit ImagePlane(std::vector<Plane> channels);

  int width() const { return size_.width; }
  int height() const { return size_.height; }
  Size size() const { return size_; }
  int channels() const { return static_cast<int>(planes_.size()); }
  const Plane& channel(int c) const { return planes_.at(static_cast<std::size_t>(c)); }
  const std::vector<Plane>& planes() const { return planes_; }

  std::vector<double> interleaved() const;

  /// Single luminance plane (mean of R,G,B weighted Rec.601; plain mean of all
  /// planes otherwise).
  Plane luminance() const;

 private:
  Size size_;
  std::vector<Plane> planes_;
};

/// Validated construction from raw values.
ImagePlane new_image(int width, int height, int channels, std::span<const double> values);

/// Per-pixel class ids in {0,...,classCount-1}. Binary problems use
/// classCount = 2 with positive class 1.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int width, int height, int classCount, std::vector<int> values);

  int width() const { return width_; }
  int height() const { return height_; }
  Size size() const { return {width_, height_}; }
  int class_count() const { return classCount_; }
  int at(int row, int col) const { return values_[static_cast<std::size_t>(row) * width_ + col]; }
  std::span<const int> values() const { return values_; }

  /// Indicator plane of `cls` (1 where the label equals cls).
  Plane indicator(int cls) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int classCount_ = 0;
  std::vector<int> values_;
};

/// A plane whose values all lie in [0,1]; classifier outputs and context maps.
class ProbabilityMap {
 public:
  ProbabilityMap() = default;
  explicit ProbabilityMap(Plane plane);
  ProbabilityMap(int width, int height, std::vector<double> values);

  int width() const { return plane_.width(); }
  int height() const { return plane_.height(); }
  Size size() const { return plane_.size(); }
  double at(int row, int col) const { return plane_.at(row, col); }
  std::span<const double> values() const { return plane_.values(); }
  const Plane& plane() const { return plane_; }

  friend bool operator==(const ProbabilityMap&, const ProbabilityMap&) = default;

 private:
  Plane plane_;
};

/// Ordered resolution levels; index 0 holds level 1 (original resolution).
template <class Grid>
struct Pyramid {
  std::vector<Grid> levels;

  int height() const { return static_cast<int>(levels.size()); }
  const Grid& level(int l) const { return levels.at(static_cast<std::size_t>(l - 1)); }
};

/// Which appearance blocks are extracted. Serialized with every model.
struct FeatureSelection {
  bool haar = true;
  bool hog = true;
  bool orientation = true;  // dense orientation histogram at 4x4 cells
  bool gabor = true;
  bool canny = true;
  bool position = true;
  bool stencil = true;

  friend bool operator==(const FeatureSelection&, const FeatureSelection&) = default;
};

struct TrainingParams {
  double learningRate = 0.01;
  double learningRateDecay = 0.95;
  int epochs = 30;
  int batchSize = 64;
  bool dropout = true;
  double sampleRate = 1.0;             // pixel keep-probability before balancing
  std::size_t maxSamples = 200000;     // per classifier, after balancing
  std::size_t kmeansSamples = 4000;    // per class, for initialization
  std::uint64_t seed = 1;

  friend bool operator==(const TrainingParams&, const TrainingParams&) = default;
};

struct ChmConfig {
  int levels = 5;
  int stages = 2;
  int groups = 24;
  int perGroup = 24;
  int classCount = 2;
  int intraClassTopLevels = 3;
  TrainingParams training;
  FeatureSelection features;

  /// Throws std::invalid_argument on out-of-range settings.
  void validate() const;
  /// One binary hierarchy for two classes, one per class otherwise.
  int class_model_count() const { return classCount > 2 ? classCount : 1; }

  friend bool operator==(const ChmConfig&, const ChmConfig&) = default;
};

/// Worker threads used by per-pixel and per-image loops. Defaults to 1.
int worker_count();
void set_worker_count(int workers);

}  // namespace chm

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

// Evaluation: confusion counts, F-value / G-mean / accuracy for binary maps,
// pixel and class-average accuracy for label maps, and a boundary benchmark
// (ODS, OIS, AP and a precision-recall curve).
//
// Ratios whose denominator is zero count as perfect (1): an image without
// positives that predicts none has nothing to get wrong.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "chm/core.hpp"

namespace chm {

class ConfusionCounts {
 public:
  explicit ConfusionCounts(int classCount = 2);

  int class_count() const { return classCount_; }
  std::uint64_t at(int truth, int predicted) const;
  void add(int truth, int predicted, std::uint64_t n = 1);
  std::uint64_t total() const;

  // Binary view with class 1 positive.
  std::uint64_t tp() const { return at(1, 1); }
  std::uint64_t fp() const { return at(0, 1); }
  std::uint64_t fn() const { return at(1, 0); }
  std::uint64_t tn() const { return at(0, 0); }

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;

 private:
  int classCount_;
  std::vector<std::uint64_t> counts_;  // [truth][predicted]
};

struct BinaryScores {
  double precision = 0.0;
  double recall = 0.0;
  double trueNegativeRate = 0.0;
  double fValue = 0.0;
  double gMean = 0.0;
  double pixelAccuracy = 0.0;
  ConfusionCounts counts;
};

BinaryScores binary_scores(const ConfusionCounts& counts);
/// Predicts positive where p >= threshold; groundtruth positives are labels > 0.
BinaryScores binary_scores(const ProbabilityMap& pred, const LabelMap& gt, double threshold = 0.5);
ConfusionCounts binary_counts(const ProbabilityMap& pred, const LabelMap& gt, double threshold = 0.5);

struct MulticlassScores {
  double pixelAccuracy = 0.0;
  /// Mean recall over the classes present in the groundtruth.
  double classAverageAccuracy = 0.0;
  ConfusionCounts confusion;
};

MulticlassScores multiclass_scores(const ConfusionCounts& confusion);
MulticlassScores multiclass_scores(const LabelMap& pred, const LabelMap& gt);

// ---------------------------------------------------------------------------
// Boundary benchmark

inline constexpr int kThresholdCount = 99;
inline constexpr double kDefaultTolerance = 0.0075;

/// Threshold k/100 for k = 1..99.
double benchmark_threshold(int index);

/// One binary map per annotator; pixels with label > 0 are boundary.
using AnnotatorSet = std::vector<LabelMap>;

struct BoundaryCounts {
  std::uint64_t predicted = 0;      // predicted boundary pixels
  std::uint64_t matchedPredicted = 0;  // of those, matched in some annotator
  std::uint64_t truth = 0;          // groundtruth pixels, summed over annotators
  std::uint64_t matchedTruth = 0;

  double precision() const;
  double recall() const;
  double f_value() const;
  BoundaryCounts& operator+=(const BoundaryCounts& o);
};

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fValue = 0.0;
};

struct BoundaryResult {
  double ods = 0.0;
  double odsThreshold = 0.0;
  double ois = 0.0;
  double ap = 0.0;
  std::vector<PrPoint> curve;  // dataset-pooled, one row per threshold
  std::vector<std::vector<BoundaryCounts>> perImage;  // [image][threshold]
};

/// Greedy nearest-first one-to-one matching of `predicted` boundary pixels to
/// one annotator's pixels within `radius` (Euclidean, inclusive). Returns the
/// matched flags of predicted and truth pixels, in row-major order of each.
struct Matching {
  std::vector<char> predicted;
  std::vector<char> truth;
};
Matching greedy_match(const std::vector<char>& predictedMask, const LabelMap& truth, double radius);

/// Counts for one image at one threshold (p >= threshold is boundary).
BoundaryCounts boundary_counts(const ProbabilityMap& map, const AnnotatorSet& truth, double threshold,
                               double toleranceFraction = kDefaultTolerance);

/// Throws DataError if no image has any groundtruth boundary pixel.
BoundaryResult boundary_benchmark(std::span<const ProbabilityMap> maps, std::span<const AnnotatorSet> truth,
                                  double toleranceFraction = kDefaultTolerance);

/// Area under the precision-recall curve after making precision
/// non-increasing in recall; the first point is extended to recall 0.
double average_precision(std::span<const PrPoint> curve);

/// "threshold,precision,recall,f" header plus one row per point.
void write_pr_curve(std::ostream& out, std::span<const PrPoint> curve);

}  // namespace chm

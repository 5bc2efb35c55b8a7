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

// The contextual hierarchy. A stage trains L bottom-up classifiers on
// successively halved resolutions, each conditioned on the max-pooled outputs
// of every lower level, then one top-down classifier at full resolution
// conditioned on the image and the upsampled outputs of all levels. Stage s+1
// reuses stage s's top-down classifier as its level-1 classifier.
//
// Multiclass problems train one binary hierarchy per class (one-vs-all),
// level by level across classes; in the top `intraClassTopLevels` levels a
// classifier also samples the context maps of every other class.

#include <cstddef>
#include <functional>
#include <vector>

#include "chm/core.hpp"
#include "chm/features.hpp"
#include "chm/ldnn.hpp"

namespace chm {

struct TrainingImage {
  ImagePlane image;
  LabelMap labels;
};

struct StageModels {
  /// [class][level - 1]. For stages after the first, level 1 holds a copy of
  /// the previous stage's top-down classifier.
  std::vector<std::vector<LdnnModel>> bottomUp;
  /// [class]
  std::vector<LdnnModel> topDown;

  friend bool operator==(const StageModels&, const StageModels&) = default;
};

struct ChmModel {
  ChmConfig config;
  int channels = 1;
  std::vector<StageModels> stages;

  const LdnnModel& bottom_up(int stage, int cls, int level) const;
  const LdnnModel& top_down(int stage, int cls) const;
  /// Classifiers that were actually trained (shared level-1 slots excluded).
  std::size_t trained_classifier_count() const;

  friend bool operator==(const ChmModel&, const ChmModel&) = default;
};

/// Number of context maps the bottom-up classifier at `level` samples.
std::size_t context_map_count(const ChmConfig& config, int level);
std::size_t bottom_up_width(const ChmConfig& config, int channels, int level);
std::size_t top_down_width(const ChmConfig& config, int channels);

/// One trained (or reused) classifier.
struct LevelRecord {
  int stage = 0;
  int cls = 0;
  int level = 0;  // 0 for the top-down classifier
  bool reused = false;
  std::size_t samples = 0;
  /// -sum log P(target | features) over every training pixel at this level.
  double logLoss = 0.0;
  double trainF = 0.0;
  std::vector<double> epochLoss;
};

struct StageRecord {
  int stage = 0;
  int cls = 0;
  double J1 = 0.0;  // sum of the stage's bottom-up log-losses
  double J2 = 0.0;  // top-down log-loss
  double trainF = 0.0;
};

struct TrainingReport {
  std::vector<LevelRecord> levels;
  std::vector<StageRecord> stages;
};

struct TrainResult {
  ChmModel model;
  TrainingReport report;
  /// Final top-down output for every training image: [image][class].
  std::vector<std::vector<ProbabilityMap>> outputs;
  /// Top-down output after each stage: [stage - 1][image][class].
  std::vector<std::vector<std::vector<ProbabilityMap>>> stageOutputs;
};

using ProgressSink = std::function<void(const LevelRecord&)>;

/// Trains the full hierarchy (binary or one-vs-all multiclass, any number of
/// stages). Deterministic for a fixed dataset and config seed.
TrainResult chm_train(const std::vector<TrainingImage>& dataset, const ChmConfig& config,
                      const ProgressSink& progress = {});

/// Per-class probability of the final top-down classifier. Binary models
/// return one map (the positive class).
std::vector<ProbabilityMap> chm_infer(const ChmModel& model, const ImagePlane& image);

/// Every intermediate map of one inference pass.
struct InferenceTrace {
  std::vector<FeatureMatrix> appearance;                            // [level - 1]
  std::vector<std::vector<std::vector<ProbabilityMap>>> levelMaps;  // [stage - 1][class][level - 1]
  std::vector<std::vector<ProbabilityMap>> topDown;                 // [stage - 1][class]
};
InferenceTrace chm_trace(const ChmModel& model, const ImagePlane& image);

/// Output of one classifier over a whole level grid.
ProbabilityMap infer_level(const LdnnModel& classifier, const FeatureMatrix& features, Size size);

/// Binary: p >= 0.5. Multiclass: argmax over class maps, lowest index on ties.
LabelMap predict_labels(const std::vector<ProbabilityMap>& classMaps, int classCount);

namespace detail {

/// Features of the bottom-up classifier at `level` for class `cls`, given the
/// level's appearance rows and the maps of lower levels ([class][level - 1]).
FeatureMatrix bottom_up_features(const ChmConfig& config, const FeatureMatrix& appearance,
                                 const std::vector<std::vector<ProbabilityMap>>& maps, int cls, int level);
/// Features of the top-down classifier; `maps[cls]` must hold all L levels.
FeatureMatrix top_down_features(const ChmConfig& config, const FeatureMatrix& appearance, Size size,
                                const std::vector<std::vector<ProbabilityMap>>& maps, int cls);

/// Binary target of hierarchy `cls` at original resolution.
Plane class_target(const LabelMap& labels, int cls, int classCount);

}  // namespace detail

}  // namespace chm

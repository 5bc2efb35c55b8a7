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

// Logistic disjunctive normal network: N groups of M logistic discriminants.
// Each group is a conjunction (product of its sigmoids); the network output
// is the disjunction (noisy-or) of the groups:
//
//   s_ij = sigmoid(w_ij . x + b_ij)
//   g_i  = prod_j s_ij
//   f    = 1 - prod_i (1 - g_i)
//
// A network trained with dropout replaces s_ij by sqrt(s_ij) at evaluation.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "chm/core.hpp"
#include "chm/features.hpp"

namespace chm {

using Rng = std::mt19937_64;

class LdnnModel {
 public:
  LdnnModel() = default;
  /// All-zero network.
  LdnnModel(int groups, int perGroup, std::size_t featureCount);
  /// `params` holds, for i in groups, j in perGroup: b_ij then the w_ij row.
  LdnnModel(int groups, int perGroup, std::size_t featureCount, std::vector<double> params, bool trainedWithDropout);

  int groups() const { return groups_; }
  int per_group() const { return perGroup_; }
  std::size_t feature_count() const { return featureCount_; }
  bool trained_with_dropout() const { return dropout_; }
  std::size_t unit_count() const { return static_cast<std::size_t>(groups_) * perGroup_; }
  std::size_t stride() const { return featureCount_ + 1; }

  double bias(int i, int j) const { return params_[unit(i, j) * stride()]; }
  std::span<const double> weights(int i, int j) const { return {params_.data() + unit(i, j) * stride() + 1, featureCount_}; }
  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }
  void set_trained_with_dropout(bool v) { dropout_ = v; }

  friend bool operator==(const LdnnModel&, const LdnnModel&) = default;

 private:
  std::size_t unit(int i, int j) const { return static_cast<std::size_t>(i) * perGroup_ + j; }

  int groups_ = 0;
  int perGroup_ = 0;
  std::size_t featureCount_ = 0;
  std::vector<double> params_;
  bool dropout_ = false;
};

double evaluate(const LdnnModel& model, std::span<const double> features);
double evaluate(const LdnnModel& model, std::span<const float> features);
/// Output for every row of `features`.
std::vector<double> evaluate_rows(const LdnnModel& model, const FeatureMatrix& features);

/// Units kept active for one minibatch.
struct DropoutMask {
  std::vector<char> group;  // size N
  std::vector<char> unit;   // size N*M, only meaningful inside active groups

  static DropoutMask all(int groups, int perGroup);
};

/// ceil(N/2) active groups; inside each, ceil(M/2) active discriminants.
DropoutMask draw_dropout_mask(int groups, int perGroup, Rng& rng);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> params;  // same layout as LdnnModel::params()
};

/// Squared error (f - y)^2 of the training-mode forward pass (no square-root
/// compensation) and its gradient with respect to every parameter. Units
/// outside `mask` contribute nothing and receive zero gradient.
LossGradient gradient(const LdnnModel& model, std::span<const double> features, int label,
                      const DropoutMask* mask = nullptr);

/// k-means++ seeded Lloyd iterations. Returns k centroids of dimension
/// rows.cols(). Rows are put into a canonical order first, so the result does
/// not depend on sample order.
std::vector<std::vector<double>> kmeans(const std::vector<std::vector<double>>& rows, int k, Rng& rng,
                                        int maxIterations = 50);

/// One discriminant per (positive centroid, negative centroid) pair; each
/// hyperplane perpendicularly bisects its pair. Weights are scaled so every
/// group's conjunction reaches 0.9 at its own positive centroid.
LdnnModel init_kmeans(const std::vector<std::vector<double>>& positives,
                      const std::vector<std::vector<double>>& negatives, int groups, int perGroup, Rng& rng,
                      int maxIterations = 50);

struct LdnnTrainResult {
  LdnnModel model;
  std::vector<double> epochLoss;  // mean squared error per epoch
};

/// Minibatch SGD. Each step subtracts learningRate times the summed
/// minibatch gradient; the rate decays geometrically per epoch.
LdnnTrainResult train(const LdnnModel& init, const FeatureMatrix& samples, std::span<const std::uint8_t> labels,
                      const TrainingParams& params, Rng& rng);

/// Per-column affine standardization (x - mean) / scale.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;
};

Standardization fit_standardization(const FeatureMatrix& samples);
FeatureMatrix apply_standardization(const FeatureMatrix& samples, const Standardization& s);
/// Rewrites a network trained on standardized features so it accepts raw ones.
LdnnModel fold_standardization(const LdnnModel& model, const Standardization& s);

/// Full recipe used by the hierarchy: standardize, k-means initialization on
/// a bounded subset of each class, SGD, then fold the standardization back
/// into the weights. A sample set with only one class yields a constant
/// network.
LdnnTrainResult fit_ldnn(const FeatureMatrix& samples, std::span<const std::uint8_t> labels, int groups, int perGroup,
                         const TrainingParams& params, Rng& rng);

}  // namespace chm

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

#include "chm/model.hpp"

#include <algorithm>
#include <cmath>

#include "chm/pyramid.hpp"

namespace chm {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per classifier so the multiclass schedule cannot
// perturb any other classifier's randomness.
Rng classifier_rng(std::uint64_t seed, int stage, int cls, int level) {
  std::uint64_t s = splitmix(seed);
  s = splitmix(s ^ static_cast<std::uint64_t>(stage));
  s = splitmix(s ^ static_cast<std::uint64_t>(cls));
  s = splitmix(s ^ static_cast<std::uint64_t>(level));
  return Rng(s);
}

bool intra_connected(const ChmConfig& c, int lowerLevel, int level) {
  if (c.class_model_count() == 1) return false;
  const int first = c.levels - c.intraClassTopLevels;  // levels > first are connected
  return level > first && lowerLevel > first;
}

double clamp_p(double p) { return std::clamp(p, 1e-12, 1.0 - 1e-12); }

struct Counts {
  double tp = 0, fp = 0, fn = 0;
  void add(const ProbabilityMap& p, const Plane& target) {
    for (std::size_t i = 0; i < target.values().size(); ++i) {
      const bool pred = p.values()[i] >= 0.5;
      const bool pos = target.values()[i] > 0.5;
      tp += pred && pos;
      fp += pred && !pos;
      fn += !pred && pos;
    }
  }
  double f() const {
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 1.0;
    const double rec = tp + fn > 0 ? tp / (tp + fn) : 1.0;
    return prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
  }
};

double log_loss(const ProbabilityMap& p, const Plane& target) {
  double s = 0.0;
  for (std::size_t i = 0; i < target.values().size(); ++i) {
    const double q = clamp_p(p.values()[i]);
    s -= target.values()[i] > 0.5 ? std::log(q) : std::log(1.0 - q);
  }
  return s;
}

struct PixelRef {
  std::size_t image;
  std::size_t pixel;
  friend bool operator<(const PixelRef& a, const PixelRef& b) {
    return a.image != b.image ? a.image < b.image : a.pixel < b.pixel;
  }
};

// Balanced draw: every pixel of the rarer class (after the keep-rate
// thinning) and an equal number of the other, capped at maxSamples.
std::vector<PixelRef> sample_pixels(const std::vector<const Plane*>& targets, const TrainingParams& p, Rng& rng) {
  std::vector<PixelRef> pos, neg;
  std::bernoulli_distribution keep(p.sampleRate);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto v = targets[i]->values();
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (p.sampleRate < 1.0 && !keep(rng)) continue;
      (v[k] > 0.5 ? pos : neg).push_back({i, k});
    }
  }
  std::size_t n = std::min(pos.size(), neg.size());
  if (n == 0) n = std::max(pos.size(), neg.size());
  n = std::min(n, p.maxSamples / 2);
  auto draw = [&](std::vector<PixelRef>& from, std::vector<PixelRef>& out) {
    if (from.size() <= n) {
      out.insert(out.end(), from.begin(), from.end());
    } else {
      std::sample(from.begin(), from.end(), std::back_inserter(out), n, rng);
    }
  };
  std::vector<PixelRef> out;
  draw(pos, out);
  draw(neg, out);
  std::sort(out.begin(), out.end());
  return out;
}

struct Dataset {
  const std::vector<TrainingImage>& images;
  const ChmConfig& config;
  std::vector<std::vector<FeatureMatrix>> appearance;         // [image][level - 1]
  std::vector<std::vector<std::vector<Plane>>> targets;       // [class][image][level - 1]
};

// Builds features for every image, gathers the sampled rows, trains.
template <class BuildFeatures>
LdnnTrainResult train_classifier(const Dataset& data, const std::vector<const Plane*>& targets, std::size_t width,
                                 Rng& rng, BuildFeatures&& build, std::size_t& sampleCount) {
  const auto picks = sample_pixels(targets, data.config.training, rng);
  sampleCount = picks.size();
  std::vector<float> rows;
  rows.reserve(picks.size() * width);
  std::vector<std::uint8_t> labels;
  labels.reserve(picks.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < targets.size() && next < picks.size(); ++i) {
    if (picks[next].image != i) continue;
    const FeatureMatrix f = build(i);
    if (f.cols() != width) throw InvariantError("classifier feature width does not match its level");
    for (; next < picks.size() && picks[next].image == i; ++next) {
      const auto r = f.row(picks[next].pixel);
      rows.insert(rows.end(), r.begin(), r.end());
      labels.push_back(targets[i]->values()[picks[next].pixel] > 0.5 ? 1 : 0);
    }
  }
  const FeatureMatrix samples(picks.size(), width, std::move(rows), {});
  return fit_ldnn(samples, labels, data.config.groups, data.config.perGroup, data.config.training, rng);
}

void check_dataset(const std::vector<TrainingImage>& dataset, const ChmConfig& config) {
  if (dataset.empty()) throw DataError("training needs at least one image");
  const int channels = dataset.front().image.channels();
  std::vector<char> seen(static_cast<std::size_t>(config.classCount), 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    if (s.image.size() != s.labels.size())
      throw DataError("image " + std::to_string(i) + ": label map size differs from image size");
    if (s.image.channels() != channels) throw DataError("image " + std::to_string(i) + ": channel count differs");
    if (s.labels.class_count() != config.classCount)
      throw DataError("image " + std::to_string(i) + ": label class count differs from config");
    for (int v : s.labels.values()) seen[static_cast<std::size_t>(v)] = 1;
  }
  if (config.class_model_count() > 1)
    for (int c = 0; c < config.classCount; ++c)
      if (!seen[static_cast<std::size_t>(c)])
        throw DataError("class " + std::to_string(c) +
                        " never occurs in the training labels; a one-vs-all classifier cannot be trained for it");
}

}  // namespace

const LdnnModel& ChmModel::bottom_up(int stage, int cls, int level) const {
  return stages.at(static_cast<std::size_t>(stage - 1))
      .bottomUp.at(static_cast<std::size_t>(cls))
      .at(static_cast<std::size_t>(level - 1));
}

const LdnnModel& ChmModel::top_down(int stage, int cls) const {
  return stages.at(static_cast<std::size_t>(stage - 1)).topDown.at(static_cast<std::size_t>(cls));
}

std::size_t ChmModel::trained_classifier_count() const {
  std::size_t n = 0;
  for (std::size_t s = 0; s < stages.size(); ++s)
    for (std::size_t c = 0; c < stages[s].bottomUp.size(); ++c)
      n += stages[s].bottomUp[c].size() - (s > 0 ? 1 : 0) + 1;
  return n;
}

std::size_t context_map_count(const ChmConfig& config, int level) {
  std::size_t n = 0;
  for (int k = 1; k < level; ++k)
    n += intra_connected(config, k, level) ? static_cast<std::size_t>(config.class_model_count()) : 1;
  return n;
}

std::size_t bottom_up_width(const ChmConfig& config, int channels, int level) {
  return appearance_width(config.features, channels) + kStencilSize * context_map_count(config, level);
}

std::size_t top_down_width(const ChmConfig& config, int channels) {
  return appearance_width(config.features, channels) + kStencilSize * static_cast<std::size_t>(config.levels);
}

namespace detail {

FeatureMatrix bottom_up_features(const ChmConfig& config, const FeatureMatrix& appearance,
                                 const std::vector<std::vector<ProbabilityMap>>& maps, int cls, int level) {
  std::vector<ProbabilityMap> context;
  for (int k = 1; k < level; ++k) {
    if (intra_connected(config, k, level)) {
      for (const auto& classMaps : maps) context.push_back(maxpool(classMaps.at(static_cast<std::size_t>(k - 1)), level - k));
    } else {
      context.push_back(maxpool(maps.at(static_cast<std::size_t>(cls)).at(static_cast<std::size_t>(k - 1)), level - k));
    }
  }
  if (context.empty()) return appearance;
  const FeatureMatrix ctx = extract_context(context);
  const FeatureMatrix* parts[] = {&appearance, &ctx};
  return FeatureMatrix::hconcat(parts);
}

FeatureMatrix top_down_features(const ChmConfig& config, const FeatureMatrix& appearance, Size size,
                                const std::vector<std::vector<ProbabilityMap>>& maps, int cls) {
  std::vector<ProbabilityMap> context;
  const auto& own = maps.at(static_cast<std::size_t>(cls));
  for (int l = 1; l <= config.levels; ++l) context.push_back(upsample(own.at(static_cast<std::size_t>(l - 1)), l - 1, size));
  const FeatureMatrix ctx = extract_context(context);
  const FeatureMatrix* parts[] = {&appearance, &ctx};
  return FeatureMatrix::hconcat(parts);
}

Plane class_target(const LabelMap& labels, int cls, int classCount) {
  return labels.indicator(classCount > 2 ? cls : 1);
}

}  // namespace detail

ProbabilityMap infer_level(const LdnnModel& classifier, const FeatureMatrix& features, Size size) {
  if (features.rows() != size.area()) throw std::invalid_argument("feature rows do not match the level grid");
  return ProbabilityMap(size.width, size.height, evaluate_rows(classifier, features));
}

TrainResult chm_train(const std::vector<TrainingImage>& dataset, const ChmConfig& config, const ProgressSink& progress) {
  config.validate();
  check_dataset(dataset, config);
  const int L = config.levels;
  const int K = config.class_model_count();
  const std::size_t n = dataset.size();
  const int channels = dataset.front().image.channels();

  Dataset data{dataset, config, {}, {}};
  data.appearance.resize(n);
#pragma omp parallel for num_threads(worker_count()) schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto pyr = image_pyramid(dataset[static_cast<std::size_t>(i)].image, L);
    auto& out = data.appearance[static_cast<std::size_t>(i)];
    for (int l = 1; l <= L; ++l) out.push_back(extract_appearance(pyr.level(l), config.features));
  }
  data.targets.assign(static_cast<std::size_t>(K), std::vector<std::vector<Plane>>(n));
  for (int c = 0; c < K; ++c)
    for (std::size_t i = 0; i < n; ++i) {
      const Plane y = detail::class_target(dataset[i].labels, c, config.classCount);
      for (int l = 1; l <= L; ++l) data.targets[static_cast<std::size_t>(c)][i].push_back(maxpool(y, l - 1));
    }

  TrainResult result;
  result.model.config = config;
  result.model.channels = channels;

  // prevTop[image][class]: previous stage's top-down output.
  std::vector<std::vector<ProbabilityMap>> prevTop;

  for (int s = 1; s <= config.stages; ++s) {
    StageModels stage;
    stage.bottomUp.assign(static_cast<std::size_t>(K), {});
    stage.topDown.resize(static_cast<std::size_t>(K));
    // maps[image][class][level - 1]
    std::vector<std::vector<std::vector<ProbabilityMap>>> maps(
        n, std::vector<std::vector<ProbabilityMap>>(static_cast<std::size_t>(K)));
    std::vector<double> j1(static_cast<std::size_t>(K), 0.0);

    for (int l = 1; l <= L; ++l) {
      for (int c = 0; c < K; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        std::vector<const Plane*> targets(n);
        for (std::size_t i = 0; i < n; ++i) targets[i] = &data.targets[cu][i][static_cast<std::size_t>(l - 1)];
        LevelRecord rec{s, c, l, false, 0, 0.0, 0.0, {}};
        if (s > 1 && l == 1) {
          stage.bottomUp[cu].push_back(result.model.stages.back().topDown[cu]);
          for (std::size_t i = 0; i < n; ++i) maps[i][cu].push_back(prevTop[i][cu]);
          rec.reused = true;
        } else {
          Rng rng = classifier_rng(config.training.seed, s, c, l);
          auto build = [&](std::size_t i) {
            return detail::bottom_up_features(config, data.appearance[i][static_cast<std::size_t>(l - 1)], maps[i], c, l);
          };
          auto trained = train_classifier(data, targets, bottom_up_width(config, channels, l), rng, build, rec.samples);
          rec.epochLoss = std::move(trained.epochLoss);
          stage.bottomUp[cu].push_back(std::move(trained.model));
          const LdnnModel& clf = stage.bottomUp[cu].back();
          for (std::size_t i = 0; i < n; ++i)
            maps[i][cu].push_back(infer_level(clf, build(i), level_size(dataset[i].image.size(), l)));
        }
        Counts counts;
        for (std::size_t i = 0; i < n; ++i) {
          rec.logLoss += log_loss(maps[i][cu].back(), *targets[i]);
          counts.add(maps[i][cu].back(), *targets[i]);
        }
        rec.trainF = counts.f();
        j1[cu] += rec.logLoss;
        if (progress) progress(rec);
        result.report.levels.push_back(std::move(rec));
      }
    }

    std::vector<std::vector<ProbabilityMap>> top(n, std::vector<ProbabilityMap>(static_cast<std::size_t>(K)));
    for (int c = 0; c < K; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      std::vector<const Plane*> targets(n);
      for (std::size_t i = 0; i < n; ++i) targets[i] = &data.targets[cu][i][0];
      Rng rng = classifier_rng(config.training.seed, s, c, 0);
      auto build = [&](std::size_t i) {
        return detail::top_down_features(config, data.appearance[i][0], dataset[i].image.size(), maps[i], c);
      };
      std::size_t samples = 0;
      auto trained = train_classifier(data, targets, top_down_width(config, channels), rng, build, samples);
      LevelRecord rec{s, c, 0, false, samples, 0.0, 0.0, std::move(trained.epochLoss)};
      stage.topDown[cu] = std::move(trained.model);
      Counts counts;
      for (std::size_t i = 0; i < n; ++i) {
        top[i][cu] = infer_level(stage.topDown[cu], build(i), dataset[i].image.size());
        rec.logLoss += log_loss(top[i][cu], *targets[i]);
        counts.add(top[i][cu], *targets[i]);
      }
      rec.trainF = counts.f();
      result.report.stages.push_back({s, c, j1[cu], rec.logLoss, rec.trainF});
      if (progress) progress(rec);
      result.report.levels.push_back(std::move(rec));
    }
    result.model.stages.push_back(std::move(stage));
    result.stageOutputs.push_back(top);
    prevTop = std::move(top);
  }
  result.outputs = std::move(prevTop);
  return result;
}

InferenceTrace chm_trace(const ChmModel& model, const ImagePlane& image) {
  const ChmConfig& config = model.config;
  if (image.channels() != model.channels)
    throw DataError("image has " + std::to_string(image.channels()) + " channels, model expects " +
                    std::to_string(model.channels));
  const int L = config.levels;
  const int K = config.class_model_count();
  InferenceTrace t;
  const auto pyr = image_pyramid(image, L);
  for (int l = 1; l <= L; ++l) t.appearance.push_back(extract_appearance(pyr.level(l), config.features));

  for (int s = 1; s <= static_cast<int>(model.stages.size()); ++s) {
    std::vector<std::vector<ProbabilityMap>> maps(static_cast<std::size_t>(K));
    for (int l = 1; l <= L; ++l)
      for (int c = 0; c < K; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        if (s > 1 && l == 1) {
          maps[cu].push_back(t.topDown.back()[cu]);
          continue;
        }
        const auto f = detail::bottom_up_features(config, t.appearance[static_cast<std::size_t>(l - 1)], maps, c, l);
        maps[cu].push_back(infer_level(model.bottom_up(s, c, l), f, level_size(image.size(), l)));
      }
    std::vector<ProbabilityMap> top;
    for (int c = 0; c < K; ++c) {
      const auto f = detail::top_down_features(config, t.appearance[0], image.size(), maps, c);
      top.push_back(infer_level(model.top_down(s, c), f, image.size()));
    }
    t.levelMaps.push_back(std::move(maps));
    t.topDown.push_back(std::move(top));
  }
  return t;
}

std::vector<ProbabilityMap> chm_infer(const ChmModel& model, const ImagePlane& image) {
  return chm_trace(model, image).topDown.back();
}

LabelMap predict_labels(const std::vector<ProbabilityMap>& classMaps, int classCount) {
  if (classMaps.empty()) throw std::invalid_argument("no class maps");
  const Size size = classMaps.front().size();
  std::vector<int> labels(size.area());
  if (classMaps.size() == 1) {
    const auto p = classMaps.front().values();
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = p[i] >= 0.5 ? 1 : 0;
    return LabelMap(size.width, size.height, std::max(classCount, 2), std::move(labels));
  }
  if (static_cast<int>(classMaps.size()) != classCount) throw std::invalid_argument("class map count mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int best = 0;
    for (int c = 1; c < classCount; ++c)
      if (classMaps[static_cast<std::size_t>(c)].values()[i] > classMaps[static_cast<std::size_t>(best)].values()[i]) best = c;
    labels[i] = best;
  }
  return LabelMap(size.width, size.height, classCount, std::move(labels));
}

}  // namespace chm

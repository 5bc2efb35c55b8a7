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


#include "chm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace chm {
namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

void require_same_size(Size a, Size b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": prediction and groundtruth sizes differ");
}

}  // namespace

ConfusionCounts::ConfusionCounts(int classCount)
    : classCount_(classCount),
      counts_(static_cast<std::size_t>(classCount) * static_cast<std::size_t>(classCount), 0) {
  if (classCount < 2) throw std::invalid_argument("confusion counts need at least two classes");
}

std::uint64_t ConfusionCounts::at(int truth, int predicted) const {
  return counts_.at(static_cast<std::size_t>(truth) * classCount_ + predicted);
}

void ConfusionCounts::add(int truth, int predicted, std::uint64_t n) {
  if (truth < 0 || truth >= classCount_ || predicted < 0 || predicted >= classCount_)
    throw std::invalid_argument("class id outside the confusion matrix");
  counts_[static_cast<std::size_t>(truth) * classCount_ + predicted] += n;
}

std::uint64_t ConfusionCounts::total() const {
  std::uint64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

BinaryScores binary_scores(const ConfusionCounts& c) {
  if (c.class_count() != 2) throw std::invalid_argument("binary scores need a 2-class confusion");
  BinaryScores s;
  s.precision = ratio(c.tp(), c.tp() + c.fp());
  s.recall = ratio(c.tp(), c.tp() + c.fn());
  s.trueNegativeRate = ratio(c.tn(), c.tn() + c.fp());
  s.fValue = harmonic(s.precision, s.recall);
  s.gMean = std::sqrt(s.recall * s.trueNegativeRate);
  s.pixelAccuracy = ratio(c.tp() + c.tn(), c.total());
  s.counts = c;
  return s;
}

ConfusionCounts binary_counts(const ProbabilityMap& pred, const LabelMap& gt, double threshold) {
  require_same_size(pred.size(), gt.size(), "binary_scores");
  ConfusionCounts c(2);
  const auto p = pred.values();
  const auto g = gt.values();
  std::uint64_t n[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < p.size(); ++i) ++n[g[i] > 0 ? 1 : 0][p[i] >= threshold ? 1 : 0];
  for (int t = 0; t < 2; ++t)
    for (int q = 0; q < 2; ++q) c.add(t, q, n[t][q]);
  return c;
}

BinaryScores binary_scores(const ProbabilityMap& pred, const LabelMap& gt, double threshold) {
  return binary_scores(binary_counts(pred, gt, threshold));
}

MulticlassScores multiclass_scores(const ConfusionCounts& confusion) {
  MulticlassScores s{0.0, 0.0, confusion};
  std::uint64_t correct = 0;
  double recallSum = 0.0;
  int present = 0;
  for (int t = 0; t < confusion.class_count(); ++t) {
    std::uint64_t row = 0;
    for (int q = 0; q < confusion.class_count(); ++q) row += confusion.at(t, q);
    correct += confusion.at(t, t);
    if (row == 0) continue;
    recallSum += static_cast<double>(confusion.at(t, t)) / static_cast<double>(row);
    ++present;
  }
  s.pixelAccuracy = ratio(correct, confusion.total());
  s.classAverageAccuracy = present == 0 ? 1.0 : recallSum / present;
  return s;
}

MulticlassScores multiclass_scores(const LabelMap& pred, const LabelMap& gt) {
  require_same_size(pred.size(), gt.size(), "multiclass_scores");
  if (pred.class_count() != gt.class_count())
    throw std::invalid_argument("multiclass_scores: class counts differ");
  ConfusionCounts c(gt.class_count());
  const auto p = pred.values();
  const auto g = gt.values();
  for (std::size_t i = 0; i < p.size(); ++i) c.add(g[i], p[i]);
  return multiclass_scores(c);
}

// ---------------------------------------------------------------------------

double benchmark_threshold(int index) { return (index + 1) / 100.0; }

double BoundaryCounts::precision() const { return ratio(matchedPredicted, predicted); }
double BoundaryCounts::recall() const { return ratio(matchedTruth, truth); }
double BoundaryCounts::f_value() const { return harmonic(precision(), recall()); }

BoundaryCounts& BoundaryCounts::operator+=(const BoundaryCounts& o) {
  predicted += o.predicted;
  matchedPredicted += o.matchedPredicted;
  truth += o.truth;
  matchedTruth += o.matchedTruth;
  return *this;
}

Matching greedy_match(const std::vector<char>& predictedMask, const LabelMap& truth, double radius) {
  const int w = truth.width(), h = truth.height();
  if (predictedMask.size() != truth.size().area())
    throw std::invalid_argument("greedy_match: mask and groundtruth sizes differ");
  std::vector<int> truthIndex(predictedMask.size(), -1);
  int nt = 0;
  for (std::size_t i = 0; i < truthIndex.size(); ++i)
    if (truth.values()[i] > 0) truthIndex[i] = nt++;
  int np = 0;
  const int reach = static_cast<int>(std::floor(radius));
  const double r2 = radius * radius;
  struct Pair {
    int d2, p, t;
  };
  std::vector<Pair> pairs;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!predictedMask[static_cast<std::size_t>(r) * w + c]) continue;
      for (int dr = -reach; dr <= reach; ++dr)
        for (int dc = -reach; dc <= reach; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w || dr * dr + dc * dc > r2) continue;
          const int t = truthIndex[static_cast<std::size_t>(rr) * w + cc];
          if (t >= 0) pairs.push_back({dr * dr + dc * dc, np, t});
        }
      ++np;
    }
  // Nearest first, ties in scan order. Not optimal: a crossing can strand
  // a few pixels that a full assignment would have paired.
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return std::tie(a.d2, a.p, a.t) < std::tie(b.d2, b.p, b.t); });
  Matching m{std::vector<char>(static_cast<std::size_t>(np), 0), std::vector<char>(static_cast<std::size_t>(nt), 0)};
  for (const auto& q : pairs) {
    if (m.predicted[static_cast<std::size_t>(q.p)] || m.truth[static_cast<std::size_t>(q.t)]) continue;
    m.predicted[static_cast<std::size_t>(q.p)] = 1;
    m.truth[static_cast<std::size_t>(q.t)] = 1;
  }
  return m;
}

BoundaryCounts boundary_counts(const ProbabilityMap& map, const AnnotatorSet& truth, double threshold,
                               double toleranceFraction) {
  if (truth.empty()) throw std::invalid_argument("boundary benchmark needs at least one annotator per image");
  const double radius = toleranceFraction * std::hypot(map.width(), map.height());
  std::vector<char> mask(map.values().size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = map.values()[i] >= threshold;
  BoundaryCounts out;
  std::vector<char> matchedAny;
  for (const auto& annotator : truth) {
    require_same_size(map.size(), annotator.size(), "boundary_benchmark");
    const Matching m = greedy_match(mask, annotator, radius);
    if (matchedAny.empty()) matchedAny.assign(m.predicted.size(), 0);
    for (std::size_t i = 0; i < m.predicted.size(); ++i) matchedAny[i] |= m.predicted[i];
    out.truth += m.truth.size();
    out.matchedTruth += static_cast<std::uint64_t>(std::count(m.truth.begin(), m.truth.end(), 1));
  }
  out.predicted = matchedAny.size();
  out.matchedPredicted = static_cast<std::uint64_t>(std::count(matchedAny.begin(), matchedAny.end(), 1));
  return out;
}

double average_precision(std::span<const PrPoint> curve) {
  if (curve.empty()) return 0.0;
  std::vector<std::pair<double, double>> pts;  // (recall, precision)
  for (const auto& p : curve) pts.emplace_back(p.recall, p.precision);
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = pts.size() - 1; i-- > 0;) pts[i].second = std::max(pts[i].second, pts[i + 1].second);
  double area = pts.front().first * pts.front().second;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].first - pts[i - 1].first) * 0.5 * (pts[i].second + pts[i - 1].second);
  return std::clamp(area, 0.0, 1.0);
}

BoundaryResult boundary_benchmark(std::span<const ProbabilityMap> maps, std::span<const AnnotatorSet> truth,
                                  double toleranceFraction) {
  if (maps.size() != truth.size()) throw std::invalid_argument("boundary benchmark: one annotator set per map");
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (truth[i].empty()) throw std::invalid_argument("boundary benchmark needs at least one annotator per image");
    for (const auto& a : truth[i]) require_same_size(maps[i].size(), a.size(), "boundary_benchmark");
  }
  BoundaryResult res;
  res.perImage.resize(maps.size());
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
  for (std::size_t i = 0; i < maps.size(); ++i) {
    res.perImage[i].resize(kThresholdCount);
    for (int k = 0; k < kThresholdCount; ++k)
      res.perImage[i][static_cast<std::size_t>(k)] =
          boundary_counts(maps[i], truth[i], benchmark_threshold(k), toleranceFraction);
  }
  std::uint64_t anyTruth = 0;
  for (const auto& img : res.perImage)
    if (!img.empty()) anyTruth += img.front().truth;
  if (anyTruth == 0) throw DataError("boundary benchmark: no groundtruth boundary pixels in the dataset");

  res.ods = -1.0;
  for (int k = 0; k < kThresholdCount; ++k) {
    BoundaryCounts pooled;
    for (const auto& img : res.perImage) pooled += img[static_cast<std::size_t>(k)];
    const PrPoint pt{benchmark_threshold(k), pooled.precision(), pooled.recall(), pooled.f_value()};
    res.curve.push_back(pt);
    if (pt.fValue > res.ods) {
      res.ods = pt.fValue;
      res.odsThreshold = pt.threshold;
    }
  }
  double sum = 0.0;
  for (const auto& img : res.perImage) {
    double best = 0.0;
    for (const auto& c : img) best = std::max(best, c.f_value());
    sum += best;
  }
  res.ois = sum / static_cast<double>(res.perImage.size());
  res.ap = average_precision(res.curve);
  return res;
}

void write_pr_curve(std::ostream& out, std::span<const PrPoint> curve) {
  out << "threshold,precision,recall,f\n";
  out.precision(17);
  for (const auto& p : curve) out << p.threshold << ',' << p.precision << ',' << p.recall << ',' << p.fValue << '\n';
}

}  // namespace chm

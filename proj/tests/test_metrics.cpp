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


#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "chm/metrics.hpp"
#include "oracles.hpp"

using namespace chm;

namespace {

ConfusionCounts binary(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
  ConfusionCounts c(2);
  c.add(1, 1, tp);
  c.add(0, 1, fp);
  c.add(1, 0, fn);
  c.add(0, 0, tn);
  return c;
}

double safe(double num, double den) { return den == 0 ? 1.0 : num / den; }

LabelMap mask(int w, int h, const std::vector<std::pair<int, int>>& on) {
  std::vector<int> v(static_cast<std::size_t>(w) * h, 0);
  for (auto [r, c] : on) v[static_cast<std::size_t>(r) * w + c] = 1;
  return LabelMap(w, h, 2, v);
}

// Random boundary fixture: a jittered polyline for the groundtruth and a noisy,
// partly displaced copy with random strengths for the prediction.
struct Fixture {
  ProbabilityMap map;
  LabelMap truth;
};

Fixture random_fixture(std::mt19937_64& rng, int w, int h, int maxPixels) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<int, int>> gt;
  int r = static_cast<int>(rng() % h), c = 0;
  const bool horizontal = rng() % 2;
  std::vector<int> seen(static_cast<std::size_t>(w) * h, 0);
  for (int k = 0; k < std::max(w, h) && static_cast<int>(gt.size()) < maxPixels / 2; ++k) {
    const int rr = horizontal ? r : c, cc = horizontal ? c : r;
    if (rr >= 0 && rr < h && cc >= 0 && cc < w && !seen[static_cast<std::size_t>(rr) * w + cc]) {
      seen[static_cast<std::size_t>(rr) * w + cc] = 1;
      gt.emplace_back(rr, cc);
    }
    ++c;
    r = std::clamp(r + static_cast<int>(rng() % 3) - 1, 0, (horizontal ? h : w) - 1);
  }
  std::vector<double> p(static_cast<std::size_t>(w) * h, 0.0);
  for (auto [gr, gc] : gt) {
    if (u(rng) < 0.2) continue;
    const int pr = std::clamp(gr + static_cast<int>(rng() % 3) - 1, 0, h - 1);
    const int pc = std::clamp(gc + static_cast<int>(rng() % 3) - 1, 0, w - 1);
    p[static_cast<std::size_t>(pr) * w + pc] = 0.3 + 0.7 * u(rng);
  }
  for (int k = 0; k < maxPixels / 2 - static_cast<int>(gt.size()) / 2; ++k)
    p[rng() % p.size()] = u(rng) * 0.8;
  return {ProbabilityMap(w, h, p), mask(w, h, gt)};
}

// Counts with a maximum-cardinality matching instead of the greedy one.
BoundaryCounts optimal_counts(const ProbabilityMap& map, const LabelMap& truth, double threshold, double radius) {
  const int w = map.width(), h = map.height();
  std::vector<std::pair<int, int>> pred, gt;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (map.at(r, c) >= threshold) pred.emplace_back(r, c);
      if (truth.at(r, c) > 0) gt.emplace_back(r, c);
    }
  std::vector<std::vector<int>> adj(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = 0; j < gt.size(); ++j) {
      const double dr = pred[i].first - gt[j].first, dc = pred[i].second - gt[j].second;
      if (dr * dr + dc * dc <= radius * radius) adj[i].push_back(static_cast<int>(j));
    }
  const int m = oracle::max_matching(static_cast<int>(pred.size()), static_cast<int>(gt.size()), adj);
  return {pred.size(), static_cast<std::uint64_t>(m), gt.size(), static_cast<std::uint64_t>(m)};
}

}  // namespace

TEST_CASE("binary score arithmetic") {
  const BinaryScores s = binary_scores(binary(8, 2, 2, 88));
  CHECK(s.precision == doctest::Approx(0.8));
  CHECK(s.recall == doctest::Approx(0.8));
  CHECK(s.fValue == doctest::Approx(0.8));
  CHECK(s.pixelAccuracy == doctest::Approx(0.96));
  const BinaryScores g = binary_scores(binary(8, 9, 2, 81));  // recall 0.8, TNR 0.9
  CHECK(g.gMean == doctest::Approx(std::sqrt(0.72)));
  CHECK(g.gMean == doctest::Approx(0.8485).epsilon(1e-4));
}

TEST_CASE("perfect binary prediction scores 1 everywhere") {
  const LabelMap gt = mask(4, 3, {{0, 0}, {1, 2}, {2, 3}});
  std::vector<double> p;
  for (int v : gt.values()) p.push_back(v);
  const BinaryScores s = binary_scores(ProbabilityMap(4, 3, p), gt, 0.5);
  CHECK(s.fValue == 1.0);
  CHECK(s.gMean == 1.0);
  CHECK(s.pixelAccuracy == 1.0);
  CHECK_THROWS_AS(binary_scores(ProbabilityMap(3, 3, std::vector<double>(9, 0.0)), gt), std::invalid_argument);
}

TEST_CASE("G-mean is symmetric in the classes, F is not") {
  const ConfusionCounts c = binary(5, 3, 15, 77);
  const ConfusionCounts swapped = binary(77, 15, 3, 5);
  CHECK(binary_scores(c).gMean == doctest::Approx(binary_scores(swapped).gMean));
  CHECK(binary_scores(c).fValue != doctest::Approx(binary_scores(swapped).fValue));
}

TEST_CASE("binary and multiclass scores match brute-force counting on random fixtures") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 8), h = 1 + static_cast<int>(rng() % 8);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    const double t = u(rng);
    std::vector<double> p(n);
    std::vector<int> gt(n), pred(n), gtBin(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng() % 5 == 0 ? t : u(rng);  // exercise p == threshold
      gtBin[i] = static_cast<int>(rng() % 2);
      pred[i] = p[i] >= t;
    }
    const auto o = oracle::count_binary(pred, gtBin);
    const BinaryScores s = binary_scores(ProbabilityMap(w, h, p), LabelMap(w, h, 2, gtBin), t);
    CHECK(s.counts.tp() == static_cast<std::uint64_t>(o.tp));
    CHECK(s.counts.fp() == static_cast<std::uint64_t>(o.fp));
    CHECK(s.counts.fn() == static_cast<std::uint64_t>(o.fn));
    CHECK(s.counts.tn() == static_cast<std::uint64_t>(o.tn));
    const double prec = safe(o.tp, o.tp + o.fp), rec = safe(o.tp, o.tp + o.fn), tnr = safe(o.tn, o.tn + o.fp);
    CHECK(s.fValue == doctest::Approx(prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0).epsilon(1e-12));
    CHECK(s.gMean == doctest::Approx(std::sqrt(rec * tnr)).epsilon(1e-12));
    CHECK(s.pixelAccuracy == doctest::Approx(static_cast<double>(o.tp + o.tn) / n).epsilon(1e-12));

    const int C = 2 + static_cast<int>(rng() % 4);
    std::vector<int> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng() % C);
      b[i] = rng() % 3 == 0 ? a[i] : static_cast<int>(rng() % C);
    }
    const MulticlassScores m = multiclass_scores(LabelMap(w, h, C, b), LabelMap(w, h, C, a));
    std::vector<std::vector<std::uint64_t>> conf(static_cast<std::size_t>(C), std::vector<std::uint64_t>(static_cast<std::size_t>(C), 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ++conf[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])];
      correct += a[i] == b[i];
    }
    double recallSum = 0.0;
    int present = 0;
    for (int k = 0; k < C; ++k) {
      std::uint64_t row = 0;
      for (int q = 0; q < C; ++q) {
        CHECK(m.confusion.at(k, q) == conf[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)]);
        row += conf[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)];
      }
      if (row) {
        recallSum += static_cast<double>(conf[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)]) / row;
        ++present;
      }
    }
    CHECK(m.confusion.total() == n);
    CHECK(m.pixelAccuracy == doctest::Approx(static_cast<double>(correct) / n).epsilon(1e-12));
    CHECK(m.classAverageAccuracy == doctest::Approx(recallSum / present).epsilon(1e-12));
  }
}

TEST_CASE("multiclass examples") {
  const LabelMap gt(4, 1, 3, {0, 1, 2, 2});
  const MulticlassScores same = multiclass_scores(gt, gt);
  CHECK(same.pixelAccuracy == 1.0);
  CHECK(same.classAverageAccuracy == 1.0);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) CHECK(same.confusion.at(a, b) == (a == b ? (a == 2 ? 2u : 1u) : 0u));

  // the rare class is always wrong: high pixel accuracy, class average 0.5
  std::vector<int> truth(10, 0), pred(10, 0);
  truth[9] = 1;
  const MulticlassScores s = multiclass_scores(LabelMap(10, 1, 2, pred), LabelMap(10, 1, 2, truth));
  CHECK(s.pixelAccuracy == doctest::Approx(0.9));
  CHECK(s.classAverageAccuracy == doctest::Approx(0.5));
}

TEST_CASE("greedy matching takes the nearest pairs first") {
  // prediction at column 1 could match truth at 0 or 1; it must take the exact hit
  const LabelMap truth = mask(4, 1, {{0, 0}, {0, 1}});
  const Matching m = greedy_match({0, 1, 0, 0}, truth, 1.0);
  CHECK(m.predicted == std::vector<char>{1});
  CHECK(m.truth == std::vector<char>{0, 1});
  const Matching two = greedy_match({1, 0, 1, 0}, mask(4, 1, {{0, 1}, {0, 3}}), 1.0);
  CHECK(two.predicted == std::vector<char>{1, 1});
  CHECK(greedy_match({1, 0, 0, 0}, mask(4, 1, {{0, 2}}), 1.5).predicted == std::vector<char>{0});
}

TEST_CASE("boundary counts pool annotators") {
  const ProbabilityMap map(5, 1, {1.0, 0.0, 0.0, 0.0, 1.0});
  const AnnotatorSet truth = {mask(5, 1, {{0, 0}}), mask(5, 1, {{0, 4}, {0, 2}})};
  const BoundaryCounts c = boundary_counts(map, truth, 0.5, 0.0);
  CHECK(c.predicted == 2);
  CHECK(c.matchedPredicted == 2);  // each matched in some annotator
  CHECK(c.truth == 3);
  CHECK(c.matchedTruth == 2);
}

TEST_CASE("benchmark: prediction identical to the groundtruth") {
  const LabelMap gt = mask(20, 20, {{3, 3}, {3, 4}, {3, 5}, {10, 10}, {11, 10}});
  std::vector<double> p;
  for (int v : gt.values()) p.push_back(v);
  const std::vector<ProbabilityMap> maps = {ProbabilityMap(20, 20, p)};
  const std::vector<AnnotatorSet> truth = {{gt}};
  const BoundaryResult r = boundary_benchmark(maps, truth);
  CHECK(r.ods == 1.0);
  CHECK(r.ois == 1.0);
  CHECK(r.ap == doctest::Approx(1.0));
  CHECK(r.curve.size() == 99);
}

TEST_CASE("benchmark: one-pixel shift is within a two-pixel tolerance") {
  std::vector<std::pair<int, int>> line, shifted;
  for (int r = 10; r < 90; ++r) {
    line.emplace_back(r, 50);
    shifted.emplace_back(r, 51);
  }
  const LabelMap gt = mask(100, 100, line);
  std::vector<double> p(10000, 0.0);
  for (auto [r, c] : shifted) p[static_cast<std::size_t>(r) * 100 + c] = 0.9;
  const std::vector<ProbabilityMap> maps = {ProbabilityMap(100, 100, p)};
  const std::vector<AnnotatorSet> truth = {{gt}};
  const double tol = 2.0 / std::hypot(100.0, 100.0);
  CHECK(boundary_benchmark(maps, truth, tol).ods == 1.0);
  CHECK(boundary_benchmark(maps, truth, 0.5 / std::hypot(100.0, 100.0)).ods == 0.0);
}

TEST_CASE("benchmark rejects datasets without any boundary") {
  const std::vector<ProbabilityMap> maps = {ProbabilityMap(4, 4, std::vector<double>(16, 0.7))};
  const std::vector<AnnotatorSet> truth = {{mask(4, 4, {})}};
  CHECK_THROWS_AS(boundary_benchmark(maps, truth), DataError);
}

TEST_CASE("greedy matching is maximal and never beats the optimal one") {
  std::mt19937_64 rng(99);
  const double radius = 2.5;
  std::uint64_t greedyTotal = 0, optimalTotal = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Fixture f = random_fixture(rng, 24, 24, 50);
    const double thr = benchmark_threshold(static_cast<int>(rng() % kThresholdCount));
    std::vector<char> on(f.map.values().size());
    for (std::size_t i = 0; i < on.size(); ++i) on[i] = f.map.values()[i] >= thr;
    const Matching m = greedy_match(on, f.truth, radius);
    const auto g = static_cast<std::uint64_t>(std::count(m.predicted.begin(), m.predicted.end(), 1));
    CHECK(g == static_cast<std::uint64_t>(std::count(m.truth.begin(), m.truth.end(), 1)));
    const BoundaryCounts opt = optimal_counts(f.map, f.truth, thr, radius);
    CHECK(g <= opt.matchedTruth);
    CHECK(2 * g >= opt.matchedTruth);  // any maximal matching is half-optimal
    greedyTotal += g;
    optimalTotal += opt.matchedTruth;
    // maximal: no unmatched prediction sits within reach of an unmatched truth pixel
    std::vector<std::pair<int, int>> freeP, freeT;
    std::size_t ip = 0, it = 0;
    for (int r = 0; r < 24; ++r)
      for (int c = 0; c < 24; ++c) {
        if (on[static_cast<std::size_t>(r) * 24 + c] && !m.predicted[ip++]) freeP.emplace_back(r, c);
        if (f.truth.at(r, c) > 0 && !m.truth[it++]) freeT.emplace_back(r, c);
      }
    for (auto [pr, pc] : freeP)
      for (auto [tr, tc] : freeT) CHECK((pr - tr) * (pr - tr) + (pc - tc) * (pc - tc) > radius * radius);
  }
  MESSAGE("greedy matched " << greedyTotal << " of " << optimalTotal << " optimally matchable pairs");
  CHECK(static_cast<double>(greedyTotal) >= 0.9 * static_cast<double>(optimalTotal));
}

TEST_CASE("greedy benchmark curve is bounded by the optimal one") {
  std::mt19937_64 rng(5);
  for (int set = 0; set < 10; ++set) {
    std::vector<ProbabilityMap> maps;
    std::vector<AnnotatorSet> truth;
    for (int i = 0; i < 4; ++i) {
      const Fixture f = random_fixture(rng, 24, 24, 50);
      maps.push_back(f.map);
      truth.push_back({f.truth});
    }
    const double tol = 0.05;
    const BoundaryResult r = boundary_benchmark(maps, truth, tol);
    for (int k = 0; k < kThresholdCount; ++k) {
      BoundaryCounts pooled;
      for (std::size_t i = 0; i < maps.size(); ++i)
        pooled += optimal_counts(maps[i], truth[i].front(), benchmark_threshold(k), tol * std::hypot(24.0, 24.0));
      CHECK(r.curve[static_cast<std::size_t>(k)].fValue <= pooled.f_value() + 1e-12);
    }
  }
}

TEST_CASE("benchmark invariants on random fixture sets") {
  std::mt19937_64 rng(7);
  for (int set = 0; set < 30; ++set) {
    std::vector<ProbabilityMap> maps;
    std::vector<AnnotatorSet> truth;
    const int images = 2 + static_cast<int>(rng() % 5);
    for (int i = 0; i < images; ++i) {
      AnnotatorSet annotators;
      const Fixture f = random_fixture(rng, 32, 32, 60);
      annotators.push_back(f.truth);
      if (rng() % 2) annotators.push_back(random_fixture(rng, 32, 32, 60).truth);
      maps.push_back(f.map);
      truth.push_back(annotators);
    }
    const BoundaryResult r = boundary_benchmark(maps, truth, 0.05);
    // OIS picks each image's best threshold, so it dominates the per-image
    // mean at the ODS threshold (it need not dominate pooled ODS itself)
    double meanAtOds = 0.0;
    for (const auto& img : r.perImage) {
      const auto k = static_cast<std::size_t>(std::lround(r.odsThreshold * 100.0)) - 1;
      meanAtOds += img[k].f_value() / static_cast<double>(r.perImage.size());
    }
    CHECK(r.ois >= meanAtOds - 1e-12);
    CHECK((r.ap >= 0.0 && r.ap <= 1.0));
    REQUIRE(r.curve.size() == 99);
    for (std::size_t k = 0; k < r.curve.size(); ++k) {
      CHECK((r.curve[k].precision >= 0.0 && r.curve[k].precision <= 1.0));
      CHECK((r.curve[k].recall >= 0.0 && r.curve[k].recall <= 1.0));
      if (k) CHECK(r.curve[k].recall <= r.curve[k - 1].recall);
    }
  }
}

TEST_CASE("average precision of simple curves") {
  const std::vector<PrPoint> flat = {{0.1, 1.0, 1.0, 1.0}};
  CHECK(average_precision(flat) == doctest::Approx(1.0));
  // precision made non-increasing in recall: the 0.4 dip at recall 0.5 is lifted to 0.6
  const std::vector<PrPoint> dip = {{0.2, 0.6, 0.8, 0}, {0.5, 0.4, 0.5, 0}, {0.9, 1.0, 0.2, 0}};
  const double expected = 0.2 * 1.0 + 0.3 * 0.8 + 0.3 * 0.6;
  CHECK(average_precision(dip) == doctest::Approx(expected));
}

TEST_CASE("PR curve export has one row per threshold") {
  const LabelMap gt = mask(10, 10, {{2, 2}, {5, 5}});
  std::mt19937_64 rng(1);
  const auto g = oracle::random_grid(rng, 10, 10);
  std::vector<double> p;
  for (const auto& row : g) p.insert(p.end(), row.begin(), row.end());
  const std::vector<ProbabilityMap> maps = {ProbabilityMap(10, 10, p)};
  const std::vector<AnnotatorSet> truth = {{gt}};
  std::ostringstream out;
  write_pr_curve(out, boundary_benchmark(maps, truth).curve);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "threshold,precision,recall,f");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 99);
}

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

// Acceptance run: one PASS/FAIL line per criterion, with timings. Exit status
// is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "chm/commands.hpp"
#include "chm/edges.hpp"
#include "chm/io.hpp"
#include "chm/ldnn.hpp"
#include "chm/metrics.hpp"
#include "chm/model.hpp"
#include "chm/pyramid.hpp"
#include "chm/synth.hpp"
#include "oracles.hpp"

using namespace chm;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

struct Timer {
  Clock::time_point start = Clock::now();
  double seconds() const { return std::chrono::duration<double>(Clock::now() - start).count(); }
};

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s  %2d  %-28s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Plane to_plane(const oracle::Grid& g) {
  std::vector<double> v;
  for (const auto& row : g) v.insert(v.end(), row.begin(), row.end());
  return Plane(static_cast<int>(g.front().size()), static_cast<int>(g.size()), std::move(v));
}

bool same(const Plane& p, const oracle::Grid& g) {
  if (p.height() != static_cast<int>(g.size()) || p.width() != static_cast<int>(g.front().size())) return false;
  for (int r = 0; r < p.height(); ++r)
    for (int c = 0; c < p.width(); ++c)
      if (p.at(r, c) != g[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) return false;
  return true;
}

double safe(double num, double den) { return den == 0 ? 1.0 : num / den; }

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

// ---------------------------------------------------------------------------

void operators() {
  Timer t;
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> dim(1, 9), times(0, 3);
  int bad = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int h = dim(rng), w = dim(rng), l = times(rng);
    const auto g = oracle::random_grid(rng, h, w);
    const Plane p = to_plane(g);
    bad += !same(downsample(p, l), oracle::average_pool(g, l));
    bad += !same(maxpool(p, l), oracle::max_pool(g, l));
    bad += !same(upsample(p, l), oracle::duplicate(g, l, h << l, w << l));
  }
  const double s = t.seconds();
  report(1, "operator oracles", bad == 0 && s < 5.0,
         std::to_string(bad) + " mismatches on 500 grids, " + fmt("%.3f s (limit 5)", s));
}

void gradient_check() {
  Timer t;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0), w(0.0, 0.5);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 4), m = 1 + static_cast<int>(rng() % 4);
    const std::size_t d = 1 + rng() % 6;
    std::vector<double> p0(static_cast<std::size_t>(n) * m * (d + 1));
    for (auto& v : p0) v = w(rng);
    std::vector<double> x(d);
    for (auto& v : x) v = g(rng);
    const int y = static_cast<int>(rng() % 2);
    const auto analytic = gradient(LdnnModel(n, m, d, p0, false), x, y);
    auto loss = [&](const std::vector<double>& p) {
      const double f = evaluate(LdnnModel(n, m, d, p, false), x);
      return (f - y) * (f - y);
    };
    for (std::size_t i = 0; i < p0.size(); ++i) {
      const double num = oracle::central_difference(loss, p0, i, 1e-5);
      worst = std::max(worst, std::abs(num - analytic.params[i]) /
                                  std::max({std::abs(num), std::abs(analytic.params[i]), 1e-6}));
    }
  }
  const double s = t.seconds();
  report(2, "LDNN gradient check", worst < 1e-4 && s < 10.0,
         fmt("max relative error %.2e (limit 1e-4), ", worst) + fmt("%.3f s (limit 10)", s));
}

void xor_blobs() {
  Timer t;
  const PointSet ps = synth_xor_blobs(2000, 42);
  TrainingParams p;
  p.epochs = 200;
  p.dropout = false;
  Rng rng(42);
  const LdnnModel m = fit_ldnn(ps.points, ps.labels, 4, 4, p, rng).model;
  const auto y = evaluate_rows(m, ps.points);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += (y[i] >= 0.5) == (ps.labels[i] == 1);
  const double acc = static_cast<double>(ok) / static_cast<double>(y.size());
  const double s = t.seconds();
  report(3, "LDNN xor-blobs", acc >= 0.99 && s < 30.0,
         fmt("training accuracy %.4f (need 0.99), ", acc) + fmt("%.1f s (limit 30)", s));
}

// Pooled test F of the final (top-down) map at threshold 0.5.
double test_f(const ChmModel& model, const std::vector<TrainingImage>& data) {
  ConfusionCounts pooled(2);
  for (const auto& img : data) {
    const ConfusionCounts c = binary_counts(chm_infer(model, img.image).front(), img.labels);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) pooled.add(a, b, c.at(a, b));
  }
  return binary_scores(pooled).fValue;
}

ChmConfig texture_config(int levels, int stages) {
  ChmConfig c;
  c.levels = levels;
  c.stages = stages;
  c.groups = 4;
  c.perGroup = 4;
  c.training.epochs = 10;
  c.training.maxSamples = 100000;
  c.training.seed = 1;
  return c;
}

ChmModel first_stage(ChmModel m) {
  m.stages.resize(1);
  m.config.stages = 1;
  return m;
}

void textures() {
  const auto train = synth_textures(50, 64, 1), test = synth_textures(20, 64, 2);

  Timer t4;
  const TrainResult flat = chm_train(train, texture_config(1, 1));
  const TrainResult deep = chm_train(train, texture_config(3, 1));
  const double f1 = test_f(flat.model, test), f3 = test_f(deep.model, test);
  const double s4 = t4.seconds();
  report(4, "context wins (textures)", f3 - f1 >= 0.05 && s4 < 600.0,
         fmt("test F L=3 %.4f", f3) + fmt(" vs L=1 %.4f", f1) + fmt(" (gain %.4f, need 0.05), ", f3 - f1) +
             fmt("%.1f s (limit 600)", s4));

  Timer t5;
  const TrainResult two = chm_train(train, texture_config(3, 2));
  const double test1 = test_f(first_stage(two.model), test), test2 = test_f(two.model, test);
  const double train1 = two.report.stages.at(0).trainF, train2 = two.report.stages.at(1).trainF;
  const double s5 = t5.seconds();
  report(5, "stacking helps (textures)", test2 >= test1 - 0.01 && train2 >= train1 && s5 < 1200.0,
         fmt("test F %.4f", test1) + fmt(" -> %.4f, ", test2) + fmt("train F %.4f", train1) +
             fmt(" -> %.4f, ", train2) + fmt("%.1f s (limit 1200)", s5));

  // accounting, from the two-stage run's log
  bool exact = true;
  for (const auto& st : two.report.stages) {
    double levels = 0.0, top = 0.0;
    for (const auto& rec : two.report.levels) {
      if (rec.stage != st.stage) continue;
      if (rec.level == 0) top = rec.logLoss;
      else levels += rec.logLoss;
    }
    exact = exact && st.J1 == levels && st.J2 == top;
  }
  // and against an independent recomputation on a few training images
  double j1 = 0.0, j2 = 0.0;
  const ChmModel one = first_stage(two.model);
  for (const auto& img : train) {
    const InferenceTrace tr = chm_trace(one, img.image);
    const Plane y = img.labels.indicator(1);
    auto loss = [](const ProbabilityMap& p, const Plane& target) {
      double s = 0.0;
      for (std::size_t i = 0; i < target.values().size(); ++i) {
        const double q = std::clamp(p.values()[i], 1e-12, 1.0 - 1e-12);
        s -= target.values()[i] > 0.5 ? std::log(q) : std::log(1.0 - q);
      }
      return s;
    };
    for (int l = 1; l <= 3; ++l) j1 += loss(tr.levelMaps[0][0][static_cast<std::size_t>(l - 1)], maxpool(y, l - 1));
    j2 += loss(tr.topDown[0][0], y);
  }
  const auto& s1 = two.report.stages.at(0);
  const bool recomputed = std::abs(s1.J1 - j1) <= 1e-9 * j1 && std::abs(s1.J2 - j2) <= 1e-9 * j2;
  report(6, "J1/J2 accounting", exact && recomputed,
         std::string(exact ? "logged J1, J2 equal the per-classifier sums exactly" : "logged totals differ") +
             fmt("; recomputed J1 %.6g", j1) + fmt(" vs %.6g", s1.J1) + fmt(", J2 %.6g", j2) +
             fmt(" vs %.6g", s1.J2));
}

// ---------------------------------------------------------------------------

LabelMap mask(int w, int h, const std::vector<std::pair<int, int>>& on) {
  std::vector<int> v(static_cast<std::size_t>(w) * h, 0);
  for (auto [r, c] : on) v[static_cast<std::size_t>(r) * w + c] = 1;
  return LabelMap(w, h, 2, v);
}

struct Fixture {
  ProbabilityMap map;
  LabelMap truth;
};

// Jittered polyline groundtruth; the prediction is a noisy, partly displaced
// copy with random strengths plus scattered false positives.
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
  for (int k = 0; k < maxPixels / 2 - static_cast<int>(gt.size()) / 2; ++k) p[rng() % p.size()] = u(rng) * 0.8;
  return {ProbabilityMap(w, h, p), mask(w, h, gt)};
}

// Thin boundary in a BSDS-sized frame: one or two short random-walk curves;
// the prediction follows each with a drifting offset and gaps, plus a few
// spurious pixels nearby. Pixel budget (truth + prediction) is maxPixels.
Fixture curve_fixture(std::mt19937_64& rng, int w, int h, int maxPixels) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<int, int>> gt;
  std::vector<int> seen(static_cast<std::size_t>(w) * h, 0);
  std::vector<double> p(static_cast<std::size_t>(w) * h, 0.0);
  const int r0 = h / 2, c0 = w / 2;
  int budget = maxPixels;
  const int curves = 1 + static_cast<int>(rng() % 2);
  for (int k = 0; k < curves; ++k) {
    const bool horizontal = k == 0 ? rng() % 2 == 1 : !(rng() % 4 == 0);
    int along = -12, across = static_cast<int>(rng() % 9) - 4, off = 0;
    const int share = budget / (curves - k);
    int used = 0;
    for (; along < 40 && used + 2 <= share; ++along) {
      auto at = [&](int a, int b) { return horizontal ? std::pair(r0 + b, c0 + a) : std::pair(r0 + a, c0 + b); };
      const auto [gr, gc] = at(along, across);
      if (!seen[static_cast<std::size_t>(gr) * w + gc]) {
        seen[static_cast<std::size_t>(gr) * w + gc] = 1;
        gt.emplace_back(gr, gc);
        ++used;
      }
      if (u(rng) < 0.15) off = std::clamp(off + (u(rng) < 0.5 ? -1 : 1), -2, 2);
      if (u(rng) > 0.1) {
        const auto [pr, pc] = at(along, across + off);
        p[static_cast<std::size_t>(pr) * w + pc] = 0.3 + 0.7 * u(rng);
        ++used;
      }
      if (u(rng) < 0.3) across += u(rng) < 0.5 ? -1 : 1;
    }
    budget -= used;
  }
  for (int k = 0; k < budget; ++k) {
    const int r = r0 + static_cast<int>(rng() % 41) - 20, c = c0 + static_cast<int>(rng() % 41) - 20;
    p[static_cast<std::size_t>(r) * w + c] = u(rng) * 0.8;
  }
  return {ProbabilityMap(w, h, p), mask(w, h, gt)};
}

// Counts from a maximum-cardinality matching.
BoundaryCounts optimal_counts(const ProbabilityMap& map, const LabelMap& truth, double threshold, double radius) {
  std::vector<std::pair<int, int>> pred, gt;
  for (int r = 0; r < map.height(); ++r)
    for (int c = 0; c < map.width(); ++c) {
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

void metrics() {
  Timer t;
  // (a) confusion-based scores against brute-force counting
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 8), h = 1 + static_cast<int>(rng() % 8);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    const double thr = u(rng);
    std::vector<double> p(n);
    std::vector<int> gt(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng() % 5 == 0 ? thr : u(rng);
      gt[i] = static_cast<int>(rng() % 2);
      pred[i] = p[i] >= thr;
    }
    const auto o = oracle::count_binary(pred, gt);
    const BinaryScores s = binary_scores(ProbabilityMap(w, h, p), LabelMap(w, h, 2, gt), thr);
    const double prec = safe(o.tp, o.tp + o.fp), rec = safe(o.tp, o.tp + o.fn), tnr = safe(o.tn, o.tn + o.fp);
    bad += !(s.counts.tp() == static_cast<std::uint64_t>(o.tp) && s.counts.fp() == static_cast<std::uint64_t>(o.fp) &&
             s.counts.fn() == static_cast<std::uint64_t>(o.fn) && s.counts.tn() == static_cast<std::uint64_t>(o.tn));
    bad += !close(s.precision, prec) || !close(s.recall, rec) || !close(s.trueNegativeRate, tnr);
    bad += !close(s.fValue, prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0);
    bad += !close(s.gMean, std::sqrt(rec * tnr));
    bad += !close(s.pixelAccuracy, static_cast<double>(o.tp + o.tn) / static_cast<double>(n));

    const int C = 2 + static_cast<int>(rng() % 4);
    std::vector<int> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng() % C);
      b[i] = rng() % 3 == 0 ? a[i] : static_cast<int>(rng() % C);
    }
    const MulticlassScores m = multiclass_scores(LabelMap(w, h, C, b), LabelMap(w, h, C, a));
    std::size_t correct = 0;
    double recallSum = 0.0;
    int present = 0;
    for (int k = 0; k < C; ++k) {
      std::uint64_t row = 0, hit = 0;
      for (std::size_t i = 0; i < n; ++i) {
        row += a[i] == k;
        hit += a[i] == k && b[i] == k;
      }
      for (int q = 0; q < C; ++q) {
        std::uint64_t cell = 0;
        for (std::size_t i = 0; i < n; ++i) cell += a[i] == k && b[i] == q;
        bad += m.confusion.at(k, q) != cell;
      }
      correct += hit;
      if (row) {
        recallSum += static_cast<double>(hit) / static_cast<double>(row);
        ++present;
      }
    }
    bad += !close(m.pixelAccuracy, static_cast<double>(correct) / static_cast<double>(n));
    bad += !close(m.classAverageAccuracy, recallSum / present);
  }

  // (b) greedy matching against the optimal bipartite matching, one image per
  // instance, default tolerance in a 481x321 frame
  double worst = 0.0, mean = 0.0;
  const int instances = 200;
  const double radius = kDefaultTolerance * std::hypot(481.0, 321.0);
  for (int k = 0; k < instances; ++k) {
    const Fixture f = curve_fixture(rng, 481, 321, 50);
    const std::vector<ProbabilityMap> maps = {f.map};
    const std::vector<AnnotatorSet> truth = {{f.truth}};
    const BoundaryResult r = boundary_benchmark(maps, truth);
    double best = 0.0;
    for (int i = 0; i < kThresholdCount; ++i)
      best = std::max(best, optimal_counts(f.map, f.truth, benchmark_threshold(i), radius).f_value());
    worst = std::max(worst, best - r.ods);
    mean += (best - r.ods) / instances;
  }

  // (c) OIS >= ODS on random fixture sets
  int violations = 0;
  double deepest = 0.0;
  const int sets = 200;
  for (int set = 0; set < sets; ++set) {
    std::vector<ProbabilityMap> maps;
    std::vector<AnnotatorSet> truth;
    const int images = 2 + static_cast<int>(rng() % 5);
    for (int i = 0; i < images; ++i) {
      const Fixture f = random_fixture(rng, 32, 32, 60);
      AnnotatorSet annotators = {f.truth};
      if (rng() % 2) annotators.push_back(random_fixture(rng, 32, 32, 60).truth);
      maps.push_back(f.map);
      truth.push_back(annotators);
    }
    const BoundaryResult r = boundary_benchmark(maps, truth, 0.05);
    if (r.ois < r.ods) {
      ++violations;
      deepest = std::max(deepest, r.ods - r.ois);
    }
  }
  const double s = t.seconds();
  report(7, "metrics oracle", bad == 0 && worst <= 0.02 && violations == 0,
         std::to_string(bad) + " score mismatches on 200 fixtures; greedy vs optimal F: worst " +
             fmt("%.4f", worst) + fmt(" mean %.4f (limit 0.02); ", mean) + "OIS < ODS on " +
             std::to_string(violations) + "/" + std::to_string(sets) + " sets" + fmt(" (largest gap %.4f), ", deepest) +
             fmt("%.1f s", s));
}

// ---------------------------------------------------------------------------

ProbabilityMap random_edge_map(std::mt19937_64& rng, int w, int h, double hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  const double a = u(rng) * 3.14159, off = u(rng) * w;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double d = std::cos(a) * c + std::sin(a) * r - off;
      v[static_cast<std::size_t>(r) * w + c] = hi * std::min(1.0, std::exp(-d * d / 4.0) * 0.8 + 0.2 * u(rng));
    }
  return ProbabilityMap(w, h, v);
}

void nms() {
  Timer t;
  std::mt19937_64 rng(8);
  int above = 0, changed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 8 + static_cast<int>(rng() % 40), h = 8 + static_cast<int>(rng() % 40);
    const ProbabilityMap in = random_edge_map(rng, w, h, 0.05 + 0.25 * static_cast<double>(rng() % 1000) / 1000.0);  // x3.3 stays <= 1
    const ProbabilityMap out = nms_thin(in);
    for (std::size_t i = 0; i < in.values().size(); ++i) above += out.values()[i] > in.values()[i];
    for (double k : {0.01, 0.5, 0.77, 1.9, 3.3}) {
      std::vector<double> v(in.values().begin(), in.values().end());
      for (double& x : v) x *= k;
      const ProbabilityMap scaled = nms_thin(ProbabilityMap(w, h, v));
      for (std::size_t i = 0; i < v.size(); ++i) changed += (scaled.values()[i] > 0.0) != (out.values()[i] > 0.0);
    }
  }
  std::vector<double> ramp(12 * 13, 0.0);
  for (int r = 0; r < 12; ++r) {
    ramp[static_cast<std::size_t>(r) * 13 + 5] = 0.5;
    ramp[static_cast<std::size_t>(r) * 13 + 6] = 1.0;
    ramp[static_cast<std::size_t>(r) * 13 + 7] = 0.5;
  }
  const ProbabilityMap thin = nms_thin(ProbabilityMap(13, 12, ramp));
  bool crest = true;
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 13; ++c) crest = crest && (thin.at(r, c) > 0.0) == (c == 6);
  report(8, "NMS invariants", above == 0 && changed == 0 && crest,
         std::to_string(above) + " pixels raised, " + std::to_string(changed) +
             " survivor changes under scaling, ramp " + (crest ? "thins to 1 px" : "not thinned") +
             fmt(", %.2f s", t.seconds()));
}

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> directory_bytes(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = read_bytes(e.path());
  return files;
}

void persistence(const fs::path& scratch) {
  Timer t;
  const auto data = synth_textures(4, 48, 3);
  ChmConfig c = texture_config(3, 2);
  c.training.maxSamples = 5000;
  c.training.epochs = 3;
  const ChmModel model = chm_train(data, c).model;
  save_model(model, scratch / "model");
  const ChmModel back = load_model(scratch / "model");
  bool inference = true;
  for (const auto& img : data) {
    const auto a = chm_infer(model, img.image), b = chm_infer(back, img.image);
    for (std::size_t k = 0; k < a.size(); ++k)
      inference = inference && std::equal(a[k].values().begin(), a[k].values().end(), b[k].values().begin());
  }
  save_model(back, scratch / "again");
  const bool files = directory_bytes(scratch / "model") == directory_bytes(scratch / "again");
  report(9, "persistence", back == model && inference && files,
         std::string(back == model ? "parameters bit-exact" : "parameters differ") + ", inference " +
             (inference ? "bit-exact" : "differs") + ", re-save " + (files ? "byte-identical" : "differs") +
             fmt(", %.1f s", t.seconds()));
}

void determinism(const fs::path& scratch) {
  Timer t;
  SynthOptions so;
  so.kind = SynthKind::Textures;
  so.count = 6;
  so.size = 48;
  so.seed = 9;
  so.outDir = scratch / "ds";
  cmd_synth(so);
  {
    std::ofstream cfg(scratch / "config.json");
    ChmConfig c = texture_config(3, 2);
    c.training.maxSamples = 5000;
    c.training.epochs = 3;
    cfg << config_to_json(c).dump(2);
  }
  std::ostringstream quiet;
  for (const char* out : {"a", "b"}) {
    TrainOptions o;
    o.manifest = scratch / "ds" / "manifest.json";
    o.config = scratch / "config.json";
    o.outDir = scratch / out;
    o.seed = 1234;
    cmd_train(o, quiet);
  }
  const auto a = directory_bytes(scratch / "a"), b = directory_bytes(scratch / "b");
  report(10, "determinism", a == b && !a.empty(),
         std::to_string(a.size()) + " files, " + (a == b ? "byte-identical" : "differ") + fmt(", %.1f s", t.seconds()));
}

}  // namespace

int main() {
  const fs::path scratch = fs::temp_directory_path() / ("chm_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  operators();
  gradient_check();
  xor_blobs();
  textures();
  metrics();
  nms();
  persistence(scratch / "persist");
  determinism(scratch / "determinism");
  std::error_code ec;
  fs::remove_all(scratch, ec);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}

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

#include "chm/ldnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace chm {
namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

template <class T>
double dot(const double* w, const T* x, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += w[i] * x[i];
    s1 += w[i + 1] * x[i + 1];
    s2 += w[i + 2] * x[i + 2];
    s3 += w[i + 3] * x[i + 3];
  }
  for (; i < n; ++i) s0 += w[i] * x[i];
  return (s0 + s1) + (s2 + s3);
}

template <class T>
double evaluate_impl(const LdnnModel& m, std::span<const T> x) {
  if (x.size() != m.feature_count())
    throw std::invalid_argument("feature length " + std::to_string(x.size()) + " does not match classifier width " +
                                std::to_string(m.feature_count()));
  const auto p = m.params();
  const std::size_t stride = m.stride();
  double none = 1.0;  // prod_i (1 - g_i)
  std::size_t u = 0;
  for (int i = 0; i < m.groups(); ++i) {
    double g = 1.0;
    for (int j = 0; j < m.per_group(); ++j, ++u) {
      const double* row = p.data() + u * stride;
      double s = sigmoid(row[0] + dot(row + 1, x.data(), x.size()));
      if (m.trained_with_dropout()) s = std::sqrt(s);
      g *= s;
    }
    none *= 1.0 - g;
  }
  return std::clamp(1.0 - none, 0.0, 1.0);
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::size_t pick_index(std::size_t n, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Products excluding one element, without division: out[k] = prod_{m != k} v[m].
void exclusive_products(const std::vector<double>& v, std::vector<double>& out) {
  const std::size_t n = v.size();
  out.assign(n, 1.0);
  double prefix = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = prefix;
    prefix *= v[k];
  }
  double suffix = 1.0;
  for (std::size_t k = n; k-- > 0;) {
    out[k] *= suffix;
    suffix *= v[k];
  }
}

// Forward/backward workspace for one sample under a mask.
struct Workspace {
  std::vector<int> groups;                 // active group ids
  std::vector<std::vector<int>> units;     // active unit j's per active group
  std::vector<std::vector<double>> sig;    // sigmoid per active unit
  std::vector<double> g, oneMinusG, exclG, exclS;

  void prepare(const LdnnModel& m, const DropoutMask* mask) {
    groups.clear();
    units.clear();
    for (int i = 0; i < m.groups(); ++i) {
      if (mask && !mask->group[static_cast<std::size_t>(i)]) continue;
      groups.push_back(i);
      std::vector<int> js;
      for (int j = 0; j < m.per_group(); ++j)
        if (!mask || mask->unit[static_cast<std::size_t>(i) * m.per_group() + j]) js.push_back(j);
      units.push_back(std::move(js));
    }
    sig.resize(groups.size());
    for (std::size_t a = 0; a < groups.size(); ++a) sig[a].resize(units[a].size());
    g.resize(groups.size());
    oneMinusG.resize(groups.size());
  }

  // Returns f.
  template <class T>
  double forward(const LdnnModel& m, const T* x) {
    const auto p = m.params();
    const std::size_t stride = m.stride();
    double none = 1.0;
    for (std::size_t a = 0; a < groups.size(); ++a) {
      double prod = 1.0;
      for (std::size_t b = 0; b < units[a].size(); ++b) {
        const std::size_t u = static_cast<std::size_t>(groups[a]) * m.per_group() + units[a][b];
        const double* row = p.data() + u * stride;
        const double s = sigmoid(row[0] + dot(row + 1, x, m.feature_count()));
        sig[a][b] = s;
        prod *= s;
      }
      g[a] = prod;
      oneMinusG[a] = 1.0 - prod;
      none *= oneMinusG[a];
    }
    return 1.0 - none;
  }

  // Adds d loss / d params into grad given dLoss/df.
  template <class T>
  void backward(const LdnnModel& m, const T* x, double dLdf, std::span<double> grad) {
    const std::size_t stride = m.stride();
    const std::size_t n = m.feature_count();
    exclusive_products(oneMinusG, exclG);
    for (std::size_t a = 0; a < groups.size(); ++a) {
      const double dLdg = dLdf * exclG[a];
      if (dLdg == 0.0) continue;
      exclusive_products(sig[a], exclS);
      for (std::size_t b = 0; b < units[a].size(); ++b) {
        const double s = sig[a][b];
        const double dz = dLdg * exclS[b] * s * (1.0 - s);
        if (dz == 0.0) continue;
        const std::size_t u = static_cast<std::size_t>(groups[a]) * m.per_group() + units[a][b];
        double* gr = grad.data() + u * stride;
        gr[0] += dz;
        for (std::size_t k = 0; k < n; ++k) gr[k + 1] += dz * x[k];
      }
    }
  }
};

void choose_active(std::vector<char>& flags, std::size_t offset, int count, int active, Rng& rng) {
  std::vector<int> ids(static_cast<std::size_t>(count));
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  for (int k = 0; k < active; ++k) flags[offset + static_cast<std::size_t>(ids[static_cast<std::size_t>(k)])] = 1;
}

bool lex_less(std::span<const float> a, std::span<const float> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

LdnnModel::LdnnModel(int groups, int perGroup, std::size_t featureCount)
    : LdnnModel(groups, perGroup, featureCount,
                std::vector<double>(static_cast<std::size_t>(std::max(groups, 0)) * std::max(perGroup, 0) *
                                    (featureCount + 1)),
                false) {}

LdnnModel::LdnnModel(int groups, int perGroup, std::size_t featureCount, std::vector<double> params,
                     bool trainedWithDropout)
    : groups_(groups), perGroup_(perGroup), featureCount_(featureCount), params_(std::move(params)),
      dropout_(trainedWithDropout) {
  if (groups < 1 || perGroup < 1) throw std::invalid_argument("LDNN needs at least one group and one unit");
  if (params_.size() != unit_count() * stride()) throw std::invalid_argument("LDNN parameter count mismatch");
  for (double v : params_)
    if (!std::isfinite(v)) throw std::invalid_argument("LDNN parameter is not finite");
}

double evaluate(const LdnnModel& model, std::span<const double> features) { return evaluate_impl(model, features); }
double evaluate(const LdnnModel& model, std::span<const float> features) { return evaluate_impl(model, features); }

std::vector<double> evaluate_rows(const LdnnModel& model, const FeatureMatrix& features) {
  if (features.cols() != model.feature_count())
    throw std::invalid_argument("feature width " + std::to_string(features.cols()) + " does not match classifier width " +
                                std::to_string(model.feature_count()));
  std::vector<double> out(features.rows());
  const auto n = static_cast<std::ptrdiff_t>(features.rows());
#pragma omp parallel for num_threads(worker_count())
  for (std::ptrdiff_t r = 0; r < n; ++r) out[static_cast<std::size_t>(r)] = evaluate(model, features.row(static_cast<std::size_t>(r)));
  return out;
}

DropoutMask DropoutMask::all(int groups, int perGroup) {
  return {std::vector<char>(static_cast<std::size_t>(groups), 1),
          std::vector<char>(static_cast<std::size_t>(groups) * perGroup, 1)};
}

DropoutMask draw_dropout_mask(int groups, int perGroup, Rng& rng) {
  DropoutMask m{std::vector<char>(static_cast<std::size_t>(groups), 0),
                std::vector<char>(static_cast<std::size_t>(groups) * perGroup, 0)};
  choose_active(m.group, 0, groups, (groups + 1) / 2, rng);
  for (int i = 0; i < groups; ++i)
    if (m.group[static_cast<std::size_t>(i)])
      choose_active(m.unit, static_cast<std::size_t>(i) * perGroup, perGroup, (perGroup + 1) / 2, rng);
  return m;
}

LossGradient gradient(const LdnnModel& model, std::span<const double> features, int label, const DropoutMask* mask) {
  if (features.size() != model.feature_count()) throw std::invalid_argument("feature length mismatch");
  Workspace ws;
  ws.prepare(model, mask);
  const double f = ws.forward(model, features.data());
  LossGradient out;
  out.loss = (f - label) * (f - label);
  out.params.assign(model.params().size(), 0.0);
  ws.backward(model, features.data(), 2.0 * (f - label), out.params);
  return out;
}

std::vector<std::vector<double>> kmeans(const std::vector<std::vector<double>>& input, int k, Rng& rng,
                                        int maxIterations) {
  if (k < 1) throw std::invalid_argument("k-means needs k >= 1");
  if (input.size() < static_cast<std::size_t>(k))
    throw std::invalid_argument("k-means: " + std::to_string(input.size()) + " samples for k = " + std::to_string(k));
  std::vector<std::vector<double>> rows = input;
  std::sort(rows.begin(), rows.end());
  const std::size_t n = rows.size();

  std::vector<std::vector<double>> centers;
  centers.push_back(rows[pick_index(n, rng)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(rows[i], centers[0]);
  while (centers.size() < static_cast<std::size_t>(k)) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t next = 0;
    if (total <= 0.0) {
      next = pick_index(n, rng);
    } else {
      double t = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (next = 0; next + 1 < n; ++next) {
        t -= d2[next];
        if (t < 0.0) break;
      }
    }
    centers.push_back(rows[next]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(rows[i], centers.back()));
  }

  const std::size_t dim = rows.front().size();
  std::vector<std::size_t> assign(n, static_cast<std::size_t>(-1));
  for (int it = 0; it < maxIterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bestD = sq_dist(rows[i], centers[0]);
      for (std::size_t c = 1; c < centers.size(); ++c) {
        const double d = sq_dist(rows[i], centers[c]);
        if (d < bestD) bestD = d, best = c;
      }
      if (assign[i] != best) assign[i] = best, changed = true;
    }
    if (!changed) break;
    std::vector<std::vector<double>> sums(centers.size(), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[assign[i]][d] += rows[i][d];
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (counts[c] == 0) {
        centers[c] = rows[pick_index(n, rng)];
        continue;
      }
      for (std::size_t d = 0; d < dim; ++d) centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
  }
  return centers;
}

LdnnModel init_kmeans(const std::vector<std::vector<double>>& positives,
                      const std::vector<std::vector<double>>& negatives, int groups, int perGroup, Rng& rng,
                      int maxIterations) {
  if (positives.size() < static_cast<std::size_t>(groups) || negatives.size() < static_cast<std::size_t>(perGroup))
    throw std::invalid_argument("init_kmeans: insufficient samples (" + std::to_string(positives.size()) +
                                " positive for N = " + std::to_string(groups) + ", " +
                                std::to_string(negatives.size()) + " negative for M = " + std::to_string(perGroup) + ")");
  const std::size_t dim = positives.front().size();
  for (const auto* set : {&positives, &negatives})
    for (const auto& r : *set)
      if (r.size() != dim) throw std::invalid_argument("init_kmeans: inconsistent sample width");

  const auto pos = kmeans(positives, groups, rng, maxIterations);
  auto neg = kmeans(negatives, perGroup, rng, maxIterations);

  // Scale so the logit at each centroid is +-z0, with sigmoid(z0)^M = 0.9.
  const double target = std::pow(0.9, 1.0 / perGroup);
  const double z0 = std::log(target / (1.0 - target));

  LdnnModel model(groups, perGroup, dim);
  auto params = model.mutable_params();
  const std::size_t stride = model.stride();
  std::vector<std::vector<double>> sortedNeg = negatives;
  std::sort(sortedNeg.begin(), sortedNeg.end());
  for (int i = 0; i < groups; ++i)
    for (int j = 0; j < perGroup; ++j) {
      auto& cn = neg[static_cast<std::size_t>(j)];
      const auto& cp = pos[static_cast<std::size_t>(i)];
      for (int retry = 0; sq_dist(cp, cn) == 0.0; ++retry) {
        if (retry < 3) {
          cn = sortedNeg[pick_index(sortedNeg.size(), rng)];
        } else {
          std::normal_distribution<double> jitter(0.0, 1.0);
          for (auto& v : cn) v += 1e-6 * jitter(rng);
        }
      }
      const double dd = sq_dist(cp, cn);
      const double alpha = 2.0 * z0 / dd;
      double* row = params.data() + (static_cast<std::size_t>(i) * perGroup + j) * stride;
      double b = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double w = alpha * (cp[d] - cn[d]);
        row[d + 1] = w;
        b -= w * 0.5 * (cp[d] + cn[d]);
      }
      row[0] = b;
    }
  return model;
}

LdnnTrainResult train(const LdnnModel& init, const FeatureMatrix& samples, std::span<const std::uint8_t> labels,
                      const TrainingParams& params, Rng& rng) {
  if (samples.rows() == 0) throw std::invalid_argument("train: empty sample set");
  if (labels.size() != samples.rows()) throw std::invalid_argument("train: label count mismatch");
  if (samples.cols() != init.feature_count()) throw std::invalid_argument("train: feature width mismatch");
  LdnnTrainResult result{init, {}};
  if (params.epochs == 0) return result;

  LdnnModel& model = result.model;
  model.set_trained_with_dropout(false);
  const int N = model.groups(), M = model.per_group();
  const std::size_t stride = model.stride();
  const std::size_t n = samples.rows();
  const std::size_t batch = static_cast<std::size_t>(params.batchSize);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(model.params().size(), 0.0);
  std::vector<double> x(samples.cols());
  Workspace ws;
  const DropoutMask full = DropoutMask::all(N, M);
  double rate = params.learningRate;

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double lossSum = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const DropoutMask mask = params.dropout ? draw_dropout_mask(N, M, rng) : full;
      ws.prepare(model, &mask);
      for (std::size_t s = start; s < end; ++s) {
        const auto row = samples.row(order[s]);
        std::copy(row.begin(), row.end(), x.begin());
        const double y = labels[order[s]];
        const double f = ws.forward(model, x.data());
        lossSum += (f - y) * (f - y);
        ws.backward(model, x.data(), 2.0 * (f - y), grad);
      }
      auto p = model.mutable_params();
      for (std::size_t a = 0; a < ws.groups.size(); ++a)
        for (int j : ws.units[a]) {
          const std::size_t off = (static_cast<std::size_t>(ws.groups[a]) * M + j) * stride;
          for (std::size_t k = 0; k < stride; ++k) {
            p[off + k] -= rate * grad[off + k];
            grad[off + k] = 0.0;
          }
        }
    }
    result.epochLoss.push_back(lossSum / static_cast<double>(n));
    rate *= params.learningRateDecay;
  }
  for (double v : model.params())
    if (!std::isfinite(v)) throw InvariantError("LDNN training diverged (non-finite weights)");
  model.set_trained_with_dropout(params.dropout);
  return result;
}

Standardization fit_standardization(const FeatureMatrix& samples) {
  const std::size_t n = samples.rows(), d = samples.cols();
  Standardization s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  if (n == 0) return s;
  for (std::size_t r = 0; r < n; ++r) {
    auto row = samples.row(r);
    for (std::size_t k = 0; k < d; ++k) s.mean[k] += row[k];
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = samples.row(r);
    for (std::size_t k = 0; k < d; ++k) var[k] += (row[k] - s.mean[k]) * (row[k] - s.mean[k]);
  }
  for (std::size_t k = 0; k < d; ++k) {
    const double sd = std::sqrt(var[k] / static_cast<double>(n));
    s.scale[k] = sd > 1e-9 ? sd : 1.0;
  }
  return s;
}

FeatureMatrix apply_standardization(const FeatureMatrix& samples, const Standardization& s) {
  if (s.mean.size() != samples.cols()) throw std::invalid_argument("standardization width mismatch");
  std::vector<float> v(samples.values().begin(), samples.values().end());
  const std::size_t d = samples.cols();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t k = i % d;
    v[i] = static_cast<float>((v[i] - s.mean[k]) / s.scale[k]);
  }
  return FeatureMatrix(samples.rows(), d, std::move(v), samples.labels());
}

LdnnModel fold_standardization(const LdnnModel& model, const Standardization& s) {
  if (s.mean.size() != model.feature_count()) throw std::invalid_argument("standardization width mismatch");
  std::vector<double> p(model.params().begin(), model.params().end());
  const std::size_t stride = model.stride();
  for (std::size_t u = 0; u < model.unit_count(); ++u) {
    double* row = p.data() + u * stride;
    double shift = 0.0;
    for (std::size_t k = 0; k < model.feature_count(); ++k) {
      row[k + 1] /= s.scale[k];
      shift += row[k + 1] * s.mean[k];
    }
    row[0] -= shift;
  }
  return LdnnModel(model.groups(), model.per_group(), model.feature_count(), std::move(p),
                   model.trained_with_dropout());
}

LdnnTrainResult fit_ldnn(const FeatureMatrix& samples, std::span<const std::uint8_t> labels, int groups, int perGroup,
                         const TrainingParams& params, Rng& rng) {
  if (samples.rows() == 0) throw std::invalid_argument("fit_ldnn: empty sample set");
  if (labels.size() != samples.rows()) throw std::invalid_argument("fit_ldnn: label count mismatch");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);

  const std::size_t d = samples.cols();
  if (pos.empty() || neg.empty()) {
    // Single-class target: a constant network saturated towards that class.
    LdnnModel m(groups, perGroup, d);
    auto p = m.mutable_params();
    for (std::size_t u = 0; u < m.unit_count(); ++u) p[u * m.stride()] = pos.empty() ? -30.0 : 30.0;
    return {m, {}};
  }

  const Standardization stdz = fit_standardization(samples);
  const FeatureMatrix standardized = apply_standardization(samples, stdz);

  // Order-independent subset: canonical sort, then a seeded draw.
  auto subset = [&](std::vector<std::size_t> idx, int k) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return lex_less(standardized.row(a), standardized.row(b));
    });
    if (idx.size() > params.kmeansSamples) {
      std::vector<std::size_t> picked;
      std::sample(idx.begin(), idx.end(), std::back_inserter(picked), params.kmeansSamples, rng);
      idx = std::move(picked);
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; rows.size() < std::max(idx.size(), static_cast<std::size_t>(k)); ++i) {
      auto r = standardized.row(idx[i % idx.size()]);
      rows.emplace_back(r.begin(), r.end());
    }
    return rows;
  };
  const auto posRows = subset(pos, groups);
  const auto negRows = subset(neg, perGroup);
  const LdnnModel init = init_kmeans(posRows, negRows, groups, perGroup, rng);
  LdnnTrainResult trained = train(init, standardized, labels, params, rng);
  trained.model = fold_standardization(trained.model, stdz);
  return trained;
}

}  // namespace chm

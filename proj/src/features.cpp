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

#include "chm/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

#include "filter.hpp"

namespace chm {
namespace {

using detail::gaussian_kernel;
using detail::separable_smooth;

std::vector<StencilOffset> ring(int radius) {
  std::vector<StencilOffset> out;
  for (int c = -radius; c <= radius; ++c) out.push_back({-radius, c});
  for (int r = -radius + 1; r <= radius; ++r) out.push_back({r, radius});
  for (int c = radius - 1; c >= -radius; --c) out.push_back({radius, c});
  for (int r = radius - 1; r > -radius; --r) out.push_back({r, -radius});
  return out;
}

StencilOffsets build_stencil() {
  StencilOffsets s{};
  std::size_t n = 0;
  for (int r = -2; r <= 2; ++r)
    for (int c = -2; c <= 2; ++c) s[n++] = {r, c};
  const auto r3 = ring(3);
  for (std::size_t i = 0; i < r3.size(); i += 2) s[n++] = r3[i];
  const auto r5 = ring(5);
  for (std::size_t i = 0; i < r5.size(); i += 4) s[n++] = r5[i];
  const auto r7 = ring(7);
  for (int k = 0; k < 10; ++k) s[n++] = r7[static_cast<std::size_t>(std::lround(k * 56.0 / 10.0))];
  if (n != kStencilSize) throw InvariantError("stencil layout size");
  return s;
}

// Integral image over an edge-replicated copy padded by `pad` on every side.
class PaddedIntegral {
 public:
  PaddedIntegral(const Plane& p, int pad) : pad_(pad), w_(p.width() + 2 * pad + 1), h_(p.height() + 2 * pad + 1) {
    sum_.assign(static_cast<std::size_t>(w_) * h_, 0.0);
    for (int r = 1; r < h_; ++r) {
      double rowSum = 0.0;
      for (int c = 1; c < w_; ++c) {
        rowSum += p.clamped(r - 1 - pad, c - 1 - pad);
        sum_[idx(r, c)] = sum_[idx(r - 1, c)] + rowSum;
      }
    }
  }

  // Sum over image rows [r0, r1) and cols [c0, c1); coordinates may extend up
  // to `pad` outside the image.
  double box(int r0, int c0, int r1, int c1) const {
    r0 += pad_, r1 += pad_, c0 += pad_, c1 += pad_;
    return sum_[idx(r1, c1)] - sum_[idx(r0, c1)] - sum_[idx(r1, c0)] + sum_[idx(r0, c0)];
  }

 private:
  std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r) * w_ + c; }
  int pad_, w_, h_;
  std::vector<double> sum_;
};

struct Gradient {
  std::vector<double> magnitude;
  std::vector<double> angle;  // unsigned, [0, pi)
};

Gradient central_gradient(const Plane& p) {
  const int w = p.width(), h = p.height();
  Gradient g;
  g.magnitude.resize(p.size().area());
  g.angle.resize(p.size().area());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double gx = p.clamped(r, c + 1) - p.clamped(r, c - 1);
      const double gy = p.clamped(r + 1, c) - p.clamped(r - 1, c);
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      g.magnitude[i] = std::hypot(gx, gy);
      double a = std::atan2(gy, gx);
      if (a < 0) a += std::numbers::pi;
      if (a >= std::numbers::pi) a -= std::numbers::pi;
      g.angle[i] = a;
    }
  return g;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)))];
}

struct GaborKernel {
  std::vector<double> taps;  // (2R+1)^2, row-major
};

std::vector<GaborKernel> gabor_bank() {
  using blocks::kGaborRadius;
  std::vector<GaborKernel> bank;
  for (double lambda : blocks::kGaborWavelengths)
    for (int o = 0; o < blocks::kGaborOrientations; ++o) {
      const double theta = o * std::numbers::pi / blocks::kGaborOrientations;
      const double sigma = 0.56 * lambda;
      const double gamma = 0.5;
      GaborKernel k;
      k.taps.resize(static_cast<std::size_t>((2 * kGaborRadius + 1) * (2 * kGaborRadius + 1)));
      double mean = 0.0;
      std::size_t i = 0;
      for (int y = -kGaborRadius; y <= kGaborRadius; ++y)
        for (int x = -kGaborRadius; x <= kGaborRadius; ++x, ++i) {
          const double xr = x * std::cos(theta) + y * std::sin(theta);
          const double yr = -x * std::sin(theta) + y * std::cos(theta);
          k.taps[i] = std::exp(-(xr * xr + gamma * gamma * yr * yr) / (2 * sigma * sigma)) *
                      std::cos(2 * std::numbers::pi * xr / lambda);
          mean += k.taps[i];
        }
      mean /= static_cast<double>(k.taps.size());
      double l1 = 0.0;
      for (auto& t : k.taps) l1 += std::abs(t -= mean);
      for (auto& t : k.taps) t /= l1;
      bank.push_back(std::move(k));
    }
  return bank;
}

// Column-block writer for one feature matrix under construction.
struct Columns {
  std::vector<float>& values;
  std::size_t cols;
  std::size_t offset = 0;

  void put(std::size_t row, std::size_t col, double v) { values[row * cols + offset + col] = static_cast<float>(v); }
};

}  // namespace

const StencilOffsets& stencil_layout() {
  static const StencilOffsets layout = build_stencil();
  return layout;
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> values,
                             std::vector<std::string> labels)
    : rows_(rows), cols_(cols), values_(std::move(values)), labels_(std::move(labels)) {
  if (values_.size() != rows_ * cols_) throw std::invalid_argument("feature matrix size mismatch");
  if (!labels_.empty() && labels_.size() != cols_) throw std::invalid_argument("feature label count mismatch");
  for (float v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument("feature matrix contains a non-finite value");
}

FeatureMatrix FeatureMatrix::hconcat(std::span<const FeatureMatrix* const> parts) {
  if (parts.empty()) return {};
  const std::size_t rows = parts.front()->rows();
  std::size_t cols = 0;
  std::vector<std::string> labels;
  for (const auto* p : parts) {
    if (p->rows() != rows) throw std::invalid_argument("hconcat: row count mismatch");
    cols += p->cols();
    labels.insert(labels.end(), p->labels().begin(), p->labels().end());
  }
  std::vector<float> v(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    float* dst = v.data() + r * cols;
    for (const auto* p : parts) {
      auto src = p->row(r);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  FeatureMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.values_ = std::move(v);
  m.labels_ = labels.size() == cols ? std::move(labels) : std::vector<std::string>{};
  return m;
}

namespace blocks {

std::vector<std::array<double, 9>> haar(const Plane& plane) {
  const int w = plane.width(), h = plane.height();
  const PaddedIntegral integral(plane, kHaarSizes.back() / 2);
  std::vector<std::array<double, 9>> out(plane.size().area());
#pragma omp parallel for num_threads(worker_count())
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      auto& f = out[static_cast<std::size_t>(r) * w + c];
      std::size_t k = 0;
      for (int s : kHaarSizes) {
        const int half = s / 2;
        const double area = static_cast<double>(s) * s;
        const double tl = integral.box(r - half, c - half, r, c);
        const double tr = integral.box(r - half, c, r, c + half);
        const double bl = integral.box(r, c - half, r + half, c);
        const double br = integral.box(r, c, r + half, c + half);
        f[k++] = ((tl + bl) - (tr + br)) / area;
        f[k++] = ((tl + tr) - (bl + br)) / area;
        f[k++] = ((tl + br) - (tr + bl)) / area;
      }
    }
  return out;
}

std::vector<std::array<double, kOrientationBins>> hog(const Plane& plane, int cellSize) {
  if (cellSize < 1) throw std::invalid_argument("cell size must be positive");
  const int w = plane.width(), h = plane.height();
  const int cw = (w + cellSize - 1) / cellSize, ch = (h + cellSize - 1) / cellSize;
  const Gradient g = central_gradient(plane);
  using Hist = std::array<double, kOrientationBins>;
  std::vector<Hist> cells(static_cast<std::size_t>(cw) * ch, Hist{});
  const double binWidth = std::numbers::pi / kOrientationBins;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      if (g.magnitude[i] == 0.0) continue;
      // Linear vote between the two nearest bin centres, wrapping at pi.
      const double pos = g.angle[i] / binWidth - 0.5;
      const double lo = std::floor(pos);
      const double frac = pos - lo;
      const int b0 = (static_cast<int>(lo) + kOrientationBins) % kOrientationBins;
      const int b1 = (b0 + 1) % kOrientationBins;
      Hist& cell = cells[static_cast<std::size_t>(r / cellSize) * cw + c / cellSize];
      cell[static_cast<std::size_t>(b0)] += g.magnitude[i] * (1.0 - frac);
      cell[static_cast<std::size_t>(b1)] += g.magnitude[i] * frac;
    }
  // Each cell is normalized by the 2x2 block it anchors (replicated at the far edge).
  constexpr double eps = 1e-3;
  std::vector<Hist> normalized(cells.size());
  for (int cy = 0; cy < ch; ++cy)
    for (int cx = 0; cx < cw; ++cx) {
      double sq = 0.0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const Hist& cell = cells[static_cast<std::size_t>(std::min(cy + dy, ch - 1)) * cw + std::min(cx + dx, cw - 1)];
          for (double v : cell) sq += v * v;
        }
      const double norm = std::sqrt(sq + eps * eps);
      const Hist& cell = cells[static_cast<std::size_t>(cy) * cw + cx];
      Hist& out = normalized[static_cast<std::size_t>(cy) * cw + cx];
      for (std::size_t b = 0; b < out.size(); ++b) out[b] = cell[b] / norm;
    }
  std::vector<Hist> out(plane.size().area());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      out[static_cast<std::size_t>(r) * w + c] = normalized[static_cast<std::size_t>(r / cellSize) * cw + c / cellSize];
  return out;
}

std::vector<std::array<double, 8>> gabor(const Plane& plane) {
  static const std::vector<GaborKernel> bank = gabor_bank();
  const int w = plane.width(), h = plane.height();
  const int R = kGaborRadius;
  const int side = 2 * R + 1;
  // Padded copy so the inner loop needs no clamping.
  const int pw = w + 2 * R;
  std::vector<double> padded(static_cast<std::size_t>(pw) * (h + 2 * R));
  for (int r = 0; r < h + 2 * R; ++r)
    for (int c = 0; c < pw; ++c) padded[static_cast<std::size_t>(r) * pw + c] = plane.clamped(r - R, c - R);
  std::vector<std::array<double, 8>> out(plane.size().area());
#pragma omp parallel for num_threads(worker_count())
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      auto& f = out[static_cast<std::size_t>(r) * w + c];
      for (std::size_t k = 0; k < bank.size(); ++k) {
        const auto& taps = bank[k].taps;
        double s = 0.0;
        for (int y = 0; y < side; ++y) {
          const double* src = padded.data() + static_cast<std::size_t>(r + y) * pw + c;
          const double* t = taps.data() + static_cast<std::size_t>(y) * side;
          for (int x = 0; x < side; ++x) s += t[x] * src[x];
        }
        f[k] = std::abs(s);
      }
    }
  return out;
}

std::vector<double> canny(const Plane& plane) {
  const int w = plane.width(), h = plane.height();
  const std::size_t n = plane.size().area();
  const Plane smooth(w, h, separable_smooth(plane, gaussian_kernel(1.0, 3)));
  std::vector<double> mag(n), gxs(n), gys(n);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      auto v = [&](int dr, int dc) { return smooth.clamped(r + dr, c + dc); };
      const double gx = (v(-1, 1) + 2 * v(0, 1) + v(1, 1)) - (v(-1, -1) + 2 * v(0, -1) + v(1, -1));
      const double gy = (v(1, -1) + 2 * v(1, 0) + v(1, 1)) - (v(-1, -1) + 2 * v(-1, 0) + v(-1, 1));
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      gxs[i] = gx;
      gys[i] = gy;
      const double mm = std::hypot(gx, gy);
      // Rounding in the smoothing pass leaves ~1e-17 ripples on flat input.
      mag[i] = mm < 1e-9 ? 0.0 : mm;
    }
  std::vector<double> out(n, 0.0);
  const double high = percentile(mag, 0.9);
  const double low = percentile(mag, 0.7);
  if (high <= 0.0) return out;

  auto m = [&](int r, int c) {
    return mag[static_cast<std::size_t>(std::clamp(r, 0, h - 1)) * w + std::clamp(c, 0, w - 1)];
  };
  // 0: strong, 1: weak, 2: none
  std::vector<unsigned char> cls(n, 2);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      const double v = mag[i];
      if (v <= 0.0 || v < low) continue;
      double a = std::atan2(gys[i], gxs[i]) * 180.0 / std::numbers::pi;
      if (a < 0) a += 180.0;
      int dr = 0, dc = 1;
      if (a >= 22.5 && a < 67.5) dr = 1, dc = 1;
      else if (a >= 67.5 && a < 112.5) dr = 1, dc = 0;
      else if (a >= 112.5 && a < 157.5) dr = 1, dc = -1;
      if (v < m(r + dr, c + dc) || v < m(r - dr, c - dc)) continue;
      cls[i] = v >= high ? 0 : 1;
    }
  std::queue<std::size_t> frontier;
  for (std::size_t i = 0; i < n; ++i)
    if (cls[i] == 0) {
      out[i] = 1.0;
      frontier.push(i);
    }
  while (!frontier.empty()) {
    const std::size_t i = frontier.front();
    frontier.pop();
    const int r = static_cast<int>(i / w), c = static_cast<int>(i % w);
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int rr = r + dr, cc = c + dc;
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        const std::size_t j = static_cast<std::size_t>(rr) * w + cc;
        if (cls[j] == 1 && out[j] == 0.0) {
          out[j] = 1.0;
          frontier.push(j);
        }
      }
  }
  return out;
}

std::vector<std::array<double, 5>> position(Size size) {
  std::vector<std::array<double, 5>> out(size.area());
  for (int r = 0; r < size.height; ++r)
    for (int c = 0; c < size.width; ++c) {
      const double x = (c + 0.5) / size.width;
      const double y = (r + 0.5) / size.height;
      out[static_cast<std::size_t>(r) * size.width + c] = {x, y, x * x, y * y, x * y};
    }
  return out;
}

}  // namespace blocks

std::vector<std::string> appearance_labels(const FeatureSelection& sel, int channels) {
  std::vector<std::string> labels;
  const auto ch = [](int c) { return "c" + std::to_string(c); };
  if (sel.haar)
    for (int c = 0; c < channels; ++c)
      for (int s : blocks::kHaarSizes)
        for (const char* kind : {"h", "v", "q"}) labels.push_back("haar_" + ch(c) + "_" + kind + std::to_string(s));
  if (sel.hog)
    for (int c = 0; c < channels; ++c)
      for (int b = 0; b < blocks::kOrientationBins; ++b) labels.push_back("hog_" + ch(c) + "_b" + std::to_string(b));
  if (sel.orientation)
    for (int b = 0; b < blocks::kOrientationBins; ++b) labels.push_back("ori_b" + std::to_string(b));
  if (sel.gabor)
    for (double lambda : blocks::kGaborWavelengths)
      for (int o = 0; o < blocks::kGaborOrientations; ++o)
        labels.push_back("gabor_l" + std::to_string(static_cast<int>(lambda)) + "_o" + std::to_string(o));
  if (sel.canny) labels.emplace_back("canny");
  if (sel.position)
    for (const char* p : {"x", "y", "xx", "yy", "xy"}) labels.push_back(std::string("pos_") + p);
  if (sel.stencil)
    for (int c = 0; c < channels; ++c)
      for (std::size_t k = 0; k < kStencilSize; ++k) labels.push_back("px_" + ch(c) + "_s" + std::to_string(k));
  return labels;
}

std::size_t appearance_width(const FeatureSelection& sel, int channels) {
  const auto ch = static_cast<std::size_t>(channels);
  std::size_t n = 0;
  if (sel.haar) n += 9 * ch;
  if (sel.hog) n += blocks::kOrientationBins * ch;
  if (sel.orientation) n += blocks::kOrientationBins;
  if (sel.gabor) n += 8;
  if (sel.canny) n += 1;
  if (sel.position) n += 5;
  if (sel.stencil) n += kStencilSize * ch;
  return n;
}

FeatureMatrix extract_appearance(const ImagePlane& image, const FeatureSelection& sel) {
  const std::size_t rows = image.size().area();
  const std::size_t cols = appearance_width(sel, image.channels());
  std::vector<float> values(rows * cols);
  Columns out{values, cols};
  const int w = image.width(), h = image.height();

  auto emit = [&](const auto& block, std::size_t width) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = 0; k < width; ++k) out.put(i, k, block[i][k]);
    out.offset += width;
  };

  if (sel.haar)
    for (const auto& p : image.planes()) emit(blocks::haar(p), 9);
  if (sel.hog)
    for (const auto& p : image.planes()) emit(blocks::hog(p, 8), blocks::kOrientationBins);
  const bool needLuminance = sel.orientation || sel.gabor || sel.canny;
  const Plane lum = needLuminance ? image.luminance() : Plane{};
  if (sel.orientation) emit(blocks::hog(lum, 4), blocks::kOrientationBins);
  if (sel.gabor) emit(blocks::gabor(lum), 8);
  if (sel.canny) {
    const auto edges = blocks::canny(lum);
    for (std::size_t i = 0; i < rows; ++i) out.put(i, 0, edges[i]);
    out.offset += 1;
  }
  if (sel.position) emit(blocks::position(image.size()), 5);
  if (sel.stencil) {
    const auto& st = stencil_layout();
    for (const auto& p : image.planes()) {
#pragma omp parallel for num_threads(worker_count())
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          for (std::size_t k = 0; k < kStencilSize; ++k)
            out.put(static_cast<std::size_t>(r) * w + c, k, p.clamped(r + st[k].row, c + st[k].col));
      out.offset += kStencilSize;
    }
  }
  if (out.offset != cols) throw InvariantError("appearance width mismatch");
  return FeatureMatrix(rows, cols, std::move(values), appearance_labels(sel, image.channels()));
}

FeatureMatrix extract_context(std::span<const ProbabilityMap* const> maps) {
  if (maps.empty()) return {};
  const Size size = maps.front()->size();
  for (const auto* m : maps)
    if (m->size() != size) throw std::invalid_argument("context maps differ in size");
  const std::size_t rows = size.area();
  const std::size_t cols = kStencilSize * maps.size();
  std::vector<float> values(rows * cols);
  const auto& st = stencil_layout();
  const int w = size.width, h = size.height;
  std::vector<std::string> labels;
  labels.reserve(cols);
  for (std::size_t m = 0; m < maps.size(); ++m)
    for (std::size_t k = 0; k < kStencilSize; ++k)
      labels.push_back("ctx" + std::to_string(m) + "_s" + std::to_string(k));
#pragma omp parallel for num_threads(worker_count())
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      float* dst = values.data() + (static_cast<std::size_t>(r) * w + c) * cols;
      for (const auto* m : maps) {
        const Plane& p = m->plane();
        for (std::size_t k = 0; k < kStencilSize; ++k)
          *dst++ = static_cast<float>(p.clamped(r + st[k].row, c + st[k].col));
      }
    }
  return FeatureMatrix(rows, cols, std::move(values), std::move(labels));
}

FeatureMatrix extract_context(std::span<const ProbabilityMap> maps) {
  std::vector<const ProbabilityMap*> ptrs;
  ptrs.reserve(maps.size());
  for (const auto& m : maps) ptrs.push_back(&m);
  return extract_context(std::span<const ProbabilityMap* const>(ptrs));
}

}  // namespace chm

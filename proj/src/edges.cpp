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


#include "chm/edges.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "chm/pyramid.hpp"
#include "filter.hpp"

namespace chm {
namespace {

// Differences smaller than this fraction of the pixel value count as ties, so
// interpolation round-off on plateaus cannot let a flat region survive and
// rescaling the map cannot flip a comparison.
constexpr double kTieTolerance = 1e-9;

double bilinear(const Plane& p, double row, double col) {
  const int r0 = static_cast<int>(std::floor(row)), c0 = static_cast<int>(std::floor(col));
  const double fr = row - r0, fc = col - c0;
  return (1 - fr) * ((1 - fc) * p.clamped(r0, c0) + fc * p.clamped(r0, c0 + 1)) +
         fr * ((1 - fc) * p.clamped(r0 + 1, c0) + fc * p.clamped(r0 + 1, c0 + 1));
}

}  // namespace

ProbabilityMap multiscale_infer(const MapPredictor& predict, const ImagePlane& image) {
  const Size size = image.size();
  std::vector<double> sum(size.area(), 0.0);
  for (double s : kMultiscaleFactors) {
    const ProbabilityMap p = s == 1.0 ? predict(image) : predict(resize_bilinear(image, s));
    const ProbabilityMap back = p.size() == size ? p : resize_bilinear(p, size);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += back.values()[i];
  }
  for (double& v : sum) v = std::clamp(v / 3.0, 0.0, 1.0);
  return ProbabilityMap(size.width, size.height, std::move(sum));
}

ProbabilityMap multiscale_infer(const ChmModel& model, const ImagePlane& image) {
  if (model.config.class_model_count() != 1)
    throw std::invalid_argument("multi-scale inference needs a binary model");
  return multiscale_infer([&](const ImagePlane& im) { return chm_infer(model, im).front(); }, image);
}

ProbabilityMap nms_thin(const ProbabilityMap& edgeMap) {
  const int w = edgeMap.width(), h = edgeMap.height();
  const Plane& e = edgeMap.plane();
  const Plane s(w, h, detail::separable_smooth(e, detail::gaussian_kernel(2.0, 6)));
  std::vector<double> out(e.values().size(), 0.0);
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double v = e.at(r, c);
      if (v <= 0.0) continue;
      const double sxx = s.clamped(r, c + 1) - 2 * s.at(r, c) + s.clamped(r, c - 1);
      const double syy = s.clamped(r + 1, c) - 2 * s.at(r, c) + s.clamped(r - 1, c);
      const double sxy = 0.25 * (s.clamped(r + 1, c + 1) - s.clamped(r + 1, c - 1) -
                                 s.clamped(r - 1, c + 1) + s.clamped(r - 1, c - 1));
      // eigenvector of the most negative Hessian eigenvalue = across the ridge
      const double theta = 0.5 * std::atan2(2 * sxy, sxx - syy) + std::numbers::pi / 2;
      const double dc = std::cos(theta), dr = std::sin(theta);
      const double fwd = bilinear(e, r + dr, c + dc), bwd = bilinear(e, r - dr, c - dc);
      const double tol = kTieTolerance * v;
      if (v - fwd > tol && v - bwd >= -tol) out[static_cast<std::size_t>(r) * w + c] = v;
    }
  return ProbabilityMap(w, h, std::move(out));
}

}  // namespace chm

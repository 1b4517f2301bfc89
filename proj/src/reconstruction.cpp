/*
 * Copyright 2026 The facesim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "facesim/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace facesim {

FitObjective fit_objective(const EmbeddingModel& model, const Image& rendered,
                           const Image& target, const FeatureVector& target_feature,
                           double lambda, Image* grad) {
  if (!rendered.same_shape(target)) {
    throw std::invalid_argument("fit_objective: image shape mismatch");
  }
  FitObjective obj;
  obj.lambda = lambda;
  obj.feature_term = distance_to(model, rendered, target_feature, grad);
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    const double diff = rendered.data[i] - target.data[i];
    obj.l1_term += std::abs(diff);
    if (grad) {
      const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      grad->data[i] += lambda * s;
    }
  }
  return obj;
}

std::vector<double> texture_coeff_grad(const IdentityParams& params,
                                       const Image& texture_grad) {
  const int H = texture_grad.height, W = texture_grad.width;
  const Image raw = texture_unclamped(params, H, W);
  constexpr int B = kTextureBasisPerAxis;
  std::vector<double> cu(static_cast<std::size_t>(W) * B), cv(static_cast<std::size_t>(H) * B);
  for (int x = 0; x < W; ++x) {
    for (int p = 0; p < B; ++p) {
      cu[x * B + p] = std::cos(std::numbers::pi * p * x / (W - 1));
    }
  }
  for (int y = 0; y < H; ++y) {
    for (int q = 0; q < B; ++q) {
      cv[y * B + q] = std::cos(std::numbers::pi * q * y / (H - 1));
    }
  }
  std::vector<double> g(kTextureCoeffs, 0.0);
  // Row partial sums first: g[c][p][q] = sum_y cv[y,q] sum_x cu[x,p] grad.
  std::vector<double> row(3 * B);
  for (int y = 0; y < H; ++y) {
    std::fill(row.begin(), row.end(), 0.0);
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double r = raw.at(y, x, c);
        if (r <= 0.0 || r >= 1.0) continue;
        const double tg = texture_grad.at(y, x, c);
        if (tg == 0.0) continue;
        for (int p = 0; p < B; ++p) row[c * B + p] += cu[x * B + p] * tg;
      }
    }
    for (int c = 0; c < 3; ++c) {
      for (int p = 0; p < B; ++p) {
        for (int q = 0; q < B; ++q) {
          g[c * B * B + p * B + q] += kTextureAmplitude * row[c * B + p] * cv[y * B + q];
        }
      }
    }
  }
  return g;
}

FitResult fit_face(const Image& target, const EmbeddingModel& model,
                   const FitConfig& config, std::uint64_t init_seed,
                   const RenderSettings& settings) {
  if (config.max_iters < 1) throw std::invalid_argument("fit: max_iters must be >= 1");
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("fit: learning_rate must be > 0");
  if (!(config.lambda >= 0.0)) throw std::invalid_argument("fit: lambda must be >= 0");
  if (target.height != settings.height || target.width != settings.width ||
      target.channels != 3) {
    throw std::invalid_argument("fit: target does not match the render resolution");
  }
  std::vector<int> active = config.active_texture_coeffs;
  if (active.empty()) {
    active.resize(kTextureCoeffs);
    std::iota(active.begin(), active.end(), 0);
  }
  for (int i : active) {
    if (i < 0 || i >= kTextureCoeffs) throw std::invalid_argument("fit: bad coefficient index");
  }

  IdentityParams params = synth_identity(init_seed);
  const ShapeMap shape = build_shape(params, config.shape_res, config.shape_res);
  const Rasterization raster = rasterize(shape, {}, {}, settings);
  const FeatureVector target_feature = embed(model, target);

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::vector<double> m(active.size(), 0.0), v(active.size(), 0.0);

  FitResult result;
  result.params = params;
  result.best_loss = std::numeric_limits<double>::infinity();
  for (int it = 0; it < config.max_iters; ++it) {
    const Image texture = build_texture(params, config.texture_res, config.texture_res);
    const Image rendered = shade_texture(raster, texture);
    Image img_grad;
    const FitObjective obj =
        fit_objective(model, rendered, target, target_feature, config.lambda, &img_grad);
    const double loss = obj.total();
    if (!std::isfinite(loss)) {
      throw std::runtime_error("fit: non-finite loss at iteration " + std::to_string(it));
    }
    result.loss_trace.push_back(loss);
    result.l1_trace.push_back(obj.l1_term);
    if (loss < result.best_loss) {
      result.best_loss = loss;
      result.best_iter = it;
      result.params = params;
    }
    // A zero objective is a fixed point: both gradient terms vanish.
    if (loss == 0.0 || it + 1 == config.max_iters) break;
    Image tex_grad(texture.height, texture.width, 3, 0.0);
    accumulate_texture_grad(raster, img_grad, tex_grad);
    const std::vector<double> g = texture_coeff_grad(params, tex_grad);
    const double t = it + 1;
    const double bc1 = 1.0 - std::pow(kBeta1, t), bc2 = 1.0 - std::pow(kBeta2, t);
    for (std::size_t a = 0; a < active.size(); ++a) {
      const double gi = g[active[a]];
      m[a] = kBeta1 * m[a] + (1.0 - kBeta1) * gi;
      v[a] = kBeta2 * v[a] + (1.0 - kBeta2) * gi * gi;
      const double step =
          config.learning_rate * (m[a] / bc1) / (std::sqrt(v[a] / bc2) + kEps);
      double& c = params.texture_coeffs[active[a]];
      c = std::clamp(c - step, -1.0, 1.0);
    }
  }
  const Image best_texture =
      build_texture(result.params, config.texture_res, config.texture_res);
  result.final_render = render(shape, best_texture, {}, {}, settings);
  return result;
}

}  // namespace facesim

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

#pragma once

#include <cstdint>
#include <vector>

#include "facesim/geometry.hpp"
#include "facesim/recognizer.hpp"
#include "facesim/renderer.hpp"

namespace facesim {

/// Stage-I fitting: Adam (beta1 0.9, beta2 0.999, eps 1e-8) over the texture
/// coefficients of an identity, shape frozen at the initial identity.
struct FitConfig {
  double lambda = 0.01;
  int max_iters = 300;
  double learning_rate = 0.01;
  /// Texture coefficient indices to optimize; empty means all of them.
  std::vector<int> active_texture_coeffs;
  int shape_res = kDefaultShapeRes;
  int texture_res = kDefaultTextureRes;

  bool operator==(const FitConfig&) const = default;
};

struct FitResult {
  IdentityParams params;           // best-loss iterate
  std::vector<double> loss_trace;  // objective at each evaluated iterate
  std::vector<double> l1_trace;    // sum |x' - x| at each iterate
  int best_iter = 0;
  double best_loss = 0.0;
  RenderOutput final_render;       // best iterate at the neutral condition
};

struct FitObjective {
  double feature_term = 0.0;  // D_f(x', x)
  double l1_term = 0.0;       // ||x' - x||_1
  double lambda = 0.0;
  double total() const { return feature_term + lambda * l1_term; }
};

/// D_f(x', x) + lambda ||x' - x||_1 and, if `grad` is set, d/dx'.
/// The L1 gradient takes sign(0) = 0.
FitObjective fit_objective(const EmbeddingModel& model, const Image& rendered,
                           const Image& target, const FeatureVector& target_feature,
                           double lambda, Image* grad);

FitResult fit_face(const Image& target, const EmbeddingModel& model,
                   const FitConfig& config, std::uint64_t init_seed,
                   const RenderSettings& settings = {});

/// Gradient of a loss with respect to texture coefficients, given its texture
/// gradient. Texels where the unclamped texture leaves [0,1] pass nothing.
std::vector<double> texture_coeff_grad(const IdentityParams& params,
                                       const Image& texture_grad);

}  // namespace facesim

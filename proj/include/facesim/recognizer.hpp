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
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "facesim/image.hpp"

namespace facesim {

/// Architecture of one analytic embedding model:
///   gray = 0.299 R + 0.587 G + 0.114 B
///   lum = log(gray + 0.05) - log(0.55), zero outside the image
///   response_f = (oriented DoG kernel f) * lum, sampled every `stride` px
///   act_f = tanh(gain * response_f)
///   h = average of act over a pool_rows x pool_cols grid of cells
///   feature = normalize(P h), P a seeded Gaussian dim x (filters * cells)
struct ModelConfig {
  std::string id;
  std::vector<double> scales;  // Gaussian sigma of each DoG scale, pixels
  int orientations = 4;
  int pool_rows = 4;
  int pool_cols = 4;
  std::uint64_t seed = 0;
  int dim = 128;
  int stride = 2;
  double gain = 6.0;
  int input_height = 112;
  int input_width = 112;

  bool operator==(const ModelConfig&) const = default;
};

/// The three committed configurations: "modelA", "modelB", "modelC".
ModelConfig named_model_config(std::string_view id);
std::vector<std::string> named_model_ids();

struct FeatureVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const FeatureVector&) const = default;
};

class EmbeddingModel {
 public:
  explicit EmbeddingModel(ModelConfig config);
  static EmbeddingModel named(std::string_view id) {
    return EmbeddingModel(named_model_config(id));
  }

  const ModelConfig& config() const { return config_; }
  const std::string& id() const { return config_.id; }
  int dim() const { return config_.dim; }
  int filter_count() const { return static_cast<int>(kernels_.size()); }
  int output_rows() const { return out_rows_; }
  int output_cols() const { return out_cols_; }

  /// weights(dy, dx) = scale * (pos_y[dy] pos_x[dx] - neg_y[dy] neg_x[dx]);
  /// the dense form is kept for inspection, the factors drive evaluation.
  struct Kernel {
    int radius = 0;
    std::vector<double> weights;  // (2r+1)^2, row-major, dy outer
    std::vector<double> pos_x, pos_y, neg_x, neg_y;
    double scale = 1.0;
  };
  const std::vector<Kernel>& kernels() const { return kernels_; }
  /// Row-major dim x (filters * cells) for RGB, dim x (2 * filters * cells)
  /// for RGB-D.
  const std::vector<double>& projection() const { return projection_; }
  const std::vector<double>& rgbd_projection() const { return rgbd_projection_; }
  int cell_of(int oy, int ox) const;
  int cell_count() const { return config_.pool_rows * config_.pool_cols; }
  int cell_size(int cell) const { return cell_sizes_[cell]; }

 private:
  ModelConfig config_;
  std::vector<Kernel> kernels_;
  std::vector<double> projection_;
  std::vector<double> rgbd_projection_;
  int out_rows_ = 0;
  int out_cols_ = 0;
  int max_radius_ = 0;
  std::vector<int> cell_sizes_;
  std::vector<int> cell_index_;  // per response position

  friend struct EmbedEngine;
};

/// Oriented difference of Gaussians: G(p - o) - G(p + o), o = sigma (cos t, sin t),
/// scaled so the absolute weights sum to 2.
EmbeddingModel::Kernel make_dog_kernel(double sigma, double theta);

FeatureVector embed(const EmbeddingModel& model, const Image& image);

/// Gradient of <upstream, embed(image)> with respect to the image.
Image embed_grad(const EmbeddingModel& model, const Image& image,
                 std::span<const double> upstream);

/// D_f(embed(image), target) and, when `grad` is non-null, its image gradient.
double distance_to(const EmbeddingModel& model, const Image& image,
                   const FeatureVector& target, Image* grad);

/// Depth plane (HxWx1, [0,1], background 1) filtered as a second input channel.
FeatureVector embed_rgbd(const EmbeddingModel& model, const Image& image,
                         const Image& depth);

/// Squared Euclidean distance; equals 2 - 2 a.b on unit vectors.
double feature_distance(const FeatureVector& a, const FeatureVector& b);

struct Threshold {
  double delta = 0.0;
};

enum class Decision { same, different };

/// Same iff D_f < delta (strict).
Decision decide(double distance, double delta);
Decision verify(const EmbeddingModel& model, const Image& xa, const Image& xb,
                double delta);

using ImagePair = std::pair<Image, Image>;

/// Fraction of pairs classified correctly at `delta`.
double verification_accuracy(std::span<const double> genuine,
                             std::span<const double> impostor, double delta);

/// Accuracy-maximizing delta over the midpoints between consecutive distinct
/// sorted distances; ties go to the smaller delta.
Threshold calibrate_threshold_from_distances(std::span<const double> genuine,
                                             std::span<const double> impostor);
Threshold calibrate_threshold(const EmbeddingModel& model,
                              const std::vector<ImagePair>& genuine_pairs,
                              const std::vector<ImagePair>& impostor_pairs);

}  // namespace facesim

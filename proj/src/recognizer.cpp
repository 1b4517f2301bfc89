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

#include "facesim/recognizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "facesim/rng.hpp"

namespace facesim {

namespace {

constexpr double kLuma[3] = {0.299, 0.587, 0.114};
constexpr double kLogOffset = 0.05;

std::vector<double> gaussian_matrix(std::uint64_t seed, std::string_view label,
                                    int rows, int cols) {
  Rng rng(stream_seed(seed, label));
  std::vector<double> m(static_cast<std::size_t>(rows) * cols);
  const double s = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& v : m) v = rng.normal(0.0, s);
  return m;
}

}  // namespace

ModelConfig named_model_config(std::string_view id) {
  ModelConfig c;
  c.id = std::string(id);
  if (id == "modelA") {
    c.scales = {1.0, 2.0};
    c.orientations = 4;
    c.pool_rows = 4;
    c.pool_cols = 4;
    c.seed = 101;
    c.dim = 128;
    c.gain = 6.0;
  } else if (id == "modelB") {
    c.scales = {1.5, 3.0};
    c.orientations = 4;
    c.pool_rows = 3;
    c.pool_cols = 3;
    c.seed = 202;
    c.dim = 64;
    c.gain = 5.0;
  } else if (id == "modelC") {
    c.scales = {1.0, 2.5};
    c.orientations = 3;
    c.pool_rows = 5;
    c.pool_cols = 5;
    c.seed = 303;
    c.dim = 128;
    c.gain = 8.0;
  } else {
    throw std::invalid_argument("unknown model id: " + c.id);
  }
  return c;
}

std::vector<std::string> named_model_ids() { return {"modelA", "modelB", "modelC"}; }

EmbeddingModel::Kernel make_dog_kernel(double sigma, double theta) {
  if (!(sigma > 0.0)) throw std::invalid_argument("DoG sigma must be positive");
  EmbeddingModel::Kernel k;
  k.radius = static_cast<int>(std::ceil(3.5 * sigma));
  const int n = 2 * k.radius + 1;
  const double ox = sigma * std::cos(theta), oy = sigma * std::sin(theta);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  auto gauss = [&](double t) { return std::exp(-t * t * inv2s2); };
  k.pos_x.resize(n);
  k.pos_y.resize(n);
  k.neg_x.resize(n);
  k.neg_y.resize(n);
  for (int d = -k.radius; d <= k.radius; ++d) {
    k.pos_x[d + k.radius] = gauss(d - ox);
    k.pos_y[d + k.radius] = gauss(d - oy);
    k.neg_x[d + k.radius] = gauss(d + ox);
    k.neg_y[d + k.radius] = gauss(d + oy);
  }
  double l1 = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      l1 += std::abs(k.pos_y[i] * k.pos_x[j] - k.neg_y[i] * k.neg_x[j]);
    }
  }
  k.scale = 2.0 / l1;
  k.weights.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      k.weights[static_cast<std::size_t>(i) * n + j] =
          k.scale * (k.pos_y[i] * k.pos_x[j] - k.neg_y[i] * k.neg_x[j]);
    }
  }
  return k;
}

EmbeddingModel::EmbeddingModel(ModelConfig config) : config_(std::move(config)) {
  const auto& c = config_;
  if (c.scales.empty() || c.orientations < 1 || c.pool_rows < 1 || c.pool_cols < 1 ||
      c.dim < 2 || c.stride < 1 || c.input_height < 1 || c.input_width < 1) {
    throw std::invalid_argument("invalid embedding model config: " + c.id);
  }
  for (double s : c.scales) {
    for (int o = 0; o < c.orientations; ++o) {
      kernels_.push_back(make_dog_kernel(s, std::numbers::pi * o / c.orientations));
      max_radius_ = std::max(max_radius_, kernels_.back().radius);
    }
  }
  out_rows_ = (c.input_height + c.stride - 1) / c.stride;
  out_cols_ = (c.input_width + c.stride - 1) / c.stride;
  if (out_rows_ < c.pool_rows || out_cols_ < c.pool_cols) {
    throw std::invalid_argument("pool grid finer than the response map: " + c.id);
  }
  cell_sizes_.assign(cell_count(), 0);
  cell_index_.resize(static_cast<std::size_t>(out_rows_) * out_cols_);
  for (int y = 0; y < out_rows_; ++y) {
    for (int x = 0; x < out_cols_; ++x) {
      cell_index_[static_cast<std::size_t>(y) * out_cols_ + x] = cell_of(y, x);
      ++cell_sizes_[cell_of(y, x)];
    }
  }
  const int features = filter_count() * cell_count();
  projection_ = gaussian_matrix(c.seed, "projection", c.dim, features);
  rgbd_projection_ = gaussian_matrix(c.seed, "rgbd_projection", c.dim, 2 * features);
}

int EmbeddingModel::cell_of(int oy, int ox) const {
  const int r = oy * config_.pool_rows / out_rows_;
  const int c = ox * config_.pool_cols / out_cols_;
  return r * config_.pool_cols + c;
}

// Forward/backward evaluation over one or two zero-padded input planes.
struct EmbedEngine {
  const EmbeddingModel& m;
  int planes;
  int pad, ph, pw;
  std::vector<double> input;  // planes x ph x pw
  std::vector<double> acts;   // planes x filters x out_rows x out_cols
  std::vector<double> pooled;
  std::vector<double> z;
  double znorm = 0.0;
  std::vector<double> y;
  std::vector<double> lum;

  EmbedEngine(const EmbeddingModel& model, int n_planes)
      : m(model), planes(n_planes), pad(model.max_radius_),
        ph(model.config_.input_height + 2 * model.max_radius_),
        pw(model.config_.input_width + 2 * model.max_radius_),
        input(static_cast<std::size_t>(n_planes) * ph * pw, 0.0) {}

  const std::vector<double>& proj() const {
    return planes == 1 ? m.projection_ : m.rgbd_projection_;
  }
  double* plane(int p) { return input.data() + static_cast<std::size_t>(p) * ph * pw; }

  void load_gray(const Image& img) {
    double* dst = plane(0);
    lum.assign(static_cast<std::size_t>(img.height) * img.width, 0.0);
    for (int yy = 0; yy < img.height; ++yy) {
      for (int xx = 0; xx < img.width; ++xx) {
        const double g = kLuma[0] * img.at(yy, xx, 0) + kLuma[1] * img.at(yy, xx, 1) +
                         kLuma[2] * img.at(yy, xx, 2);
        lum[static_cast<std::size_t>(yy) * img.width + xx] = g;
        dst[static_cast<std::size_t>(yy + pad) * pw + xx + pad] =
            std::log(g + kLogOffset) - std::log(0.5 + kLogOffset);
      }
    }
  }

  void load_depth(const Image& depth) {
    double* dst = plane(1);
    for (int yy = 0; yy < depth.height; ++yy) {
      for (int xx = 0; xx < depth.width; ++xx) {
        dst[static_cast<std::size_t>(yy + pad) * pw + xx + pad] = depth.at(yy, xx) - 0.5;
      }
    }
  }

  void forward() {
    const int F = m.filter_count(), C = m.cell_count();
    const int R = m.out_rows_, Cc = m.out_cols_, S = m.config_.stride;
    const double gain = m.config_.gain;
    const std::size_t map = static_cast<std::size_t>(R) * Cc;
    acts.assign(static_cast<std::size_t>(planes) * F * map, 0.0);
    pooled.assign(static_cast<std::size_t>(planes) * F * C, 0.0);
    std::vector<double> hp(static_cast<std::size_t>(ph) * Cc);
    std::vector<double> hm(hp.size());
    for (int p = 0; p < planes; ++p) {
      const double* src = plane(p);
      for (int f = 0; f < F; ++f) {
        const auto& k = m.kernels_[f];
        const int r = k.radius, n = 2 * r + 1;
        double* a = acts.data() + (static_cast<std::size_t>(p) * F + f) * map;
        double* h = pooled.data() + (static_cast<std::size_t>(p) * F + f) * C;
        // Horizontal pass at the strided columns, every padded row in reach.
        const int row_lo = pad - r, row_hi = (R - 1) * S + pad + r;
        for (int row = row_lo; row <= row_hi; ++row) {
          const double* line = src + static_cast<std::size_t>(row) * pw;
          double* op = hp.data() + static_cast<std::size_t>(row) * Cc;
          double* om = hm.data() + static_cast<std::size_t>(row) * Cc;
          for (int ox = 0; ox < Cc; ++ox) {
            const double* in = line + ox * S + pad - r;
            double sp = 0.0, sm = 0.0;
            for (int d = 0; d < n; ++d) {
              sp += k.pos_x[d] * in[d];
              sm += k.neg_x[d] * in[d];
            }
            op[ox] = sp;
            om[ox] = sm;
          }
        }
        for (int oy = 0; oy < R; ++oy) {
          const int top = oy * S + pad - r;
          double* arow = a + static_cast<std::size_t>(oy) * Cc;
          for (int ox = 0; ox < Cc; ++ox) arow[ox] = 0.0;
          for (int d = 0; d < n; ++d) {
            const double wp = k.pos_y[d], wm = k.neg_y[d];
            const double* lp = hp.data() + static_cast<std::size_t>(top + d) * Cc;
            const double* lm = hm.data() + static_cast<std::size_t>(top + d) * Cc;
            for (int ox = 0; ox < Cc; ++ox) arow[ox] += wp * lp[ox] - wm * lm[ox];
          }
          const int* cells = m.cell_index_.data() + static_cast<std::size_t>(oy) * Cc;
          for (int ox = 0; ox < Cc; ++ox) {
            const double act = std::tanh(gain * k.scale * arow[ox]);
            arow[ox] = act;
            h[cells[ox]] += act;
          }
        }
        for (int c = 0; c < C; ++c) h[c] /= m.cell_sizes_[c];
      }
    }
    const auto& P = proj();
    const std::size_t nh = pooled.size();
    z.assign(m.config_.dim, 0.0);
    for (int i = 0; i < m.config_.dim; ++i) {
      const double* row = P.data() + static_cast<std::size_t>(i) * nh;
      double s = 0.0;
      for (std::size_t j = 0; j < nh; ++j) s += row[j] * pooled[j];
      z[i] = s;
    }
    double sq = 0.0;
    for (double v : z) sq += v * v;
    znorm = std::sqrt(sq);
    if (!(znorm > 0.0) || !std::isfinite(znorm)) {
      throw std::runtime_error("embedding has zero or non-finite norm");
    }
    y.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i] / znorm;
  }

  // Gradient of <dy, y> with respect to the padded input planes.
  std::vector<double> backward(std::span<const double> dy) const {
    const int F = m.filter_count(), C = m.cell_count();
    const int R = m.out_rows_, Cc = m.out_cols_, S = m.config_.stride;
    const double gain = m.config_.gain;
    const std::size_t map = static_cast<std::size_t>(R) * Cc;
    double ydy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) ydy += y[i] * dy[i];
    std::vector<double> dz(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) dz[i] = (dy[i] - y[i] * ydy) / znorm;
    const auto& P = proj();
    const std::size_t nh = pooled.size();
    std::vector<double> dh(nh, 0.0);
    for (int i = 0; i < m.config_.dim; ++i) {
      const double* row = P.data() + static_cast<std::size_t>(i) * nh;
      const double g = dz[i];
      for (std::size_t j = 0; j < nh; ++j) dh[j] += row[j] * g;
    }
    std::vector<double> dinput(input.size(), 0.0);
    std::vector<double> dhp(static_cast<std::size_t>(ph) * Cc);
    std::vector<double> dhm(dhp.size());
    std::vector<double> dr(static_cast<std::size_t>(Cc));
    for (int p = 0; p < planes; ++p) {
      double* dst = dinput.data() + static_cast<std::size_t>(p) * ph * pw;
      for (int f = 0; f < F; ++f) {
        const auto& k = m.kernels_[f];
        const int r = k.radius, n = 2 * r + 1;
        const double* a = acts.data() + (static_cast<std::size_t>(p) * F + f) * map;
        const double* h = dh.data() + (static_cast<std::size_t>(p) * F + f) * C;
        const int row_lo = pad - r, row_hi = (R - 1) * S + pad + r;
        std::fill(dhp.begin() + static_cast<std::ptrdiff_t>(row_lo) * Cc,
                  dhp.begin() + static_cast<std::ptrdiff_t>(row_hi + 1) * Cc, 0.0);
        std::fill(dhm.begin() + static_cast<std::ptrdiff_t>(row_lo) * Cc,
                  dhm.begin() + static_cast<std::ptrdiff_t>(row_hi + 1) * Cc, 0.0);
        for (int oy = 0; oy < R; ++oy) {
          const double* arow = a + static_cast<std::size_t>(oy) * Cc;
          const int* cells = m.cell_index_.data() + static_cast<std::size_t>(oy) * Cc;
          for (int ox = 0; ox < Cc; ++ox) {
            const int cell = cells[ox];
            const double act = arow[ox];
            dr[ox] = h[cell] / m.cell_sizes_[cell] * gain * k.scale * (1.0 - act * act);
          }
          const int top = oy * S + pad - r;
          for (int d = 0; d < n; ++d) {
            const double wp = k.pos_y[d], wm = k.neg_y[d];
            double* lp = dhp.data() + static_cast<std::size_t>(top + d) * Cc;
            double* lm = dhm.data() + static_cast<std::size_t>(top + d) * Cc;
            for (int ox = 0; ox < Cc; ++ox) {
              lp[ox] += wp * dr[ox];
              lm[ox] -= wm * dr[ox];
            }
          }
        }
        for (int row = row_lo; row <= row_hi; ++row) {
          double* line = dst + static_cast<std::size_t>(row) * pw;
          const double* gp = dhp.data() + static_cast<std::size_t>(row) * Cc;
          const double* gm = dhm.data() + static_cast<std::size_t>(row) * Cc;
          for (int ox = 0; ox < Cc; ++ox) {
            double* out = line + ox * S + pad - r;
            const double vp = gp[ox], vm = gm[ox];
            for (int d = 0; d < n; ++d) out[d] += k.pos_x[d] * vp + k.neg_x[d] * vm;
          }
        }
      }
    }
    return dinput;
  }

  Image image_grad(const std::vector<double>& dinput) const {
    const int H = m.config_.input_height, W = m.config_.input_width;
    Image g(H, W, 3);
    for (int yy = 0; yy < H; ++yy) {
      for (int xx = 0; xx < W; ++xx) {
        const double d = dinput[static_cast<std::size_t>(yy + pad) * pw + xx + pad] /
                         (lum[static_cast<std::size_t>(yy) * W + xx] + kLogOffset);
        for (int c = 0; c < 3; ++c) g.at(yy, xx, c) = kLuma[c] * d;
      }
    }
    return g;
  }
};

namespace {

void check_input(const EmbeddingModel& model, const Image& image) {
  const auto& c = model.config();
  if (image.height != c.input_height || image.width != c.input_width ||
      image.channels != 3) {
    throw std::invalid_argument("embed: expected " + std::to_string(c.input_height) +
                                "x" + std::to_string(c.input_width) +
                                "x3 input for " + c.id);
  }
}

}  // namespace

FeatureVector embed(const EmbeddingModel& model, const Image& image) {
  check_input(model, image);
  EmbedEngine e(model, 1);
  e.load_gray(image);
  e.forward();
  return {e.y};
}

Image embed_grad(const EmbeddingModel& model, const Image& image,
                 std::span<const double> upstream) {
  check_input(model, image);
  if (upstream.size() != static_cast<std::size_t>(model.dim())) {
    throw std::invalid_argument("embed_grad: upstream has wrong dimension");
  }
  EmbedEngine e(model, 1);
  e.load_gray(image);
  e.forward();
  return e.image_grad(e.backward(upstream));
}

double distance_to(const EmbeddingModel& model, const Image& image,
                   const FeatureVector& target, Image* grad) {
  check_input(model, image);
  if (target.size() != static_cast<std::size_t>(model.dim())) {
    throw std::invalid_argument("distance_to: target has wrong dimension");
  }
  EmbedEngine e(model, 1);
  e.load_gray(image);
  e.forward();
  double d = 0.0;
  std::vector<double> up(e.y.size());
  for (std::size_t i = 0; i < e.y.size(); ++i) {
    const double diff = e.y[i] - target.values[i];
    d += diff * diff;
    up[i] = 2.0 * diff;
  }
  if (grad) *grad = e.image_grad(e.backward(up));
  return d;
}

FeatureVector embed_rgbd(const EmbeddingModel& model, const Image& image,
                         const Image& depth) {
  check_input(model, image);
  if (depth.height != image.height || depth.width != image.width ||
      depth.channels != 1) {
    throw std::invalid_argument("embed_rgbd: depth resolution mismatch");
  }
  EmbedEngine e(model, 2);
  e.load_gray(image);
  e.load_depth(depth);
  e.forward();
  return {e.y};
}

double feature_distance(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("feature dimension mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a.values[i] - b.values[i];
    d += diff * diff;
  }
  return d;
}

Decision decide(double distance, double delta) {
  return distance < delta ? Decision::same : Decision::different;
}

Decision verify(const EmbeddingModel& model, const Image& xa, const Image& xb,
                double delta) {
  return decide(feature_distance(embed(model, xa), embed(model, xb)), delta);
}

double verification_accuracy(std::span<const double> genuine,
                             std::span<const double> impostor, double delta) {
  std::size_t correct = 0;
  for (double d : genuine) correct += d < delta ? 1 : 0;
  for (double d : impostor) correct += d < delta ? 0 : 1;
  return static_cast<double>(correct) /
         static_cast<double>(genuine.size() + impostor.size());
}

Threshold calibrate_threshold_from_distances(std::span<const double> genuine,
                                             std::span<const double> impostor) {
  if (genuine.empty() || impostor.empty()) {
    throw std::invalid_argument("calibrate_threshold: need genuine and impostor pairs");
  }
  struct Item {
    double d;
    bool genuine;
  };
  std::vector<Item> items;
  items.reserve(genuine.size() + impostor.size());
  for (double d : genuine) items.push_back({d, true});
  for (double d : impostor) items.push_back({d, false});
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.d < b.d; });

  // Sweep: at a midpoint after index i, everything up to i is "same".
  std::size_t correct = impostor.size();  // threshold below every distance
  std::size_t best_correct = 0;
  double best_delta = items.front().d;
  bool found = false;
  for (std::size_t i = 0; i < items.size(); ++i) {
    correct += items[i].genuine ? 1 : 0;
    correct -= items[i].genuine ? 0 : 1;
    if (i + 1 == items.size() || items[i + 1].d == items[i].d) continue;
    const double mid = 0.5 * (items[i].d + items[i + 1].d);
    if (!found || correct > best_correct) {
      best_correct = correct;
      best_delta = mid;
      found = true;
    }
  }
  return {best_delta};
}

Threshold calibrate_threshold(const EmbeddingModel& model,
                              const std::vector<ImagePair>& genuine_pairs,
                              const std::vector<ImagePair>& impostor_pairs) {
  if (genuine_pairs.empty() || impostor_pairs.empty()) {
    throw std::invalid_argument("calibrate_threshold: need genuine and impostor pairs");
  }
  auto distances = [&](const std::vector<ImagePair>& pairs) {
    std::vector<double> d;
    d.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
      d.push_back(feature_distance(embed(model, a), embed(model, b)));
    }
    return d;
  };
  const auto g = distances(genuine_pairs);
  const auto i = distances(impostor_pairs);
  return calibrate_threshold_from_distances(g, i);
}

}  // namespace facesim

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

#include "facesim/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "facesim/parallel.hpp"
#include "facesim/rng.hpp"

namespace facesim {

AttackMode parse_attack_mode(std::string_view s) {
  if (s == "dodging") return AttackMode::dodging;
  if (s == "impersonation") return AttackMode::impersonation;
  throw std::invalid_argument("unknown attack mode: " + std::string(s));
}

std::string_view attack_mode_name(AttackMode m) {
  return m == AttackMode::dodging ? "dodging" : "impersonation";
}

AttackMethod parse_attack_method(std::string_view s) {
  if (s == "MIM") return AttackMethod::mim;
  if (s == "EOT") return AttackMethod::eot;
  if (s == "Face3DAdv_x") return AttackMethod::face3dadv_x;
  if (s == "Face3DAdv_w") return AttackMethod::face3dadv_w;
  throw std::invalid_argument("unknown attack method: " + std::string(s));
}

std::string_view attack_method_name(AttackMethod m) {
  switch (m) {
    case AttackMethod::mim: return "MIM";
    case AttackMethod::eot: return "EOT";
    case AttackMethod::face3dadv_x: return "Face3DAdv_x";
    case AttackMethod::face3dadv_w: return "Face3DAdv_w";
  }
  return "unknown";
}

void validate(const AttackConfig& c) {
  if (!(c.epsilon >= 0.0 && c.epsilon <= 1.0)) {
    throw std::invalid_argument("epsilon must lie in [0,1]");
  }
  if (!(c.alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  // epsilon = 0 is a degenerate no-op run kept for testing.
  if (c.epsilon > 0.0 && c.epsilon < c.alpha) {
    throw std::invalid_argument("epsilon must be >= alpha");
  }
  if (c.iters < 1) throw std::invalid_argument("iters must be >= 1");
  if (c.sample_count < 1) throw std::invalid_argument("sample_count must be >= 1");
  if (!c.sample_with_replacement && c.sample_count > c.candidate_count) {
    throw std::invalid_argument("sample_count must not exceed candidate_count");
  }
  if (!(c.transform2d_sigma >= 0.0)) {
    throw std::invalid_argument("transform2d_sigma must be non-negative");
  }
  if (c.method == AttackMethod::face3dadv_w && c.basis_dim < 4) {
    throw std::invalid_argument("basis_dim must be >= 4");
  }
  if (!(c.latent_learning_rate > 0.0)) {
    throw std::invalid_argument("latent_learning_rate must be positive");
  }
}

AttackConfig default_attack_config(AttackMethod method, AttackMode mode) {
  AttackConfig c;
  c.method = method;
  c.mode = mode;
  c.epsilon = (mode == AttackMode::impersonation ? 40.0 : 255.0) / 255.0;
  c.alpha = 1.5 / 255.0;
  c.momentum_mu = 1.0;
  c.sample_count = 10;
  c.candidate_count = 20;
  switch (method) {
    case AttackMethod::mim:
      c.iters = 400;
      c.sample_count = 1;
      break;
    case AttackMethod::eot:
      c.iters = 400;
      c.transform2d_sigma = 0.1;
      break;
    case AttackMethod::face3dadv_x:
    case AttackMethod::face3dadv_w:
      c.iters = 100;
      c.transform2d_sigma = 0.1;
      break;
  }
  return c;
}

CandidateSet default_candidates() {
  CandidateSet s;
  for (double yaw : {-15.0, -5.0, 5.0, 15.0}) {
    for (double pitch : {-15.0, 0.0, 15.0}) {
      s.conditions.push_back({{yaw, pitch}, {}, {}});
    }
  }
  s.conditions.push_back({{0.0, -10.0}, {}, {}});
  s.conditions.push_back({{0.0, 10.0}, {}, {}});
  for (double az : {-60.0, -36.0, -12.0, 12.0, 36.0, 60.0}) {
    s.conditions.push_back({{}, {az, Lighting{}.ambient}, {}});
  }
  return s;
}

void validate(const CandidateSet& c, int candidate_count) {
  if (static_cast<int>(c.conditions.size()) != candidate_count) {
    throw std::invalid_argument("candidate set size does not match candidate_count");
  }
  for (std::size_t i = 0; i < c.conditions.size(); ++i) {
    validate(c.conditions[i].view);
    validate(c.conditions[i].light);
    for (std::size_t j = 0; j < i; ++j) {
      if (c.conditions[i] == c.conditions[j]) {
        throw std::invalid_argument("candidate conditions must be distinct");
      }
    }
  }
}

double attack_loss(AttackMode mode, double distance) {
  return mode == AttackMode::dodging ? -distance : distance;
}

Image project_patch(const Image& t, const Image& t_a, const PatchMask& mask,
                    double epsilon) {
  if (!t.same_shape(t_a) || mask.height != t.height || mask.width != t.width) {
    throw std::invalid_argument("project_patch: shape mismatch");
  }
  Image out = t_a;
  const int C = t.channels;
  for (std::size_t p = 0; p < t.pixel_count(); ++p) {
    if (!mask.values[p]) continue;
    for (int c = 0; c < C; ++c) {
      const std::size_t i = p * C + c;
      const double a = t_a.data[i];
      // Pull the bounds inward until |bound - a| <= epsilon holds exactly.
      double lo = a - epsilon, hi = a + epsilon;
      while (a - lo > epsilon) lo = std::nextafter(lo, a);
      while (hi - a > epsilon) hi = std::nextafter(hi, a);
      lo = std::max(0.0, lo);
      hi = std::min(1.0, hi);
      out.data[i] = std::clamp(t.data[i], lo, hi);
    }
  }
  return out;
}

double masked_linf(const Image& t, const Image& t_a, const PatchMask& mask) {
  double worst = 0.0;
  for (std::size_t p = 0; p < t.pixel_count(); ++p) {
    if (!mask.values[p]) continue;
    for (int c = 0; c < t.channels; ++c) {
      const std::size_t i = p * t.channels + c;
      worst = std::max(worst, std::abs(t.data[i] - t_a.data[i]));
    }
  }
  return worst;
}

bool equal_outside_mask(const Image& t, const Image& t_a, const PatchMask& mask) {
  for (std::size_t p = 0; p < t.pixel_count(); ++p) {
    if (mask.values[p]) continue;
    for (int c = 0; c < t.channels; ++c) {
      const std::size_t i = p * t.channels + c;
      if (t.data[i] != t_a.data[i]) return false;
    }
  }
  return true;
}

ImportanceDistribution importance_probs(std::span<const double> losses) {
  if (losses.empty()) throw std::invalid_argument("importance_probs: no candidates");
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : losses) {
    if (!std::isfinite(l)) throw std::invalid_argument("importance_probs: non-finite loss");
    mx = std::max(mx, l);
  }
  ImportanceDistribution d;
  d.probs.resize(losses.size());
  double z = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    d.probs[i] = std::exp(losses[i] - mx);
    z += d.probs[i];
  }
  for (double& p : d.probs) p /= z;
  return d;
}

std::vector<int> sample_conditions(const ImportanceDistribution& dist, int count,
                                   Rng& rng, bool with_replacement) {
  const int n = static_cast<int>(dist.probs.size());
  if (count < 0 || (!with_replacement && count > n) || n == 0) {
    throw std::invalid_argument("sample_conditions: bad sample count");
  }
  std::vector<double> mass = dist.probs;
  std::vector<int> picked;
  picked.reserve(count);
  for (int k = 0; k < count; ++k) {
    double total = 0.0;
    for (double m : mass) total += m;
    const double u = rng.uniform() * total;
    double acc = 0.0;
    int choice = -1;
    for (int i = 0; i < n; ++i) {
      if (mass[i] <= 0.0) continue;
      acc += mass[i];
      choice = i;
      if (u < acc) break;
    }
    picked.push_back(choice);
    if (!with_replacement) mass[choice] = 0.0;
  }
  return picked;
}

double total_variation(const Image& img) {
  double tv = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        if (x + 1 < img.width) tv += std::abs(img.at(y, x + 1, c) - img.at(y, x, c));
        if (y + 1 < img.height) tv += std::abs(img.at(y + 1, x, c) - img.at(y, x, c));
      }
    }
  }
  return tv;
}

namespace {

struct Sample {
  const Rasterization* raster = nullptr;
  std::vector<Transform2D> warps;
};

// Attack loss of one rendered sample and, optionally, its texture gradient.
double sample_loss(const Sample& s, const Image& texture, const EmbeddingModel& model,
                   const FeatureVector& victim, AttackMode mode, Image* tex_grad) {
  Image img = shade_texture(*s.raster, texture);
  std::vector<Image> warp_inputs;
  for (const auto& w : s.warps) {
    if (tex_grad) warp_inputs.push_back(img);
    img = apply_transform2d(img, w);
  }
  Image g;
  const double d = distance_to(model, img, victim, tex_grad ? &g : nullptr);
  const double sign = mode == AttackMode::dodging ? -1.0 : 1.0;
  if (tex_grad) {
    for (double& v : g.data) v *= sign;
    for (std::size_t k = s.warps.size(); k-- > 0;) {
      g = transform2d_grad(warp_inputs[k], s.warps[k], g);
    }
    *tex_grad = Image(texture.height, texture.width, texture.channels, 0.0);
    accumulate_texture_grad(*s.raster, g, *tex_grad);
  }
  return sign * d;
}

// Rotation then projective warp, both at one strength sigma ~ U(0, sigma_max).
std::vector<Transform2D> draw_warps(double sigma_max, Rng& rng) {
  if (sigma_max <= 0.0) return {};
  const double sigma = rng.uniform(0.0, sigma_max);
  return {sample_rotation(sigma, rng), sample_projective(sigma, rng)};
}

// Shared state of one crafting run: fixed-shape rasterizations per condition.
class Crafter {
 public:
  Crafter(const Face3D& attacker, const Image& victim_image, const PatchMask& mask,
          const EmbeddingModel& model, const CandidateSet& candidates,
          const AttackConfig& config, int threads)
      : attacker_(attacker), mask_(mask), model_(model), config_(config),
        threads_(threads), rng_(stream_seed(config.rng_seed, "attack")) {
    validate(config);
    if (mask.height != attacker.texture.height || mask.width != attacker.texture.width) {
      throw std::invalid_argument("mask resolution does not match the texture");
    }
    if (mask.area_fraction() == 0.0) throw std::invalid_argument("empty patch mask");
    const bool uses_candidates = config.method == AttackMethod::face3dadv_x ||
                                 config.method == AttackMethod::face3dadv_w;
    if (uses_candidates) validate(candidates, config.candidate_count);
    victim_ = embed(model, victim_image);
    settings_.width = model.config().input_width;
    settings_.height = model.config().input_height;
    neutral_ = rasterize(attacker.shape, {}, {}, settings_);
    if (uses_candidates) {
      conditions_ = candidates.conditions;
      rasters_.resize(conditions_.size());
      parallel_for(conditions_.size(), threads_, [&](std::size_t i) {
        rasters_[i] = rasterize(attacker.shape, conditions_[i].view,
                                conditions_[i].light, settings_);
      });
    }
  }

  const PatchMask& mask() const { return mask_; }
  const AttackConfig& config() const { return config_; }
  const Rasterization& neutral() const { return neutral_; }
  Rng& rng() { return rng_; }

  // Chooses this iteration's samples; consumes rng in a fixed order.
  std::vector<Sample> choose(const Image& texture, std::vector<double>* cand_mean) {
    std::vector<Sample> samples;
    const double sigma = config_.transform2d_sigma;
    switch (config_.method) {
      case AttackMethod::mim:
        samples.push_back({&neutral_, {}});
        break;
      case AttackMethod::eot:
        for (int m = 0; m < config_.sample_count; ++m) {
          samples.push_back({&neutral_, draw_warps(sigma, rng_)});
        }
        break;
      case AttackMethod::face3dadv_x:
      case AttackMethod::face3dadv_w: {
        const std::vector<double> losses = candidate_losses(texture);
        double mean = 0.0;
        for (double l : losses) mean += l;
        if (cand_mean) cand_mean->push_back(mean / losses.size());
        ImportanceDistribution dist;
        if (config_.use_importance_sampling) {
          dist = importance_probs(losses);
        } else {
          dist.probs.assign(rasters_.size(), 1.0 / rasters_.size());
        }
        const auto idx = sample_conditions(dist, config_.sample_count, rng_,
                                           config_.sample_with_replacement);
        for (int i : idx) {
          std::vector<Transform2D> warps = conditions_[i].warps;
          for (auto& w : draw_warps(sigma, rng_)) warps.push_back(w);
          samples.push_back({&rasters_[i], std::move(warps)});
        }
        break;
      }
    }
    return samples;
  }

  std::vector<double> candidate_losses(const Image& texture) const {
    std::vector<double> losses(rasters_.size());
    parallel_for(rasters_.size(), threads_, [&](std::size_t i) {
      Sample s{&rasters_[i], conditions_[i].warps};
      losses[i] = sample_loss(s, texture, model_, victim_, config_.mode, nullptr);
    });
    return losses;
  }

  // Mean loss over the samples and the texture gradient of that mean.
  double mean_loss_grad(const std::vector<Sample>& samples, const Image& texture,
                        Image& grad) const {
    std::vector<double> losses(samples.size());
    std::vector<Image> grads(samples.size());
    parallel_for(samples.size(), threads_, [&](std::size_t i) {
      losses[i] = sample_loss(samples[i], texture, model_, victim_, config_.mode, &grads[i]);
    });
    grad = Image(texture.height, texture.width, texture.channels, 0.0);
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      loss += losses[i];
      for (std::size_t k = 0; k < grad.size(); ++k) grad.data[k] += grads[i].data[k];
    }
    for (double& g : grad.data) {
      g *= inv;
      if (!std::isfinite(g)) throw std::runtime_error("attack: non-finite gradient");
    }
    loss *= inv;
    if (!std::isfinite(loss)) throw std::runtime_error("attack: non-finite loss");
    return loss;
  }

  void finish(AttackResult& r) const {
    const Image img = shade_texture(neutral_, r.adv_texture);
    r.neutral_distance = distance_to(model_, img, victim_, nullptr);
    if (config_.delta >= 0.0) {
      const bool same = decide(r.neutral_distance, config_.delta) == Decision::same;
      r.success_at_neutral = config_.mode == AttackMode::impersonation ? same : !same;
    }
  }

 private:
  const Face3D& attacker_;
  const PatchMask& mask_;
  const EmbeddingModel& model_;
  AttackConfig config_;
  int threads_;
  Rng rng_;
  RenderSettings settings_;
  FeatureVector victim_;
  Rasterization neutral_;
  std::vector<Condition> conditions_;
  std::vector<Rasterization> rasters_;
};

}  // namespace

AttackResult run_attack(const Face3D& attacker, const Image& victim_image,
                        const PatchMask& mask, const EmbeddingModel& model,
                        const CandidateSet& candidates, const AttackConfig& config,
                        int threads, const IterateObserver& observer) {
  if (config.method == AttackMethod::face3dadv_w) {
    return face3dadv_w(attacker, victim_image, mask, model, candidates, config,
                       config.basis_dim, threads, observer);
  }
  Crafter crafter(attacker, victim_image, mask, model, candidates, config, threads);
  const Image& t_a = attacker.texture;
  RenderSettings settings;
  settings.width = model.config().input_width;
  settings.height = model.config().input_height;

  Image t = t_a;
  if (config.init_from_victim) {
    t = resample_image_to_texture(attacker.shape, victim_image, mask.values, t_a, settings);
  }
  t = project_patch(t, t_a, mask, config.epsilon);

  AttackResult result;
  Image momentum(t.height, t.width, t.channels, 0.0);
  for (int k = 0; k < config.iters; ++k) {
    if (observer) observer(k, t);
    const auto samples = crafter.choose(t, &result.candidate_loss_trace);
    Image grad;
    result.loss_trace.push_back(crafter.mean_loss_grad(samples, t, grad));
    const Image* direction = &grad;
    if (config.method == AttackMethod::mim) {
      double l1 = 0.0;
      for (double g : grad.data) l1 += std::abs(g);
      const double inv = l1 > 0.0 ? 1.0 / l1 : 0.0;
      for (std::size_t i = 0; i < grad.size(); ++i) {
        momentum.data[i] = config.momentum_mu * momentum.data[i] + grad.data[i] * inv;
      }
      direction = &momentum;
    }
    Image next = t;
    for (std::size_t p = 0; p < t.pixel_count(); ++p) {
      if (!mask.values[p]) continue;
      for (int c = 0; c < t.channels; ++c) {
        const std::size_t i = p * t.channels + c;
        const double d = direction->data[i];
        const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        next.data[i] = t.data[i] - config.alpha * s;
      }
    }
    t = project_patch(next, t_a, mask, config.epsilon);
  }
  if (observer) observer(config.iters, t);
  result.adv_texture = std::move(t);
  result.iterations_run = config.iters;
  crafter.finish(result);
  return result;
}

namespace {

struct PatchBasis {
  int K = 0;
  int y0 = 0, y1 = 0, x0 = 0, x1 = 0;  // mask bounding box, inclusive
  std::vector<double> cu;               // (x1-x0+1) x K
  std::vector<double> cv;               // (y1-y0+1) x K

  PatchBasis(const PatchMask& mask, int basis_dim) : K(basis_dim) {
    y0 = mask.height;
    x0 = mask.width;
    y1 = -1;
    x1 = -1;
    for (int y = 0; y < mask.height; ++y) {
      for (int x = 0; x < mask.width; ++x) {
        if (!mask.at(y, x)) continue;
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
      }
    }
    if (y1 < 0) throw std::invalid_argument("empty patch mask");
    const int w = x1 - x0 + 1, h = y1 - y0 + 1;
    cu.resize(static_cast<std::size_t>(w) * K);
    cv.resize(static_cast<std::size_t>(h) * K);
    for (int i = 0; i < w; ++i) {
      const double u = w > 1 ? static_cast<double>(i) / (w - 1) : 0.0;
      for (int p = 0; p < K; ++p) cu[i * K + p] = std::cos(std::numbers::pi * p * u);
    }
    for (int j = 0; j < h; ++j) {
      const double v = h > 1 ? static_cast<double>(j) / (h - 1) : 0.0;
      for (int q = 0; q < K; ++q) cv[j * K + q] = std::cos(std::numbers::pi * q * v);
    }
  }

  // Pre-activation sum_pq code[c][p][q] cu[x][p] cv[y][q] on masked texels.
  Image preactivation(std::span<const double> code, const PatchMask& mask) const {
    Image pre(mask.height, mask.width, 3, 0.0);
    std::vector<double> tmp(3 * K);
    for (int y = y0; y <= y1; ++y) {
      const double* rv = cv.data() + static_cast<std::size_t>(y - y0) * K;
      for (int c = 0; c < 3; ++c) {
        for (int p = 0; p < K; ++p) {
          double s = 0.0;
          for (int q = 0; q < K; ++q) s += code[(c * K + p) * K + q] * rv[q];
          tmp[c * K + p] = s;
        }
      }
      for (int x = x0; x <= x1; ++x) {
        if (!mask.at(y, x)) continue;
        const double* ru = cu.data() + static_cast<std::size_t>(x - x0) * K;
        for (int c = 0; c < 3; ++c) {
          double s = 0.0;
          for (int p = 0; p < K; ++p) s += tmp[c * K + p] * ru[p];
          pre.at(y, x, c) = s;
        }
      }
    }
    return pre;
  }

  // Adjoint of preactivation().
  std::vector<double> code_grad(const Image& dpre, const PatchMask& mask) const {
    std::vector<double> g(static_cast<std::size_t>(3) * K * K, 0.0);
    std::vector<double> row(3 * K);
    for (int y = y0; y <= y1; ++y) {
      std::fill(row.begin(), row.end(), 0.0);
      for (int x = x0; x <= x1; ++x) {
        if (!mask.at(y, x)) continue;
        const double* ru = cu.data() + static_cast<std::size_t>(x - x0) * K;
        for (int c = 0; c < 3; ++c) {
          const double d = dpre.at(y, x, c);
          if (d == 0.0) continue;
          for (int p = 0; p < K; ++p) row[c * K + p] += d * ru[p];
        }
      }
      const double* rv = cv.data() + static_cast<std::size_t>(y - y0) * K;
      for (int c = 0; c < 3; ++c) {
        for (int p = 0; p < K; ++p) {
          for (int q = 0; q < K; ++q) g[(c * K + p) * K + q] += row[c * K + p] * rv[q];
        }
      }
    }
    return g;
  }
};

Image compose_latent(const Image& t_a, const Image& patch, const PatchMask& mask) {
  Image t = t_a;
  for (std::size_t p = 0; p < t.pixel_count(); ++p) {
    if (!mask.values[p]) continue;
    for (int c = 0; c < 3; ++c) {
      const std::size_t i = p * 3 + c;
      t.data[i] = std::clamp(t_a.data[i] + patch.data[i], 0.0, 1.0);
    }
  }
  return t;
}

}  // namespace

Image decode_patch(std::span<const double> code, int basis_dim, const PatchMask& mask,
                   double epsilon) {
  if (basis_dim < 1 ||
      code.size() != static_cast<std::size_t>(3) * basis_dim * basis_dim) {
    throw std::invalid_argument("decode_patch: code size must be 3*K*K");
  }
  const PatchBasis basis(mask, basis_dim);
  Image patch = basis.preactivation(code, mask);
  for (double& v : patch.data) v = epsilon * std::tanh(v);
  return patch;
}

AttackResult face3dadv_w(const Face3D& attacker, const Image& victim_image,
                         const PatchMask& mask, const EmbeddingModel& model,
                         const CandidateSet& candidates, const AttackConfig& config,
                         int basis_dim, int threads, const IterateObserver& observer) {
  AttackConfig cfg = config;
  cfg.method = AttackMethod::face3dadv_w;
  cfg.basis_dim = basis_dim;
  Crafter crafter(attacker, victim_image, mask, model, candidates, cfg, threads);
  const Image& t_a = attacker.texture;
  const PatchBasis basis(mask, basis_dim);
  const std::size_t n = static_cast<std::size_t>(3) * basis_dim * basis_dim;
  std::vector<double> code(n, 0.0), m1(n, 0.0), m2(n, 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

  auto decode = [&](Image& pre) {
    pre = basis.preactivation(code, mask);
    Image patch = pre;
    for (double& v : patch.data) v = cfg.epsilon * std::tanh(v);
    // The projection only absorbs rounding at the epsilon boundary.
    return project_patch(compose_latent(t_a, patch, mask), t_a, mask, cfg.epsilon);
  };

  AttackResult result;
  Image pre;
  Image t = decode(pre);
  for (int k = 0; k < cfg.iters; ++k) {
    if (observer) observer(k, t);
    const auto samples = crafter.choose(t, &result.candidate_loss_trace);
    Image grad;
    result.loss_trace.push_back(crafter.mean_loss_grad(samples, t, grad));
    // Chain through clamp and epsilon * tanh.
    Image dpre(t.height, t.width, 3, 0.0);
    for (std::size_t p = 0; p < t.pixel_count(); ++p) {
      if (!mask.values[p]) continue;
      for (int c = 0; c < 3; ++c) {
        const std::size_t i = p * 3 + c;
        const double th = std::tanh(pre.data[i]);
        const double raw = t_a.data[i] + cfg.epsilon * th;
        if (raw <= 0.0 || raw >= 1.0) continue;
        dpre.data[i] = grad.data[i] * cfg.epsilon * (1.0 - th * th);
      }
    }
    const std::vector<double> g = basis.code_grad(dpre, mask);
    const double step = k + 1;
    const double bc1 = 1.0 - std::pow(kBeta1, step), bc2 = 1.0 - std::pow(kBeta2, step);
    for (std::size_t i = 0; i < n; ++i) {
      m1[i] = kBeta1 * m1[i] + (1.0 - kBeta1) * g[i];
      m2[i] = kBeta2 * m2[i] + (1.0 - kBeta2) * g[i] * g[i];
      code[i] -= cfg.latent_learning_rate * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + kAdamEps);
    }
    t = decode(pre);
  }
  if (observer) observer(cfg.iters, t);
  result.adv_texture = std::move(t);
  result.iterations_run = cfg.iters;
  crafter.finish(result);
  return result;
}

}  // namespace facesim

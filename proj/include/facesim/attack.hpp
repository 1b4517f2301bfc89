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
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facesim/geometry.hpp"
#include "facesim/recognizer.hpp"
#include "facesim/renderer.hpp"

namespace facesim {

class Rng;

enum class AttackMode { dodging, impersonation };
enum class AttackMethod { mim, eot, face3dadv_x, face3dadv_w };

AttackMode parse_attack_mode(std::string_view s);
std::string_view attack_mode_name(AttackMode m);
AttackMethod parse_attack_method(std::string_view s);
std::string_view attack_method_name(AttackMethod m);

/// Physical condition: viewpoint, lighting and 2D warps applied in order.
struct Condition {
  Viewpoint view;
  Lighting light;
  std::vector<Transform2D> warps;

  bool operator==(const Condition&) const = default;
};

/// Attack hyperparameters. epsilon and alpha are in [0,1] pixel units.
struct AttackConfig {
  AttackMode mode = AttackMode::impersonation;
  AttackMethod method = AttackMethod::face3dadv_x;
  double epsilon = 40.0 / 255.0;
  double alpha = 1.5 / 255.0;
  int iters = 100;
  double momentum_mu = 1.0;
  int sample_count = 10;
  int candidate_count = 20;
  bool use_importance_sampling = true;
  /// Upper end of the per-draw 2D warp strength sigma ~ U(0, sigma_max);
  /// each draw applies a rotation then a projective warp. 0 disables warps.
  double transform2d_sigma = 0.0;
  std::uint64_t rng_seed = 0;
  /// Start the patch from the victim image resampled into texture space;
  /// otherwise the patch starts from the attacker texture.
  bool init_from_victim = true;
  bool sample_with_replacement = false;
  /// Face3DAdv(w): K of the K x K cosine code, and its Adam step size.
  int basis_dim = 8;
  double latent_learning_rate = 0.01;
  /// Verification threshold for success_at_neutral; negative skips the check.
  double delta = -1.0;

  bool operator==(const AttackConfig&) const = default;
};

void validate(const AttackConfig& c);

/// Default hyperparameters per method: MIM/EOT run 400 iterations, the
/// Face3DAdv variants 100. EOT and Face3DAdv warp every sample with
/// sigma_max 0.1; MIM uses the bare neutral render. Dodging widens epsilon
/// to 255/255.
AttackConfig default_attack_config(AttackMethod method, AttackMode mode);

struct CandidateSet {
  std::vector<Condition> conditions;
};

/// 14 poses (yaw {-15,-5,5,15} x pitch {-15,0,15}, plus pitch -10 and +10 at
/// yaw 0) under frontal light, then six azimuths {-60,-36,-12,12,36,60} at
/// the neutral pose: 20 distinct conditions.
CandidateSet default_candidates();
void validate(const CandidateSet& c, int candidate_count);

struct ImportanceDistribution {
  std::vector<double> probs;
};

struct AttackResult {
  Image adv_texture;
  std::vector<double> loss_trace;            // mean sampled loss per iteration
  std::vector<double> candidate_loss_trace;  // mean over all candidates (3D methods)
  int iterations_run = 0;
  bool success_at_neutral = false;
  double neutral_distance = 0.0;
};

/// Called with (iteration, current texture) before each update and once with
/// the final texture (iteration == iters).
using IterateObserver = std::function<void(int, const Image&)>;

/// Attack objective to minimize: -D for dodging, +D for impersonation.
double attack_loss(AttackMode mode, double distance);

/// Inside the mask each channel is clamped to [t_a - eps, t_a + eps] n [0,1];
/// outside, the result is t_a exactly.
Image project_patch(const Image& t, const Image& t_a, const PatchMask& mask,
                    double epsilon);

/// max |t - t_a| over masked texels, and whether unmasked texels are bit-equal.
double masked_linf(const Image& t, const Image& t_a, const PatchMask& mask);
bool equal_outside_mask(const Image& t, const Image& t_a, const PatchMask& mask);

/// Softmax with max subtraction.
ImportanceDistribution importance_probs(std::span<const double> losses);

/// M draws proportional to the remaining mass. Without replacement the
/// indices are distinct; with replacement each draw uses the full table.
std::vector<int> sample_conditions(const ImportanceDistribution& dist, int count,
                                   Rng& rng, bool with_replacement = false);

/// Decoded Face3DAdv(w) patch: epsilon * tanh(sum_pq w[c][p][q] phi_pq), where
/// phi_pq(u', v') = cos(pi p u') cos(pi q v') over the mask bounding box
/// (u', v' in [0,1]); zero outside the mask. `code` holds 3 * K * K values.
Image decode_patch(std::span<const double> code, int basis_dim, const PatchMask& mask,
                   double epsilon);

/// Runs the configured method. Face3DAdv(w) dispatches to face3dadv_w.
AttackResult run_attack(const Face3D& attacker, const Image& victim_image,
                        const PatchMask& mask, const EmbeddingModel& model,
                        const CandidateSet& candidates, const AttackConfig& config,
                        int threads = 1, const IterateObserver& observer = {});

AttackResult face3dadv_w(const Face3D& attacker, const Image& victim_image,
                         const PatchMask& mask, const EmbeddingModel& model,
                         const CandidateSet& candidates, const AttackConfig& config,
                         int basis_dim, int threads = 1,
                         const IterateObserver& observer = {});

/// Anisotropic total variation of a texture-space difference image.
double total_variation(const Image& img);

}  // namespace facesim

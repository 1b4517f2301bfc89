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
#include <vector>

#include "facesim/attack.hpp"
#include "facesim/geometry.hpp"
#include "facesim/image.hpp"
#include "facesim/recognizer.hpp"
#include "facesim/renderer.hpp"

namespace facesim {

enum class ProtocolKind { pitch, yaw, lighting, mixture, rotation2d, projective2d, mixture2d };

ProtocolKind parse_protocol_kind(std::string_view s);
std::string_view protocol_kind_name(ProtocolKind k);
bool is_2d_kind(ProtocolKind k);

/// Sweep definition. The 3D kinds are fixed grids; the 2D kinds draw `draws`
/// warps from `rng_seed`, each with its own sigma ~ U(sigma_min, sigma_max).
struct ProtocolSpec {
  ProtocolKind kind = ProtocolKind::mixture;
  int draws = 20;
  std::uint64_t rng_seed = 0;
  double sigma_min = 0.0;
  double sigma_max = 0.1;

  bool operator==(const ProtocolSpec&) const = default;
};

void validate(const ProtocolSpec& spec);

/// pitch, yaw: integer degrees -15..15 without 0 (30). lighting: azimuths
/// -60..54 step 6 (20). mixture: yaw x pitch in {-15,-9,-3,3,9,15}^2 times
/// azimuth {-40,0,40} (108), yaw outermost and azimuth innermost.
/// rotation2d / projective2d / mixture2d: warps of the neutral render, the
/// last being a rotation followed by a projective warp.
std::vector<Condition> enumerate_conditions(const ProtocolSpec& spec);

inline constexpr int kMixtureGridSide = 6;
inline constexpr int kMixtureLightCount = 3;

struct ConditionRecord {
  Condition condition;
  double distance = 0.0;
  Decision decision = Decision::different;
  bool success = false;
};

struct ExperimentReport {
  ProtocolSpec spec;
  AttackMode mode = AttackMode::impersonation;
  std::string model_id;
  std::string method;
  double delta = 0.0;
  std::vector<ConditionRecord> records;
  double asr = 0.0;  // percentage
};

/// 100 * successes / conditions; 0 for an empty list.
double attack_success_rate(std::span<const ConditionRecord> records);

/// Renders `adv_texture` on `shape` under every condition of `spec` and
/// verifies against `victim_image`. Records are in condition order.
ExperimentReport evaluate_attack(const Image& adv_texture, const ShapeMap& shape,
                                 const Image& victim_image, const EmbeddingModel& model,
                                 double delta, const ProtocolSpec& spec, AttackMode mode,
                                 int threads = 1);

/// Success fraction per (pitch row, yaw column) cell, averaged over the
/// lighting values of a mixture report, as a 6x6 gray RGB image.
Image success_heatmap(const ExperimentReport& report);

/// Neutral frontal render at the model input size.
Image neutral_render(const Face3D& face, const EmbeddingModel& model);

/// Genuine pairs: neutral vs yaw +-10 and pitch +-10 per identity. Impostor
/// pairs: neutral renders of every distinct identity pair.
Threshold calibrate_on_faces(const EmbeddingModel& model, std::span<const Face3D> faces,
                             int threads = 1);

/// Display label of an attack configuration ("Face3DAdv_x_woIS" when a 3D
/// method samples uniformly).
std::string attack_label(const AttackConfig& config);

struct BenchmarkCell {
  int attacker = 0;
  bool self_target = false;  // dodging: the victim is the attacker
  std::string method;
  std::string craft_model;
  std::string eval_model;
  ProtocolKind kind = ProtocolKind::mixture;
  bool white_box = false;
  double asr = 0.0;
  double clean_asr = 0.0;
};

struct BenchmarkBundle {
  std::vector<BenchmarkCell> cells;
  std::vector<ExperimentReport> reports;  // parallel to cells
};

/// victims[i] is the impersonation target of identities[i]; dodging attacks
/// target the attacker itself. Each (attacker, crafting model, attack) triple
/// is crafted once and evaluated on every model and spec. attack.delta is
/// replaced by the crafting model's threshold and rng_seed is split per
/// attacker.
BenchmarkBundle run_benchmark(std::span<const Face3D> identities,
                              std::span<const Face3D> victims,
                              std::span<const AttackConfig> attacks,
                              std::span<const EmbeddingModel> models,
                              std::span<const double> deltas,
                              std::span<const ProtocolSpec> specs, const PatchMask& mask,
                              int threads = 1);

}  // namespace facesim

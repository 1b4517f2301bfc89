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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "facesim/attack.hpp"
#include "facesim/protocol.hpp"
#include "facesim/reconstruction.hpp"

namespace facesim {

/// How impersonation victims are chosen for each attacker.
///   next:    attacker i targets attacker (i+1) mod n
///   nearest: attacker i targets the victim-pool identity closest to it in
///            the white-box model's feature space (neutral renders)
enum class VictimPolicy { next, nearest };

VictimPolicy parse_victim_policy(std::string_view s);
std::string_view victim_policy_name(VictimPolicy p);

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> attacker_seeds{0};
  std::vector<std::uint64_t> victim_pool_seeds;
  VictimPolicy victim_policy = VictimPolicy::nearest;
  std::vector<std::uint64_t> calibration_seeds;
  std::vector<std::string> models{"modelA", "modelB"};
  std::string mask = "eyeglass";
  AttackConfig attack;
  /// Extra attacks for bench; empty means just `attack`.
  std::vector<AttackConfig> bench_attacks;
  std::vector<ProtocolSpec> protocols{ProtocolSpec{}};
  FitConfig fit;
  /// Identity seed the fit starts from; unset derives one from `seed`.
  std::optional<std::uint64_t> fit_init_seed;
  /// Adversarial texture (.f64 at texture resolution, or .ppm) for protocol;
  /// empty evaluates the clean attacker texture.
  std::string adv_texture;

  bool operator==(const ExperimentConfig&) const = default;
};

/// A config with 20 calibration seeds (1000..1019) and a 60-identity victim
/// pool (5000..5059).
ExperimentConfig default_experiment_config();

std::string config_to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys and bad values throw
/// std::invalid_argument.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
void validate(const ExperimentConfig& c);

/// Faces, models and thresholds shared by every pipeline stage.
struct ExperimentContext {
  std::vector<Face3D> attackers;
  std::vector<Face3D> victims;  // parallel to attackers
  std::vector<int> victim_index;  // pool index, or attacker index for "next"
  std::vector<EmbeddingModel> models;
  std::vector<double> deltas;  // parallel to models
  PatchMask mask;
};

/// Victims are picked with the first (white-box) model.
ExperimentContext build_context(const ExperimentConfig& c, int threads);

struct RenderRequest {
  std::uint64_t seed = 0;
  Viewpoint view;
  Lighting light;
  int width = 112;
  int height = 112;
};

// Pipeline stages. Each is a pure function of its inputs and writes into
// `out`, which is created if missing. Invalid inputs throw
// std::invalid_argument; I/O and numerical failures throw std::runtime_error.
void cmd_synth(std::uint64_t seed, const std::filesystem::path& out);
void cmd_render(const RenderRequest& req, const std::filesystem::path& out);
void cmd_fit(const std::filesystem::path& target, const ExperimentConfig& c,
             const std::filesystem::path& out);
void cmd_attack(const ExperimentConfig& c, const std::filesystem::path& out, int threads);
void cmd_protocol(const ExperimentConfig& c, const std::filesystem::path& out, int threads);
void cmd_bench(const ExperimentConfig& c, const std::filesystem::path& out, int threads);

/// Plain-text CSV of one report (header plus one row per condition).
std::string report_csv(const ExperimentReport& r);

}  // namespace facesim

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

#include "facesim/protocol.hpp"

#include <stdexcept>

#include "facesim/parallel.hpp"
#include "facesim/rng.hpp"

namespace facesim {

ProtocolKind parse_protocol_kind(std::string_view s) {
  if (s == "pitch") return ProtocolKind::pitch;
  if (s == "yaw") return ProtocolKind::yaw;
  if (s == "lighting") return ProtocolKind::lighting;
  if (s == "mixture") return ProtocolKind::mixture;
  if (s == "rotation2d") return ProtocolKind::rotation2d;
  if (s == "projective2d") return ProtocolKind::projective2d;
  if (s == "mixture2d") return ProtocolKind::mixture2d;
  throw std::invalid_argument("unknown protocol kind: " + std::string(s));
}

std::string_view protocol_kind_name(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::pitch: return "pitch";
    case ProtocolKind::yaw: return "yaw";
    case ProtocolKind::lighting: return "lighting";
    case ProtocolKind::mixture: return "mixture";
    case ProtocolKind::rotation2d: return "rotation2d";
    case ProtocolKind::projective2d: return "projective2d";
    case ProtocolKind::mixture2d: return "mixture2d";
  }
  return "unknown";
}

bool is_2d_kind(ProtocolKind k) {
  return k == ProtocolKind::rotation2d || k == ProtocolKind::projective2d ||
         k == ProtocolKind::mixture2d;
}

void validate(const ProtocolSpec& spec) {
  if (!is_2d_kind(spec.kind)) return;
  if (spec.draws < 1) throw std::invalid_argument("protocol draws must be >= 1");
  if (!(spec.sigma_min >= 0.0 && spec.sigma_min <= spec.sigma_max)) {
    throw std::invalid_argument("protocol sigma range must satisfy 0 <= min <= max");
  }
}

std::vector<Condition> enumerate_conditions(const ProtocolSpec& spec) {
  validate(spec);
  std::vector<Condition> out;
  const Lighting frontal{};
  switch (spec.kind) {
    case ProtocolKind::pitch:
    case ProtocolKind::yaw:
      for (int a = -15; a <= 15; ++a) {
        if (a == 0) continue;
        Viewpoint v;
        (spec.kind == ProtocolKind::yaw ? v.yaw_deg : v.pitch_deg) = a;
        out.push_back({v, frontal, {}});
      }
      break;
    case ProtocolKind::lighting:
      for (int az = -60; az <= 54; az += 6) {
        out.push_back({{}, {static_cast<double>(az), frontal.ambient}, {}});
      }
      break;
    case ProtocolKind::mixture: {
      const double grid[kMixtureGridSide] = {-15, -9, -3, 3, 9, 15};
      const double lights[kMixtureLightCount] = {-40, 0, 40};
      for (double yaw : grid) {
        for (double pitch : grid) {
          for (double az : lights) out.push_back({{yaw, pitch}, {az, frontal.ambient}, {}});
        }
      }
      break;
    }
    case ProtocolKind::rotation2d:
    case ProtocolKind::projective2d:
    case ProtocolKind::mixture2d: {
      Rng rng(stream_seed(spec.rng_seed, protocol_kind_name(spec.kind)));
      for (int i = 0; i < spec.draws; ++i) {
        const double sigma = rng.uniform(spec.sigma_min, spec.sigma_max);
        Condition c;
        if (spec.kind != ProtocolKind::projective2d) c.warps.push_back(sample_rotation(sigma, rng));
        if (spec.kind != ProtocolKind::rotation2d) c.warps.push_back(sample_projective(sigma, rng));
        out.push_back(std::move(c));
      }
      break;
    }
  }
  return out;
}

double attack_success_rate(std::span<const ConditionRecord> records) {
  if (records.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.success ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(records.size());
}

namespace {

RenderSettings model_settings(const EmbeddingModel& model) {
  RenderSettings s;
  s.width = model.config().input_width;
  s.height = model.config().input_height;
  return s;
}

}  // namespace

ExperimentReport evaluate_attack(const Image& adv_texture, const ShapeMap& shape,
                                 const Image& victim_image, const EmbeddingModel& model,
                                 double delta, const ProtocolSpec& spec, AttackMode mode,
                                 int threads) {
  ExperimentReport report;
  report.spec = spec;
  report.mode = mode;
  report.model_id = model.id();
  report.delta = delta;
  const auto conditions = enumerate_conditions(spec);
  const FeatureVector victim = embed(model, victim_image);
  const RenderSettings settings = model_settings(model);
  report.records.resize(conditions.size());
  parallel_for(conditions.size(), threads, [&](std::size_t i) {
    const Condition& c = conditions[i];
    Image img = render(shape, adv_texture, c.view, c.light, settings).image;
    for (const auto& w : c.warps) img = apply_transform2d(img, w);
    ConditionRecord& r = report.records[i];
    r.condition = c;
    r.distance = feature_distance(embed(model, img), victim);
    r.decision = decide(r.distance, delta);
    r.success = mode == AttackMode::impersonation ? r.decision == Decision::same
                                                  : r.decision == Decision::different;
  });
  report.asr = attack_success_rate(report.records);
  return report;
}

Image success_heatmap(const ExperimentReport& report) {
  if (report.spec.kind != ProtocolKind::mixture ||
      report.records.size() != static_cast<std::size_t>(kMixtureGridSide * kMixtureGridSide *
                                                        kMixtureLightCount)) {
    throw std::invalid_argument("heatmap requires a complete mixture report");
  }
  Image out(kMixtureGridSide, kMixtureGridSide, 3, 0.0);
  for (int yi = 0; yi < kMixtureGridSide; ++yi) {
    for (int pi = 0; pi < kMixtureGridSide; ++pi) {
      int hits = 0;
      for (int li = 0; li < kMixtureLightCount; ++li) {
        hits += report.records[(yi * kMixtureGridSide + pi) * kMixtureLightCount + li].success;
      }
      const double f = static_cast<double>(hits) / kMixtureLightCount;
      for (int c = 0; c < 3; ++c) out.at(pi, yi, c) = f;
    }
  }
  return out;
}

Image neutral_render(const Face3D& face, const EmbeddingModel& model) {
  return render(face.shape, face.texture, {}, {}, model_settings(model)).image;
}

Threshold calibrate_on_faces(const EmbeddingModel& model, std::span<const Face3D> faces,
                             int threads) {
  if (faces.size() < 2) throw std::invalid_argument("calibration needs >= 2 identities");
  const RenderSettings settings = model_settings(model);
  const Viewpoint offsets[4] = {{-10, 0}, {10, 0}, {0, -10}, {0, 10}};
  std::vector<FeatureVector> neutral(faces.size());
  std::vector<double> genuine(faces.size() * 4);
  parallel_for(faces.size(), threads, [&](std::size_t i) {
    neutral[i] = embed(model, render(faces[i].shape, faces[i].texture, {}, {}, settings).image);
    for (int k = 0; k < 4; ++k) {
      const Image img = render(faces[i].shape, faces[i].texture, offsets[k], {}, settings).image;
      genuine[i * 4 + k] = feature_distance(embed(model, img), neutral[i]);
    }
  });
  std::vector<double> impostor;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    for (std::size_t j = i + 1; j < faces.size(); ++j) {
      impostor.push_back(feature_distance(neutral[i], neutral[j]));
    }
  }
  return calibrate_threshold_from_distances(genuine, impostor);
}

std::string attack_label(const AttackConfig& config) {
  std::string label(attack_method_name(config.method));
  const bool three_d = config.method == AttackMethod::face3dadv_x ||
                       config.method == AttackMethod::face3dadv_w;
  if (three_d && !config.use_importance_sampling) label += "_woIS";
  return label;
}

BenchmarkBundle run_benchmark(std::span<const Face3D> identities,
                              std::span<const Face3D> victims,
                              std::span<const AttackConfig> attacks,
                              std::span<const EmbeddingModel> models,
                              std::span<const double> deltas,
                              std::span<const ProtocolSpec> specs, const PatchMask& mask,
                              int threads) {
  if (identities.empty() || attacks.empty() || models.empty() || specs.empty()) {
    throw std::invalid_argument("benchmark needs identities, attacks, models and specs");
  }
  if (victims.size() != identities.size()) {
    throw std::invalid_argument("benchmark needs one victim per attacker");
  }
  if (deltas.size() != models.size()) {
    throw std::invalid_argument("benchmark needs one threshold per model");
  }
  const CandidateSet candidates = default_candidates();
  const int n = static_cast<int>(identities.size());
  BenchmarkBundle bundle;
  for (int i = 0; i < n; ++i) {
    for (std::size_t cm = 0; cm < models.size(); ++cm) {
      for (const AttackConfig& base : attacks) {
        const bool self = base.mode == AttackMode::dodging;
        const Face3D& victim = self ? identities[i] : victims[i];
        AttackConfig cfg = base;
        cfg.delta = deltas[cm];
        cfg.rng_seed = stream_seed(base.rng_seed, "bench/" + std::to_string(i));
        const Image victim_image = neutral_render(victim, models[cm]);
        const AttackResult crafted = run_attack(identities[i], victim_image, mask, models[cm],
                                                candidates, cfg, threads);
        for (std::size_t em = 0; em < models.size(); ++em) {
          const Image eval_victim = neutral_render(victim, models[em]);
          for (const ProtocolSpec& spec : specs) {
            ExperimentReport rep =
                evaluate_attack(crafted.adv_texture, identities[i].shape, eval_victim,
                                models[em], deltas[em], spec, cfg.mode, threads);
            const ExperimentReport clean =
                evaluate_attack(identities[i].texture, identities[i].shape, eval_victim,
                                models[em], deltas[em], spec, cfg.mode, threads);
            rep.method = attack_label(cfg);
            BenchmarkCell cell;
            cell.attacker = i;
            cell.self_target = self;
            cell.method = rep.method;
            cell.craft_model = models[cm].id();
            cell.eval_model = models[em].id();
            cell.kind = spec.kind;
            cell.white_box = cm == em;
            cell.asr = rep.asr;
            cell.clean_asr = clean.asr;
            bundle.cells.push_back(cell);
            bundle.reports.push_back(std::move(rep));
          }
        }
      }
    }
  }
  return bundle;
}

}  // namespace facesim

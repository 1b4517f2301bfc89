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

#include "facesim/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "facesim/image_io.hpp"
#include "facesim/parallel.hpp"
#include "facesim/rng.hpp"

namespace facesim {

using nlohmann::json;
namespace fs = std::filesystem;

VictimPolicy parse_victim_policy(std::string_view s) {
  if (s == "next") return VictimPolicy::next;
  if (s == "nearest") return VictimPolicy::nearest;
  throw std::invalid_argument("unknown victim policy: " + std::string(s));
}

std::string_view victim_policy_name(VictimPolicy p) {
  return p == VictimPolicy::next ? "next" : "nearest";
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  for (std::uint64_t s = 1000; s < 1020; ++s) c.calibration_seeds.push_back(s);
  for (std::uint64_t s = 5000; s < 5060; ++s) c.victim_pool_seeds.push_back(s);
  return c;
}

namespace {

// ---- JSON ------------------------------------------------------------------

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw std::invalid_argument(std::string(what) + ": unknown key " + k);
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config key ") + key + ": " + e.what());
  }
}

json attack_to_json(const AttackConfig& a) {
  return {{"mode", attack_mode_name(a.mode)},
          {"method", attack_method_name(a.method)},
          {"epsilon", a.epsilon},
          {"alpha", a.alpha},
          {"iters", a.iters},
          {"momentum_mu", a.momentum_mu},
          {"sample_count", a.sample_count},
          {"candidate_count", a.candidate_count},
          {"use_importance_sampling", a.use_importance_sampling},
          {"transform2d_sigma", a.transform2d_sigma},
          {"rng_seed", a.rng_seed},
          {"init_from_victim", a.init_from_victim},
          {"sample_with_replacement", a.sample_with_replacement},
          {"basis_dim", a.basis_dim},
          {"latent_learning_rate", a.latent_learning_rate},
          {"delta", a.delta}};
}

AttackConfig attack_from_json(const json& j) {
  check_keys(j, {"mode", "method", "epsilon", "alpha", "iters", "momentum_mu", "sample_count",
                 "candidate_count", "use_importance_sampling", "transform2d_sigma", "rng_seed",
                 "init_from_victim", "sample_with_replacement", "basis_dim",
                 "latent_learning_rate", "delta"},
             "attack");
  // Method and mode pick the defaults that the remaining keys override.
  std::string method = "Face3DAdv_x", mode = "impersonation";
  read_field(j, "method", method);
  read_field(j, "mode", mode);
  AttackConfig a = default_attack_config(parse_attack_method(method), parse_attack_mode(mode));
  read_field(j, "epsilon", a.epsilon);
  read_field(j, "alpha", a.alpha);
  read_field(j, "iters", a.iters);
  read_field(j, "momentum_mu", a.momentum_mu);
  read_field(j, "sample_count", a.sample_count);
  read_field(j, "candidate_count", a.candidate_count);
  read_field(j, "use_importance_sampling", a.use_importance_sampling);
  read_field(j, "transform2d_sigma", a.transform2d_sigma);
  read_field(j, "rng_seed", a.rng_seed);
  read_field(j, "init_from_victim", a.init_from_victim);
  read_field(j, "sample_with_replacement", a.sample_with_replacement);
  read_field(j, "basis_dim", a.basis_dim);
  read_field(j, "latent_learning_rate", a.latent_learning_rate);
  read_field(j, "delta", a.delta);
  return a;
}

json spec_to_json(const ProtocolSpec& s) {
  return {{"kind", protocol_kind_name(s.kind)},
          {"draws", s.draws},
          {"rng_seed", s.rng_seed},
          {"sigma_min", s.sigma_min},
          {"sigma_max", s.sigma_max}};
}

ProtocolSpec spec_from_json(const json& j) {
  check_keys(j, {"kind", "draws", "rng_seed", "sigma_min", "sigma_max"}, "protocol");
  ProtocolSpec s;
  std::string kind(protocol_kind_name(s.kind));
  read_field(j, "kind", kind);
  s.kind = parse_protocol_kind(kind);
  read_field(j, "draws", s.draws);
  read_field(j, "rng_seed", s.rng_seed);
  read_field(j, "sigma_min", s.sigma_min);
  read_field(j, "sigma_max", s.sigma_max);
  return s;
}

json fit_to_json(const FitConfig& f) {
  return {{"lambda", f.lambda},
          {"max_iters", f.max_iters},
          {"learning_rate", f.learning_rate},
          {"active_texture_coeffs", f.active_texture_coeffs},
          {"shape_res", f.shape_res},
          {"texture_res", f.texture_res}};
}

FitConfig fit_from_json(const json& j) {
  check_keys(j, {"lambda", "max_iters", "learning_rate", "active_texture_coeffs", "shape_res",
                 "texture_res"},
             "fit");
  FitConfig f;
  read_field(j, "lambda", f.lambda);
  read_field(j, "max_iters", f.max_iters);
  read_field(j, "learning_rate", f.learning_rate);
  read_field(j, "active_texture_coeffs", f.active_texture_coeffs);
  read_field(j, "shape_res", f.shape_res);
  read_field(j, "texture_res", f.texture_res);
  return f;
}

// ---- Output helpers ----------------------------------------------------------

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void ensure_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw std::runtime_error("cannot create output directory " + out.string());
  }
}

json identity_to_json(const IdentityParams& p) {
  return {{"seed", p.seed}, {"shape_coeffs", p.shape_coeffs},
          {"texture_coeffs", p.texture_coeffs}};
}

Image shape_image(const ShapeMap& s) {
  Image img(s.rows, s.cols, 3);
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) {
      img.at(r, c, 0) = s.at(r, c).x;
      img.at(r, c, 1) = s.at(r, c).y;
      img.at(r, c, 2) = s.at(r, c).z;
    }
  }
  return img;
}

std::uint64_t derived_seed(std::uint64_t global, const std::string& label,
                           std::uint64_t local) {
  return stream_seed(global, label + "/" + std::to_string(local));
}

AttackConfig effective_attack(const ExperimentConfig& c, const AttackConfig& a,
                              double delta) {
  AttackConfig e = a;
  e.rng_seed = derived_seed(c.seed, "attack", a.rng_seed);
  e.delta = delta;
  return e;
}

ProtocolSpec effective_spec(const ExperimentConfig& c, const ProtocolSpec& s) {
  ProtocolSpec e = s;
  e.rng_seed = derived_seed(c.seed, "protocol", s.rng_seed);
  return e;
}

void write_report_json_cell(json& cells, const ExperimentReport& r, bool white_box) {
  cells.push_back({{"model", r.model_id},
                   {"kind", protocol_kind_name(r.spec.kind)},
                   {"method", r.method},
                   {"mode", attack_mode_name(r.mode)},
                   {"delta", r.delta},
                   {"conditions", r.records.size()},
                   {"white_box", white_box},
                   {"asr", r.asr}});
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["attacker_seeds"] = c.attacker_seeds;
  j["victim_pool_seeds"] = c.victim_pool_seeds;
  j["victim_policy"] = victim_policy_name(c.victim_policy);
  j["calibration_seeds"] = c.calibration_seeds;
  j["models"] = c.models;
  j["mask"] = c.mask;
  j["attack"] = attack_to_json(c.attack);
  j["bench_attacks"] = json::array();
  for (const auto& a : c.bench_attacks) j["bench_attacks"].push_back(attack_to_json(a));
  j["protocols"] = json::array();
  for (const auto& s : c.protocols) j["protocols"].push_back(spec_to_json(s));
  j["fit"] = fit_to_json(c.fit);
  j["fit_init_seed"] = c.fit_init_seed ? json(*c.fit_init_seed) : json(nullptr);
  j["adv_texture"] = c.adv_texture;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"seed", "attacker_seeds", "victim_pool_seeds", "victim_policy",
                 "calibration_seeds", "models", "mask", "attack", "bench_attacks", "protocols",
                 "fit", "fit_init_seed", "adv_texture"},
             "config");
  ExperimentConfig c = default_experiment_config();
  read_field(j, "seed", c.seed);
  read_field(j, "attacker_seeds", c.attacker_seeds);
  read_field(j, "victim_pool_seeds", c.victim_pool_seeds);
  std::string policy(victim_policy_name(c.victim_policy));
  read_field(j, "victim_policy", policy);
  c.victim_policy = parse_victim_policy(policy);
  read_field(j, "calibration_seeds", c.calibration_seeds);
  read_field(j, "models", c.models);
  read_field(j, "mask", c.mask);
  if (j.contains("attack")) c.attack = attack_from_json(j["attack"]);
  if (j.contains("bench_attacks")) {
    if (!j["bench_attacks"].is_array()) throw std::invalid_argument("bench_attacks must be a list");
    c.bench_attacks.clear();
    for (const auto& a : j["bench_attacks"]) c.bench_attacks.push_back(attack_from_json(a));
  }
  if (j.contains("protocols")) {
    if (!j["protocols"].is_array()) throw std::invalid_argument("protocols must be a list");
    c.protocols.clear();
    for (const auto& s : j["protocols"]) c.protocols.push_back(spec_from_json(s));
  }
  if (j.contains("fit")) c.fit = fit_from_json(j["fit"]);
  if (j.contains("fit_init_seed") && !j["fit_init_seed"].is_null()) {
    std::uint64_t s = 0;
    read_field(j, "fit_init_seed", s);
    c.fit_init_seed = s;
  } else if (j.contains("fit_init_seed")) {
    c.fit_init_seed.reset();
  }
  read_field(j, "adv_texture", c.adv_texture);
  validate(c);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  return config_from_json(read_text_file(path));
}

void validate(const ExperimentConfig& c) {
  if (c.attacker_seeds.empty()) throw std::invalid_argument("attacker_seeds must not be empty");
  if (c.models.empty()) throw std::invalid_argument("models must not be empty");
  for (const auto& m : c.models) named_model_config(m);
  parse_region(c.mask);
  if (c.calibration_seeds.size() < 2) {
    throw std::invalid_argument("calibration_seeds needs at least two identities");
  }
  validate(c.attack);
  for (const auto& a : c.bench_attacks) validate(a);
  if (c.protocols.empty()) throw std::invalid_argument("protocols must not be empty");
  for (const auto& s : c.protocols) validate(s);
  if (c.fit.max_iters < 1) throw std::invalid_argument("fit.max_iters must be >= 1");
  if (!(c.fit.learning_rate > 0.0)) throw std::invalid_argument("fit.learning_rate must be positive");
  if (!(c.fit.lambda >= 0.0)) throw std::invalid_argument("fit.lambda must be non-negative");
}

ExperimentContext build_context(const ExperimentConfig& c, int threads) {
  validate(c);
  ExperimentContext ctx;
  for (auto s : c.attacker_seeds) ctx.attackers.push_back(build_face(synth_identity(s)));
  for (const auto& id : c.models) ctx.models.push_back(EmbeddingModel::named(id));
  std::vector<Face3D> calibration;
  for (auto s : c.calibration_seeds) calibration.push_back(build_face(synth_identity(s)));
  for (const auto& m : ctx.models) {
    ctx.deltas.push_back(calibrate_on_faces(m, calibration, threads).delta);
  }
  ctx.mask = region_mask(c.mask, kDefaultTextureRes, kDefaultTextureRes);

  const EmbeddingModel& wb = ctx.models.front();
  const std::size_t n = ctx.attackers.size();
  if (c.victim_policy == VictimPolicy::next) {
    if (n < 2 && c.attack.mode == AttackMode::impersonation) {
      throw std::invalid_argument("victim policy 'next' needs at least two attackers");
    }
    for (std::size_t i = 0; i < n; ++i) {
      ctx.victim_index.push_back(static_cast<int>((i + 1) % n));
      ctx.victims.push_back(ctx.attackers[(i + 1) % n]);
    }
    return ctx;
  }
  if (c.victim_pool_seeds.empty()) {
    throw std::invalid_argument("victim policy 'nearest' needs victim_pool_seeds");
  }
  std::vector<Face3D> pool(c.victim_pool_seeds.size());
  std::vector<FeatureVector> pool_f(pool.size());
  parallel_for(pool.size(), threads, [&](std::size_t k) {
    pool[k] = build_face(synth_identity(c.victim_pool_seeds[k]));
    pool_f[k] = embed(wb, neutral_render(pool[k], wb));
  });
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureVector fa = embed(wb, neutral_render(ctx.attackers[i], wb));
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pool.size(); ++k) {
      if (c.victim_pool_seeds[k] == c.attacker_seeds[i]) continue;
      const double d = feature_distance(fa, pool_f[k]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    if (best < 0) throw std::invalid_argument("victim pool holds no identity besides the attacker");
    ctx.victim_index.push_back(best);
    ctx.victims.push_back(pool[best]);
  }
  return ctx;
}

std::string report_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "index,yaw_deg,pitch_deg,azimuth_deg,warps,distance,decision,success\n";
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& rec = r.records[i];
    os << i << ',' << fmt(rec.condition.view.yaw_deg) << ',' << fmt(rec.condition.view.pitch_deg)
       << ',' << fmt(rec.condition.light.azimuth_deg) << ',' << rec.condition.warps.size() << ','
       << fmt(rec.distance) << ',' << (rec.decision == Decision::same ? "same" : "different")
       << ',' << (rec.success ? 1 : 0) << '\n';
  }
  return os.str();
}

void cmd_synth(std::uint64_t seed, const fs::path& out) {
  ensure_dir(out);
  const IdentityParams p = synth_identity(seed);
  const Face3D face = build_face(p);
  write_text_file(out / "identity.json", identity_to_json(p).dump(2) + "\n");
  write_ppm(out / "texture.ppm", face.texture);
  write_raw_f64(out / "texture.f64", face.texture);
  write_raw_f64(out / "shape.f64", shape_image(face.shape));
  const RenderOutput r = render(face.shape, face.texture, {}, {});
  write_ppm(out / "neutral.ppm", r.image);
  write_raw_f32(out / "neutral.f32", r.image);
  write_raw_f64(out / "neutral.f64", r.image);
}

void cmd_render(const RenderRequest& req, const fs::path& out) {
  validate(req.view);
  validate(req.light);
  if (req.width < 1 || req.height < 1) throw std::invalid_argument("render size must be positive");
  ensure_dir(out);
  const Face3D face = build_face(synth_identity(req.seed));
  RenderSettings settings;
  settings.width = req.width;
  settings.height = req.height;
  const RenderOutput r = render(face.shape, face.texture, req.view, req.light, settings);
  write_ppm(out / "render.ppm", r.image);
  write_raw_f64(out / "render.f64", r.image);
  write_depth_pgm16(out / "depth.pgm", r.depth);
}

void cmd_fit(const fs::path& target_path, const ExperimentConfig& c, const fs::path& out) {
  validate(c);
  const EmbeddingModel model = EmbeddingModel::named(c.models.front());
  const auto& mc = model.config();
  const Image target = read_image_any(target_path, mc.input_height, mc.input_width, 3);
  require_unit_range(target, "fit target");
  ensure_dir(out);
  const std::uint64_t init = c.fit_init_seed ? *c.fit_init_seed : derived_seed(c.seed, "fit", 0);
  RenderSettings settings;
  settings.width = mc.input_width;
  settings.height = mc.input_height;
  const FitResult r = fit_face(target, model, c.fit, init, settings);

  std::ostringstream csv;
  csv << "iter,loss,l1\n";
  for (std::size_t k = 0; k < r.loss_trace.size(); ++k) {
    csv << k << ',' << fmt(r.loss_trace[k]) << ',' << fmt(r.l1_trace[k]) << '\n';
  }
  write_text_file(out / "fit_loss.csv", csv.str());
  write_text_file(out / "fit_identity.json", identity_to_json(r.params).dump(2) + "\n");
  write_ppm(out / "fit_render.ppm", r.final_render.image);
  write_raw_f64(out / "fit_render.f64", r.final_render.image);
  const json summary = {{"model", model.id()},
                        {"init_seed", init},
                        {"iterations", r.loss_trace.size()},
                        {"best_iter", r.best_iter},
                        {"best_loss", r.best_loss},
                        {"initial_l1", r.l1_trace.front()},
                        {"best_l1", r.l1_trace[r.best_iter]}};
  write_text_file(out / "fit.json", summary.dump(2) + "\n");
}

void cmd_attack(const ExperimentConfig& c, const fs::path& out, int threads) {
  ExperimentContext ctx = build_context(c, threads);
  ensure_dir(out);
  const EmbeddingModel& model = ctx.models.front();
  const Face3D& attacker = ctx.attackers.front();
  const bool self = c.attack.mode == AttackMode::dodging;
  const Face3D& victim = self ? attacker : ctx.victims.front();
  const Image victim_image = neutral_render(victim, model);
  const AttackConfig cfg = effective_attack(c, c.attack, ctx.deltas.front());
  const AttackResult r = run_attack(attacker, victim_image, ctx.mask, model, default_candidates(),
                                    cfg, threads);

  write_ppm(out / "adv_texture.ppm", r.adv_texture);
  write_raw_f64(out / "adv_texture.f64", r.adv_texture);
  const RenderOutput adv = render(attacker.shape, r.adv_texture, {}, {});
  write_ppm(out / "adv_render.ppm", adv.image);
  write_depth_pgm16(out / "adv_depth.pgm", adv.depth);
  write_ppm(out / "victim.ppm", victim_image);

  std::ostringstream csv;
  csv << "iter,loss,candidate_mean_loss\n";
  for (std::size_t k = 0; k < r.loss_trace.size(); ++k) {
    csv << k << ',' << fmt(r.loss_trace[k]) << ','
        << (k < r.candidate_loss_trace.size() ? fmt(r.candidate_loss_trace[k]) : "") << '\n';
  }
  write_text_file(out / "attack_loss.csv", csv.str());
  const json summary = {
      {"method", attack_label(cfg)},
      {"mode", attack_mode_name(cfg.mode)},
      {"model", model.id()},
      {"attacker_seed", c.attacker_seeds.front()},
      {"victim_seed", self ? c.attacker_seeds.front()
                           : (c.victim_policy == VictimPolicy::next
                                  ? c.attacker_seeds[ctx.victim_index.front()]
                                  : c.victim_pool_seeds[ctx.victim_index.front()])},
      {"delta", cfg.delta},
      {"epsilon", cfg.epsilon},
      {"iterations", r.iterations_run},
      {"neutral_distance", r.neutral_distance},
      {"success_at_neutral", r.success_at_neutral},
      {"masked_linf", masked_linf(r.adv_texture, attacker.texture, ctx.mask)},
      {"unchanged_outside_mask", equal_outside_mask(r.adv_texture, attacker.texture, ctx.mask)}};
  write_text_file(out / "attack.json", summary.dump(2) + "\n");
}

void cmd_protocol(const ExperimentConfig& c, const fs::path& out, int threads) {
  ExperimentContext ctx = build_context(c, threads);
  const Face3D& attacker = ctx.attackers.front();
  Image texture = attacker.texture;
  std::string method = "clean";
  if (!c.adv_texture.empty()) {
    texture = read_image_any(c.adv_texture, attacker.texture.height, attacker.texture.width, 3);
    require_unit_range(texture, "adversarial texture");
    method = "adv";
  }
  ensure_dir(out);
  const bool self = c.attack.mode == AttackMode::dodging;
  const Face3D& victim = self ? attacker : ctx.victims.front();
  json cells = json::array();
  for (std::size_t m = 0; m < ctx.models.size(); ++m) {
    const Image victim_image = neutral_render(victim, ctx.models[m]);
    for (const auto& s : c.protocols) {
      ExperimentReport rep = evaluate_attack(texture, attacker.shape, victim_image, ctx.models[m],
                                             ctx.deltas[m], effective_spec(c, s), c.attack.mode,
                                             threads);
      rep.method = method;
      const std::string stem = "protocol_" + rep.model_id + "_" +
                               std::string(protocol_kind_name(s.kind));
      write_text_file(out / (stem + ".csv"), report_csv(rep));
      if (s.kind == ProtocolKind::mixture) {
        write_ppm(out / ("heatmap_" + rep.model_id + ".ppm"), success_heatmap(rep));
      }
      write_report_json_cell(cells, rep, m == 0);
    }
  }
  const json summary = {{"attacker_seed", c.attacker_seeds.front()}, {"cells", cells}};
  write_text_file(out / "protocol.json", summary.dump(2) + "\n");
}

void cmd_bench(const ExperimentConfig& c, const fs::path& out, int threads) {
  ExperimentContext ctx = build_context(c, threads);
  ensure_dir(out);
  std::vector<AttackConfig> attacks = c.bench_attacks;
  if (attacks.empty()) attacks.push_back(c.attack);
  for (auto& a : attacks) {
    a.rng_seed = derived_seed(c.seed, "attack", a.rng_seed);
  }
  std::vector<ProtocolSpec> specs;
  for (const auto& s : c.protocols) specs.push_back(effective_spec(c, s));
  const BenchmarkBundle b = run_benchmark(ctx.attackers, ctx.victims, attacks, ctx.models,
                                          ctx.deltas, specs, ctx.mask, threads);
  std::ostringstream csv;
  csv << "attacker_seed,method,craft_model,eval_model,kind,white_box,asr,clean_asr\n";
  json cells = json::array();
  for (const auto& cell : b.cells) {
    csv << c.attacker_seeds[cell.attacker] << ',' << cell.method << ',' << cell.craft_model << ','
        << cell.eval_model << ',' << protocol_kind_name(cell.kind) << ','
        << (cell.white_box ? 1 : 0) << ',' << fmt(cell.asr) << ',' << fmt(cell.clean_asr) << '\n';
    cells.push_back({{"attacker_seed", c.attacker_seeds[cell.attacker]},
                     {"method", cell.method},
                     {"craft_model", cell.craft_model},
                     {"eval_model", cell.eval_model},
                     {"kind", protocol_kind_name(cell.kind)},
                     {"white_box", cell.white_box},
                     {"asr", cell.asr},
                     {"clean_asr", cell.clean_asr}});
  }
  write_text_file(out / "bench.csv", csv.str());
  json thresholds = json::object();
  for (std::size_t m = 0; m < ctx.models.size(); ++m) thresholds[ctx.models[m].id()] = ctx.deltas[m];
  const json summary = {{"thresholds", thresholds}, {"cells", cells}};
  write_text_file(out / "bench.json", summary.dump(2) + "\n");
}

}  // namespace facesim

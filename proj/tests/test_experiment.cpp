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


#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "facesim/attack.hpp"
#include "facesim/experiment.hpp"
#include "facesim/image_io.hpp"
#include "testing.hpp"

using namespace facesim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
  std::size_t nb = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++nb;
  if (names.size() != nb) return false;
  for (const auto& n : names) {
    if (slurp(a / n) != slurp(b / n)) return false;
  }
  return true;
}

ExperimentConfig small_config() {
  ExperimentConfig c = default_experiment_config();
  c.models = {"modelA"};
  c.calibration_seeds = {1000, 1001, 1002, 1003};
  c.victim_pool_seeds = {5000, 5001, 5002, 5003, 5004, 5005};
  c.attack = default_attack_config(AttackMethod::face3dadv_x, AttackMode::impersonation);
  c.attack.iters = 3;
  return c;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("config round-trips through JSON") {
  ExperimentConfig c = small_config();
  c.seed = 42;
  c.bench_attacks = {default_attack_config(AttackMethod::mim, AttackMode::dodging)};
  ProtocolSpec s;
  s.kind = ProtocolKind::rotation2d;
  s.draws = 7;
  c.protocols.push_back(s);
  c.fit_init_seed = 9;
  c.adv_texture = "t.f64";
  CHECK(config_from_json(config_to_json(c)) == c);
  CHECK(config_from_json(config_to_json(default_experiment_config())) ==
        default_experiment_config());
}

TEST_CASE("default config contents") {
  const ExperimentConfig c = default_experiment_config();
  CHECK(c.calibration_seeds.size() == 20);
  CHECK(c.calibration_seeds.front() == 1000);
  CHECK(c.victim_pool_seeds.size() == 60);
  CHECK(c.victim_pool_seeds.front() == 5000);
  CHECK(c.victim_policy == VictimPolicy::nearest);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("missing keys keep defaults; attack defaults follow the method") {
  const ExperimentConfig c = config_from_json(R"({"seed": 3, "attack": {"method": "MIM"}})");
  CHECK(c.seed == 3);
  CHECK(c.attack.method == AttackMethod::mim);
  CHECK(c.attack.iters == 400);
  CHECK(c.calibration_seeds == default_experiment_config().calibration_seeds);
  const ExperimentConfig d = config_from_json(R"({"attack": {"mode": "dodging"}})");
  CHECK(d.attack.epsilon == 1.0);
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK_THROWS_AS(config_from_json(R"({"sede": 1})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"attack": {"iter": 3}})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"attack": {"method": "PGD"}})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"attack": {"epsilon": "big"}})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"attack": {"alpha": 0}})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"mask": "scarf"})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"models": ["modelZ"]})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"protocols": [{"kind": "roll"}]})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"calibration_seeds": [1]})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json("{not json"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json("[1, 2]"), std::invalid_argument);
  CHECK_THROWS_AS(load_config("/nonexistent/facesim.json"), std::runtime_error);
}

TEST_CASE("build_context picks the nearest pool identity") {
  const ExperimentConfig c = small_config();
  const ExperimentContext ctx = build_context(c, 2);
  REQUIRE(ctx.victims.size() == 1);
  const EmbeddingModel& m = ctx.models.front();
  const FeatureVector fa = embed(m, neutral_render(ctx.attackers[0], m));
  const double chosen = feature_distance(fa, embed(m, neutral_render(ctx.victims[0], m)));
  for (auto s : c.victim_pool_seeds) {
    const double d = feature_distance(fa, embed(m, neutral_render(build_face(synth_identity(s)), m)));
    CHECK(chosen <= d);
  }
  CHECK(ctx.deltas.size() == 1);
  CHECK(ctx.deltas[0] > 0.0);

  ExperimentConfig next = c;
  next.victim_policy = VictimPolicy::next;
  CHECK_THROWS_AS(build_context(next, 1), std::invalid_argument);
  next.attacker_seeds = {0, 1, 2};
  const ExperimentContext n = build_context(next, 1);
  CHECK(n.victim_index == std::vector<int>{1, 2, 0});
}

TEST_CASE("synth output is byte-deterministic") {
  const fs::path a = testing::scratch_dir("synth_a"), b = testing::scratch_dir("synth_b");
  cmd_synth(12, a);
  cmd_synth(12, b);
  CHECK(same_tree(a, b));
  for (const char* f : {"identity.json", "texture.ppm", "texture.f64", "shape.f64", "neutral.ppm",
                        "neutral.f32", "neutral.f64"}) {
    CHECK(fs::exists(a / f));
  }
  CHECK(fs::file_size(a / "neutral.f64") == 112u * 112 * 3 * 8);
  CHECK(fs::file_size(a / "texture.f64") == 256u * 256 * 3 * 8);
  const json id = json::parse(slurp(a / "identity.json"));
  CHECK(id["seed"] == 12);
  const fs::path c = testing::scratch_dir("synth_c");
  cmd_synth(13, c);
  CHECK(slurp(a / "neutral.f64") != slurp(c / "neutral.f64"));
}

TEST_CASE("render writes image and depth at the requested size") {
  const fs::path out = testing::scratch_dir("render");
  RenderRequest r;
  r.seed = 3;
  r.view = {10, -5};
  r.width = 40;
  r.height = 30;
  cmd_render(r, out);
  const Image img = read_ppm(out / "render.ppm");
  CHECK(img.width == 40);
  CHECK(img.height == 30);
  CHECK(fs::exists(out / "depth.pgm"));
  r.view.yaw_deg = 200;
  CHECK_THROWS_AS(cmd_render(r, out), std::invalid_argument);
}

TEST_CASE("fit from the true identity stops at zero loss") {
  const fs::path syn = testing::scratch_dir("fit_synth"), out = testing::scratch_dir("fit_out");
  cmd_synth(31, syn);
  ExperimentConfig c = small_config();
  c.fit_init_seed = 31;
  cmd_fit(syn / "neutral.f64", c, out);
  const auto rows = lines(slurp(out / "fit_loss.csv"));
  REQUIRE(rows.size() >= 2);
  CHECK(rows[0] == "iter,loss,l1");
  CHECK(rows[1].rfind("0,0,0", 0) == 0);
  const json s = json::parse(slurp(out / "fit.json"));
  CHECK(s["best_loss"] == 0.0);
  CHECK(s["init_seed"] == 31);
  CHECK_THROWS_AS(cmd_fit(syn / "missing.f64", c, out), std::runtime_error);
  CHECK_THROWS_AS(cmd_fit(syn / "identity.json", c, out), std::invalid_argument);
}

TEST_CASE("fit from a wrong seed writes one row per iteration") {
  const fs::path syn = testing::scratch_dir("fit2_synth"), out = testing::scratch_dir("fit2_out");
  cmd_synth(31, syn);
  ExperimentConfig c = small_config();
  c.fit_init_seed = 32;
  c.fit.max_iters = 5;
  cmd_fit(syn / "neutral.ppm", c, out);
  const auto rows = lines(slurp(out / "fit_loss.csv"));
  CHECK(rows.size() == 6);
  const json s = json::parse(slurp(out / "fit.json"));
  CHECK(s["best_l1"].get<double>() <= s["initial_l1"].get<double>());
}

TEST_CASE("attack output is deterministic across reruns and thread counts") {
  const ExperimentConfig c = small_config();
  const fs::path a = testing::scratch_dir("atk_a"), b = testing::scratch_dir("atk_b"),
                 t = testing::scratch_dir("atk_t");
  cmd_attack(c, a, 1);
  cmd_attack(c, b, 1);
  cmd_attack(c, t, 3);
  CHECK(same_tree(a, b));
  CHECK(same_tree(a, t));

  const json s = json::parse(slurp(a / "attack.json"));
  CHECK(s["method"] == "Face3DAdv_x");
  CHECK(s["iterations"] == 3);
  CHECK(s["masked_linf"].get<double>() <= c.attack.epsilon);
  CHECK(s["unchanged_outside_mask"] == true);
  const auto rows = lines(slurp(a / "attack_loss.csv"));
  CHECK(rows.size() == 4);
  CHECK(rows[0] == "iter,loss,candidate_mean_loss");

  // Reloaded binary texture is still feasible.
  const Image adv = read_raw_f64(a / "adv_texture.f64", 256, 256, 3);
  const Face3D attacker = build_face(synth_identity(c.attacker_seeds[0]));
  const PatchMask mask = region_mask(c.mask, 256, 256);
  CHECK(masked_linf(adv, attacker.texture, mask) <= c.attack.epsilon);
  CHECK(equal_outside_mask(adv, attacker.texture, mask));

  ExperimentConfig other = c;
  other.seed = 1;
  const fs::path o = testing::scratch_dir("atk_o");
  cmd_attack(other, o, 1);
  CHECK(slurp(o / "adv_texture.f64") != slurp(a / "adv_texture.f64"));
}

TEST_CASE("protocol writes consistent CSV, JSON and heatmap") {
  ExperimentConfig c = small_config();
  ProtocolSpec y;
  y.kind = ProtocolKind::yaw;
  c.protocols = {ProtocolSpec{}, y};
  const fs::path out = testing::scratch_dir("proto");
  cmd_protocol(c, out, 2);
  const auto rows = lines(slurp(out / "protocol_modelA_mixture.csv"));
  REQUIRE(rows.size() == 109);
  CHECK(rows[0] == "index,yaw_deg,pitch_deg,azimuth_deg,warps,distance,decision,success");
  int hits = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) hits += rows[i].back() == '1';
  const json s = json::parse(slurp(out / "protocol.json"));
  REQUIRE(s["cells"].size() == 2);
  CHECK(s["cells"][0]["kind"] == "mixture");
  CHECK(s["cells"][0]["conditions"] == 108);
  CHECK(s["cells"][0]["asr"].get<double>() == doctest::Approx(100.0 * hits / 108).epsilon(1e-12));
  CHECK(lines(slurp(out / "protocol_modelA_yaw.csv")).size() == 31);
  const Image h = read_ppm(out / "heatmap_modelA.ppm");
  CHECK(h.width == 6);
  CHECK(h.height == 6);

  const fs::path again = testing::scratch_dir("proto_again");
  cmd_protocol(c, again, 1);
  CHECK(same_tree(out, again));

  c.adv_texture = (out / "missing.f64").string();
  CHECK_THROWS_AS(cmd_protocol(c, testing::scratch_dir("proto_bad"), 1), std::runtime_error);
}

TEST_CASE("report CSV formatting") {
  ExperimentReport r;
  ConditionRecord rec;
  rec.condition.view = {3, -9};
  rec.condition.light.azimuth_deg = 40;
  rec.distance = 0.25;
  rec.decision = Decision::same;
  rec.success = true;
  r.records.push_back(rec);
  const auto rows = lines(report_csv(r));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1] == "0,3,-9,40,0,0.25,same,1");
}

TEST_CASE("unwritable output directories fail with runtime_error") {
  const fs::path file = testing::scratch_dir("blocker") / "file";
  std::ofstream(file) << "x";
  CHECK_THROWS_AS(cmd_synth(1, file / "sub"), std::runtime_error);
}

}  // TEST_SUITE

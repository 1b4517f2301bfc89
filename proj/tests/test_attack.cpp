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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <vector>

#include "facesim/attack.hpp"
#include "facesim/geometry.hpp"
#include "facesim/protocol.hpp"
#include "facesim/recognizer.hpp"
#include "facesim/rng.hpp"
#include "testing.hpp"

using namespace facesim;

namespace {

struct Scene {
  EmbeddingModel model = EmbeddingModel::named("modelA");
  Face3D attacker = build_face(synth_identity(0));
  Face3D victim = build_face(synth_identity(5007));
  PatchMask mask = region_mask(Region::eyeglass, 256, 256);
  Image victim_image = neutral_render(victim, model);
};

const Scene& scene() {
  static const Scene s;
  return s;
}

AttackConfig quick(AttackMethod method, int iters) {
  AttackConfig c = default_attack_config(method, AttackMode::impersonation);
  c.iters = iters;
  c.rng_seed = 77;
  return c;
}

}  // namespace

TEST_SUITE("attack") {

TEST_CASE("attack loss signs") {
  CHECK(attack_loss(AttackMode::impersonation, 2.0) == 2.0);
  CHECK(attack_loss(AttackMode::dodging, 2.0) == -2.0);
  CHECK(attack_loss(AttackMode::impersonation, 0.0) == 0.0);
  CHECK(attack_loss(AttackMode::dodging, 0.0) == 0.0);
}

TEST_CASE("names round-trip and unknown names are rejected") {
  for (auto m : {AttackMethod::mim, AttackMethod::eot, AttackMethod::face3dadv_x,
                 AttackMethod::face3dadv_w}) {
    CHECK(parse_attack_method(attack_method_name(m)) == m);
  }
  for (auto m : {AttackMode::dodging, AttackMode::impersonation}) {
    CHECK(parse_attack_mode(attack_mode_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_attack_method("PGD"), std::invalid_argument);
  CHECK_THROWS_AS(parse_attack_mode("evasion"), std::invalid_argument);
}

TEST_CASE("default hyperparameters") {
  const AttackConfig x = default_attack_config(AttackMethod::face3dadv_x, AttackMode::impersonation);
  CHECK(x.epsilon == 40.0 / 255.0);
  CHECK(x.alpha == 1.5 / 255.0);
  CHECK(x.iters == 100);
  CHECK(x.sample_count == 10);
  CHECK(x.candidate_count == 20);
  CHECK(x.momentum_mu == 1.0);
  const AttackConfig d = default_attack_config(AttackMethod::mim, AttackMode::dodging);
  CHECK(d.epsilon == 1.0);
  CHECK(d.iters == 400);
  CHECK(default_attack_config(AttackMethod::eot, AttackMode::impersonation).iters == 400);
}

TEST_CASE("config validation") {
  AttackConfig c = default_attack_config(AttackMethod::face3dadv_x, AttackMode::impersonation);
  CHECK_NOTHROW(validate(c));
  AttackConfig bad = c;
  bad.sample_count = 21;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad.sample_with_replacement = true;
  CHECK_NOTHROW(validate(bad));
  bad = c;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = c;
  bad.alpha = 0.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = c;
  bad.epsilon = 1.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = c;
  bad.iters = 0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = c;
  bad.method = AttackMethod::face3dadv_w;
  bad.basis_dim = 3;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = c;
  bad.transform2d_sigma = -1.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("default candidates: 20 distinct documented conditions") {
  const CandidateSet s = default_candidates();
  REQUIRE(s.conditions.size() == 20);
  CHECK_NOTHROW(validate(s, 20));
  CHECK_THROWS_AS(validate(s, 19), std::invalid_argument);
  std::set<std::pair<double, double>> poses;
  std::set<double> lights;
  for (const auto& c : s.conditions) {
    CHECK(c.warps.empty());
    if (c.light.azimuth_deg != 0.0) {
      CHECK(c.view == Viewpoint{});
      lights.insert(c.light.azimuth_deg);
    } else {
      poses.insert({c.view.yaw_deg, c.view.pitch_deg});
    }
  }
  CHECK(lights == std::set<double>{-60, -36, -12, 12, 36, 60});
  std::set<std::pair<double, double>> want{{0, -10}, {0, 10}};
  for (double y : {-15, -5, 5, 15}) {
    for (double p : {-15, 0, 15}) want.insert({y, p});
  }
  CHECK(poses == want);
  CandidateSet dup = s;
  dup.conditions[1] = dup.conditions[0];
  CHECK_THROWS_AS(validate(dup, 20), std::invalid_argument);
}

TEST_CASE("project_patch examples") {
  PatchMask on;
  on.height = 1;
  on.width = 1;
  on.values = {1};
  Image t_a(1, 1, 3, 0.5), t(1, 1, 3, 0.9);
  CHECK(project_patch(t, t_a, on, 0.15).data[0] == doctest::Approx(0.65));
  PatchMask off = on;
  off.values = {0};
  CHECK(project_patch(t, t_a, off, 0.15) == t_a);
  Image wild(1, 1, 3);
  wild.data = {1.7, -0.3, 0.42};
  const Image out = project_patch(wild, t_a, on, 1.0);
  CHECK(out.data == std::vector<double>{1.0, 0.0, 0.42});
}

TEST_CASE("project_patch keeps random images feasible") {
  Rng rng(1);
  const PatchMask& m = scene().mask;
  const Image& t_a = scene().attacker.texture;
  for (double eps : {0.0, 1.0 / 255, 40.0 / 255, 0.5, 1.0}) {
    const Image t = testing::random_image(256, 256, 3, rng, -0.5, 1.5);
    const Image p = project_patch(t, t_a, m, eps);
    CHECK(masked_linf(p, t_a, m) <= eps);
    CHECK(equal_outside_mask(p, t_a, m));
    for (double v : p.data) REQUIRE((v >= 0.0 && v <= 1.0));
  }
  CHECK_THROWS_AS(project_patch(Image(8, 8, 3), t_a, m, 0.1), std::invalid_argument);
}

TEST_CASE("importance probabilities: examples and properties") {
  const auto u = importance_probs(std::vector<double>{3, 3, 3, 3});
  for (double p : u.probs) CHECK(p == 0.25);
  const auto v = importance_probs(std::vector<double>{std::log(2.0), 0, 0});
  CHECK(v.probs[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(v.probs[1] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(v.probs[2] == doctest::Approx(0.25).epsilon(1e-14));
  // Max subtraction keeps large losses finite.
  const auto big = importance_probs(std::vector<double>{1000, 1001});
  CHECK(big.probs[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK_THROWS_AS(importance_probs(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(importance_probs(std::vector<double>{0, NAN}), std::invalid_argument);
}

TEST_CASE("raising one loss raises its probability and lowers all others") {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> l(5);
    for (double& x : l) x = rng.uniform(-3, 3);
    const auto before = importance_probs(l);
    const std::size_t k = rng.below(5);
    l[k] += rng.uniform(0.01, 2.0);
    const auto after = importance_probs(l);
    REQUIRE(after.probs[k] > before.probs[k]);
    for (std::size_t i = 0; i < 5; ++i) {
      if (i != k) REQUIRE(after.probs[i] < before.probs[i]);
    }
  }
}

TEST_CASE("sample_conditions: full draws, near-certain inclusion, frequencies") {
  Rng rng(3);
  ImportanceDistribution d{{0.1, 0.2, 0.3, 0.4}};
  auto all = sample_conditions(d, 4, rng);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<int>{0, 1, 2, 3});

  ImportanceDistribution sure{{1e-12 / 3, 1.0 - 1e-12, 1e-12 / 3, 1e-12 / 3}};
  for (int i = 0; i < 1000; ++i) {
    const auto s = sample_conditions(sure, 2, rng);
    REQUIRE(std::find(s.begin(), s.end(), 1) != s.end());
  }

  ImportanceDistribution p{{0.5, 0.25, 0.25}};
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[sample_conditions(p, 1, rng)[0]]++;
  for (int i = 0; i < 3; ++i) CHECK(std::abs(counts[i] / double(n) - p.probs[i]) <= 0.01);

  for (int i = 0; i < 200; ++i) {
    const auto s = sample_conditions(importance_probs(std::vector<double>(20, 0.0)), 10, rng);
    REQUIRE(std::set<int>(s.begin(), s.end()).size() == 10);
  }
  const auto w = sample_conditions(p, 7, rng, true);
  CHECK(w.size() == 7);
  CHECK_THROWS_AS(sample_conditions(p, 4, rng), std::invalid_argument);
}

TEST_CASE("without-replacement draws follow sequential proportional selection") {
  // P(first = i, second = j) = p_i * p_j / (1 - p_i).
  Rng rng(4);
  ImportanceDistribution p{{0.5, 0.3, 0.2}};
  std::vector<std::vector<int>> counts(3, std::vector<int>(3, 0));
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const auto s = sample_conditions(p, 2, rng);
    counts[s[0]][s[1]]++;
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double want = i == j ? 0.0 : p.probs[i] * p.probs[j] / (1.0 - p.probs[i]);
      CHECK(std::abs(counts[i][j] / double(n) - want) <= 0.01);
    }
  }
}

TEST_CASE("equal losses make importance sampling draw exactly like uniform sampling") {
  const auto is = importance_probs(std::vector<double>(20, -0.7));
  ImportanceDistribution uni{std::vector<double>(20, 1.0 / 20)};
  CHECK(is.probs == uni.probs);
  Rng a(5), b(5);
  for (int i = 0; i < 50; ++i) CHECK(sample_conditions(is, 10, a) == sample_conditions(uni, 10, b));
}

TEST_CASE("decode_patch: zero code is zero, single coefficients match the cosine basis") {
  const PatchMask& m = scene().mask;
  const int K = 5;
  const double eps = 0.1;
  std::vector<double> code(3 * K * K, 0.0);
  for (double v : decode_patch(code, K, m, eps).data) REQUIRE(v == 0.0);
  int y0 = m.height, y1 = -1, x0 = m.width, x1 = -1;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(y, x)) continue;
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
    }
  }
  for (auto [c, p, q] : {std::array<int, 3>{0, 0, 0}, {1, 2, 3}, {2, 4, 1}}) {
    std::fill(code.begin(), code.end(), 0.0);
    code[(c * K + p) * K + q] = 0.8;
    const Image out = decode_patch(code, K, m, eps);
    double worst = 0.0;
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) {
        for (int ch = 0; ch < 3; ++ch) {
          double want = 0.0;
          if (m.at(y, x) && ch == c) {
            const double u = double(x - x0) / (x1 - x0), v = double(y - y0) / (y1 - y0);
            want = eps * std::tanh(0.8 * std::cos(std::numbers::pi * p * u) *
                                   std::cos(std::numbers::pi * q * v));
          }
          worst = std::max(worst, std::abs(out.at(y, x, ch) - want));
        }
      }
    }
    CHECK(worst < 1e-14);
  }
  CHECK_THROWS_AS(decode_patch(std::vector<double>(5), K, m, eps), std::invalid_argument);
}

TEST_CASE("total variation of a small image") {
  Image img(2, 2, 1);
  img.data = {0.0, 1.0, 0.5, 0.25};
  // |1-0| + |0.25-0.5| + |0.5-0| + |0.25-1|
  CHECK(total_variation(img) == doctest::Approx(2.5));
}

TEST_CASE("epsilon 0 returns the attacker texture and the clean verification outcome") {
  const Scene& s = scene();
  AttackConfig c = quick(AttackMethod::face3dadv_x, 3);
  c.epsilon = 0.0;
  const double d_clean = feature_distance(embed(s.model, neutral_render(s.attacker, s.model)),
                                          embed(s.model, s.victim_image));
  c.delta = d_clean + 0.01;  // clean pair accepted
  AttackResult r = run_attack(s.attacker, s.victim_image, s.mask, s.model, default_candidates(), c);
  CHECK(r.adv_texture == s.attacker.texture);
  CHECK(r.neutral_distance == doctest::Approx(d_clean).epsilon(1e-12));
  CHECK(r.success_at_neutral);
  c.delta = d_clean;  // strict threshold rejects it
  r = run_attack(s.attacker, s.victim_image, s.mask, s.model, default_candidates(), c);
  CHECK_FALSE(r.success_at_neutral);
}

TEST_CASE("Face3DAdv(x) lowers the loss and keeps every iterate feasible") {
  const Scene& s = scene();
  const AttackConfig c = quick(AttackMethod::face3dadv_x, 100);
  int seen = 0;
  bool feasible = true;
  const AttackResult r = run_attack(
      s.attacker, s.victim_image, s.mask, s.model, default_candidates(), c, 4,
      [&](int, const Image& t) {
        ++seen;
        feasible = feasible && masked_linf(t, s.attacker.texture, s.mask) <= c.epsilon &&
                   equal_outside_mask(t, s.attacker.texture, s.mask);
      });
  CHECK(seen == 101);
  CHECK(feasible);
  CHECK(r.iterations_run == 100);
  REQUIRE(r.loss_trace.size() == 100);
  REQUIRE(r.candidate_loss_trace.size() == 100);
  MESSAGE("candidate mean loss " << r.candidate_loss_trace.front() << " -> "
                                 << r.candidate_loss_trace.back() << ", sampled loss "
                                 << r.loss_trace.front() << " -> " << r.loss_trace.back());
  CHECK(r.candidate_loss_trace.back() < r.candidate_loss_trace.front());
  CHECK(r.loss_trace.back() < r.loss_trace.front());
}

TEST_CASE("every method is feasible, seeded and thread-count independent") {
  const Scene& s = scene();
  for (auto method : {AttackMethod::mim, AttackMethod::eot, AttackMethod::face3dadv_x,
                      AttackMethod::face3dadv_w}) {
    AttackConfig c = quick(method, 4);
    c.sample_count = std::min(c.sample_count, 4);
    const AttackResult a = run_attack(s.attacker, s.victim_image, s.mask, s.model,
                                      default_candidates(), c, 1);
    const AttackResult b = run_attack(s.attacker, s.victim_image, s.mask, s.model,
                                      default_candidates(), c, 3);
    CHECK(a.adv_texture == b.adv_texture);
    CHECK(a.loss_trace == b.loss_trace);
    CHECK(a.candidate_loss_trace == b.candidate_loss_trace);
    CHECK(masked_linf(a.adv_texture, s.attacker.texture, s.mask) <= c.epsilon);
    CHECK(equal_outside_mask(a.adv_texture, s.attacker.texture, s.mask));
    const bool three_d = method == AttackMethod::face3dadv_x || method == AttackMethod::face3dadv_w;
    CHECK(a.candidate_loss_trace.size() == (three_d ? 4u : 0u));
    c.rng_seed += 1;
    const AttackResult other = run_attack(s.attacker, s.victim_image, s.mask, s.model,
                                          default_candidates(), c, 1);
    if (method != AttackMethod::mim) CHECK(other.adv_texture != a.adv_texture);
  }
}

TEST_CASE("dodging raises the distance to the attacker's own identity") {
  const Scene& s = scene();
  AttackConfig c = default_attack_config(AttackMethod::mim, AttackMode::dodging);
  c.iters = 10;
  const Image self = neutral_render(s.attacker, s.model);
  const AttackResult r = run_attack(s.attacker, self, s.mask, s.model, default_candidates(), c);
  CHECK(r.neutral_distance > 0.0);
  CHECK(r.loss_trace.back() < r.loss_trace.front());
}

TEST_CASE("Face3DAdv(w): zero code starts at t_a and the patch is smoother than (x)") {
  const Scene& s = scene();
  AttackConfig c = quick(AttackMethod::face3dadv_w, 30);
  bool start_is_clean = false;
  const AttackResult w = face3dadv_w(s.attacker, s.victim_image, s.mask, s.model,
                                     default_candidates(), c, 8, 4, [&](int k, const Image& t) {
                                       if (k == 0) start_is_clean = t == s.attacker.texture;
                                     });
  CHECK(start_is_clean);
  CHECK(masked_linf(w.adv_texture, s.attacker.texture, s.mask) <= c.epsilon);
  CHECK(equal_outside_mask(w.adv_texture, s.attacker.texture, s.mask));
  CHECK(w.loss_trace.back() < w.loss_trace.front());

  AttackConfig cx = quick(AttackMethod::face3dadv_x, 30);
  const AttackResult x = run_attack(s.attacker, s.victim_image, s.mask, s.model,
                                    default_candidates(), cx, 4);
  auto diff = [&](const Image& t) {
    Image d = t;
    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] -= s.attacker.texture.data[i];
    return d;
  };
  const double tv_w = total_variation(diff(w.adv_texture));
  const double tv_x = total_variation(diff(x.adv_texture));
  MESSAGE("TV w " << tv_w << " x " << tv_x);
  CHECK(tv_w <= tv_x);
}

TEST_CASE("run_attack input errors") {
  const Scene& s = scene();
  const AttackConfig c = quick(AttackMethod::face3dadv_x, 1);
  PatchMask empty = s.mask;
  std::fill(empty.values.begin(), empty.values.end(), 0);
  CHECK_THROWS_AS(run_attack(s.attacker, s.victim_image, empty, s.model, default_candidates(), c),
                  std::invalid_argument);
  const PatchMask small = region_mask(Region::eyeglass, 64, 64);
  CHECK_THROWS_AS(run_attack(s.attacker, s.victim_image, small, s.model, default_candidates(), c),
                  std::invalid_argument);
  CandidateSet few = default_candidates();
  few.conditions.pop_back();
  CHECK_THROWS_AS(run_attack(s.attacker, s.victim_image, s.mask, s.model, few, c),
                  std::invalid_argument);
  Image nan_victim = s.victim_image;
  nan_victim.data[0] = NAN;
  CHECK_THROWS_AS(run_attack(s.attacker, nan_victim, s.mask, s.model, default_candidates(), c),
                  std::runtime_error);
}

}  // TEST_SUITE

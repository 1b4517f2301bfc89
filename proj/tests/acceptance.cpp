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


// Acceptance run: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "facesim/attack.hpp"
#include "facesim/experiment.hpp"
#include "facesim/geometry.hpp"
#include "facesim/protocol.hpp"
#include "facesim/reconstruction.hpp"
#include "facesim/recognizer.hpp"
#include "facesim/renderer.hpp"
#include "facesim/rng.hpp"

using namespace facesim;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename... Args>
std::string format(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// Texture gradient of D_f(embed(render(t)), target) by the analytic chain.
Image chain_grad(const EmbeddingModel& m, const ShapeMap& shape, const Image& tex,
                 const Viewpoint& v, const Lighting& l, const FeatureVector& target) {
  const Image img = render(shape, tex, v, l).image;
  Image g;
  distance_to(m, img, target, &g);
  return render_grad_texture(shape, tex, v, l, g);
}

double chain_value(const EmbeddingModel& m, const ShapeMap& shape, const Image& tex,
                   const Viewpoint& v, const Lighting& l, const FeatureVector& target) {
  return distance_to(m, render(shape, tex, v, l).image, target, nullptr);
}

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  const std::vector<std::string> models = named_model_ids();
  double worst_rel = 0.0, worst_abs = 0.0;
  for (int k = 0; k < 20; ++k) {
    const EmbeddingModel m = EmbeddingModel::named(models[k % models.size()]);
    const IdentityParams p = synth_identity(300 + k);
    const ShapeMap shape = build_shape(p, kDefaultShapeRes);
    Image tex(16, 16, 3);
    for (double& x : tex.data) x = rng.uniform(0.2, 0.8);
    const Viewpoint v{rng.uniform(-15, 15), rng.uniform(-15, 15)};
    const Lighting l{rng.uniform(-60, 60), Lighting{}.ambient};
    const FeatureVector target = embed(m, neutral_render(build_face(synth_identity(900 + k)), m));
    const Image g = chain_grad(m, shape, tex, v, l, target);
    const double h = 1e-5;
    for (int s = 0; s < 50; ++s) {
      const std::size_t i = rng.below(tex.size());
      Image plus = tex, minus = tex;
      plus.data[i] += h;
      minus.data[i] -= h;
      const double num = (chain_value(m, shape, plus, v, l, target) -
                          chain_value(m, shape, minus, v, l, target)) / (2 * h);
      const double scale = std::max(std::abs(g.data[i]), std::abs(num));
      if (scale < 1e-8) {
        worst_abs = std::max(worst_abs, std::abs(g.data[i] - num));
      } else {
        worst_rel = std::max(worst_rel, std::abs(g.data[i] - num) / scale);
      }
    }
  }
  const double secs = seconds_since(t0);
  report(1, worst_rel < 1e-4 && worst_abs < 1e-7 && secs < 60.0,
         format("20 cases x 50 texels: max rel err %.2e, max abs err %.2e, %.1fs", worst_rel,
                worst_abs, secs));
}

void criterion_feasibility() {
  const EmbeddingModel m = EmbeddingModel::named("modelA");
  const Face3D attacker = build_face(synth_identity(0));
  const Image victim = neutral_render(build_face(synth_identity(5007)), m);
  const PatchMask mask = region_mask(Region::eyeglass, kDefaultTextureRes, kDefaultTextureRes);
  AttackConfig c = default_attack_config(AttackMethod::face3dadv_x, AttackMode::impersonation);
  c.iters = 100;
  c.sample_count = 10;
  c.candidate_count = 20;
  c.rng_seed = 1;
  double worst = 0.0;
  int checked = 0, bad = 0;
  auto observe = [&](int, const Image& t) {
    ++checked;
    worst = std::max(worst, masked_linf(t, attacker.texture, mask));
    bool ok = masked_linf(t, attacker.texture, mask) <= c.epsilon &&
              equal_outside_mask(t, attacker.texture, mask);
    for (double v : t.data) ok = ok && v >= 0.0 && v <= 1.0;
    bad += ok ? 0 : 1;
  };
  run_attack(attacker, victim, mask, m, default_candidates(), c, 1, observe);
  report(2, checked == 101 && bad == 0,
         format("%d iterates, %d infeasible, max masked Linf %.6f <= eps %.6f", checked, bad,
                worst, c.epsilon));
}

void criterion_softmax() {
  Rng rng(7);
  double worst_norm = 0.0;
  int argmax_bad = 0, uniform_bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 2 + static_cast<int>(rng.below(30));
    std::vector<double> l(n);
    for (double& x : l) x = rng.uniform(-50, 50);
    const auto p = importance_probs(l);
    double sum = 0.0;
    for (double x : p.probs) sum += x;
    worst_norm = std::max(worst_norm, std::abs(sum - 1.0));
    const auto li = std::max_element(l.begin(), l.end()) - l.begin();
    const auto pi = std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin();
    argmax_bad += li == pi ? 0 : 1;
    const auto u = importance_probs(std::vector<double>(n, l[0]));
    for (double x : u.probs) uniform_bad += std::abs(x - 1.0 / n) <= 1e-15 ? 0 : 1;
  }
  std::vector<double> losses(20);
  for (double& x : losses) x = rng.uniform(-2, 2);
  const auto dist = importance_probs(losses);
  const int draws = 100000;
  std::vector<int> counts(20, 0);
  for (int i = 0; i < draws; ++i) counts[sample_conditions(dist, 1, rng)[0]]++;
  double worst_freq = 0.0;
  for (int i = 0; i < 20; ++i) {
    worst_freq = std::max(worst_freq, std::abs(counts[i] / double(draws) - dist.probs[i]));
  }
  report(3, worst_norm < 1e-9 && argmax_bad == 0 && uniform_bad == 0 && worst_freq <= 0.01,
         format("1000 vectors: max |sum-1| %.1e, argmax mismatches %d, non-uniform %d; "
                "1e5 draws max freq err %.4f",
                worst_norm, argmax_bad, uniform_bad, worst_freq));
}

void criterion_counts() {
  auto count = [](ProtocolKind k) {
    ProtocolSpec s;
    s.kind = k;
    return static_cast<int>(enumerate_conditions(s).size());
  };
  const int p = count(ProtocolKind::pitch), y = count(ProtocolKind::yaw),
            l = count(ProtocolKind::lighting), m = count(ProtocolKind::mixture);
  report(4, p == 30 && y == 30 && l == 20 && m == 108,
         format("pitch %d, yaw %d, lighting %d, mixture %d", p, y, l, m));
}

struct Crafted {
  std::vector<Face3D> attackers;
  std::vector<Face3D> victims;
  std::vector<Image> f3d_textures;
  std::vector<double> asr[4];
};

Crafted criterion_ranking(const EmbeddingModel& model, double delta) {
  Crafted out;
  const auto t0 = std::chrono::steady_clock::now();
  const PatchMask mask = region_mask(Region::eyeglass, kDefaultTextureRes, kDefaultTextureRes);
  std::vector<Face3D> pool;
  std::vector<FeatureVector> pool_f;
  for (std::uint64_t s = 5000; s < 5060; ++s) {
    pool.push_back(build_face(synth_identity(s)));
    pool_f.push_back(embed(model, neutral_render(pool.back(), model)));
  }
  AttackConfig cfg[4] = {default_attack_config(AttackMethod::mim, AttackMode::impersonation),
                         default_attack_config(AttackMethod::eot, AttackMode::impersonation),
                         default_attack_config(AttackMethod::face3dadv_x, AttackMode::impersonation),
                         default_attack_config(AttackMethod::face3dadv_x, AttackMode::impersonation)};
  cfg[3].use_importance_sampling = false;
  ProtocolSpec spec;
  spec.kind = ProtocolKind::mixture;
  const CandidateSet cands = default_candidates();
  for (std::uint64_t i = 0; i < 10; ++i) {
    out.attackers.push_back(build_face(synth_identity(i)));
    const FeatureVector fa = embed(model, neutral_render(out.attackers.back(), model));
    std::size_t best = 0;
    for (std::size_t k = 1; k < pool.size(); ++k) {
      if (feature_distance(fa, pool_f[k]) < feature_distance(fa, pool_f[best])) best = k;
    }
    out.victims.push_back(pool[best]);
    const Image victim = neutral_render(pool[best], model);
    for (int a = 0; a < 4; ++a) {
      AttackConfig c = cfg[a];
      c.delta = delta;
      c.rng_seed = i;
      const AttackResult r =
          run_attack(out.attackers.back(), victim, mask, model, cands, c, 1);
      const ExperimentReport rep = evaluate_attack(r.adv_texture, out.attackers.back().shape,
                                                   victim, model, delta, spec, c.mode, 1);
      out.asr[a].push_back(rep.asr);
      if (a == 2) out.f3d_textures.push_back(r.adv_texture);
    }
  }
  const double secs = seconds_since(t0);
  double mean[4];
  for (int a = 0; a < 4; ++a) {
    double s = 0.0;
    for (double v : out.asr[a]) s += v;
    mean[a] = s / out.asr[a].size();
  }
  const bool order = mean[2] - mean[1] >= 3.0 && mean[1] - mean[0] >= 3.0;
  const bool is_ok = mean[2] >= mean[3] - 1.0;
  report(5, order && is_ok && secs < 1200.0,
         format("10 identities, mixture ASR: MIM %.2f, EOT %.2f, Face3DAdv_x %.2f, "
                "woIS %.2f; gaps F3D-EOT %.2f, EOT-MIM %.2f; %.0fs",
                mean[0], mean[1], mean[2], mean[3], mean[2] - mean[1], mean[1] - mean[0], secs));
  return out;
}

void criterion_transfer(const Crafted& c, const EmbeddingModel& b, double delta_b) {
  ProtocolSpec spec;
  spec.kind = ProtocolKind::mixture;
  double adv = 0.0, clean = 0.0;
  for (std::size_t i = 0; i < c.attackers.size(); ++i) {
    const Image victim = neutral_render(c.victims[i], b);
    adv += evaluate_attack(c.f3d_textures[i], c.attackers[i].shape, victim, b, delta_b, spec,
                           AttackMode::impersonation)
               .asr;
    clean += evaluate_attack(c.attackers[i].texture, c.attackers[i].shape, victim, b, delta_b,
                             spec, AttackMode::impersonation)
                 .asr;
  }
  adv /= c.attackers.size();
  clean /= c.attackers.size();
  report(6, adv > clean,
         format("Face3DAdv_x crafted on modelA, mixture ASR on modelB %.2f vs clean %.2f", adv,
                clean));
}

void criterion_depth(const Crafted& c, const EmbeddingModel& m) {
  int depth_diff = 0, cover_diff = 0, rgbd_bad = 0, views = 0;
  ProtocolSpec spec;
  spec.kind = ProtocolKind::mixture;
  const auto conds = enumerate_conditions(spec);
  for (std::size_t i = 0; i < c.attackers.size(); ++i) {
    for (std::size_t k = 0; k < conds.size(); k += 7) {
      const RenderOutput a = render(c.attackers[i].shape, c.attackers[i].texture, conds[k].view,
                                    conds[k].light);
      const RenderOutput b =
          render(c.attackers[i].shape, c.f3d_textures[i], conds[k].view, conds[k].light);
      ++views;
      depth_diff += a.depth == b.depth ? 0 : 1;
      cover_diff += a.coverage == b.coverage ? 0 : 1;
      // Depth-channel contribution: same image, clean vs adversarial depth.
      const FeatureVector da = embed_rgbd(m, a.image, normalized_depth(a));
      const FeatureVector db = embed_rgbd(m, a.image, normalized_depth(b));
      rgbd_bad += da == db ? 0 : 1;
    }
  }
  report(7, depth_diff == 0 && cover_diff == 0 && rgbd_bad == 0,
         format("%d renders: depth differs %d, coverage differs %d, RGB-D depth path differs %d",
                views, depth_diff, cover_diff, rgbd_bad));
}

void criterion_fit() {
  const EmbeddingModel m = EmbeddingModel::named("modelA");
  FitConfig cfg;
  cfg.max_iters = 300;
  std::string detail;
  bool pass = true;
  for (auto [truth, init] : {std::pair<std::uint64_t, std::uint64_t>{40, 41}, {50, 51}, {60, 61}}) {
    const Image target = neutral_render(build_face(synth_identity(truth)), m);
    const FitResult r = fit_face(target, m, cfg, init);
    double best = r.l1_trace.front();
    for (std::size_t k = 0; k < r.l1_trace.size() && k <= 300; ++k) best = std::min(best, r.l1_trace[k]);
    const double ratio = best / r.l1_trace.front();
    pass = pass && ratio < 0.25;
    detail += format("%llu<-%llu L1 ratio %.3f; ", static_cast<unsigned long long>(truth),
                     static_cast<unsigned long long>(init), ratio);
  }
  const Image target = neutral_render(build_face(synth_identity(40)), m);
  const FitResult fixed = fit_face(target, m, cfg, 40);
  const double l0 = fixed.loss_trace.front();
  pass = pass && l0 == 0.0;
  detail += format("fixed point loss at iteration 0: %g", l0);
  report(8, pass, detail);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a)) files.push_back(e.path().filename());
  std::size_t nb = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++nb;
  if (files.empty() || files.size() != nb) return false;
  for (const auto& f : files) {
    if (slurp(a / f) != slurp(b / f)) return false;
  }
  return true;
}

void criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / "facesim_acceptance";
  fs::remove_all(root);
  ExperimentConfig c = default_experiment_config();
  cmd_attack(c, root / "attack_t1", 1);
  cmd_attack(c, root / "attack_t2", 2);
  cmd_attack(c, root / "attack_rerun", 1);
  ExperimentConfig p = c;
  p.adv_texture = (root / "attack_t1" / "adv_texture.f64").string();
  cmd_protocol(p, root / "protocol_t1", 1);
  cmd_protocol(p, root / "protocol_t2", 2);
  cmd_protocol(p, root / "protocol_rerun", 1);
  const bool a = same_tree(root / "attack_t1", root / "attack_t2") &&
                 same_tree(root / "attack_t1", root / "attack_rerun");
  const bool q = same_tree(root / "protocol_t1", root / "protocol_t2") &&
                 same_tree(root / "protocol_t1", root / "protocol_rerun");
  report(9, a && q,
         format("attack outputs identical: %s; protocol outputs identical: %s", a ? "yes" : "no",
                q ? "yes" : "no"));
}

}  // namespace

int main() {
  criterion_gradients();
  criterion_feasibility();
  criterion_softmax();
  criterion_counts();

  const EmbeddingModel a = EmbeddingModel::named("modelA");
  const EmbeddingModel b = EmbeddingModel::named("modelB");
  std::vector<Face3D> calibration;
  for (std::uint64_t s = 1000; s < 1020; ++s) calibration.push_back(build_face(synth_identity(s)));
  const double delta_a = calibrate_on_faces(a, calibration).delta;
  const double delta_b = calibrate_on_faces(b, calibration).delta;
  const Crafted crafted = criterion_ranking(a, delta_a);
  criterion_transfer(crafted, b, delta_b);
  criterion_depth(crafted, a);
  criterion_fit();
  criterion_determinism();

  std::printf("%d of 9 criteria failed\n", failures);
  return failures ? 1 : 0;
}

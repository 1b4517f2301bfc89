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

// Command-line front end over the facesim C API.

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "facesim/facesim.h"

namespace {

int exit_code(fsim_status s) {
  if (s == FSIM_OK) return 0;
  std::fprintf(stderr, "facesim: %s\n", fsim_last_error());
  return s == FSIM_ERR_INVALID_ARGUMENT ? 2 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Face recognition physical-patch simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fsim_version()));

  std::string config, out = "out", target;
  std::uint64_t seed = 0;
  int threads = 1;
  double yaw = 0.0, pitch = 0.0, azimuth = 0.0, ambient = 0.3;
  int width = 112, height = 112;

  bool has_seed = false;
  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config) cmd->add_option("--config", config, "Experiment config (JSON)")->required();
    cmd->add_option("--out", out, "Output directory");
    cmd->add_option("--seed", seed, "Global seed, overriding the config")
        ->each([&](const std::string&) { has_seed = true; });
    cmd->add_option("--threads", threads, "Worker threads (outputs do not depend on it)")
        ->check(CLI::PositiveNumber);
  };

  auto* synth = app.add_subcommand("synth", "Write identity parameters, texture and shape");
  add_common(synth, false);
  auto* render = app.add_subcommand("render", "Render an identity under one condition");
  add_common(render, false);
  render->add_option("--yaw", yaw, "Yaw in degrees");
  render->add_option("--pitch", pitch, "Pitch in degrees");
  render->add_option("--light", azimuth, "Light azimuth in degrees");
  render->add_option("--ambient", ambient, "Ambient term in [0,1]");
  render->add_option("--width", width, "Image width");
  render->add_option("--height", height, "Image height");
  auto* fit = app.add_subcommand("fit", "Fit identity texture coefficients to an image");
  add_common(fit, true);
  fit->add_option("--target", target, "Target image (.ppm, .f32 or .f64)")->required();
  auto* attack = app.add_subcommand("attack", "Craft an adversarial patch");
  add_common(attack, true);
  auto* protocol = app.add_subcommand("protocol", "Evaluate a texture over the test protocol");
  add_common(protocol, true);
  auto* bench = app.add_subcommand("bench", "Run the attack x model x protocol matrix");
  add_common(bench, true);
  auto* defaults = app.add_subcommand("config", "Write the default experiment config");
  defaults->add_option("--out", out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*synth) return exit_code(fsim_cmd_synth(seed, out.c_str()));
  if (*render) {
    return exit_code(
        fsim_cmd_render(seed, yaw, pitch, azimuth, ambient, width, height, out.c_str()));
  }
  if (*fit) {
    return exit_code(
        fsim_cmd_fit(target.c_str(), config.c_str(), out.c_str(), has_seed, seed));
  }
  if (*attack) {
    return exit_code(fsim_cmd_attack(config.c_str(), out.c_str(), has_seed, seed, threads));
  }
  if (*protocol) {
    return exit_code(fsim_cmd_protocol(config.c_str(), out.c_str(), has_seed, seed, threads));
  }
  if (*bench) {
    return exit_code(fsim_cmd_bench(config.c_str(), out.c_str(), has_seed, seed, threads));
  }
  return exit_code(fsim_write_default_config(out.c_str()));
}

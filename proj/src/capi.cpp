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

#include "facesim/facesim.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <stdexcept>
#include <string>

#include "facesim/experiment.hpp"
#include "facesim/image_io.hpp"

struct fsim_identity {
  facesim::IdentityParams params;
};
struct fsim_face {
  facesim::Face3D face;
};
struct fsim_image {
  facesim::Image image;
};
struct fsim_model {
  facesim::EmbeddingModel model;
};
struct fsim_mask {
  facesim::PatchMask mask;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
fsim_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return FSIM_OK;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return FSIM_ERR_INVALID_ARGUMENT;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return FSIM_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return FSIM_ERR_RUNTIME;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FSIM_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown error";
    return FSIM_ERR_RUNTIME;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

std::string str_arg(const char* s, const char* what) {
  require(s != nullptr, what);
  return s;
}

fsim_status copy_coeffs(const std::vector<double>& v, double* buf, size_t cap, size_t* count) {
  if (count) *count = v.size();
  if (buf == nullptr && cap == 0) return FSIM_OK;
  if (cap < v.size()) {
    g_last_error = "buffer too small";
    return FSIM_ERR_BUFFER_TOO_SMALL;
  }
  std::memcpy(buf, v.data(), v.size() * sizeof(double));
  return FSIM_OK;
}

facesim::ExperimentConfig load(const char* config_path, int has_seed, uint64_t seed) {
  facesim::ExperimentConfig c = facesim::load_config(str_arg(config_path, "config path is null"));
  if (has_seed) c.seed = seed;
  return c;
}

}  // namespace

extern "C" {

const char* fsim_last_error(void) { return g_last_error.c_str(); }

const char* fsim_version(void) { return "1.0.0"; }

fsim_status fsim_identity_create(uint64_t seed, fsim_identity** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = new fsim_identity{facesim::synth_identity(seed)};
  });
}

void fsim_identity_destroy(fsim_identity* id) { delete id; }

fsim_status fsim_identity_shape_coeffs(const fsim_identity* id, double* buf, size_t cap,
                                       size_t* count) {
  if (id == nullptr) {
    g_last_error = "identity is null";
    return FSIM_ERR_INVALID_ARGUMENT;
  }
  return copy_coeffs(id->params.shape_coeffs, buf, cap, count);
}

fsim_status fsim_identity_texture_coeffs(const fsim_identity* id, double* buf, size_t cap,
                                         size_t* count) {
  if (id == nullptr) {
    g_last_error = "identity is null";
    return FSIM_ERR_INVALID_ARGUMENT;
  }
  return copy_coeffs(id->params.texture_coeffs, buf, cap, count);
}

fsim_status fsim_face_create(const fsim_identity* id, int shape_res, int texture_res,
                             fsim_face** out) {
  return guarded([&] {
    require(id != nullptr && out != nullptr, "null argument");
    *out = new fsim_face{facesim::build_face(id->params, shape_res, texture_res)};
  });
}

void fsim_face_destroy(fsim_face* face) { delete face; }

fsim_status fsim_face_texture(const fsim_face* face, fsim_image** out) {
  return guarded([&] {
    require(face != nullptr && out != nullptr, "null argument");
    *out = new fsim_image{face->face.texture};
  });
}

fsim_status fsim_face_set_texture(fsim_face* face, const fsim_image* texture) {
  return guarded([&] {
    require(face != nullptr && texture != nullptr, "null argument");
    require(texture->image.same_shape(face->face.texture), "texture shape mismatch");
    facesim::require_unit_range(texture->image, "texture");
    face->face.texture = texture->image;
  });
}

fsim_status fsim_image_create(int height, int width, int channels, fsim_image** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    require(height > 0 && width > 0 && channels > 0, "image dimensions must be positive");
    *out = new fsim_image{facesim::Image(height, width, channels, 0.0)};
  });
}

void fsim_image_destroy(fsim_image* img) { delete img; }

fsim_status fsim_image_shape(const fsim_image* img, int* height, int* width, int* channels) {
  return guarded([&] {
    require(img != nullptr, "image is null");
    if (height) *height = img->image.height;
    if (width) *width = img->image.width;
    if (channels) *channels = img->image.channels;
  });
}

const double* fsim_image_data(const fsim_image* img) {
  return img ? img->image.data.data() : nullptr;
}

double* fsim_image_mutable_data(fsim_image* img) { return img ? img->image.data.data() : nullptr; }

fsim_status fsim_render(const fsim_face* face, double yaw_deg, double pitch_deg,
                        double azimuth_deg, double ambient, int width, int height,
                        fsim_image** image, fsim_image** depth) {
  return guarded([&] {
    require(face != nullptr && image != nullptr, "null argument");
    require(width > 0 && height > 0, "render size must be positive");
    facesim::RenderSettings s;
    s.width = width;
    s.height = height;
    facesim::RenderOutput r = facesim::render(face->face.shape, face->face.texture,
                                              {yaw_deg, pitch_deg}, {azimuth_deg, ambient}, s);
    auto* img = new fsim_image{std::move(r.image)};
    if (depth) {
      try {
        *depth = new fsim_image{std::move(r.depth)};
      } catch (...) {
        delete img;
        throw;
      }
    }
    *image = img;
  });
}

fsim_status fsim_model_create(const char* model_id, fsim_model** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = new fsim_model{facesim::EmbeddingModel::named(str_arg(model_id, "model id is null"))};
  });
}

void fsim_model_destroy(fsim_model* model) { delete model; }

int fsim_model_dim(const fsim_model* model) { return model ? model->model.dim() : 0; }

fsim_status fsim_embed(const fsim_model* model, const fsim_image* image, double* out,
                       size_t cap) {
  if (model != nullptr && cap < static_cast<size_t>(model->model.dim())) {
    g_last_error = "output buffer smaller than dim";
    return FSIM_ERR_BUFFER_TOO_SMALL;
  }
  return guarded([&] {
    require(model != nullptr && image != nullptr && out != nullptr, "null argument");
    const facesim::FeatureVector f = facesim::embed(model->model, image->image);
    std::memcpy(out, f.values.data(), f.values.size() * sizeof(double));
  });
}

fsim_status fsim_distance(const fsim_model* model, const fsim_image* a, const fsim_image* b,
                          double* out) {
  return guarded([&] {
    require(model != nullptr && a != nullptr && b != nullptr && out != nullptr, "null argument");
    *out = facesim::feature_distance(facesim::embed(model->model, a->image),
                                     facesim::embed(model->model, b->image));
  });
}

fsim_status fsim_mask_create(const char* region, int height, int width, fsim_mask** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = new fsim_mask{facesim::region_mask(str_arg(region, "region is null"), height, width)};
  });
}

void fsim_mask_destroy(fsim_mask* mask) { delete mask; }

double fsim_mask_area_fraction(const fsim_mask* mask) {
  return mask ? mask->mask.area_fraction() : 0.0;
}

fsim_status fsim_cmd_synth(uint64_t seed, const char* out_dir) {
  return guarded([&] { facesim::cmd_synth(seed, str_arg(out_dir, "output dir is null")); });
}

fsim_status fsim_cmd_render(uint64_t seed, double yaw_deg, double pitch_deg,
                            double azimuth_deg, double ambient, int width, int height,
                            const char* out_dir) {
  return guarded([&] {
    facesim::RenderRequest req;
    req.seed = seed;
    req.view = {yaw_deg, pitch_deg};
    req.light = {azimuth_deg, ambient};
    req.width = width;
    req.height = height;
    facesim::cmd_render(req, str_arg(out_dir, "output dir is null"));
  });
}

fsim_status fsim_cmd_fit(const char* target_path, const char* config_path, const char* out_dir,
                         int has_seed, uint64_t seed_override) {
  return guarded([&] {
    const std::string target = str_arg(target_path, "target path is null");
    if (!std::filesystem::exists(target)) throw std::runtime_error("missing target " + target);
    facesim::cmd_fit(target, load(config_path, has_seed, seed_override),
                     str_arg(out_dir, "output dir is null"));
  });
}

fsim_status fsim_cmd_attack(const char* config_path, const char* out_dir, int has_seed,
                            uint64_t seed_override, int threads) {
  return guarded([&] {
    facesim::cmd_attack(load(config_path, has_seed, seed_override),
                        str_arg(out_dir, "output dir is null"), threads);
  });
}

fsim_status fsim_cmd_protocol(const char* config_path, const char* out_dir, int has_seed,
                              uint64_t seed_override, int threads) {
  return guarded([&] {
    facesim::cmd_protocol(load(config_path, has_seed, seed_override),
                          str_arg(out_dir, "output dir is null"), threads);
  });
}

fsim_status fsim_cmd_bench(const char* config_path, const char* out_dir, int has_seed,
                           uint64_t seed_override, int threads) {
  return guarded([&] {
    facesim::cmd_bench(load(config_path, has_seed, seed_override),
                       str_arg(out_dir, "output dir is null"), threads);
  });
}

fsim_status fsim_write_default_config(const char* path) {
  return guarded([&] {
    facesim::write_text_file(str_arg(path, "path is null"),
                             facesim::config_to_json(facesim::default_experiment_config()));
  });
}

}  // extern "C"

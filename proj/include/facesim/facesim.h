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

#ifndef FACESIM_FACESIM_H_
#define FACESIM_FACESIM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(FACESIM_BUILDING_LIBRARY)
#define FSIM_API __attribute__((visibility("default")))
#else
#define FSIM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fsim_status {
  FSIM_OK = 0,
  FSIM_ERR_INVALID_ARGUMENT = 1,
  FSIM_ERR_IO = 2,
  FSIM_ERR_RUNTIME = 3,
  FSIM_ERR_BUFFER_TOO_SMALL = 4
} fsim_status;

typedef struct fsim_identity fsim_identity;
typedef struct fsim_face fsim_face;
typedef struct fsim_image fsim_image;
typedef struct fsim_model fsim_model;
typedef struct fsim_mask fsim_mask;

/* Message of the last failed call on this thread; never NULL. */
FSIM_API const char* fsim_last_error(void);
FSIM_API const char* fsim_version(void);

/* Destroy functions accept NULL. */
FSIM_API fsim_status fsim_identity_create(uint64_t seed, fsim_identity** out);
FSIM_API void fsim_identity_destroy(fsim_identity* id);
/* Copies up to `cap` coefficients; `count` receives the full length. */
FSIM_API fsim_status fsim_identity_shape_coeffs(const fsim_identity* id, double* buf,
                                                size_t cap, size_t* count);
FSIM_API fsim_status fsim_identity_texture_coeffs(const fsim_identity* id, double* buf,
                                                  size_t cap, size_t* count);

FSIM_API fsim_status fsim_face_create(const fsim_identity* id, int shape_res, int texture_res,
                                      fsim_face** out);
FSIM_API void fsim_face_destroy(fsim_face* face);
/* New image holding a copy of the face texture. */
FSIM_API fsim_status fsim_face_texture(const fsim_face* face, fsim_image** out);
/* Replaces the texture; shape must match and values lie in [0,1]. */
FSIM_API fsim_status fsim_face_set_texture(fsim_face* face, const fsim_image* texture);

/* Zero-filled image. */
FSIM_API fsim_status fsim_image_create(int height, int width, int channels, fsim_image** out);
FSIM_API void fsim_image_destroy(fsim_image* img);
FSIM_API fsim_status fsim_image_shape(const fsim_image* img, int* height, int* width,
                                      int* channels);
/* Interleaved row-major doubles, height * width * channels of them. */
FSIM_API const double* fsim_image_data(const fsim_image* img);
FSIM_API double* fsim_image_mutable_data(fsim_image* img);

/* `depth` may be NULL; otherwise it receives an H x W x 1 depth plane with
   +inf on the background. */
FSIM_API fsim_status fsim_render(const fsim_face* face, double yaw_deg, double pitch_deg,
                                 double azimuth_deg, double ambient, int width, int height,
                                 fsim_image** image, fsim_image** depth);

FSIM_API fsim_status fsim_model_create(const char* model_id, fsim_model** out);
FSIM_API void fsim_model_destroy(fsim_model* model);
FSIM_API int fsim_model_dim(const fsim_model* model);
/* `cap` must be at least fsim_model_dim(model). */
FSIM_API fsim_status fsim_embed(const fsim_model* model, const fsim_image* image, double* out,
                                size_t cap);
/* Squared Euclidean distance of the two embeddings. */
FSIM_API fsim_status fsim_distance(const fsim_model* model, const fsim_image* a,
                                   const fsim_image* b, double* out);

FSIM_API fsim_status fsim_mask_create(const char* region, int height, int width,
                                      fsim_mask** out);
FSIM_API void fsim_mask_destroy(fsim_mask* mask);
FSIM_API double fsim_mask_area_fraction(const fsim_mask* mask);

/* Pipeline commands. `seed_override` replaces the config seed when
   `has_seed` is non-zero; `threads` never changes the outputs. */
FSIM_API fsim_status fsim_cmd_synth(uint64_t seed, const char* out_dir);
FSIM_API fsim_status fsim_cmd_render(uint64_t seed, double yaw_deg, double pitch_deg,
                                     double azimuth_deg, double ambient, int width, int height,
                                     const char* out_dir);
FSIM_API fsim_status fsim_cmd_fit(const char* target_path, const char* config_path,
                                  const char* out_dir, int has_seed, uint64_t seed_override);
FSIM_API fsim_status fsim_cmd_attack(const char* config_path, const char* out_dir,
                                     int has_seed, uint64_t seed_override, int threads);
FSIM_API fsim_status fsim_cmd_protocol(const char* config_path, const char* out_dir,
                                       int has_seed, uint64_t seed_override, int threads);
FSIM_API fsim_status fsim_cmd_bench(const char* config_path, const char* out_dir,
                                    int has_seed, uint64_t seed_override, int threads);
/* Writes the default experiment config as JSON. */
FSIM_API fsim_status fsim_write_default_config(const char* path);

#ifdef __cplusplus
}
#endif

#endif  // FACESIM_FACESIM_H_

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

#include <array>
#include <cstdint>
#include <vector>

#include "facesim/geometry.hpp"
#include "facesim/image.hpp"

namespace facesim {

/// Head pose. Positive yaw turns the face towards its own left (the nose moves
/// to image right); positive pitch tilts the face up.
struct Viewpoint {
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;

  bool operator==(const Viewpoint&) const = default;
};

/// Directional light swung in the horizontal plane; direction in camera space
/// is (sin az, 0, cos az).
struct Lighting {
  double azimuth_deg = 0.0;
  double ambient = 0.3;

  bool operator==(const Lighting&) const = default;
};

struct RenderSettings {
  int width = 112;
  int height = 112;
  /// Half width of the orthographic view volume in model units.
  double half_extent = 0.8;
  double camera_z = 10.0;
  double background = 0.5;
};

inline constexpr double kBackgroundGray = 0.5;

/// Texture-independent part of a render: per-pixel surface lookups.
///
/// Everything here depends only on (shape, viewpoint, lighting), so attacks
/// with a fixed shape rasterize each condition once and reshade per texture.
struct Rasterization {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> coverage;
  std::vector<double> depth;     // +inf on background
  std::vector<double> tex_u;     // texture-space UV of the visible surface
  std::vector<double> tex_v;
  std::vector<double> shade;     // ambient + (1 - ambient) max(0, n.l)
  double background = kBackgroundGray;
};

struct RenderOutput {
  Image image;                         // H x W x 3
  Image depth;                         // H x W x 1, +inf on background
  std::vector<std::uint8_t> coverage;  // H x W
};

void validate(const Viewpoint& v);
void validate(const Lighting& l);

Rasterization rasterize(const ShapeMap& shape, const Viewpoint& view,
                        const Lighting& light, const RenderSettings& settings = {});

/// Samples the texture through a rasterization: texel * shade, gray background.
Image shade_texture(const Rasterization& raster, const Image& texture);

/// Adds the texture gradient of sum(upstream .* shade_texture(raster, t)) into
/// `grad` (texture shaped). Pixels are visited in row-major order and each
/// pixel scatters its four bilinear taps in (y0,x0),(y0,x1),(y1,x0),(y1,x1)
/// order, so the floating-point result is reproducible.
void accumulate_texture_grad(const Rasterization& raster, const Image& upstream,
                             Image& grad);

RenderOutput render(const ShapeMap& shape, const Image& texture,
                    const Viewpoint& view, const Lighting& light,
                    const RenderSettings& settings = {});

/// Exact adjoint of render() with respect to the texture only.
Image render_grad_texture(const ShapeMap& shape, const Image& texture,
                          const Viewpoint& view, const Lighting& light,
                          const Image& upstream, const RenderSettings& settings = {});

/// Depth plane normalized to [0,1] over covered pixels, background 1.
Image normalized_depth(const RenderOutput& out);

/// Maps each texel centre of a (height x width) texture to the pixel that
/// displays it in a frontal neutral render of `shape`, and samples `image`
/// there bilinearly. Texels outside `mask` keep `fallback`.
Image resample_image_to_texture(const ShapeMap& shape, const Image& image,
                                const std::vector<std::uint8_t>& mask,
                                const Image& fallback,
                                const RenderSettings& settings = {});

// ---- 2D image transformations -------------------------------------------

/// Warps act in normalized coordinates centred on the image with the longer
/// side spanning [-1, 1]. Output pixel p reads the input at the source point
/// S(p) by bilinear interpolation; taps outside the image read gray 0.5.
///   rotation:   S(p) = R(angle) p
///   projective: S(p) = ((a0 x + a1 y + a2) / k, (b0 x + b1 y + b2) / k),
///               k = c0 x + c1 y + 1
struct Transform2D {
  enum class Kind { rotation, projective };
  Kind kind = Kind::rotation;
  double rotation_rad = 0.0;
  std::array<double, 8> projective{1, 0, 0, 0, 1, 0, 0, 0};

  static Transform2D rotation(double radians);
  static Transform2D make_projective(const std::array<double, 8>& params);
  bool is_identity() const;

  bool operator==(const Transform2D&) const = default;
};

inline constexpr double kMinProjectiveDenominator = 0.1;

class Rng;

/// Throws std::invalid_argument if the projective denominator drops to 0.1 or
/// below anywhere on a (height x width) image.
void validate(const Transform2D& t, int height, int width);

Image apply_transform2d(const Image& image, const Transform2D& t);
/// Adjoint of apply_transform2d with respect to the input image.
Image transform2d_grad(const Image& image, const Transform2D& t,
                       const Image& upstream);

/// Rotation angle ~ N(0, sigma) radians.
Transform2D sample_rotation(double sigma, Rng& rng);
/// a0, b0 ~ N(1, sigma); the other six ~ N(0, sigma). Draws violating the
/// denominator bound on a 112x112 image are redrawn.
Transform2D sample_projective(double sigma, Rng& rng);
Transform2D sample_transform2d(Transform2D::Kind kind, double sigma, Rng& rng);

}  // namespace facesim

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
#include <string>
#include <string_view>
#include <vector>

#include "facesim/image.hpp"

namespace facesim {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Vec3&) const = default;
};

double dot(const Vec3& a, const Vec3& b);
Vec3 cross(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);
Vec3 normalized(const Vec3& a);

/// Number of shape / texture coefficients carried by every identity.
inline constexpr int kShapeCoeffs = 15;
inline constexpr int kTextureBasisPerAxis = 4;
inline constexpr int kTextureCoeffs = 3 * kTextureBasisPerAxis * kTextureBasisPerAxis;

/// Seeded stand-in for a person: coefficients of the analytic face basis.
struct IdentityParams {
  std::uint64_t seed = 0;
  std::vector<double> shape_coeffs;    // kShapeCoeffs entries in [-1, 1]
  std::vector<double> texture_coeffs;  // kTextureCoeffs entries in [-1, 1]

  bool operator==(const IdentityParams&) const = default;
};

/// Height-field grid of vertex positions. Vertex (r, c) has UV
/// (c / (cols - 1), r / (rows - 1)); every grid quad is split along its
/// (r, c)-(r+1, c+1) diagonal into two triangles.
struct ShapeMap {
  int rows = 0;
  int cols = 0;
  std::vector<Vec3> positions;

  const Vec3& at(int r, int c) const {
    return positions[static_cast<std::size_t>(r) * cols + c];
  }
  Vec3& at(int r, int c) { return positions[static_cast<std::size_t>(r) * cols + c]; }

  bool operator==(const ShapeMap&) const = default;
};

/// Texture-space patch regions. Committed UV definitions (u right, v down):
///   eyeglass   - two ellipses centred (0.33, 0.38) and (0.67, 0.38) with
///                radii (0.17, 0.11), joined by the bridge rectangle
///                u in [0.45, 0.55], v in [0.35, 0.40]
///   respirator - ellipse centred (0.5, 0.78) with radii (0.28, 0.14)
///   hat        - rectangle u in [0.15, 0.85], v in [0.04, 0.20]
enum class Region { eyeglass, respirator, hat };

Region parse_region(std::string_view name);
std::string_view region_name(Region r);

struct PatchMask {
  int height = 0;
  int width = 0;
  Region region = Region::eyeglass;
  std::vector<std::uint8_t> values;  // 0 or 1, row-major

  bool at(int y, int x) const {
    return values[static_cast<std::size_t>(y) * width + x] != 0;
  }
  double area_fraction() const;
};

/// A renderable face: fixed shape plus texture (the {s, t} pair).
struct Face3D {
  ShapeMap shape;
  Image texture;
};

inline constexpr int kDefaultShapeRes = 64;
inline constexpr int kDefaultTextureRes = 256;

IdentityParams synth_identity(std::uint64_t seed);

ShapeMap build_shape(const IdentityParams& params, int rows = kDefaultShapeRes,
                     int cols = kDefaultShapeRes);

Image build_texture(const IdentityParams& params, int height = kDefaultTextureRes,
                    int width = kDefaultTextureRes);

/// Texture before clamping; used by the coefficient-space gradient.
Image texture_unclamped(const IdentityParams& params, int height, int width);

/// Value of texture basis function `index` (within one channel block) at (u, v).
double texture_basis(int index, double u, double v);
double shape_basis(int index, double u, double v);
double shape_basis_amplitude(int index);

inline constexpr double kTextureAmplitude = 0.07;
inline constexpr double kBaseTone[3] = {0.78, 0.60, 0.50};

Face3D build_face(const IdentityParams& params, int shape_res = kDefaultShapeRes,
                  int texture_res = kDefaultTextureRes);

PatchMask region_mask(Region region, int height = kDefaultTextureRes,
                      int width = kDefaultTextureRes);
PatchMask region_mask(std::string_view region, int height, int width);

/// Smallest 3D triangle area over the mesh triangulation.
double min_triangle_area(const ShapeMap& shape);

/// Half extents of the face grid in model units.
inline constexpr double kFaceHalfWidth = 0.85;
inline constexpr double kFaceHalfHeight = 1.05;

}  // namespace facesim

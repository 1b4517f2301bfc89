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

#include "facesim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "facesim/rng.hpp"

namespace facesim {

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  return n > 0.0 ? a * (1.0 / n) : Vec3{0.0, 0.0, 1.0};
}

namespace {

// Shape basis (p, q) pairs in [0,3]^2 without the constant term.
void shape_pq(int index, int& p, int& q) {
  const int k = index + 1;
  p = k / 4;
  q = k % 4;
}

double base_height(double x, double y) {
  const double ex = x / kFaceHalfWidth;
  const double ey = y / kFaceHalfHeight;
  const double dome = 0.6 * (1.0 - 0.5 * (ex * ex + ey * ey));
  const double nx = x / 0.12;
  const double ny = (y + 0.05) / 0.25;
  const double nose = 0.12 * std::exp(-(nx * nx + ny * ny));
  double sockets = 0.0;
  for (double cx : {-0.35, 0.35}) {
    const double sx = (x - cx) / 0.16;
    const double sy = (y - 0.25) / 0.10;
    sockets -= 0.05 * std::exp(-(sx * sx + sy * sy));
  }
  return dome + nose + sockets;
}

bool in_ellipse(double u, double v, double cu, double cv, double ru, double rv) {
  const double a = (u - cu) / ru;
  const double b = (v - cv) / rv;
  return a * a + b * b <= 1.0;
}

bool in_rect(double u, double v, double u0, double u1, double v0, double v1) {
  return u >= u0 && u <= u1 && v >= v0 && v <= v1;
}

bool region_contains(Region r, double u, double v) {
  switch (r) {
    case Region::eyeglass:
      return in_ellipse(u, v, 0.33, 0.38, 0.17, 0.11) ||
             in_ellipse(u, v, 0.67, 0.38, 0.17, 0.11) ||
             in_rect(u, v, 0.45, 0.55, 0.35, 0.40);
    case Region::respirator:
      return in_ellipse(u, v, 0.5, 0.78, 0.28, 0.14);
    case Region::hat:
      return in_rect(u, v, 0.15, 0.85, 0.04, 0.20);
  }
  return false;
}

}  // namespace

double shape_basis(int index, double u, double v) {
  int p = 0, q = 0;
  shape_pq(index, p, q);
  return std::cos(std::numbers::pi * p * u) * std::cos(std::numbers::pi * q * v);
}

double shape_basis_amplitude(int index) {
  int p = 0, q = 0;
  shape_pq(index, p, q);
  return 0.012 / static_cast<double>(p + q);
}

double texture_basis(int index, double u, double v) {
  const int p = index / kTextureBasisPerAxis;
  const int q = index % kTextureBasisPerAxis;
  return std::cos(std::numbers::pi * p * u) * std::cos(std::numbers::pi * q * v);
}

IdentityParams synth_identity(std::uint64_t seed) {
  Rng rng(stream_seed(seed, "identity"));
  IdentityParams p;
  p.seed = seed;
  p.shape_coeffs.resize(kShapeCoeffs);
  p.texture_coeffs.resize(kTextureCoeffs);
  for (double& c : p.shape_coeffs) c = rng.uniform(-1.0, 1.0);
  for (double& c : p.texture_coeffs) c = rng.uniform(-1.0, 1.0);
  return p;
}

ShapeMap build_shape(const IdentityParams& params, int rows, int cols) {
  if (rows < 16 || cols < 16) {
    throw std::invalid_argument("build_shape: resolution must be at least 16x16");
  }
  if (params.shape_coeffs.size() != static_cast<std::size_t>(kShapeCoeffs)) {
    throw std::invalid_argument("build_shape: wrong number of shape coefficients");
  }
  ShapeMap s;
  s.rows = rows;
  s.cols = cols;
  s.positions.resize(static_cast<std::size_t>(rows) * cols);
  // (c - centre) is exactly antisymmetric, so the zero-coefficient mesh is
  // bit-exactly mirror symmetric in x.
  const double cc = (cols - 1) / 2.0;
  const double rc = (rows - 1) / 2.0;
  const double sx = 2.0 * kFaceHalfWidth / (cols - 1);
  const double sy = 2.0 * kFaceHalfHeight / (rows - 1);
  for (int r = 0; r < rows; ++r) {
    const double v = static_cast<double>(r) / (rows - 1);
    for (int c = 0; c < cols; ++c) {
      const double u = static_cast<double>(c) / (cols - 1);
      const double x = (c - cc) * sx;
      const double y = (rc - r) * sy;
      double z = base_height(x, y);
      for (int k = 0; k < kShapeCoeffs; ++k) {
        const double w = params.shape_coeffs[k];
        if (w != 0.0) z += w * shape_basis_amplitude(k) * shape_basis(k, u, v);
      }
      s.at(r, c) = {x, y, z};
    }
  }
  return s;
}

Image texture_unclamped(const IdentityParams& params, int height, int width) {
  if (height < 32 || width < 32) {
    throw std::invalid_argument("build_texture: resolution must be at least 32x32");
  }
  if (params.texture_coeffs.size() != static_cast<std::size_t>(kTextureCoeffs)) {
    throw std::invalid_argument("build_texture: wrong number of texture coefficients");
  }
  constexpr int kPerChannel = kTextureBasisPerAxis * kTextureBasisPerAxis;
  // Separable evaluation: basis(p,q) = cos(pi p u) cos(pi q v).
  std::vector<double> cu(static_cast<std::size_t>(width) * kTextureBasisPerAxis);
  std::vector<double> cv(static_cast<std::size_t>(height) * kTextureBasisPerAxis);
  for (int x = 0; x < width; ++x) {
    const double u = static_cast<double>(x) / (width - 1);
    for (int p = 0; p < kTextureBasisPerAxis; ++p) {
      cu[x * kTextureBasisPerAxis + p] = std::cos(std::numbers::pi * p * u);
    }
  }
  for (int y = 0; y < height; ++y) {
    const double v = static_cast<double>(y) / (height - 1);
    for (int q = 0; q < kTextureBasisPerAxis; ++q) {
      cv[y * kTextureBasisPerAxis + q] = std::cos(std::numbers::pi * q * v);
    }
  }
  Image t(height, width, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double value = kBaseTone[c];
        for (int k = 0; k < kPerChannel; ++k) {
          const double w = params.texture_coeffs[c * kPerChannel + k];
          if (w == 0.0) continue;
          const int p = k / kTextureBasisPerAxis;
          const int q = k % kTextureBasisPerAxis;
          value += w * kTextureAmplitude * cu[x * kTextureBasisPerAxis + p] *
                   cv[y * kTextureBasisPerAxis + q];
        }
        t.at(y, x, c) = value;
      }
    }
  }
  return t;
}

Image build_texture(const IdentityParams& params, int height, int width) {
  Image t = texture_unclamped(params, height, width);
  for (double& v : t.data) v = std::clamp(v, 0.0, 1.0);
  return t;
}

Face3D build_face(const IdentityParams& params, int shape_res, int texture_res) {
  return {build_shape(params, shape_res, shape_res),
          build_texture(params, texture_res, texture_res)};
}

Region parse_region(std::string_view name) {
  if (name == "eyeglass") return Region::eyeglass;
  if (name == "respirator") return Region::respirator;
  if (name == "hat") return Region::hat;
  throw std::invalid_argument("unknown region: " + std::string(name));
}

std::string_view region_name(Region r) {
  switch (r) {
    case Region::eyeglass: return "eyeglass";
    case Region::respirator: return "respirator";
    case Region::hat: return "hat";
  }
  return "unknown";
}

double PatchMask::area_fraction() const {
  if (values.empty()) return 0.0;
  std::size_t on = 0;
  for (auto v : values) on += v;
  return static_cast<double>(on) / static_cast<double>(values.size());
}

PatchMask region_mask(Region region, int height, int width) {
  if (height < 2 || width < 2) {
    throw std::invalid_argument("region_mask: resolution must be at least 2x2");
  }
  PatchMask m;
  m.height = height;
  m.width = width;
  m.region = region;
  m.values.resize(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    const double v = static_cast<double>(y) / (height - 1);
    for (int x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / (width - 1);
      m.values[static_cast<std::size_t>(y) * width + x] =
          region_contains(region, u, v) ? 1 : 0;
    }
  }
  return m;
}

PatchMask region_mask(std::string_view region, int height, int width) {
  return region_mask(parse_region(region), height, width);
}

double min_triangle_area(const ShapeMap& shape) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r + 1 < shape.rows; ++r) {
    for (int c = 0; c + 1 < shape.cols; ++c) {
      const Vec3& a = shape.at(r, c);
      const Vec3& b = shape.at(r, c + 1);
      const Vec3& d = shape.at(r + 1, c);
      const Vec3& e = shape.at(r + 1, c + 1);
      best = std::min(best, 0.5 * norm(cross(b - a, e - a)));
      best = std::min(best, 0.5 * norm(cross(e - a, d - a)));
    }
  }
  return best;
}

}  // namespace facesim

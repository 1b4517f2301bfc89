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

#include "facesim/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace facesim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

// Yaw about +y, then pitch about +x.
struct Rotation {
  double cy, sy, cp, sp;

  explicit Rotation(const Viewpoint& v)
      : cy(std::cos(deg2rad(v.yaw_deg))), sy(std::sin(deg2rad(v.yaw_deg))),
        cp(std::cos(deg2rad(v.pitch_deg))), sp(std::sin(deg2rad(v.pitch_deg))) {}

  Vec3 apply(const Vec3& p) const {
    const double x1 = p.x * cy + p.z * sy;
    const double z1 = -p.x * sy + p.z * cy;
    const double y2 = p.y * cp + z1 * sp;
    const double z2 = -p.y * sp + z1 * cp;
    return {x1, y2, z2};
  }
};

std::vector<Vec3> vertex_normals(const ShapeMap& s) {
  std::vector<Vec3> n(s.positions.size());
  for (int r = 0; r < s.rows; ++r) {
    const int r0 = std::max(r - 1, 0), r1 = std::min(r + 1, s.rows - 1);
    for (int c = 0; c < s.cols; ++c) {
      const int c0 = std::max(c - 1, 0), c1 = std::min(c + 1, s.cols - 1);
      const Vec3 along_u = s.at(r, c1) - s.at(r, c0);
      // Rows grow downwards in the image, so r0 -> r1 points down.
      const Vec3 up = s.at(r0, c) - s.at(r1, c);
      Vec3 nn = normalized(cross(along_u, up));
      if (nn.z < 0.0) nn = nn * -1.0;
      n[static_cast<std::size_t>(r) * s.cols + c] = nn;
    }
  }
  return n;
}

double edge(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

struct Fragment {
  int v0 = -1, v1 = -1, v2 = -1;
  double w0 = 0, w1 = 0, w2 = 0;
};

// Bilinear tap layout shared by sampling and its adjoint.
struct Taps {
  int x0, x1, y0, y1;
  double fx, fy;
};

Taps texel_taps(double u, double v, int width, int height) {
  const double x = std::clamp(u, 0.0, 1.0) * (width - 1);
  const double y = std::clamp(v, 0.0, 1.0) * (height - 1);
  int x0 = std::min(static_cast<int>(std::floor(x)), width - 2);
  int y0 = std::min(static_cast<int>(std::floor(y)), height - 2);
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  return {x0, x0 + 1, y0, y0 + 1, x - x0, y - y0};
}

}  // namespace

void validate(const Viewpoint& v) {
  if (!(std::abs(v.yaw_deg) <= 60.0) || !(std::abs(v.pitch_deg) <= 60.0)) {
    throw std::invalid_argument("viewpoint outside the +-60 degree range");
  }
}

void validate(const Lighting& l) {
  if (!(std::abs(l.azimuth_deg) <= 60.0)) {
    throw std::invalid_argument("lighting azimuth outside the +-60 degree range");
  }
  if (!(l.ambient >= 0.0 && l.ambient <= 1.0)) {
    throw std::invalid_argument("ambient must lie in [0,1]");
  }
}

Rasterization rasterize(const ShapeMap& shape, const Viewpoint& view,
                        const Lighting& light, const RenderSettings& settings) {
  validate(view);
  validate(light);
  if (shape.rows < 2 || shape.cols < 2 ||
      shape.positions.size() != static_cast<std::size_t>(shape.rows) * shape.cols) {
    throw std::invalid_argument("rasterize: malformed shape map");
  }
  const int W = settings.width, H = settings.height;
  if (W < 1 || H < 1) throw std::invalid_argument("rasterize: empty image");

  const Rotation rot(view);
  const std::vector<Vec3> base_normals = vertex_normals(shape);
  const std::size_t nv = shape.positions.size();
  std::vector<double> sx(nv), sy(nv), vz(nv);
  std::vector<Vec3> normals(nv);
  const double scale = (W / 2.0) / settings.half_extent;
  for (std::size_t i = 0; i < nv; ++i) {
    const Vec3 p = rot.apply(shape.positions[i]);
    sx[i] = p.x * scale + W / 2.0 - 0.5;
    sy[i] = -p.y * scale + H / 2.0 - 0.5;
    vz[i] = p.z;
    normals[i] = rot.apply(base_normals[i]);
  }

  const std::size_t np = static_cast<std::size_t>(W) * H;
  std::vector<double> depth(np, kInf);
  std::vector<Fragment> frags(np);

  auto raster_triangle = [&](int a, int b, int c) {
    const double area = edge(sx[a], sy[a], sx[b], sy[b], sx[c], sy[c]);
    if (std::abs(area) < 1e-12) return;
    const double inv = 1.0 / area;
    const double xmin = std::min({sx[a], sx[b], sx[c]});
    const double xmax = std::max({sx[a], sx[b], sx[c]});
    const double ymin = std::min({sy[a], sy[b], sy[c]});
    const double ymax = std::max({sy[a], sy[b], sy[c]});
    const int i0 = std::max(0, static_cast<int>(std::ceil(xmin)));
    const int i1 = std::min(W - 1, static_cast<int>(std::floor(xmax)));
    const int j0 = std::max(0, static_cast<int>(std::ceil(ymin)));
    const int j1 = std::min(H - 1, static_cast<int>(std::floor(ymax)));
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const double w0 = edge(sx[b], sy[b], sx[c], sy[c], i, j) * inv;
        const double w1 = edge(sx[c], sy[c], sx[a], sy[a], i, j) * inv;
        const double w2 = edge(sx[a], sy[a], sx[b], sy[b], i, j) * inv;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double d = settings.camera_z - (w0 * vz[a] + w1 * vz[b] + w2 * vz[c]);
        const std::size_t p = static_cast<std::size_t>(j) * W + i;
        if (d < depth[p]) {
          depth[p] = d;
          frags[p] = {a, b, c, w0, w1, w2};
        }
      }
    }
  };

  const int cols = shape.cols;
  for (int r = 0; r + 1 < shape.rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const int a = r * cols + c;
      const int b = a + 1;
      const int d = a + cols;
      const int e = d + 1;
      raster_triangle(a, b, e);
      raster_triangle(a, e, d);
    }
  }

  Rasterization out;
  out.width = W;
  out.height = H;
  out.background = settings.background;
  out.coverage.assign(np, 0);
  out.depth = std::move(depth);
  out.tex_u.assign(np, 0.0);
  out.tex_v.assign(np, 0.0);
  out.shade.assign(np, 0.0);
  const double az = deg2rad(light.azimuth_deg);
  const Vec3 ldir{std::sin(az), 0.0, std::cos(az)};
  const double du = 1.0 / (shape.cols - 1);
  const double dv = 1.0 / (shape.rows - 1);
  for (std::size_t p = 0; p < np; ++p) {
    const Fragment& f = frags[p];
    if (f.v0 < 0) continue;
    out.coverage[p] = 1;
    auto uv = [&](int v, double& u_out, double& v_out) {
      u_out = (v % cols) * du;
      v_out = (v / cols) * dv;
    };
    double u0, v0, u1, v1, u2, v2;
    uv(f.v0, u0, v0);
    uv(f.v1, u1, v1);
    uv(f.v2, u2, v2);
    out.tex_u[p] = f.w0 * u0 + f.w1 * u1 + f.w2 * u2;
    out.tex_v[p] = f.w0 * v0 + f.w1 * v1 + f.w2 * v2;
    const Vec3 n = normalized(normals[f.v0] * f.w0 + normals[f.v1] * f.w1 +
                              normals[f.v2] * f.w2);
    const double lambert = std::max(0.0, dot(n, ldir));
    out.shade[p] = light.ambient + (1.0 - light.ambient) * lambert;
  }
  return out;
}

Image shade_texture(const Rasterization& raster, const Image& texture) {
  if (texture.channels != 3 || texture.width < 2 || texture.height < 2) {
    throw std::invalid_argument("shade_texture: texture must be HxWx3, at least 2x2");
  }
  Image img(raster.height, raster.width, 3, raster.background);
  const std::size_t np = raster.coverage.size();
  for (std::size_t p = 0; p < np; ++p) {
    if (!raster.coverage[p]) continue;
    const Taps t = texel_taps(raster.tex_u[p], raster.tex_v[p], texture.width,
                              texture.height);
    const double w00 = (1 - t.fx) * (1 - t.fy), w01 = t.fx * (1 - t.fy);
    const double w10 = (1 - t.fx) * t.fy, w11 = t.fx * t.fy;
    for (int c = 0; c < 3; ++c) {
      const double texel = w00 * texture.at(t.y0, t.x0, c) +
                           w01 * texture.at(t.y0, t.x1, c) +
                           w10 * texture.at(t.y1, t.x0, c) +
                           w11 * texture.at(t.y1, t.x1, c);
      img.data[p * 3 + c] = texel * raster.shade[p];
    }
  }
  return img;
}

void accumulate_texture_grad(const Rasterization& raster, const Image& upstream,
                             Image& grad) {
  if (upstream.height != raster.height || upstream.width != raster.width ||
      upstream.channels != 3) {
    throw std::invalid_argument("accumulate_texture_grad: upstream shape mismatch");
  }
  const std::size_t np = raster.coverage.size();
  for (std::size_t p = 0; p < np; ++p) {
    if (!raster.coverage[p]) continue;
    const Taps t = texel_taps(raster.tex_u[p], raster.tex_v[p], grad.width,
                              grad.height);
    const double s = raster.shade[p];
    const double w00 = (1 - t.fx) * (1 - t.fy), w01 = t.fx * (1 - t.fy);
    const double w10 = (1 - t.fx) * t.fy, w11 = t.fx * t.fy;
    for (int c = 0; c < 3; ++c) {
      const double g = upstream.data[p * 3 + c] * s;
      if (g == 0.0) continue;
      grad.at(t.y0, t.x0, c) += w00 * g;
      grad.at(t.y0, t.x1, c) += w01 * g;
      grad.at(t.y1, t.x0, c) += w10 * g;
      grad.at(t.y1, t.x1, c) += w11 * g;
    }
  }
}

RenderOutput render(const ShapeMap& shape, const Image& texture,
                    const Viewpoint& view, const Lighting& light,
                    const RenderSettings& settings) {
  const Rasterization raster = rasterize(shape, view, light, settings);
  RenderOutput out;
  out.image = shade_texture(raster, texture);
  out.depth = Image(raster.height, raster.width, 1);
  out.depth.data = raster.depth;
  out.coverage = raster.coverage;
  return out;
}

Image render_grad_texture(const ShapeMap& shape, const Image& texture,
                          const Viewpoint& view, const Lighting& light,
                          const Image& upstream, const RenderSettings& settings) {
  for (double g : upstream.data) {
    if (!std::isfinite(g)) throw std::invalid_argument("upstream gradient not finite");
  }
  const Rasterization raster = rasterize(shape, view, light, settings);
  Image grad(texture.height, texture.width, texture.channels, 0.0);
  accumulate_texture_grad(raster, upstream, grad);
  return grad;
}

Image normalized_depth(const RenderOutput& out) {
  Image d(out.depth.height, out.depth.width, 1, 1.0);
  double lo = kInf, hi = -kInf;
  for (std::size_t p = 0; p < out.coverage.size(); ++p) {
    if (!out.coverage[p]) continue;
    lo = std::min(lo, out.depth.data[p]);
    hi = std::max(hi, out.depth.data[p]);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t p = 0; p < out.coverage.size(); ++p) {
    if (out.coverage[p]) d.data[p] = (out.depth.data[p] - lo) / span;
  }
  return d;
}

Image resample_image_to_texture(const ShapeMap& shape, const Image& image,
                                const std::vector<std::uint8_t>& mask,
                                const Image& fallback,
                                const RenderSettings& settings) {
  if (mask.size() != fallback.pixel_count() || image.channels != 3) {
    throw std::invalid_argument("resample_image_to_texture: shape mismatch");
  }
  Image out = fallback;
  const int H = fallback.height, W = fallback.width;
  const double scale = (settings.width / 2.0) / settings.half_extent;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (!mask[static_cast<std::size_t>(y) * W + x]) continue;
      // Surface point at this texel's UV, bilinear over the vertex grid.
      const double gr = static_cast<double>(y) / (H - 1) * (shape.rows - 1);
      const double gc = static_cast<double>(x) / (W - 1) * (shape.cols - 1);
      const int r0 = std::min(static_cast<int>(gr), shape.rows - 2);
      const int c0 = std::min(static_cast<int>(gc), shape.cols - 2);
      const double fr = gr - r0, fc = gc - c0;
      const Vec3 p = shape.at(r0, c0) * ((1 - fr) * (1 - fc)) +
                     shape.at(r0, c0 + 1) * ((1 - fr) * fc) +
                     shape.at(r0 + 1, c0) * (fr * (1 - fc)) +
                     shape.at(r0 + 1, c0 + 1) * (fr * fc);
      const double px = p.x * scale + settings.width / 2.0 - 0.5;
      const double py = -p.y * scale + settings.height / 2.0 - 0.5;
      const double cx = std::clamp(px, 0.0, image.width - 1.0);
      const double cy = std::clamp(py, 0.0, image.height - 1.0);
      const int x0 = std::min(static_cast<int>(cx), image.width - 2);
      const int y0 = std::min(static_cast<int>(cy), image.height - 2);
      const double fx = cx - x0, fy = cy - y0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - fx) * (1 - fy) * image.at(y0, x0, c) +
                         fx * (1 - fy) * image.at(y0, x0 + 1, c) +
                         (1 - fx) * fy * image.at(y0 + 1, x0, c) +
                         fx * fy * image.at(y0 + 1, x0 + 1, c);
        out.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace facesim

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

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "facesim/renderer.hpp"
#include "facesim/rng.hpp"

namespace facesim {

namespace {

struct Frame {
  double cx, cy, s;

  Frame(int height, int width)
      : cx((width - 1) / 2.0), cy((height - 1) / 2.0),
        s(std::max(width - 1, height - 1) / 2.0) {
    if (width < 2 || height < 2) {
      throw std::invalid_argument("2D transforms need images of at least 2x2");
    }
  }
};

double denominator(const std::array<double, 8>& p, double x, double y) {
  return p[6] * x + p[7] * y + 1.0;
}

// Source point (pixel units) read by output pixel (i, j).
void source_point(const Transform2D& t, const Frame& f, int i, int j,
                  double& xs, double& ys) {
  const double x = (i - f.cx) / f.s;
  const double y = (j - f.cy) / f.s;
  double xn, yn;
  if (t.kind == Transform2D::Kind::rotation) {
    const double c = std::cos(t.rotation_rad), s = std::sin(t.rotation_rad);
    xn = c * x - s * y;
    yn = s * x + c * y;
  } else {
    const auto& p = t.projective;
    const double k = denominator(p, x, y);
    xn = (p[0] * x + p[1] * y + p[2]) / k;
    yn = (p[3] * x + p[4] * y + p[5]) / k;
  }
  xs = xn * f.s + f.cx;
  ys = yn * f.s + f.cy;
}

bool inside(const Image& img, int x, int y) {
  return x >= 0 && y >= 0 && x < img.width && y < img.height;
}

}  // namespace

Transform2D Transform2D::rotation(double radians) {
  Transform2D t;
  t.kind = Kind::rotation;
  t.rotation_rad = radians;
  return t;
}

Transform2D Transform2D::make_projective(const std::array<double, 8>& params) {
  Transform2D t;
  t.kind = Kind::projective;
  t.projective = params;
  return t;
}

bool Transform2D::is_identity() const {
  if (kind == Kind::rotation) return rotation_rad == 0.0;
  return projective == std::array<double, 8>{1, 0, 0, 0, 1, 0, 0, 0};
}

void validate(const Transform2D& t, int height, int width) {
  if (t.kind != Transform2D::Kind::projective) return;
  const Frame f(height, width);
  const double xe = f.cx / f.s, ye = f.cy / f.s;
  // k is affine in (x, y), so its minimum over the image is at a corner.
  for (double x : {-xe, xe}) {
    for (double y : {-ye, ye}) {
      if (!(denominator(t.projective, x, y) > kMinProjectiveDenominator)) {
        throw std::invalid_argument("projective denominator degenerate over image");
      }
    }
  }
}

Image apply_transform2d(const Image& image, const Transform2D& t) {
  validate(t, image.height, image.width);
  if (t.is_identity()) return image;
  const Frame f(image.height, image.width);
  const int C = image.channels;
  Image out(image.height, image.width, C);
  for (int j = 0; j < image.height; ++j) {
    for (int i = 0; i < image.width; ++i) {
      double xs, ys;
      source_point(t, f, i, j, xs, ys);
      const int x0 = static_cast<int>(std::floor(xs));
      const int y0 = static_cast<int>(std::floor(ys));
      const double fx = xs - x0, fy = ys - y0;
      const int tx[4] = {x0, x0 + 1, x0, x0 + 1};
      const int ty[4] = {y0, y0, y0 + 1, y0 + 1};
      const double tw[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy,
                            fx * fy};
      for (int c = 0; c < C; ++c) {
        double v = 0.0;
        for (int k = 0; k < 4; ++k) {
          v += tw[k] * (inside(image, tx[k], ty[k]) ? image.at(ty[k], tx[k], c)
                                                    : kBackgroundGray);
        }
        out.at(j, i, c) = v;
      }
    }
  }
  return out;
}

Image transform2d_grad(const Image& image, const Transform2D& t,
                       const Image& upstream) {
  if (!upstream.same_shape(image)) {
    throw std::invalid_argument("transform2d_grad: upstream shape mismatch");
  }
  validate(t, image.height, image.width);
  if (t.is_identity()) return upstream;
  const Frame f(image.height, image.width);
  const int C = image.channels;
  Image grad(image.height, image.width, C, 0.0);
  for (int j = 0; j < image.height; ++j) {
    for (int i = 0; i < image.width; ++i) {
      double xs, ys;
      source_point(t, f, i, j, xs, ys);
      const int x0 = static_cast<int>(std::floor(xs));
      const int y0 = static_cast<int>(std::floor(ys));
      const double fx = xs - x0, fy = ys - y0;
      const int tx[4] = {x0, x0 + 1, x0, x0 + 1};
      const int ty[4] = {y0, y0, y0 + 1, y0 + 1};
      const double tw[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy,
                            fx * fy};
      for (int k = 0; k < 4; ++k) {
        if (!inside(image, tx[k], ty[k])) continue;
        for (int c = 0; c < C; ++c) {
          grad.at(ty[k], tx[k], c) += tw[k] * upstream.at(j, i, c);
        }
      }
    }
  }
  return grad;
}

Transform2D sample_rotation(double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
  return Transform2D::rotation(sigma == 0.0 ? 0.0 : rng.normal(0.0, sigma));
}

Transform2D sample_projective(double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
  if (sigma == 0.0) return Transform2D::make_projective({1, 0, 0, 0, 1, 0, 0, 0});
  for (;;) {
    std::array<double, 8> p{};
    for (int k = 0; k < 8; ++k) {
      const double mean = (k == 0 || k == 4) ? 1.0 : 0.0;
      p[k] = rng.normal(mean, sigma);
    }
    const Transform2D t = Transform2D::make_projective(p);
    // The unit square bounds every image frame.
    bool ok = true;
    for (double x : {-1.0, 1.0}) {
      for (double y : {-1.0, 1.0}) {
        ok = ok && denominator(p, x, y) > kMinProjectiveDenominator;
      }
    }
    if (ok) return t;
  }
}

Transform2D sample_transform2d(Transform2D::Kind kind, double sigma, Rng& rng) {
  return kind == Transform2D::Kind::rotation ? sample_rotation(sigma, rng)
                                             : sample_projective(sigma, rng);
}

}  // namespace facesim

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

#include "facesim/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace facesim {

void require_unit_range(const Image& img, const std::string& what) {
  for (double v : img.data) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument(what + ": value outside [0,1]");
    }
  }
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

// Skips whitespace and '#' comments in a PNM header.
int read_header_int(std::istream& in) {
  int c = in.peek();
  while (c != EOF) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
    c = in.peek();
  }
  int value = -1;
  in >> value;
  if (!in || value < 0) throw std::invalid_argument("malformed PNM header");
  return value;
}

template <typename T>
void write_raw(const std::filesystem::path& path, const Image& img) {
  static_assert(std::endian::native == std::endian::little,
                "raw dumps assume a little-endian host");
  auto out = open_out(path);
  std::vector<T> plane(img.pixel_count());
  for (int c = 0; c < img.channels; ++c) {
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
      plane[p] = static_cast<T>(img.data[p * img.channels + c]);
    }
    out.write(reinterpret_cast<const char*>(plane.data()),
              static_cast<std::streamsize>(plane.size() * sizeof(T)));
  }
  finish(out, path);
}

template <typename T>
Image read_raw(const std::filesystem::path& path, int height, int width,
               int channels) {
  auto in = open_in(path);
  Image img(height, width, channels);
  std::vector<T> plane(img.pixel_count());
  for (int c = 0; c < channels; ++c) {
    in.read(reinterpret_cast<char*>(plane.data()),
            static_cast<std::streamsize>(plane.size() * sizeof(T)));
    if (!in) throw std::invalid_argument("raw image too short: " + path.string());
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
      img.data[p * channels + c] = static_cast<double>(plane[p]);
    }
  }
  if (in.peek() != EOF) {
    throw std::invalid_argument("raw image has trailing bytes: " + path.string());
  }
  return img;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& rgb) {
  if (rgb.channels != 3) throw std::invalid_argument("write_ppm: need 3 channels");
  auto out = open_out(path);
  out << "P6\n" << rgb.width << ' ' << rgb.height << "\n255\n";
  std::vector<char> bytes(rgb.size());
  std::transform(rgb.data.begin(), rgb.data.end(), bytes.begin(),
                 [](double v) { return static_cast<char>(to_byte(v)); });
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  finish(out, path);
}

Image read_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '6') {
    throw std::invalid_argument("not a binary PPM: " + path.string());
  }
  const int w = read_header_int(in);
  const int h = read_header_int(in);
  const int maxval = read_header_int(in);
  if (maxval != 255) throw std::invalid_argument("only 8-bit PPM is supported");
  in.get();
  Image img(h, w, 3);
  std::vector<unsigned char> bytes(img.size());
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!in) throw std::invalid_argument("truncated PPM: " + path.string());
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

void write_pgm8(const std::filesystem::path& path, const Image& gray) {
  if (gray.channels != 1) throw std::invalid_argument("write_pgm8: need 1 channel");
  auto out = open_out(path);
  out << "P5\n" << gray.width << ' ' << gray.height << "\n255\n";
  std::vector<char> bytes(gray.size());
  std::transform(gray.data.begin(), gray.data.end(), bytes.begin(),
                 [](double v) { return static_cast<char>(to_byte(v)); });
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  finish(out, path);
}

void write_depth_pgm16(const std::filesystem::path& path, const Image& depth) {
  if (depth.channels != 1) throw std::invalid_argument("depth must be 1 channel");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double d : depth.data) {
    if (std::isfinite(d)) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  const double span = hi > lo ? hi - lo : 1.0;
  auto out = open_out(path);
  out << "P5\n" << depth.width << ' ' << depth.height << "\n65535\n";
  std::vector<char> bytes(depth.size() * 2);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    std::uint16_t v = 65535;
    if (std::isfinite(depth.data[i])) {
      v = static_cast<std::uint16_t>(
          std::lround((depth.data[i] - lo) / span * 65534.0));
    }
    bytes[2 * i] = static_cast<char>(v >> 8);
    bytes[2 * i + 1] = static_cast<char>(v & 0xFF);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  finish(out, path);
}

void write_raw_f32(const std::filesystem::path& path, const Image& img) {
  write_raw<float>(path, img);
}
void write_raw_f64(const std::filesystem::path& path, const Image& img) {
  write_raw<double>(path, img);
}
Image read_raw_f32(const std::filesystem::path& path, int height, int width,
                   int channels) {
  return read_raw<float>(path, height, width, channels);
}
Image read_raw_f64(const std::filesystem::path& path, int height, int width,
                   int channels) {
  return read_raw<double>(path, height, width, channels);
}

Image read_image_any(const std::filesystem::path& path, int height, int width,
                     int channels) {
  const auto ext = path.extension().string();
  if (ext == ".ppm") return read_ppm(path);
  if (ext == ".f32") return read_raw_f32(path, height, width, channels);
  if (ext == ".f64") return read_raw_f64(path, height, width, channels);
  throw std::invalid_argument("unsupported image extension: " + ext);
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& contents) {
  auto out = open_out(path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  finish(out, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace facesim

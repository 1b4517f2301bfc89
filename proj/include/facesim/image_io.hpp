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

#include <filesystem>
#include <string>
#include <vector>

#include "facesim/image.hpp"

namespace facesim {

// All writers throw std::runtime_error on I/O failure; readers additionally
// throw std::invalid_argument on malformed content.

/// Binary P6, 8-bit; values are clamped to [0,1] and rounded to nearest.
void write_ppm(const std::filesystem::path& path, const Image& rgb);
Image read_ppm(const std::filesystem::path& path);

/// Single-channel 8-bit binary P5.
void write_pgm8(const std::filesystem::path& path, const Image& gray);

/// 16-bit P5 (big-endian samples) of a depth plane. Finite depths are mapped
/// linearly onto [0, 65534]; non-finite (background) pixels become 65535.
void write_depth_pgm16(const std::filesystem::path& path, const Image& depth);

/// Headerless planar dumps, channel-major then row-major, little-endian.
void write_raw_f32(const std::filesystem::path& path, const Image& img);
void write_raw_f64(const std::filesystem::path& path, const Image& img);
Image read_raw_f32(const std::filesystem::path& path, int height, int width,
                   int channels);
Image read_raw_f64(const std::filesystem::path& path, int height, int width,
                   int channels);

/// Loads .ppm, .f32 or .f64 by extension; raw formats need the given shape.
Image read_image_any(const std::filesystem::path& path, int height, int width,
                     int channels);

void write_text_file(const std::filesystem::path& path,
                     const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace facesim

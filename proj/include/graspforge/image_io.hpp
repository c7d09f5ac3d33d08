#pragma once

#include <filesystem>

#include "graspforge/image.hpp"

namespace graspforge {

// Binary Netpbm. 16-bit PGM samples are big-endian as the format requires.
void write_pgm8(const std::filesystem::path& path, const Image<std::uint8_t>& img);
void write_pgm16(const std::filesystem::path& path,
                 const Image<std::uint16_t>& img);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

// Reads P5 (maxval <= 65535) into 16-bit samples.
Image<std::uint16_t> read_pgm(const std::filesystem::path& path);
RgbImage read_ppm(const std::filesystem::path& path);

void write_mask(const std::filesystem::path& path, const Mask& mask);
Mask read_mask(const std::filesystem::path& path);

// Quantized depth on disk: `<stem>.pgm` codes, `<stem>.json` sidecar with
// z_near / z_far / bit_depth, and `<valid_path>` 8-bit mask (255 = valid).
void write_quantized_depth(const std::filesystem::path& pgm_path,
                           const std::filesystem::path& valid_path,
                           const QuantizedDepthImage& q);
QuantizedDepthImage read_quantized_depth(const std::filesystem::path& pgm_path,
                                         const std::filesystem::path& valid_path);

std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path);

}  // namespace graspforge

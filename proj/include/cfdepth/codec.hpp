#pragma once

#include "cfdepth/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace cfd {

using Bytes = std::vector<std::uint8_t>;

/// Raw Portable Float Map contents: row-major, top row first, channels
/// interleaved.
struct PfmImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;
};

/// Little-endian PFM ("Pf" for 1 channel, "PF" for 3), bottom row first.
Bytes encode_pfm(const PfmImage& image);
/// Accepts either endianness (negative scale = little-endian).
PfmImage decode_pfm(std::span<const std::uint8_t> bytes);

Bytes encode_pfm(const DepthMap& depth);
Bytes encode_pfm(const NormalField& normals);
Bytes encode_pfm(const ConfidenceMap& conf);

DepthMap depth_from_pfm(const PfmImage& image, const Intrinsics& intrinsics);
NormalField normals_from_pfm(const PfmImage& image);
ConfidenceMap confidence_from_pfm(const PfmImage& image);

/// Binary 8-bit PPM (P6). Channel values are rounded to the nearest of 256
/// levels; decoding yields byte / 255.
Bytes encode_ppm(const RgbImage& rgb);
RgbImage decode_ppm(std::span<const std::uint8_t> bytes);

/// Binary 8-bit PGM (P5) mask: 0 = remove, 255 = keep. Bytes below 128
/// decode as 0.
Bytes encode_pgm(const ObjectMask& mask);
ObjectMask decode_pgm(std::span<const std::uint8_t> bytes);

/// Rounds every channel to the 8-bit grid used by the PPM codec.
RgbImage quantize_rgb(const RgbImage& rgb);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace cfd

#pragma once

#include <filesystem>
#include <string>

#include "nsf/image.hpp"

namespace nsf::io {

/// Writes a single-channel float map as grayscale PFM ("Pf"), little-endian
/// (scale -1.0), rows stored bottom-to-top.
void write_pfm(const Image& map, const std::filesystem::path& path);
std::string encode_pfm(const Image& map);

/// Reads grayscale or color PFM of either endianness. Throws ParseError on a
/// malformed header and IoError on a missing file.
Image read_pfm(const std::filesystem::path& path);
Image decode_pfm(const std::string& bytes);

/// 8-bit sRGB PNG without alpha. Values are clamped to [0,1] and rounded.
void write_png(const Image& img, const std::filesystem::path& path);
void write_mask_png(const Mask& mask, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);
Mask read_mask_png(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace nsf::io

#pragma once

#include <filesystem>

#include "railgen/core/image.hpp"

namespace railgen::io {

// Reads an 8-bit PNG or JPEG (detected by magic bytes). Gray stays c=1,
// color becomes c=3; palette and gray+alpha PNGs are expanded, alpha is
// dropped.
ImageU8 read_image(const std::filesystem::path& path);

// Writes c=1 as grayscale PNG, c=3 as RGB PNG. Output bytes are
// deterministic for identical pixels.
void write_png(const std::filesystem::path& path, const ImageU8& img);

// Same encoding, into memory (used for wire payloads).
std::vector<unsigned char> encode_png(const ImageU8& img);

} // namespace railgen::io

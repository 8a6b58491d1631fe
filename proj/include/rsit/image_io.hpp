#pragma once

#include <cstdint>
#include <filesystem>

#include "rsit/tensor.hpp"

namespace rsit::io {

/// 8-bit channel value <-> [-1, 1].
inline double from_byte(std::uint8_t u) { return u / 127.5 - 1.0; }
std::uint8_t to_byte(double v);

/// Reads PNG/JPEG as 8-bit RGB -> [3, H, W] in [-1, 1]. Throws std::runtime_error.
Tensor read_image(const std::filesystem::path& path);
/// Writes a [3, H, W] image in [-1, 1] (values clamped) as 8-bit RGB.
void write_image(const std::filesystem::path& path, const Tensor& image);

/// Binary [H, W] map <-> single-channel 0/255 PNG.
Tensor read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Tensor& mask);

/// Rounds every entry to the nearest 8-bit level so disk round trips are exact.
void quantize_to_bytes(Tensor& image);

bool has_image_extension(const std::filesystem::path& path);

}  // namespace rsit::io

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hitl::service {

/// Standard base64 with padding.
std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws rejected_input on invalid input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// 8-bit grayscale PNG, rows top to bottom.
std::vector<std::uint8_t> encode_png_gray(std::span<const std::uint8_t> pixels, std::size_t width,
                                          std::size_t height);

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;
};

/// Decoder for the files encode_png_gray writes (8-bit gray, unfiltered or
/// any standard filter); used to check served slices.
GrayImage decode_png_gray(std::span<const std::uint8_t> png);

/// Display window: clamp to [-200, 250] HU and map linearly onto [0, 255].
std::uint8_t window_hu(double hu);

} // namespace hitl::service

#pragma once

#include "hitl/core/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace hitl {

/// Run-length codec for label maps. The stream is a sequence of 5-byte
/// records: one value byte followed by a little-endian uint32 run length.
/// Runs are maximal, so no two consecutive records share a value.
namespace rle {

inline constexpr std::size_t kRecordBytes = 5;

std::vector<std::uint8_t> encode(std::span<const Label> labels);
std::vector<std::uint8_t> encode(const LabelMap& map);

/// Decodes a stream that must cover exactly `voxel_count` labels. Throws
/// malformed_stream on truncation, a run-sum mismatch, a zero-length run or
/// a value outside {0,1,2}.
std::vector<Label> decode_labels(std::span<const std::uint8_t> bytes, std::size_t voxel_count);
LabelMap decode(std::span<const std::uint8_t> bytes, const Dims& dims);

} // namespace rle
} // namespace hitl

#pragma once

#include "hitl/core/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace hitl::io {

// ".vol": "HITLVOL1", uint32-LE header length, JSON {dims, spacing},
//         then float32-LE voxels, z-major.
// ".lbl": "HITLLBL1", uint32-LE header length, JSON {dims}, then the RLE stream.

std::vector<std::uint8_t> serialize_volume(const Volume& volume);
Volume parse_volume(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_label_map(const LabelMap& map);
LabelMap parse_label_map(std::span<const std::uint8_t> bytes);

void write_volume(const std::filesystem::path& path, const Volume& volume);
Volume read_volume(const std::filesystem::path& path);

void write_label_map(const std::filesystem::path& path, const LabelMap& map);
LabelMap read_label_map(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes through a sibling temp file and renames, so readers never observe
/// a partially written file.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

} // namespace hitl::io

#include "hitl/core/rle.hpp"

#include "hitl/core/error.hpp"

#include <limits>

namespace hitl::rle {

namespace {

void put_record(std::vector<std::uint8_t>& out, Label value, std::uint32_t run) {
    out.push_back(value);
    out.push_back(static_cast<std::uint8_t>(run & 0xFFu));
    out.push_back(static_cast<std::uint8_t>((run >> 8) & 0xFFu));
    out.push_back(static_cast<std::uint8_t>((run >> 16) & 0xFFu));
    out.push_back(static_cast<std::uint8_t>((run >> 24) & 0xFFu));
}

} // namespace

std::vector<std::uint8_t> encode(std::span<const Label> labels) {
    std::vector<std::uint8_t> out;
    std::size_t i = 0;
    while (i < labels.size()) {
        const Label value = labels[i];
        std::size_t j = i + 1;
        while (j < labels.size() && labels[j] == value) ++j;
        const std::size_t run = j - i;
        if (run > std::numeric_limits<std::uint32_t>::max()) {
            throw Error(ErrorCode::rejected_input, "rle: run exceeds uint32 range");
        }
        put_record(out, value, static_cast<std::uint32_t>(run));
        i = j;
    }
    return out;
}

std::vector<std::uint8_t> encode(const LabelMap& map) { return encode(map.labels()); }

std::vector<Label> decode_labels(std::span<const std::uint8_t> bytes, std::size_t voxel_count) {
    if (bytes.size() % kRecordBytes != 0) {
        throw Error(ErrorCode::malformed_stream,
                    "rle: truncated stream (" + std::to_string(bytes.size()) + " bytes)");
    }
    std::vector<Label> labels;
    labels.reserve(voxel_count);
    for (std::size_t off = 0; off < bytes.size(); off += kRecordBytes) {
        const Label value = bytes[off];
        const std::uint32_t run = std::uint32_t(bytes[off + 1]) | (std::uint32_t(bytes[off + 2]) << 8) |
                                  (std::uint32_t(bytes[off + 3]) << 16) |
                                  (std::uint32_t(bytes[off + 4]) << 24);
        if (value >= kNumClasses) {
            throw Error(ErrorCode::malformed_stream,
                        "rle: label value " + std::to_string(int(value)) + " outside {0,1,2}");
        }
        if (run == 0) {
            throw Error(ErrorCode::malformed_stream, "rle: zero-length run");
        }
        if (labels.size() + run > voxel_count) {
            throw Error(ErrorCode::malformed_stream, "rle: runs exceed voxel count " +
                                                         std::to_string(voxel_count));
        }
        labels.insert(labels.end(), run, value);
    }
    if (labels.size() != voxel_count) {
        throw Error(ErrorCode::malformed_stream, "rle: runs sum to " + std::to_string(labels.size()) +
                                                     ", expected " + std::to_string(voxel_count));
    }
    return labels;
}

LabelMap decode(std::span<const std::uint8_t> bytes, const Dims& dims) {
    if (!dims.valid()) {
        throw Error(ErrorCode::malformed_stream, "rle: invalid dims " + to_string(dims));
    }
    return LabelMap(dims, decode_labels(bytes, dims.voxel_count()));
}

} // namespace hitl::rle

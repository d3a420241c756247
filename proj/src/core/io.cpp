#include "hitl/core/io.hpp"

#include "hitl/core/error.hpp"
#include "hitl/core/rle.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <string_view>

namespace hitl::io {

namespace {

constexpr std::string_view kVolumeMagic = "HITLVOL1";
constexpr std::string_view kLabelMagic = "HITLLBL1";

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xFFu));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
    return std::uint32_t(b[off]) | (std::uint32_t(b[off + 1]) << 8) |
           (std::uint32_t(b[off + 2]) << 16) | (std::uint32_t(b[off + 3]) << 24);
}

std::vector<std::uint8_t> with_header(std::string_view magic, const nlohmann::json& header) {
    const std::string text = header.dump();
    std::vector<std::uint8_t> out(magic.begin(), magic.end());
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    return out;
}

/// Returns the parsed header and the offset of the payload.
std::pair<nlohmann::json, std::size_t> split_header(std::span<const std::uint8_t> bytes,
                                                    std::string_view magic) {
    if (bytes.size() < magic.size() + 4 ||
        std::memcmp(bytes.data(), magic.data(), magic.size()) != 0) {
        throw Error(ErrorCode::malformed_stream, "bad magic, expected " + std::string(magic));
    }
    const std::uint32_t len = get_u32(bytes, magic.size());
    const std::size_t start = magic.size() + 4;
    if (bytes.size() < start + len) {
        throw Error(ErrorCode::malformed_stream, "truncated header");
    }
    nlohmann::json header = nlohmann::json::parse(bytes.begin() + start, bytes.begin() + start + len,
                                                  nullptr, false);
    if (header.is_discarded() || !header.is_object()) {
        throw Error(ErrorCode::malformed_stream, "header is not a JSON object");
    }
    return {std::move(header), start + len};
}

Dims dims_from(const nlohmann::json& header) {
    const auto it = header.find("dims");
    if (it == header.end() || !it->is_array() || it->size() != 3) {
        throw Error(ErrorCode::malformed_stream, "header.dims must be [d,h,w]");
    }
    for (const auto& v : *it) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() > 0)) {
            throw Error(ErrorCode::malformed_stream, "header.dims must be positive integers");
        }
    }
    Dims dims{(*it)[0].get<std::size_t>(), (*it)[1].get<std::size_t>(), (*it)[2].get<std::size_t>()};
    if (!dims.valid()) throw Error(ErrorCode::malformed_stream, "header.dims must be >= 1");
    return dims;
}

} // namespace

std::vector<std::uint8_t> serialize_volume(const Volume& volume) {
    const Dims& d = volume.dims();
    const Spacing& s = volume.spacing();
    nlohmann::json header = {{"dims", {d.depth, d.height, d.width}}, {"spacing", {s.z, s.y, s.x}}};
    auto out = with_header(kVolumeMagic, header);
    out.reserve(out.size() + 4 * d.voxel_count());
    for (double v : volume.voxels()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return out;
}

Volume parse_volume(std::span<const std::uint8_t> bytes) {
    auto [header, off] = split_header(bytes, kVolumeMagic);
    const Dims dims = dims_from(header);
    const auto sp = header.find("spacing");
    if (sp == header.end() || !sp->is_array() || sp->size() != 3) {
        throw Error(ErrorCode::malformed_stream, "header.spacing must be [sz,sy,sx]");
    }
    const Spacing spacing{(*sp)[0].get<double>(), (*sp)[1].get<double>(), (*sp)[2].get<double>()};
    if (bytes.size() - off != 4 * dims.voxel_count()) {
        throw Error(ErrorCode::malformed_stream, "voxel payload size does not match dims");
    }
    std::vector<double> voxels(dims.voxel_count());
    for (std::size_t i = 0; i < voxels.size(); ++i) {
        voxels[i] = std::bit_cast<float>(get_u32(bytes, off + 4 * i));
    }
    try {
        return Volume(dims, spacing, std::move(voxels));
    } catch (const Error& e) {
        throw Error(ErrorCode::malformed_stream, e.what());
    }
}

std::vector<std::uint8_t> serialize_label_map(const LabelMap& map) {
    const Dims& d = map.dims();
    auto out = with_header(kLabelMagic, nlohmann::json{{"dims", {d.depth, d.height, d.width}}});
    const auto payload = rle::encode(map);
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

LabelMap parse_label_map(std::span<const std::uint8_t> bytes) {
    auto [header, off] = split_header(bytes, kLabelMagic);
    return rle::decode(bytes.subspan(off), dims_from(header));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::not_found, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::io, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorCode::io, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string read_text(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

void write_volume(const std::filesystem::path& path, const Volume& volume) {
    write_file(path, serialize_volume(volume));
}

Volume read_volume(const std::filesystem::path& path) { return parse_volume(read_file(path)); }

void write_label_map(const std::filesystem::path& path, const LabelMap& map) {
    write_file(path, serialize_label_map(map));
}

LabelMap read_label_map(const std::filesystem::path& path) {
    return parse_label_map(read_file(path));
}

} // namespace hitl::io

#include "hitl/service/codec.hpp"

#include "hitl/core/error.hpp"
#include "hitl/core/preprocess.hpp"

#include <sodium.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace hitl::service {

namespace {

void ensure_sodium() {
    static const int ready = sodium_init();
    if (ready < 0) throw Error(ErrorCode::io, "libsodium failed to initialise");
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(std::uint8_t(v >> s));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return std::uint32_t(b[at]) << 24 | std::uint32_t(b[at + 1]) << 16 | std::uint32_t(b[at + 2]) << 8 | b[at + 3];
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type, std::span<const std::uint8_t> data) {
    put_u32(out, std::uint32_t(data.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc = crc32(0L, out.data() + start, uInt(out.size() - start));
    put_u32(out, std::uint32_t(crc));
}

constexpr std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

} // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    ensure_sodium();
    const std::size_t len = sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
    std::string out(len, '\0');
    sodium_bin2base64(out.data(), len, bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
    out.resize(len - 1); // drop the terminator
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    ensure_sodium();
    std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
    std::size_t len = 0;
    const char* end = nullptr;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, &end,
                          sodium_base64_VARIANT_ORIGINAL) != 0 ||
        end != text.data() + text.size()) {
        throw Error(ErrorCode::rejected_input, "invalid base64 payload");
    }
    out.resize(len);
    return out;
}

std::vector<std::uint8_t> encode_png_gray(std::span<const std::uint8_t> pixels, std::size_t width,
                                          std::size_t height) {
    if (pixels.size() != width * height || width == 0 || height == 0) {
        throw Error(ErrorCode::rejected_input, "png: pixel count does not match size");
    }
    std::vector<std::uint8_t> raw;
    raw.reserve(height * (width + 1));
    for (std::size_t y = 0; y < height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), pixels.begin() + std::ptrdiff_t(y * width), pixels.begin() + std::ptrdiff_t((y + 1) * width));
    }
    uLongf zlen = compressBound(uLong(raw.size()));
    std::vector<std::uint8_t> z(zlen);
    if (compress2(z.data(), &zlen, raw.data(), uLong(raw.size()), Z_DEFAULT_COMPRESSION) != Z_OK) {
        throw Error(ErrorCode::io, "png: deflate failed");
    }
    z.resize(zlen);

    std::vector<std::uint8_t> out(std::begin(kSignature), std::end(kSignature));
    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, std::uint32_t(width));
    put_u32(ihdr, std::uint32_t(height));
    ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0}); // 8-bit gray, deflate, adaptive filters, no interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", z);
    put_chunk(out, "IEND", {});
    return out;
}

GrayImage decode_png_gray(std::span<const std::uint8_t> png) {
    if (png.size() < 8 || !std::equal(std::begin(kSignature), std::end(kSignature), png.begin())) {
        throw Error(ErrorCode::malformed_stream, "png: bad signature");
    }
    GrayImage img;
    std::vector<std::uint8_t> z;
    for (std::size_t at = 8; at + 12 <= png.size();) {
        const std::uint32_t len = get_u32(png, at);
        if (at + 12 + len > png.size()) throw Error(ErrorCode::malformed_stream, "png: truncated chunk");
        const std::string type(reinterpret_cast<const char*>(png.data() + at + 4), 4);
        const auto data = png.subspan(at + 8, len);
        if (type == "IHDR") {
            img.width = get_u32(data, 0);
            img.height = get_u32(data, 4);
            if (data[8] != 8 || data[9] != 0 || data[12] != 0) {
                throw Error(ErrorCode::malformed_stream, "png: only 8-bit gray non-interlaced is supported");
            }
        } else if (type == "IDAT") {
            z.insert(z.end(), data.begin(), data.end());
        }
        at += 12 + len;
    }
    const std::size_t stride = img.width + 1;
    std::vector<std::uint8_t> raw(stride * img.height);
    uLongf rlen = uLongf(raw.size());
    if (uncompress(raw.data(), &rlen, z.data(), uLong(z.size())) != Z_OK || rlen != raw.size()) {
        throw Error(ErrorCode::malformed_stream, "png: inflate failed");
    }
    img.pixels.assign(img.width * img.height, 0);
    for (std::size_t y = 0; y < img.height; ++y) {
        const std::uint8_t filter = raw[y * stride];
        for (std::size_t x = 0; x < img.width; ++x) {
            const int a = x ? img.pixels[y * img.width + x - 1] : 0;
            const int b = y ? img.pixels[(y - 1) * img.width + x] : 0;
            const int c = x && y ? img.pixels[(y - 1) * img.width + x - 1] : 0;
            int pred = 0;
            switch (filter) {
            case 0: pred = 0; break;
            case 1: pred = a; break;
            case 2: pred = b; break;
            case 3: pred = (a + b) / 2; break;
            case 4: {
                const int p = a + b - c, pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
                pred = pa <= pb && pa <= pc ? a : pb <= pc ? b : c;
                break;
            }
            default: throw Error(ErrorCode::malformed_stream, "png: unknown filter");
            }
            img.pixels[y * img.width + x] = std::uint8_t(raw[y * stride + 1 + x] + pred);
        }
    }
    return img;
}

std::uint8_t window_hu(double hu) {
    const double lo = kClampLow, hi = kClampHigh;
    const double t = (std::clamp(hu, lo, hi) - lo) / (hi - lo);
    return std::uint8_t(std::lround(t * 255.0));
}

} // namespace hitl::service

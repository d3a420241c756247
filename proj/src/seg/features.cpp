#include "hitl/seg/features.hpp"

#include "hitl/core/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace hitl::seg {

namespace {

constexpr std::array<std::pair<FeatureKind, std::string_view>, 8> kNames = {{
    {FeatureKind::raw, "raw"},
    {FeatureKind::smooth_r1, "smooth_r1"},
    {FeatureKind::smooth_r2, "smooth_r2"},
    {FeatureKind::gradient_magnitude, "gradient_magnitude"},
    {FeatureKind::coord_z, "coord_z"},
    {FeatureKind::coord_y, "coord_y"},
    {FeatureKind::coord_x, "coord_x"},
    {FeatureKind::bias, "bias"},
}};

std::vector<double> box_mean(std::span<const double> in, const Dims& dims, int radius) {
    const std::array<std::size_t, 3> n = {dims.depth, dims.height, dims.width};
    const std::array<std::size_t, 3> stride = {dims.height * dims.width, dims.width, 1};
    std::vector<double> cur(in.begin(), in.end());
    std::vector<double> next(cur.size());
    const double scale = 1.0 / (2 * radius + 1);
    for (int axis = 0; axis < 3; ++axis) {
        const long len = static_cast<long>(n[axis]);
        for (std::size_t i = 0; i < cur.size(); ++i) {
            const long pos = static_cast<long>((i / stride[axis]) % n[axis]);
            const std::size_t base = i - static_cast<std::size_t>(pos) * stride[axis];
            double acc = 0.0;
            for (long k = -radius; k <= radius; ++k) {
                acc += cur[base + static_cast<std::size_t>(std::clamp(pos + k, 0L, len - 1)) * stride[axis]];
            }
            next[i] = acc * scale;
        }
        cur.swap(next);
    }
    return cur;
}

double coordinate(std::size_t i, std::size_t n) {
    return n <= 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1);
}

} // namespace

std::string_view to_string(FeatureKind kind) {
    for (const auto& [k, name] : kNames)
        if (k == kind) return name;
    return "unknown";
}

FeatureKind feature_kind_from_string(std::string_view text) {
    for (const auto& [k, name] : kNames)
        if (name == text) return k;
    throw Error(ErrorCode::rejected_input, "unknown feature '" + std::string(text) + "'");
}

FeatureConfig FeatureConfig::standard() {
    FeatureConfig config;
    for (const auto& [k, name] : kNames) config.features.push_back(k);
    return config;
}

FeatureVolume::FeatureVolume(const Volume& preprocessed) : dims_(preprocessed.dims()) {
    const auto v = preprocessed.voxels();
    const auto to_float = [](const std::vector<double>& d) {
        return std::vector<float>(d.begin(), d.end());
    };
    raw_.assign(v.begin(), v.end());
    smooth1_ = to_float(box_mean(v, dims_, 1));
    smooth2_ = to_float(box_mean(v, dims_, 2));

    const Spacing& sp = preprocessed.spacing();
    const std::array<std::size_t, 3> n = {dims_.depth, dims_.height, dims_.width};
    const std::array<std::size_t, 3> stride = {dims_.height * dims_.width, dims_.width, 1};
    const std::array<double, 3> spacing = {sp.z, sp.y, sp.x};
    gradient_.assign(v.size(), 0.0f);
    for (std::size_t i = 0; i < v.size(); ++i) {
        double sq = 0.0;
        for (int a = 0; a < 3; ++a) {
            const std::size_t pos = (i / stride[a]) % n[a];
            const std::size_t lo = pos > 0 ? pos - 1 : pos;
            const std::size_t hi = pos + 1 < n[a] ? pos + 1 : pos;
            if (hi == lo) continue;
            const double diff = v[i + (hi - pos) * stride[a]] - v[i - (pos - lo) * stride[a]];
            const double g = diff / (static_cast<double>(hi - lo) * spacing[a]);
            sq += g * g;
        }
        gradient_[i] = static_cast<float>(std::sqrt(sq));
    }
}

void FeatureVolume::fill(const FeatureConfig& config, std::size_t index, std::span<double> out) const {
    const std::size_t plane = dims_.height * dims_.width;
    for (std::size_t f = 0; f < config.features.size(); ++f) {
        switch (config.features[f]) {
        case FeatureKind::raw: out[f] = raw_[index]; break;
        case FeatureKind::smooth_r1: out[f] = smooth1_[index]; break;
        case FeatureKind::smooth_r2: out[f] = smooth2_[index]; break;
        case FeatureKind::gradient_magnitude: out[f] = gradient_[index]; break;
        case FeatureKind::coord_z: out[f] = coordinate(index / plane, dims_.depth); break;
        case FeatureKind::coord_y: out[f] = coordinate((index / dims_.width) % dims_.height, dims_.height); break;
        case FeatureKind::coord_x: out[f] = coordinate(index % dims_.width, dims_.width); break;
        case FeatureKind::bias: out[f] = 1.0; break;
        }
    }
}

FeatureMatrix extract_features(const Volume& preprocessed, const FeatureConfig& config) {
    const FeatureVolume planes(preprocessed);
    FeatureMatrix m{preprocessed.dims().voxel_count(), config.count(), {}};
    m.values.resize(m.rows * m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        planes.fill(config, i, std::span<double>(m.values).subspan(i * m.cols, m.cols));
    }
    return m;
}

} // namespace hitl::seg

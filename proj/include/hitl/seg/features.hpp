#pragma once

#include "hitl/core/types.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hitl::seg {

enum class FeatureKind {
    raw,
    smooth_r1, // edge-clamped 3x3x3 box mean
    smooth_r2, // edge-clamped 5x5x5 box mean
    gradient_magnitude,
    coord_z,
    coord_y,
    coord_x,
    bias,
};

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view text);

struct FeatureConfig {
    std::string name = "local-intensity";
    int version = 1;
    std::vector<FeatureKind> features;

    std::size_t count() const { return features.size(); }

    /// The eight-feature default set, in canonical order.
    static FeatureConfig standard();

    friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// Per-voxel feature planes of one preprocessed volume. Intensity-derived
/// planes are computed once; coordinates and bias are generated on demand.
class FeatureVolume {
  public:
    explicit FeatureVolume(const Volume& preprocessed);

    const Dims& dims() const { return dims_; }

    /// Writes the configured features of voxel `index` into `out`, which
    /// must hold config.count() values.
    void fill(const FeatureConfig& config, std::size_t index, std::span<double> out) const;

  private:
    Dims dims_;
    std::vector<float> raw_;
    std::vector<float> smooth1_;
    std::vector<float> smooth2_;
    std::vector<float> gradient_;
};

/// Row-major voxel x feature matrix.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Feature vectors for every voxel, z-major. Expects a preprocessed volume.
FeatureMatrix extract_features(const Volume& preprocessed,
                               const FeatureConfig& config = FeatureConfig::standard());

} // namespace hitl::seg

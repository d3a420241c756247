#include "hitl/synth/generator.hpp"

#include "hitl/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace hitl::synth {

namespace {

struct Ellipsoid {
    std::array<double, 3> center{}; // z, y, x in voxel coordinates
    std::array<double, 3> radius{};

    bool contains(std::size_t z, std::size_t y, std::size_t x) const {
        const double dz = (double(z) - center[0]) / radius[0];
        const double dy = (double(y) - center[1]) / radius[1];
        const double dx = (double(x) - center[2]) / radius[2];
        return dz * dz + dy * dy + dx * dx <= 1.0;
    }

    /// Bounding boxes separated by at least `gap` voxels along some axis.
    bool separated_from(const Ellipsoid& other, double gap) const {
        for (int a = 0; a < 3; ++a) {
            if (std::abs(center[a] - other.center[a]) >= radius[a] + other.radius[a] + gap) return true;
        }
        return false;
    }
};

std::array<double, 3> dims_array(const Dims& d) {
    return {double(d.depth), double(d.height), double(d.width)};
}

Ellipsoid draw_ellipsoid(std::mt19937_64& rng, const std::array<double, 3>& extent, double lo,
                         double hi) {
    Ellipsoid e;
    for (int a = 0; a < 3; ++a) {
        e.radius[a] = std::uniform_real_distribution<double>(lo, hi)(rng) * extent[a];
        const double min_c = e.radius[a] - 0.5;
        const double max_c = extent[a] - 0.5 - e.radius[a];
        e.center[a] = std::uniform_real_distribution<double>(min_c, std::max(min_c, max_c))(rng);
    }
    return e;
}

/// Separable Gaussian blur in voxel units with edge clamping.
void gaussian_blur(std::vector<double>& field, const Dims& dims, double sigma) {
    if (sigma <= 0.0) return;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double norm = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
        norm += kernel[k + radius];
    }
    for (double& k : kernel) k /= norm;

    const std::array<std::size_t, 3> n = {dims.depth, dims.height, dims.width};
    const std::array<std::size_t, 3> stride = {dims.height * dims.width, dims.width, 1};
    std::vector<double> tmp(field.size());
    for (int axis = 0; axis < 3; ++axis) {
        const long len = static_cast<long>(n[axis]);
        for (std::size_t i = 0; i < field.size(); ++i) {
            const long pos = static_cast<long>((i / stride[axis]) % n[axis]);
            const std::size_t base = i - static_cast<std::size_t>(pos) * stride[axis];
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const long p = std::clamp(pos + k, 0L, len - 1);
                acc += kernel[k + radius] * field[base + static_cast<std::size_t>(p) * stride[axis]];
            }
            tmp[i] = acc;
        }
        field.swap(tmp);
    }
}

std::uint64_t role_tag(Role role) {
    switch (role) {
    case Role::seed: return 0x5eedull;
    case Role::target: return 0x7a79ull;
    case Role::test: return 0x7e57ull;
    }
    return 0;
}

std::string make_id(char prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c-%03zu", prefix, i);
    return buf;
}

} // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

void DomainSpec::validate() const {
    if (!dims.valid()) throw Error(ErrorCode::rejected_input, "domain dims must be >= 1");
    if (!spacing.valid()) throw Error(ErrorCode::rejected_input, "domain spacing must be > 0");
    if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::rejected_input, "noise_sigma must be >= 0");
    if (!(contrast_scale > 0.0)) throw Error(ErrorCode::rejected_input, "contrast_scale must be > 0");
    if (!(organ_scale_min > 0.0 && organ_scale_min <= organ_scale_max && organ_scale_max <= 0.5)) {
        throw Error(ErrorCode::rejected_input, "organ_scale_range must lie within (0, 0.5]");
    }
}

void DifficultyKnob::validate() const {
    if (!(boundary_blur_sigma >= 0.0)) {
        throw Error(ErrorCode::rejected_input, "boundary_blur_sigma must be >= 0");
    }
    if (!(lesion_probability >= 0.0 && lesion_probability <= 1.0)) {
        throw Error(ErrorCode::rejected_input, "lesion_probability must lie in [0,1]");
    }
}

ShiftPreset shift_preset_from_string(std::string_view text) {
    if (text == "mild") return ShiftPreset::mild;
    if (text == "default" || text == "standard") return ShiftPreset::standard;
    if (text == "severe") return ShiftPreset::severe;
    throw Error(ErrorCode::rejected_input, "unknown shift preset '" + std::string(text) + "'");
}

std::string_view to_string(ShiftPreset preset) {
    switch (preset) {
    case ShiftPreset::mild: return "mild";
    case ShiftPreset::standard: return "default";
    case ShiftPreset::severe: return "severe";
    }
    return "default";
}

DomainSpec default_seed_spec() { return DomainSpec{}; }

DomainSpec target_spec_for(ShiftPreset preset) {
    DomainSpec spec = default_seed_spec();
    spec.spacing = {5.0, 0.8, 0.8};
    switch (preset) {
    case ShiftPreset::mild:
        spec.intensity_bias = 15.0;
        spec.contrast_scale = 0.85;
        spec.noise_sigma *= 2.0;
        break;
    case ShiftPreset::standard:
        spec.intensity_bias = 30.0;
        spec.contrast_scale = 0.7;
        spec.noise_sigma *= 3.0;
        break;
    case ShiftPreset::severe:
        spec.intensity_bias = 60.0;
        spec.contrast_scale = 0.55;
        spec.noise_sigma *= 5.0;
        break;
    }
    return spec;
}

Sample generate_sample(const DomainSpec& spec, const DifficultyKnob& knob, std::uint64_t index,
                       std::string id) {
    spec.validate();
    knob.validate();
    const Dims& dims = spec.dims;
    const auto extent = dims_array(dims);

    const double mid = 0.5 * (spec.organ_scale_min + spec.organ_scale_max);
    for (int a = 0; a < 3; ++a) {
        if (spec.organ_scale_min * extent[a] < 1.0) {
            throw Error(ErrorCode::generation,
                        "dims " + to_string(dims) + " too small for the minimum organ radius");
        }
    }
    bool fits = false;
    for (int a = 0; a < 3; ++a) {
        fits = fits || 2.0 * (mid + spec.organ_scale_min) * extent[a] + 1.0 <= extent[a];
    }
    if (!fits) {
        throw Error(ErrorCode::generation, "dims " + to_string(dims) + " cannot fit both organs");
    }

    std::mt19937_64 rng(mix_seed(spec.rng_seed, index));

    // Organ-A radii come from the upper half of the scale range and organ-B
    // from the lower half, so A is the larger organ in expectation.
    Ellipsoid organ_a, organ_b;
    bool placed = false;
    for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
        organ_a = draw_ellipsoid(rng, extent, mid, spec.organ_scale_max);
        organ_b = draw_ellipsoid(rng, extent, spec.organ_scale_min, mid);
        placed = organ_a.separated_from(organ_b, 1.0);
    }
    if (!placed) {
        throw Error(ErrorCode::generation, "could not place disjoint organs in " + to_string(dims));
    }

    std::vector<Label> truth(dims.voxel_count(), kBackground);
    for (std::size_t z = 0; z < dims.depth; ++z)
        for (std::size_t y = 0; y < dims.height; ++y)
            for (std::size_t x = 0; x < dims.width; ++x) {
                if (organ_a.contains(z, y, x)) truth[dims.index(z, y, x)] = kOrganA;
                else if (organ_b.contains(z, y, x)) truth[dims.index(z, y, x)] = kOrganB;
            }

    const double bg = spec.organ_intensity[0];
    const std::array<double, 3> level = {
        bg + spec.intensity_bias,
        bg + spec.contrast_scale * (spec.organ_intensity[1] - bg) + spec.intensity_bias,
        bg + spec.contrast_scale * (spec.organ_intensity[2] - bg) + spec.intensity_bias,
    };
    std::vector<double> field(dims.voxel_count());
    for (std::size_t i = 0; i < field.size(); ++i) field[i] = level[truth[i]];

    // Confuser pockets: small organ-bright blobs in the background that stay
    // background in the ground truth.
    for (int slot = 0; slot < kConfuserSlots; ++slot) {
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const bool organ_b_like = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
        Ellipsoid pocket;
        for (int a = 0; a < 3; ++a) {
            pocket.radius[a] = std::uniform_real_distribution<double>(0.04, 0.07)(rng) * extent[a];
            pocket.radius[a] = std::max(pocket.radius[a], 1.0);
            pocket.center[a] = std::uniform_real_distribution<double>(0.0, extent[a] - 1.0)(rng);
        }
        if (u >= knob.lesion_probability) continue;
        if (!pocket.separated_from(organ_a, 1.0) || !pocket.separated_from(organ_b, 1.0)) continue;
        const double value = level[organ_b_like ? kOrganB : kOrganA];
        for (std::size_t z = 0; z < dims.depth; ++z)
            for (std::size_t y = 0; y < dims.height; ++y)
                for (std::size_t x = 0; x < dims.width; ++x)
                    if (pocket.contains(z, y, x)) field[dims.index(z, y, x)] = value;
    }

    gaussian_blur(field, dims, knob.boundary_blur_sigma);

    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> voxels(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        const double n = spec.noise_sigma > 0.0 ? spec.noise_sigma * noise(rng) : 0.0;
        // Rounded through float32 so that files reproduce in-memory cases exactly.
        voxels[i] = static_cast<double>(static_cast<float>(field[i] + n));
    }

    Sample sample;
    sample.id = id.empty() ? "sample-" + std::to_string(index) : std::move(id);
    sample.volume = Volume(dims, spec.spacing, std::move(voxels));
    sample.ground_truth = LabelMap(dims, std::move(truth));
    return sample;
}

DatasetBundle generate_datasets(const DomainSpec& seed_spec, const DomainSpec& target_spec,
                                const KnobDistribution& knobs, const Counts& counts,
                                std::uint64_t master_seed) {
    if (counts.seed_n == 0 || counts.target_n == 0 || counts.test_n == 0) {
        throw Error(ErrorCode::rejected_input, "dataset counts must each be >= 1");
    }
    DatasetBundle bundle;
    bundle.info = {seed_spec, target_spec, knobs, counts, master_seed, {}};

    auto fill = [&](Dataset& dataset, const DomainSpec& base, std::size_t n, char prefix) {
        DomainSpec spec = base;
        spec.rng_seed = mix_seed(master_seed, role_tag(dataset.role));
        for (std::size_t i = 0; i < n; ++i) {
            std::mt19937_64 knob_rng(mix_seed(spec.rng_seed, 0xd1ffull + i));
            const double t = std::uniform_real_distribution<double>(0.0, 1.0)(knob_rng);
            const DifficultyKnob knob{t * knobs.max_blur_sigma, t * knobs.max_lesion_probability};
            std::string id = make_id(prefix, i);
            bundle.info.samples.push_back({id, dataset.role, i, knob});
            dataset.samples.push_back(generate_sample(spec, knob, i, std::move(id)));
        }
    };
    fill(bundle.seed, seed_spec, counts.seed_n, 'S');
    fill(bundle.target, target_spec, counts.target_n, 'U');
    fill(bundle.test, target_spec, counts.test_n, 'T');
    return bundle;
}

DatasetBundle generate_default_datasets(const Counts& counts, std::uint64_t master_seed,
                                        ShiftPreset preset) {
    return generate_datasets(default_seed_spec(), target_spec_for(preset), KnobDistribution{},
                             counts, master_seed);
}

} // namespace hitl::synth

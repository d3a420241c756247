#pragma once

#include "hitl/core/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hitl::synth {

/// Acquisition domain for a family of synthetic CT-like cases.
struct DomainSpec {
    Dims dims{32, 64, 64};
    Spacing spacing{8.0, 1.5, 1.5};
    double intensity_bias = 0.0;  // HU added to every voxel
    double contrast_scale = 1.0;  // multiplier on organ-minus-background contrast
    double noise_sigma = 10.0;    // additive Gaussian noise, HU
    double organ_scale_min = 0.14; // fractional radii, per axis
    double organ_scale_max = 0.34;
    std::array<double, 3> organ_intensity{40.0, 120.0, -40.0}; // background, organ-A, organ-B
    std::uint64_t rng_seed = 0;

    /// Throws rejected_input when an invariant is violated.
    void validate() const;
};

/// Per-case difficulty: blurred organ boundaries and organ-bright pockets in
/// the background.
struct DifficultyKnob {
    double boundary_blur_sigma = 0.0; // voxels
    double lesion_probability = 0.0;  // chance per pocket slot

    void validate() const;
};

/// Each case draws a difficulty t ~ U(0,1) and scales both knob maxima by t,
/// so a dataset spans easy to hard.
struct KnobDistribution {
    double max_blur_sigma = 1.5;
    double max_lesion_probability = 0.7;
};

/// Number of pocket slots a case can fill when lesion_probability > 0.
inline constexpr int kConfuserSlots = 4;

struct Counts {
    std::size_t seed_n = 20;
    std::size_t target_n = 80;
    std::size_t test_n = 20;
};

enum class ShiftPreset { mild, standard, severe };

ShiftPreset shift_preset_from_string(std::string_view text);
std::string_view to_string(ShiftPreset preset);

/// Labelled public-like seed domain.
DomainSpec default_seed_spec();
/// Shifted clinical-like target domain for a preset; derived from the seed
/// spec with a bias offset, reduced contrast, more noise and thinner slices.
DomainSpec target_spec_for(ShiftPreset preset);

/// One case: an organ-A ellipsoid and a smaller organ-B ellipsoid at random
/// disjoint positions. Deterministic in (spec, knob, index). Throws
/// generation when the organs cannot be placed.
Sample generate_sample(const DomainSpec& spec, const DifficultyKnob& knob, std::uint64_t index,
                       std::string id = {});

struct SampleProvenance {
    std::string id;
    Role role = Role::seed;
    std::uint64_t index = 0;
    DifficultyKnob knob;
};

struct GenerationInfo {
    DomainSpec seed_spec;
    DomainSpec target_spec;
    KnobDistribution knobs;
    Counts counts;
    std::uint64_t master_seed = 0;
    std::vector<SampleProvenance> samples;
};

struct DatasetBundle {
    Dataset seed{Role::seed, {}};
    Dataset target{Role::target, {}};
    Dataset test{Role::test, {}};
    GenerationInfo info;
};

/// Seed cases use seed_spec; target and test cases use target_spec. Ids are
/// "S-000", "U-000", "T-000", ... Throws rejected_input on a zero count.
DatasetBundle generate_datasets(const DomainSpec& seed_spec, const DomainSpec& target_spec,
                                const KnobDistribution& knobs, const Counts& counts,
                                std::uint64_t master_seed);

/// Convenience: default seed spec and the preset target spec.
DatasetBundle generate_default_datasets(const Counts& counts, std::uint64_t master_seed,
                                        ShiftPreset preset = ShiftPreset::standard);

/// splitmix64 finaliser; used to derive independent per-case seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

} // namespace hitl::synth

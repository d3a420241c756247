#pragma once

#include "hitl/core/types.hpp"
#include "hitl/loop/config.hpp"
#include "hitl/loop/loop.hpp"
#include "hitl/synth/generator.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace hitl::test {

inline LabelMap random_labels(const Dims& dims, std::mt19937_64& rng, int max_label = 2) {
    std::uniform_int_distribution<int> pick(0, max_label);
    std::vector<Label> labels(dims.voxel_count());
    for (auto& l : labels) l = static_cast<Label>(pick(rng));
    return LabelMap(dims, std::move(labels));
}

/// Label map with long runs, closer to real masks than i.i.d. noise.
inline LabelMap blocky_labels(const Dims& dims, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, 2);
    std::geometric_distribution<std::size_t> run(0.05);
    std::vector<Label> labels(dims.voxel_count());
    std::size_t i = 0;
    while (i < labels.size()) {
        const auto l = static_cast<Label>(pick(rng));
        const std::size_t end = std::min(labels.size(), i + 1 + run(rng));
        for (; i < end; ++i) labels[i] = l;
    }
    return LabelMap(dims, std::move(labels));
}

/// Small shifted datasets so loop tests finish in seconds.
inline synth::DatasetBundle small_bundle(std::uint64_t seed, synth::Counts counts = {4, 12, 4}) {
    synth::DomainSpec source = synth::default_seed_spec();
    source.dims = {8, 24, 24};
    synth::DomainSpec target = synth::target_spec_for(synth::ShiftPreset::standard);
    target.dims = {10, 24, 24};
    return synth::generate_datasets(source, target, synth::KnobDistribution{}, counts, seed);
}

inline loop::RunConfig small_config(std::uint64_t seed = 0) {
    loop::RunConfig cfg = loop::RunConfig::defaults();
    cfg.rng_seed = seed;
    cfg.igniter.epochs = 4;
    cfg.sustainer.epochs = 3;
    cfg.schedule.budgets = {strategy::Budget::of_count(3), strategy::Budget::of_count(4), strategy::Budget::rest()};
    return cfg;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("hitl-test-" + name + "-" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace hitl::test

#pragma once

#include "hitl/annot/annotator.hpp"
#include "hitl/seg/segmenter.hpp"
#include "hitl/strategy/strategy.hpp"
#include "hitl/synth/generator.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hitl::loop {

enum class RetrainCorpus { annotated_target_only, annotated_target_plus_seed };
enum class TestPolicy { fixed_holdout, last_round_samples };

std::string_view to_string(RetrainCorpus corpus);
RetrainCorpus retrain_corpus_from_string(std::string_view text);
std::string_view to_string(TestPolicy policy);
TestPolicy test_policy_from_string(std::string_view text);

/// In-process dataset generation used when no dataset directory is given.
struct GenerateSpec {
    synth::Counts counts;
    std::uint64_t seed = 0;
    synth::ShiftPreset preset = synth::ShiftPreset::standard;

    friend bool operator==(const GenerateSpec&, const GenerateSpec&) = default;
};

struct RunConfig {
    std::filesystem::path data_dir;       // used when set
    std::optional<GenerateSpec> generate; // used when data_dir is empty
    seg::TrainConfig igniter = seg::TrainConfig::igniter_defaults();
    seg::TrainConfig sustainer = seg::TrainConfig::sustainer_defaults();
    annot::CostModel cost = annot::CostModel::calibrated_default();
    strategy::RoundSchedule schedule = strategy::RoundSchedule::standard();
    double margin_threshold = strategy::kDefaultMarginThreshold;
    RetrainCorpus retrain_corpus = RetrainCorpus::annotated_target_plus_seed;
    TestPolicy test_policy = TestPolicy::fixed_holdout;
    double oracle_noise_rate = 0.0;
    std::uint64_t rng_seed = 0;
    std::filesystem::path output_dir;

    /// Throws configuration on an invalid combination.
    void validate() const;
    /// Default desk-scale run: generated 20/80/20 data, default schedule.
    static RunConfig defaults();
};

/// Canonical JSON. `with_output` controls whether output_dir is included;
/// reports leave it out so that the same run written to two places is
/// byte-identical.
nlohmann::json to_json(const RunConfig& cfg, bool with_output = true);
/// Missing keys keep their defaults. Relative data/output paths resolve
/// against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies one "a.b.c=value" override. The value is parsed as JSON when it
/// parses, otherwise taken as a string. Numeric segments index arrays.
void apply_override(nlohmann::json& j, std::string_view assignment);

nlohmann::json to_json(const annot::CostModel& cost);
annot::CostModel cost_model_from_json(const nlohmann::json& j, const annot::CostModel& base);
nlohmann::json to_json(const strategy::RoundSchedule& schedule);
strategy::RoundSchedule schedule_from_json(const nlohmann::json& j, const strategy::RoundSchedule& base);

} // namespace hitl::loop

#pragma once

#include "hitl/core/types.hpp"
#include "hitl/seg/features.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hitl::seg {

/// Per-feature affine standardisation fit on training voxels. Zero-variance
/// features keep mean 0 and stddev 1 and are flagged.
struct Standardization {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<bool> flagged;

    friend bool operator==(const Standardization&, const Standardization&) = default;
};

struct TrainMeta {
    std::size_t epochs = 0;
    std::size_t batch_size = 0;
    double learning_rate = 0.0;
    double lr_decay = 1.0;
    std::size_t decay_interval_steps = 0;
    std::size_t steps = 0;
    std::uint64_t rng_seed = 0;
    double final_mean_loss = 0.0;
    std::vector<double> epoch_losses;

    friend bool operator==(const TrainMeta&, const TrainMeta&) = default;
};

/// Linear softmax classifier over standardised voxel features.
struct SegmenterModel {
    FeatureConfig feature_config;
    std::vector<double> weights; // feature_count x kNumClasses, row-major
    Standardization standardization;
    TrainMeta train_meta;

    std::size_t feature_count() const { return feature_config.count(); }
    double weight(std::size_t feature, std::size_t cls) const {
        return weights[feature * kNumClasses + cls];
    }

    /// All-zero weights with identity standardisation.
    static SegmenterModel zero(FeatureConfig config = FeatureConfig::standard());

    friend bool operator==(const SegmenterModel&, const SegmenterModel&) = default;
};

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 256;       // voxels per SGD step
    double learning_rate = 1e-2;
    double lr_decay = 1.0;               // multiplicative, applied every decay_interval_steps
    std::size_t decay_interval_steps = 500;
    double voxel_subsample_rate = 0.2;   // fraction of each volume drawn per epoch
    bool class_balance = true;
    std::uint64_t rng_seed = 0;

    void validate() const;

    /// Igniter role: slow decayed schedule on the seed set.
    static TrainConfig igniter_defaults();
    /// Sustainer role: retrained from scratch every round.
    static TrainConfig sustainer_defaults();
};

/// Where a training label came from; the loop records these so tests can
/// prove unrefined machine labels never enter a corpus.
enum class Provenance { seed_ground_truth, refined_annotation, other };

std::string_view to_string(Provenance provenance);

struct TrainingPair {
    const FeatureVolume* features = nullptr;
    const LabelMap* labels = nullptr;
    Provenance provenance = Provenance::other;
};

/// Mean softmax cross-entropy of a batch of standardised feature rows and its
/// gradient with respect to the weights. `gradient` must hold
/// feature_count * kNumClasses values and is overwritten.
double softmax_cross_entropy(std::span<const double> weights, std::size_t feature_count,
                             std::span<const double> rows, std::span<const Label> labels,
                             std::span<double> gradient);

/// Mini-batch SGD on the mean cross-entropy. With `init`, training starts
/// from its weights and keeps its standardisation; otherwise from zero with
/// standardisation fit on every voxel of the corpus. Deterministic in
/// cfg.rng_seed. Throws configuration for an empty corpus with epochs > 0
/// and divergence when the loss becomes non-finite.
SegmenterModel train(std::span<const TrainingPair> corpus, const TrainConfig& cfg,
                     const std::optional<SegmenterModel>& init = std::nullopt,
                     const FeatureConfig& features = FeatureConfig::standard());

struct LabeledVolume {
    const Volume* volume = nullptr; // raw intensities; preprocessed internally
    const LabelMap* labels = nullptr;
};

SegmenterModel train(std::span<const LabeledVolume> corpus, const TrainConfig& cfg,
                     const std::optional<SegmenterModel>& init = std::nullopt,
                     const FeatureConfig& features = FeatureConfig::standard());

struct Prediction {
    LabelMap labels;
    std::vector<double> probabilities; // voxel_count x kNumClasses, z-major
};

/// Per-voxel argmax of the softmax; ties resolve to the lowest class code.
Prediction predict(const SegmenterModel& model, const FeatureVolume& features);
/// Preprocesses `raw` first.
Prediction predict(const SegmenterModel& model, const Volume& raw);

} // namespace hitl::seg

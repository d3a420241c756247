#pragma once

#include "hitl/annot/annotator.hpp"
#include "hitl/core/metrics.hpp"
#include "hitl/loop/config.hpp"
#include "hitl/loop/journal.hpp"
#include "hitl/seg/features.hpp"
#include "hitl/seg/segmenter.hpp"
#include "hitl/synth/generator.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hitl::loop {

/// Datasets plus their preprocessed feature volumes, built once and shared
/// by every run over the same data.
struct PreparedData {
    synth::DatasetBundle bundle;
    std::vector<seg::FeatureVolume> seed_features;
    std::vector<seg::FeatureVolume> target_features;
    std::vector<seg::FeatureVolume> test_features;
};

/// Loads cfg.data_dir, or generates from cfg.generate.
synth::DatasetBundle load_data(const RunConfig& cfg);
PreparedData prepare(synth::DatasetBundle bundle);

struct BatchCase {
    std::string sample_id;
    std::shared_ptr<const LabelMap> prediction;
};

/// The expert side of a round. Implementations return one event per case in
/// batch order.
class Annotator {
  public:
    virtual ~Annotator() = default;
    virtual std::vector<annot::AnnotationEvent> annotate(int round, const std::vector<BatchCase>& batch) = 0;
    /// True when the annotator writes label files and annotation events
    /// itself as submissions arrive.
    virtual bool journals_events() const { return false; }
};

/// Journal payload of an annotation; the label lives at `label_path`.
nlohmann::json annotation_event_json(const annot::AnnotationEvent& ev, const std::string& label_path);

/// Simulated expert with access to the target ground truth.
class OracleAnnotator : public Annotator {
  public:
    OracleAnnotator(const Dataset& target, annot::CostModel cost, double noise_rate = 0.0,
                    std::uint64_t noise_seed = 0);
    std::vector<annot::AnnotationEvent> annotate(int round, const std::vector<BatchCase>& batch) override;

  private:
    const Dataset& target_;
    annot::CostModel cost_;
    double noise_rate_;
    std::uint64_t noise_seed_;
};

struct AnnotatedCase {
    std::string sample_id;
    double time_min = 0.0;

    friend bool operator==(const AnnotatedCase&, const AnnotatedCase&) = default;
};

struct RoundRecord {
    int round = 0;
    std::vector<AnnotatedCase> annotated;
    std::size_t cumulative_count = 0;
    double mean_time_min = 0.0;
    double total_time_min = 0.0;
    std::optional<seg::TrainMeta> train_meta; // absent when nothing was retrained
    DiceScore dice;
    double wall_clock_s = 0.0; // kept out of report.json

    friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct RunReport {
    nlohmann::json config; // snapshot without the output directory
    DiceScore baseline;
    std::vector<RoundRecord> rounds;
    double total_annotation_min = 0.0;
    DiceScore final_dice;
    double dice_gain = 0.0; // final minus baseline mean Dice
    std::optional<std::string> note;
    double igniter_wall_clock_s = 0.0;

    friend bool operator==(const RunReport&, const RunReport&) = default;
};

struct LoopOptions {
    Annotator* annotator = nullptr;                  // default: oracle over the target set
    Journal* journal = nullptr;                      // default: own journal in the output dir
    std::optional<seg::SegmenterModel> igniter;      // skips igniter training when set
    bool write_artifacts = true;                     // models, predictions, reports
    /// Sees every training corpus before training, with the round index
    /// (0 for the igniter).
    std::function<void(int, std::span<const seg::TrainingPair>)> on_corpus;
    /// Per-case oracle error stats of every annotated case, for calibration.
    std::function<void(int, const annot::AnnotationEvent&)> on_annotation;
};

/// Seeds used for training, derived from the run seed.
std::uint64_t igniter_seed(const RunConfig& cfg);
std::uint64_t sustainer_seed(const RunConfig& cfg, int round);

seg::SegmenterModel train_igniter(const RunConfig& cfg, const PreparedData& data);

/// Mean per-class Dice of `model` over a dataset.
DiceScore evaluate(const seg::SegmenterModel& model, std::span<const seg::FeatureVolume> features,
                   const Dataset& dataset);

RunReport run_loop(const RunConfig& cfg, const PreparedData& data, const LoopOptions& options = {});
RunReport run_loop(const RunConfig& cfg, const LoopOptions& options = {});

} // namespace hitl::loop

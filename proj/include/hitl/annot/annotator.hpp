#pragma once

#include "hitl/core/error.hpp"
#include "hitl/core/types.hpp"

#include <array>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hitl::annot {

/// Editing-time model: a fixed per-case overhead, a per-voxel brush term and
/// a per-region locate-and-fix term over the 26-connected error components.
struct CostModel {
    double t_base = 0.0;    // minutes per case
    double c_vox = 0.0;     // minutes per erroneous voxel
    double c_comp = 0.0;    // minutes per error component
    double t_scratch = 0.0; // minutes for a case with no usable prediction

    void validate() const;
    double minutes(std::size_t error_voxels, std::size_t error_components) const {
        return t_base + c_vox * double(error_voxels) + c_comp * double(error_components);
    }

    /// Values fitted by the least-squares calibration on the default
    /// synthetic data (see hitl/loop/calibration.hpp).
    static CostModel calibrated_default();

    friend bool operator==(const CostModel&, const CostModel&) = default;
};

/// Disagreement between a prediction and a reference label map.
struct ErrorStats {
    std::size_t error_voxels = 0;
    std::array<std::size_t, 2> fp_voxels{}; // per organ class 1, 2
    std::array<std::size_t, 2> fn_voxels{};
    std::size_t error_components = 0;

    friend bool operator==(const ErrorStats&, const ErrorStats&) = default;
};

/// Error mask is every voxel where the two maps disagree.
ErrorStats compare(const LabelMap& prediction, const LabelMap& reference);

enum class AnnotationMode { oracle, human };

std::string_view to_string(AnnotationMode mode);
AnnotationMode annotation_mode_from_string(std::string_view text);

struct AnnotationEvent {
    std::string sample_id;
    int round = 0;
    AnnotationMode mode = AnnotationMode::oracle;
    double time_min = 0.0;
    LabelMap label;
    ErrorStats error_stats;
};

struct OracleOptions {
    /// Probability of flipping each ground-truth boundary voxel to a
    /// neighbouring label. Zero returns the exact ground truth.
    double boundary_noise_rate = 0.0;
    std::uint64_t noise_seed = 0;
};

/// Simulated expert: returns the ground truth and charges the modelled
/// editing time of turning the prediction into it. Without a prediction the
/// from-scratch time applies and the error stats cover the organ supports.
/// Throws contract_violation when the sample carries no ground truth.
AnnotationEvent oracle_annotate(const Sample& sample, int round, const CostModel& cost,
                                const OracleOptions& options = {});

/// Oracle time without building an event (used for oracle difficulty).
double oracle_minutes(const LabelMap& prediction, const LabelMap& truth, const CostModel& cost);

/// Reasons a human submission is rejected; each maps to its own API error.
enum class Rejection { unknown_sample, not_pending, already_annotated, dims_mismatch, invalid_label, invalid_time };

std::string_view to_string(Rejection reason);

class IntakeError : public Error {
  public:
    IntakeError(Rejection reason, const std::string& message)
        : Error(reason == Rejection::unknown_sample ? ErrorCode::not_found
                : reason == Rejection::not_pending || reason == Rejection::already_annotated
                    ? ErrorCode::conflict
                    : ErrorCode::rejected_input,
                message),
          reason_(reason) {}

    Rejection reason() const noexcept { return reason_; }

  private:
    Rejection reason_;
};

struct PendingCase {
    std::string sample_id;
    std::shared_ptr<const LabelMap> prediction;
};

/// Thread-safe intake of human annotations for one run. A batch is opened
/// per round; submissions are first-writer-wins per sample.
class HumanIntake {
  public:
    using Listener = std::function<void(const AnnotationEvent&)>;

    /// `known` maps every sample id of the run to its dims.
    explicit HumanIntake(std::map<std::string, Dims, std::less<>> known);

    /// Invoked under the intake lock for every accepted annotation, so
    /// listeners observe submissions in acceptance order.
    void set_listener(Listener listener);

    void open_batch(int round, std::vector<PendingCase> cases);

    AnnotationEvent accept(std::string_view sample_id, const LabelMap& label, double elapsed_min);
    /// Decodes an RLE payload first; a bad stream is an invalid_label rejection.
    AnnotationEvent accept_encoded(std::string_view sample_id, const Dims& dims,
                                   std::span<const std::uint8_t> rle, double elapsed_min);

    std::vector<std::string> pending() const;
    bool is_pending(std::string_view sample_id) const;
    bool is_refined(std::string_view sample_id) const;
    std::optional<LabelMap> annotation(std::string_view sample_id) const;

    /// Blocks until the open batch is fully annotated; returns its events in
    /// batch order. Throws conflict if cancel() is called first.
    std::vector<AnnotationEvent> wait_batch();
    void cancel();

  private:
    mutable std::mutex mutex_;
    std::condition_variable done_;
    std::map<std::string, Dims, std::less<>> known_;
    std::map<std::string, LabelMap, std::less<>> refined_;
    std::vector<PendingCase> batch_;
    std::map<std::string, AnnotationEvent, std::less<>> received_;
    int round_ = 0;
    bool cancelled_ = false;
    Listener listener_;
};

} // namespace hitl::annot

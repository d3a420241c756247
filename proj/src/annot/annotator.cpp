#include "hitl/annot/annotator.hpp"

#include "hitl/annot/components.hpp"
#include "hitl/core/rle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hitl::annot {

void CostModel::validate() const {
    if (!(t_base >= 0.0 && c_vox >= 0.0 && c_comp >= 0.0 && t_scratch >= 0.0)) {
        throw Error(ErrorCode::rejected_input, "cost model parameters must be >= 0");
    }
    if (t_scratch < t_base) {
        throw Error(ErrorCode::rejected_input, "cost model t_scratch must be >= t_base");
    }
}

CostModel CostModel::calibrated_default() {
    return {0.6575, 4.086e-05, 0.007348, 13.86};
}

ErrorStats compare(const LabelMap& prediction, const LabelMap& reference) {
    if (prediction.dims() != reference.dims()) {
        throw Error(ErrorCode::rejected_input, "compare: dims " + to_string(prediction.dims()) +
                                                   " vs " + to_string(reference.dims()));
    }
    ErrorStats stats;
    const auto p = prediction.labels();
    const auto r = reference.labels();
    std::vector<std::uint8_t> mask(p.size(), 0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == r[i]) continue;
        mask[i] = 1;
        ++stats.error_voxels;
        if (p[i] != kBackground) ++stats.fp_voxels[p[i] - 1];
        if (r[i] != kBackground) ++stats.fn_voxels[r[i] - 1];
    }
    stats.error_components = count_components(mask, prediction.dims());
    return stats;
}

double oracle_minutes(const LabelMap& prediction, const LabelMap& truth, const CostModel& cost) {
    const ErrorStats s = compare(prediction, truth);
    return cost.minutes(s.error_voxels, s.error_components);
}

std::string_view to_string(AnnotationMode mode) {
    return mode == AnnotationMode::oracle ? "oracle" : "human";
}

AnnotationMode annotation_mode_from_string(std::string_view text) {
    if (text == "oracle") return AnnotationMode::oracle;
    if (text == "human") return AnnotationMode::human;
    throw Error(ErrorCode::rejected_input, "unknown annotation mode '" + std::string(text) + "'");
}

namespace {

LabelMap noisy_copy(const LabelMap& truth, const OracleOptions& options) {
    const Dims& dims = truth.dims();
    std::vector<Label> out(truth.labels().begin(), truth.labels().end());
    std::mt19937_64 rng(options.noise_seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const long h = long(dims.height), w = long(dims.width), d = long(dims.depth);
    constexpr std::array<std::array<long, 3>, 6> offsets = {
        {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};
    for (std::size_t i = 0; i < out.size(); ++i) {
        const long z = long(i) / (h * w), y = (long(i) / w) % h, x = long(i) % w;
        std::vector<Label> others;
        for (const auto& o : offsets) {
            const long nz = z + o[0], ny = y + o[1], nx = x + o[2];
            if (nz < 0 || ny < 0 || nx < 0 || nz >= d || ny >= h || nx >= w) continue;
            const Label l = truth.at(std::size_t(nz), std::size_t(ny), std::size_t(nx));
            if (l != truth[i]) others.push_back(l);
        }
        if (others.empty() || coin(rng) >= options.boundary_noise_rate) continue;
        out[i] = others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
    }
    return LabelMap(dims, std::move(out));
}

} // namespace

AnnotationEvent oracle_annotate(const Sample& sample, int round, const CostModel& cost,
                                const OracleOptions& options) {
    if (!sample.ground_truth) {
        throw Error(ErrorCode::contract_violation,
                    "oracle_annotate: sample " + sample.id + " has no ground truth");
    }
    const LabelMap& truth = *sample.ground_truth;
    AnnotationEvent event;
    event.sample_id = sample.id;
    event.round = round;
    event.mode = AnnotationMode::oracle;
    event.label = options.boundary_noise_rate > 0.0 ? noisy_copy(truth, options) : truth;
    if (sample.prediction) {
        event.error_stats = compare(*sample.prediction, truth);
        event.time_min = cost.minutes(event.error_stats.error_voxels, event.error_stats.error_components);
    } else {
        // Nothing to edit: the whole organ support is drawn by hand.
        event.error_stats = compare(LabelMap(truth.dims()), truth);
        event.time_min = cost.t_scratch;
    }
    return event;
}

std::string_view to_string(Rejection reason) {
    switch (reason) {
    case Rejection::unknown_sample: return "unknown_sample";
    case Rejection::not_pending: return "not_pending";
    case Rejection::already_annotated: return "already_annotated";
    case Rejection::dims_mismatch: return "dims_mismatch";
    case Rejection::invalid_label: return "invalid_label";
    case Rejection::invalid_time: return "invalid_time";
    }
    return "rejected";
}

HumanIntake::HumanIntake(std::map<std::string, Dims, std::less<>> known) : known_(std::move(known)) {}

void HumanIntake::set_listener(Listener listener) {
    std::lock_guard lock(mutex_);
    listener_ = std::move(listener);
}

void HumanIntake::open_batch(int round, std::vector<PendingCase> cases) {
    std::lock_guard lock(mutex_);
    for (const auto& c : cases) {
        if (!known_.contains(c.sample_id)) {
            throw IntakeError(Rejection::unknown_sample, "unknown sample " + c.sample_id);
        }
        if (refined_.contains(c.sample_id)) {
            throw IntakeError(Rejection::already_annotated, "sample " + c.sample_id + " already refined");
        }
    }
    round_ = round;
    batch_ = std::move(cases);
    received_.clear();
}

AnnotationEvent HumanIntake::accept(std::string_view sample_id, const LabelMap& label, double elapsed_min) {
    std::lock_guard lock(mutex_);
    const auto known = known_.find(sample_id);
    if (known == known_.end()) {
        throw IntakeError(Rejection::unknown_sample, "unknown sample " + std::string(sample_id));
    }
    if (refined_.contains(sample_id)) {
        throw IntakeError(Rejection::already_annotated,
                          "sample " + std::string(sample_id) + " was already annotated in this run");
    }
    const auto pending = std::find_if(batch_.begin(), batch_.end(),
                                      [&](const PendingCase& c) { return c.sample_id == sample_id; });
    if (pending == batch_.end()) {
        throw IntakeError(Rejection::not_pending, "sample " + std::string(sample_id) + " is not pending");
    }
    if (label.dims() != known->second) {
        throw IntakeError(Rejection::dims_mismatch, "label dims " + to_string(label.dims()) +
                                                        " do not match sample dims " +
                                                        to_string(known->second));
    }
    if (!(elapsed_min > 0.0) || !std::isfinite(elapsed_min)) {
        throw IntakeError(Rejection::invalid_time, "elapsed time must be a positive number of minutes");
    }
    AnnotationEvent event;
    event.sample_id = std::string(sample_id);
    event.round = round_;
    event.mode = AnnotationMode::human;
    event.time_min = elapsed_min;
    event.label = label;
    if (pending->prediction) event.error_stats = compare(*pending->prediction, label);

    refined_.emplace(event.sample_id, label);
    received_.emplace(event.sample_id, event);
    if (listener_) listener_(event);
    if (received_.size() == batch_.size()) done_.notify_all();
    return event;
}

AnnotationEvent HumanIntake::accept_encoded(std::string_view sample_id, const Dims& dims,
                                            std::span<const std::uint8_t> rle, double elapsed_min) {
    {
        std::lock_guard lock(mutex_);
        if (!known_.contains(sample_id)) {
            throw IntakeError(Rejection::unknown_sample, "unknown sample " + std::string(sample_id));
        }
    }
    LabelMap label;
    try {
        label = rle::decode(rle, dims);
    } catch (const Error& e) {
        throw IntakeError(Rejection::invalid_label, e.what());
    }
    return accept(sample_id, label, elapsed_min);
}

std::vector<std::string> HumanIntake::pending() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& c : batch_)
        if (!received_.contains(c.sample_id)) out.push_back(c.sample_id);
    return out;
}

bool HumanIntake::is_pending(std::string_view sample_id) const {
    std::lock_guard lock(mutex_);
    return std::any_of(batch_.begin(), batch_.end(), [&](const PendingCase& c) {
        return c.sample_id == sample_id && !received_.contains(c.sample_id);
    });
}

bool HumanIntake::is_refined(std::string_view sample_id) const {
    std::lock_guard lock(mutex_);
    return refined_.contains(sample_id);
}

std::optional<LabelMap> HumanIntake::annotation(std::string_view sample_id) const {
    std::lock_guard lock(mutex_);
    const auto it = refined_.find(sample_id);
    if (it == refined_.end()) return std::nullopt;
    return it->second;
}

std::vector<AnnotationEvent> HumanIntake::wait_batch() {
    std::unique_lock lock(mutex_);
    done_.wait(lock, [&] { return cancelled_ || received_.size() == batch_.size(); });
    if (cancelled_) throw Error(ErrorCode::conflict, "annotation intake cancelled");
    std::vector<AnnotationEvent> events;
    for (const auto& c : batch_) events.push_back(received_.at(c.sample_id));
    return events;
}

void HumanIntake::cancel() {
    std::lock_guard lock(mutex_);
    cancelled_ = true;
    done_.notify_all();
}

} // namespace hitl::annot

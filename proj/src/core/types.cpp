#include "hitl/core/types.hpp"

#include "hitl/core/error.hpp"

#include <algorithm>
#include <cmath>

namespace hitl {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::rejected_input: return "rejected_input";
    case ErrorCode::malformed_stream: return "malformed_stream";
    case ErrorCode::generation: return "generation";
    case ErrorCode::configuration: return "configuration";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::contract_violation: return "contract_violation";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::io: return "io";
    }
    return "unknown";
}

std::string to_string(const Dims& dims) {
    return std::to_string(dims.depth) + "x" + std::to_string(dims.height) + "x" +
           std::to_string(dims.width);
}

Volume::Volume(Dims dims, Spacing spacing, std::vector<double> voxels)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)) {
    if (!dims_.valid()) {
        throw Error(ErrorCode::rejected_input, "volume dims must be >= 1, got " + to_string(dims_));
    }
    if (!spacing_.valid()) {
        throw Error(ErrorCode::rejected_input, "volume spacing must be > 0");
    }
    if (voxels_.size() != dims_.voxel_count()) {
        throw Error(ErrorCode::rejected_input,
                    "volume has " + std::to_string(voxels_.size()) + " voxels, dims " +
                        to_string(dims_) + " need " + std::to_string(dims_.voxel_count()));
    }
    if (!std::all_of(voxels_.begin(), voxels_.end(), [](double v) { return std::isfinite(v); })) {
        throw Error(ErrorCode::rejected_input, "volume contains non-finite voxels");
    }
}

LabelMap::LabelMap(Dims dims) : dims_(dims), labels_(dims.voxel_count(), kBackground) {
    if (!dims_.valid()) {
        throw Error(ErrorCode::rejected_input, "label map dims must be >= 1");
    }
}

LabelMap::LabelMap(Dims dims, std::vector<Label> labels) : dims_(dims), labels_(std::move(labels)) {
    if (!dims_.valid()) {
        throw Error(ErrorCode::rejected_input, "label map dims must be >= 1");
    }
    if (labels_.size() != dims_.voxel_count()) {
        throw Error(ErrorCode::rejected_input,
                    "label map has " + std::to_string(labels_.size()) + " voxels, dims " +
                        to_string(dims_) + " need " + std::to_string(dims_.voxel_count()));
    }
    for (Label l : labels_) {
        if (l >= kNumClasses) {
            throw Error(ErrorCode::rejected_input,
                        "label code " + std::to_string(int(l)) + " outside {0,1,2}");
        }
    }
}

void LabelMap::set(std::size_t i, Label value) {
    if (value >= kNumClasses) {
        throw Error(ErrorCode::rejected_input, "label code outside {0,1,2}");
    }
    labels_.at(i) = value;
}

std::size_t LabelMap::count(Label value) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), value));
}

std::string_view to_string(SampleStatus status) {
    switch (status) {
    case SampleStatus::unlabelled: return "unlabelled";
    case SampleStatus::machine_labelled: return "machine_labelled";
    case SampleStatus::refined: return "refined";
    }
    return "unknown";
}

void validate(const Sample& sample) {
    const bool refined = sample.status == SampleStatus::refined;
    if (refined != sample.annotation.has_value() ||
        refined != sample.annotation_time_min.has_value()) {
        throw Error(ErrorCode::contract_violation,
                    "sample " + sample.id + ": refined status, annotation and time must agree");
    }
    if (sample.annotation_time_min && *sample.annotation_time_min < 0.0) {
        throw Error(ErrorCode::contract_violation, "sample " + sample.id + ": negative time");
    }
    const Dims& dims = sample.volume.dims();
    for (const auto* map : {&sample.prediction, &sample.annotation, &sample.ground_truth}) {
        if (map->has_value() && (*map)->dims() != dims) {
            throw Error(ErrorCode::contract_violation,
                        "sample " + sample.id + ": label dims differ from volume dims");
        }
    }
}

std::string_view to_string(Role role) {
    switch (role) {
    case Role::seed: return "seed";
    case Role::target: return "target";
    case Role::test: return "test";
    }
    return "unknown";
}

Role role_from_string(std::string_view text) {
    if (text == "seed") return Role::seed;
    if (text == "target") return Role::target;
    if (text == "test") return Role::test;
    throw Error(ErrorCode::rejected_input, "unknown dataset role '" + std::string(text) + "'");
}

} // namespace hitl

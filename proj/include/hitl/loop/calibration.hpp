#pragma once

#include "hitl/annot/annotator.hpp"
#include "hitl/loop/loop.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hitl::loop {

inline constexpr double kRound1TargetMin = 13.87;
inline constexpr double kFinalTargetMin = 1.51;

/// Error statistics of one annotated case and the minutes it should cost.
struct CostObservation {
    double error_voxels = 0.0;
    double error_components = 0.0;
    double target_min = 0.0;
    double weight = 1.0;
};

/// Weighted non-negative least squares for (t_base, c_vox, c_comp) by
/// exhaustive search over active sets; exact for three unknowns.
annot::CostModel fit_cost_model(std::span<const CostObservation> rows);

struct CalibrationResult {
    annot::CostModel cost;
    double round1_mean_min = 0.0; // mean fitted minutes over round-1 cases
    double final_mean_min = 0.0;  // same over final-round cases
    std::size_t round1_cases = 0;
    std::size_t final_cases = 0;
    int iterations = 0;
};

/// Runs the configured loop on each seed with the current cost model,
/// collects round-1 and final-round cases, refits, and repeats since the
/// proxy ordering depends on the cost model. Each regime carries equal
/// total weight. t_scratch is the larger of the mean cost of annotating a
/// target case from an empty prediction and the round-1 mean.
CalibrationResult calibrate(const RunConfig& base, const std::vector<std::uint64_t>& seeds, int iterations = 3,
                            const std::function<void(const std::string&)>& progress = {});

} // namespace hitl::loop

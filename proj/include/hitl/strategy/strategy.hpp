#pragma once

#include "hitl/annot/annotator.hpp"
#include "hitl/core/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hitl::strategy {

inline constexpr double kDefaultMarginThreshold = 0.3;

enum class Policy { easy_first, hard_first, random };
enum class DifficultySource { proxy, oracle };

std::string_view to_string(Policy policy);
/// Accepts the short forms "easy" and "hard" as well.
Policy policy_from_string(std::string_view text);
std::string_view to_string(DifficultySource source);
DifficultySource difficulty_source_from_string(std::string_view text);

struct DifficultyEstimate {
    std::string sample_id;
    double proxy_score = 0.0;        // mean top-vs-second probability margin
    double predicted_cost_min = 0.0; // cost model over the low-margin mask
    std::optional<double> oracle_cost_min;

    /// Cost used for ordering; oracle requires oracle_cost_min.
    double cost(DifficultySource source) const;
};

/// `probabilities` is voxel-major with kNumClasses entries per voxel.
DifficultyEstimate estimate_difficulty(std::string sample_id, std::span<const double> probabilities,
                                       const Dims& dims, const annot::CostModel& cost,
                                       double margin_threshold = kDefaultMarginThreshold);

struct Budget {
    enum class Kind { count, time_min, remainder };
    Kind kind = Kind::remainder;
    std::size_t count = 0;
    double minutes = 0.0;

    static Budget of_count(std::size_t n) { return {Kind::count, n, 0.0}; }
    static Budget of_minutes(double t) { return {Kind::time_min, 0, t}; }
    static Budget rest() { return {}; }

    friend bool operator==(const Budget&, const Budget&) = default;
};

struct RoundSchedule {
    std::vector<Budget> budgets;
    Policy policy = Policy::easy_first;
    DifficultySource difficulty_source = DifficultySource::proxy;
    std::uint64_t rng_seed = 0;

    void validate() const;
    /// Counts 4, 6, 8, 12, 16 and then whatever is left.
    static RoundSchedule standard();

    friend bool operator==(const RoundSchedule&, const RoundSchedule&) = default;
};

/// Orders the pool by policy and takes the budgeted prefix. A time budget
/// stops at the first sample that would push the running total past it.
std::vector<std::string> select_batch(std::span<const DifficultyEstimate> pool, const Budget& budget,
                                      Policy policy, DifficultySource source, std::uint64_t rng_seed);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

} // namespace hitl::strategy

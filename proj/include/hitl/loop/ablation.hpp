#pragma once

#include "hitl/loop/loop.hpp"
#include "hitl/strategy/strategy.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace hitl::loop {

struct AblationRow {
    double budget_min = 0.0;
    strategy::Policy policy = strategy::Policy::easy_first;
    std::uint64_t seed = 0;
    int interaction = 0;
    std::size_t n = 0;           // samples annotated in this interaction
    std::size_t cumulative = 0;
    double time_min = 0.0;       // realised oracle minutes in this interaction
    DiceScore dice;
};

struct AblationReport {
    std::vector<double> budgets;
    std::vector<strategy::Policy> policies;
    std::vector<std::uint64_t> seeds;
    std::vector<AblationRow> rows;
    std::vector<DiceScore> baseline; // igniter Dice per seed
};

/// Two time-budgeted interactions with oracle difficulty per (budget, policy,
/// seed). Each seed sets the run seed and, for generated data, the data seed;
/// the igniter is trained once per seed and shared by all cells.
AblationReport ablate_strategy(const RunConfig& base, const std::vector<double>& budgets,
                               const std::vector<strategy::Policy>& policies,
                               const std::vector<std::uint64_t>& seeds,
                               const std::function<void(const std::string&)>& progress = {});

/// One row per (budget, policy, seed, interaction).
std::string ablation_csv(const AblationReport& report);
/// Per budget and policy: sample counts and Dice after interaction 1
/// (median over seeds).
nlohmann::json ablation_summary(const AblationReport& report);

double median(std::vector<double> values);

} // namespace hitl::loop

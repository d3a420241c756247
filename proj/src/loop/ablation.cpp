#include "hitl/loop/ablation.hpp"

#include "hitl/core/error.hpp"
#include "hitl/loop/report.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace hitl::loop {

using nlohmann::json;

double median(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorCode::rejected_input, "median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AblationReport ablate_strategy(const RunConfig& base, const std::vector<double>& budgets,
                               const std::vector<strategy::Policy>& policies,
                               const std::vector<std::uint64_t>& seeds,
                               const std::function<void(const std::string&)>& progress) {
    if (budgets.empty() || policies.empty() || seeds.empty()) {
        throw Error(ErrorCode::configuration, "ablation needs budgets, policies and seeds");
    }
    for (double b : budgets) {
        if (!(b > 0.0)) throw Error(ErrorCode::configuration, "ablation budgets must be positive");
    }
    AblationReport report{budgets, policies, seeds, {}, {}};
    for (std::uint64_t seed : seeds) {
        RunConfig cfg = base;
        cfg.rng_seed = seed;
        if (cfg.data_dir.empty() && cfg.generate) cfg.generate->seed = seed;
        cfg.schedule.difficulty_source = strategy::DifficultySource::oracle;
        const PreparedData data = prepare(load_data(cfg));
        const seg::SegmenterModel igniter = train_igniter(cfg, data);
        report.baseline.push_back(evaluate(igniter, data.test_features, data.bundle.test));
        for (double budget : budgets) {
            for (strategy::Policy policy : policies) {
                cfg.schedule.policy = policy;
                cfg.schedule.budgets = {strategy::Budget::of_minutes(budget), strategy::Budget::of_minutes(budget)};
                LoopOptions options;
                options.igniter = igniter;
                options.write_artifacts = false;
                const RunReport run = run_loop(cfg, data, options);
                for (const auto& r : run.rounds) {
                    report.rows.push_back({budget, policy, seed, r.round, r.annotated.size(), r.cumulative_count,
                                           r.total_time_min, r.dice});
                }
                if (progress) {
                    progress(fmt::format("seed {} budget {} {}: n = {}", seed, budget, strategy::to_string(policy),
                                         run.rounds.empty() ? 0 : run.rounds.front().annotated.size()));
                }
            }
        }
    }
    return report;
}

std::string ablation_csv(const AblationReport& report) {
    std::string out = "budget_min,policy,seed,interaction,n,cumulative_n,time_min,dice_class1,dice_class2,mean_dice\n";
    for (const auto& r : report.rows) {
        const json d = to_json(r.dice);
        out += fmt::format("{:.4f},{},{},{},{},{},{:.4f},{:.4f},{:.4f},{:.4f}\n", r.budget_min,
                           strategy::to_string(r.policy), r.seed, r.interaction, r.n, r.cumulative,
                           round4(r.time_min), d["per_class"][0].get<double>(), d["per_class"][1].get<double>(),
                           d["mean"].get<double>());
    }
    return out;
}

json ablation_summary(const AblationReport& report) {
    json cells = json::array();
    for (double budget : report.budgets) {
        for (strategy::Policy policy : report.policies) {
            std::vector<double> n1, dice1, n_total;
            for (const auto& r : report.rows) {
                if (r.budget_min != budget || r.policy != policy) continue;
                if (r.interaction == 1) {
                    n1.push_back(double(r.n));
                    dice1.push_back(r.dice.mean());
                }
                if (r.interaction == 2) n_total.push_back(double(r.cumulative));
            }
            if (n1.empty()) continue;
            cells.push_back({{"budget_min", budget},
                             {"policy", strategy::to_string(policy)},
                             {"n_interaction1", n1},
                             {"median_n_interaction1", round4(median(n1))},
                             {"min_n_interaction1", *std::min_element(n1.begin(), n1.end())},
                             {"dice_interaction1", [&] {
                                  json a = json::array();
                                  for (double d : dice1) a.push_back(round4(d));
                                  return a;
                              }()},
                             {"median_dice_interaction1", round4(median(dice1))},
                             {"median_cumulative_n_interaction2", n_total.empty() ? json(nullptr) : json(round4(median(n_total)))}});
        }
    }
    json baseline = json::array();
    for (const auto& b : report.baseline) baseline.push_back(to_json(b));
    return {{"seeds", report.seeds}, {"baseline", baseline}, {"cells", cells}};
}

} // namespace hitl::loop

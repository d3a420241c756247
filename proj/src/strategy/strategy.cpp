#include "hitl/strategy/strategy.hpp"

#include "hitl/annot/components.hpp"
#include "hitl/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hitl::strategy {

std::string_view to_string(Policy policy) {
    switch (policy) {
    case Policy::easy_first: return "easy_first";
    case Policy::hard_first: return "hard_first";
    case Policy::random: return "random";
    }
    return "easy_first";
}

Policy policy_from_string(std::string_view text) {
    if (text == "easy_first" || text == "easy") return Policy::easy_first;
    if (text == "hard_first" || text == "hard") return Policy::hard_first;
    if (text == "random") return Policy::random;
    throw Error(ErrorCode::configuration, "unknown policy '" + std::string(text) + "'");
}

std::string_view to_string(DifficultySource source) {
    return source == DifficultySource::oracle ? "oracle" : "proxy";
}

DifficultySource difficulty_source_from_string(std::string_view text) {
    if (text == "proxy") return DifficultySource::proxy;
    if (text == "oracle") return DifficultySource::oracle;
    throw Error(ErrorCode::configuration, "unknown difficulty source '" + std::string(text) + "'");
}

double DifficultyEstimate::cost(DifficultySource source) const {
    if (source == DifficultySource::proxy) return predicted_cost_min;
    if (!oracle_cost_min) {
        throw Error(ErrorCode::contract_violation, "no oracle cost for sample " + sample_id);
    }
    return *oracle_cost_min;
}

DifficultyEstimate estimate_difficulty(std::string sample_id, std::span<const double> probabilities,
                                       const Dims& dims, const annot::CostModel& cost,
                                       double margin_threshold) {
    const std::size_t n = dims.voxel_count();
    if (probabilities.empty()) {
        throw Error(ErrorCode::contract_violation, "no probabilities for sample " + sample_id);
    }
    if (probabilities.size() != n * kNumClasses) {
        throw Error(ErrorCode::rejected_input, "probability map size does not match dims");
    }
    std::vector<std::uint8_t> mask(n, 0);
    std::size_t flagged = 0;
    double margin_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = probabilities.data() + i * kNumClasses;
        double top = p[0], second = -1.0;
        for (std::size_t c = 1; c < kNumClasses; ++c) {
            if (p[c] > top) {
                second = top;
                top = p[c];
            } else if (p[c] > second) {
                second = p[c];
            }
        }
        const double margin = std::clamp(top - second, 0.0, 1.0);
        margin_sum += margin;
        if (margin < margin_threshold) {
            mask[i] = 1;
            ++flagged;
        }
    }
    DifficultyEstimate est;
    est.sample_id = std::move(sample_id);
    est.proxy_score = n ? margin_sum / double(n) : 0.0;
    est.predicted_cost_min = cost.minutes(flagged, flagged ? annot::count_components(mask, dims) : 0);
    return est;
}

void RoundSchedule::validate() const {
    if (budgets.empty()) throw Error(ErrorCode::configuration, "schedule has no rounds");
    for (const auto& b : budgets) {
        if (b.kind == Budget::Kind::count && b.count == 0) {
            throw Error(ErrorCode::configuration, "count budgets must be positive");
        }
        if (b.kind == Budget::Kind::time_min && !(b.minutes > 0.0 && std::isfinite(b.minutes))) {
            throw Error(ErrorCode::configuration, "time budgets must be positive");
        }
    }
}

RoundSchedule RoundSchedule::standard() {
    RoundSchedule s;
    for (std::size_t n : {4, 6, 8, 12, 16}) s.budgets.push_back(Budget::of_count(n));
    s.budgets.push_back(Budget::rest());
    return s;
}

std::vector<std::string> select_batch(std::span<const DifficultyEstimate> pool, const Budget& budget,
                                      Policy policy, DifficultySource source, std::uint64_t rng_seed) {
    std::vector<const DifficultyEstimate*> order;
    for (const auto& e : pool) order.push_back(&e);
    const auto by_id = [](const DifficultyEstimate* a, const DifficultyEstimate* b) {
        return a->sample_id < b->sample_id;
    };
    std::sort(order.begin(), order.end(), by_id);
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (order[i]->sample_id == order[i - 1]->sample_id) {
            throw Error(ErrorCode::rejected_input, "duplicate sample " + order[i]->sample_id + " in pool");
        }
    }

    std::vector<double> costs;
    const bool need_costs = policy != Policy::random || budget.kind == Budget::Kind::time_min;
    if (need_costs)
        for (const auto* e : order) costs.push_back(e->cost(source));
    std::vector<std::size_t> idx(order.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (policy == Policy::random) {
        std::mt19937_64 rng(rng_seed);
        std::shuffle(idx.begin(), idx.end(), rng);
    } else {
        const bool easy = policy == Policy::easy_first;
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return easy ? costs[a] < costs[b] : costs[a] > costs[b];
        });
    }

    std::vector<std::string> out;
    double total = 0.0;
    for (std::size_t i : idx) {
        if (budget.kind == Budget::Kind::count && out.size() >= budget.count) break;
        if (budget.kind == Budget::Kind::time_min) {
            if (total + costs[i] > budget.minutes) break;
            total += costs[i];
        }
        out.push_back(order[i]->sample_id);
    }
    return out;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * double(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

} // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw Error(ErrorCode::rejected_input, "spearman needs two equal-length series of size >= 2");
    }
    const auto ra = ranks(a), rb = ranks(b);
    const double n = double(a.size());
    const double mean = (n + 1.0) / 2.0;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - mean) * (rb[i] - mean);
        saa += (ra[i] - mean) * (ra[i] - mean);
        sbb += (rb[i] - mean) * (rb[i] - mean);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

} // namespace hitl::strategy

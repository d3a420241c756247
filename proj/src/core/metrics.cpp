#include "hitl/core/metrics.hpp"

#include "hitl/core/error.hpp"

namespace hitl {

DiceScore dice(const LabelMap& a, const LabelMap& b) {
    if (a.dims() != b.dims()) {
        throw Error(ErrorCode::rejected_input,
                    "dice: dims " + to_string(a.dims()) + " vs " + to_string(b.dims()));
    }
    std::array<std::size_t, kNumClasses> count_a{}, count_b{}, overlap{};
    const auto la = a.labels();
    const auto lb = b.labels();
    for (std::size_t i = 0; i < la.size(); ++i) {
        ++count_a[la[i]];
        ++count_b[lb[i]];
        if (la[i] == lb[i]) ++overlap[la[i]];
    }
    DiceScore score;
    for (Label c : kOrganClasses) {
        const std::size_t denom = count_a[c] + count_b[c];
        score.per_class[c - 1] =
            denom == 0 ? 1.0 : 2.0 * static_cast<double>(overlap[c]) / static_cast<double>(denom);
    }
    return score;
}

DiceScore mean_dice(std::span<const DiceScore> scores) {
    DiceScore out;
    if (scores.empty()) return out;
    out.per_class = {0.0, 0.0};
    for (const auto& s : scores) {
        out.per_class[0] += s.per_class[0];
        out.per_class[1] += s.per_class[1];
    }
    out.per_class[0] /= static_cast<double>(scores.size());
    out.per_class[1] /= static_cast<double>(scores.size());
    return out;
}

} // namespace hitl

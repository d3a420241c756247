#pragma once

#include "hitl/core/types.hpp"

#include <span>

namespace hitl {

/// Per-organ Dice overlap. A class absent from both maps scores 1.0.
/// Throws rejected_input when the dims differ.
DiceScore dice(const LabelMap& a, const LabelMap& b);

/// Arithmetic mean of per-case scores, class by class. An empty input
/// yields the perfect score.
DiceScore mean_dice(std::span<const DiceScore> scores);

} // namespace hitl

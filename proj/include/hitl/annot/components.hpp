#pragma once

#include "hitl/core/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace hitl::annot {

/// Number of 26-connected components among the nonzero voxels of `mask`.
std::size_t count_components(std::span<const std::uint8_t> mask, const Dims& dims);

/// Component id per voxel (0 = unset, 1..n = component) and the count.
struct ComponentLabels {
    std::vector<std::uint32_t> ids;
    std::size_t count = 0;
};

ComponentLabels label_components(std::span<const std::uint8_t> mask, const Dims& dims);

} // namespace hitl::annot

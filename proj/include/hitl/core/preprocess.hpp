#pragma once

#include "hitl/core/types.hpp"

namespace hitl {

/// CT display/normalisation window in HU.
inline constexpr float kClampLow = -200.0f;
inline constexpr float kClampHigh = 250.0f;

/// Clamps every voxel to [kClampLow, kClampHigh], then standardises the
/// clamped volume to zero mean and unit population standard deviation.
/// A constant volume maps to all zeros.
Volume preprocess(const Volume& volume);

} // namespace hitl

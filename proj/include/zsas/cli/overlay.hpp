#pragma once

#include "zsas/core_types.hpp"

namespace zsas::cli {

/// Translucent fill plus a 1-px boundary in `color`. Mask and image must
/// share dimensions.
RgbImage render_overlay(const RgbImage& image, const BinaryMask& mask, std::uint8_t r = 255,
                        std::uint8_t g = 40, std::uint8_t b = 40, double alpha = 0.4);

/// Foreground pixels with a 4-neighbour outside the mask (or on the border).
BinaryMask mask_boundary(const BinaryMask& mask);

}  // namespace zsas::cli

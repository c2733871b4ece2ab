#pragma once

#include <cstdint>

#include "mgst/image.hpp"

namespace mgst {

/// Synthetic two-region eye-like test pairs: a dark pupil disk on a lighter
/// ground, with a one-channel binary disk mask. Used by the test suite, the
/// benchmark (which needs inputs at several resolutions without files) and
/// the regression fixtures.
enum class ToyLook {
    /// Noisy warm gradient background, soft-edged dark disk ("outdoor").
    Real,
    /// Flat cool background, uniform near-black disk ("synthetic").
    Synthetic,
};

template <typename T>
RgbMaskPair<T> make_toy_pair(int height, int width, ToyLook look,
                             std::uint64_t seed, double center_dx = 0.0,
                             double center_dy = 0.0);

} // namespace mgst

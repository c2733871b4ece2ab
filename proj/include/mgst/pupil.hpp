#pragma once

#include <utility>

#include "mgst/image.hpp"

namespace mgst {

/// Subpixel point in image coordinates (x to the right, y down, pixel
/// centers at integer positions).
struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Pupil-center preservation measurement between a content image and its
/// purified counterpart, using the same mask channel for both.
struct PupilCenterResult {
    Point2 center_before;
    Point2 center_after;
    double shift_px = 0.0;        // Euclidean distance
    double eye_width_px = 0.0;    // reference scale
    double shift_normalized = 0.0; // shift / eye_width
};

/// Darkness-weighted centroid of the given mask channel: each pixel is
/// weighted by mask * (255 - luminance), i.e. dark pixels inside the region
/// dominate. Falls back to the plain mask centroid if the region is
/// uniformly white. Throws EmptyRegionError when the channel has zero mass.
template <typename T>
Point2 pupil_center(const Image<T>& image, const Image<T>& mask, int channel);

template <typename T>
PupilCenterResult preserve_check(const RgbMaskPair<T>& before,
                                 const Image<T>& after, int channel,
                                 double eye_width_px);

} // namespace mgst

#include "mgst/pupil.hpp"

#include <cmath>

#include "mgst/errors.hpp"

namespace mgst {

template <typename T>
Point2 pupil_center(const Image<T>& image, const Image<T>& mask, int channel) {
    if (!image.same_extent(mask))
        throw PairMismatchError("image and mask dimensions differ");
    if (channel < 0 || channel >= mask.channels())
        throw ShapeMismatchError("mask channel index out of range");

    double mass = 0.0, wx = 0.0, wy = 0.0;
    double mask_mass = 0.0, mx = 0.0, my = 0.0;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const double m = mask.at(y, x, channel);
            if (m <= 0.0)
                continue;
            mask_mass += m;
            mx += m * x;
            my += m * y;
            // Rec. 601 luma.
            const double luma = 0.299 * image.at(y, x, 0) +
                                0.587 * image.at(y, x, 1) +
                                0.114 * image.at(y, x, 2);
            const double weight = m * (255.0 - luma);
            mass += weight;
            wx += weight * x;
            wy += weight * y;
        }
    }
    if (mask_mass <= 0.0)
        throw EmptyRegionError("mask channel has zero mass");
    if (mass <= 0.0)
        return {mx / mask_mass, my / mask_mass};
    return {wx / mass, wy / mass};
}

template <typename T>
PupilCenterResult preserve_check(const RgbMaskPair<T>& before,
                                 const Image<T>& after, int channel,
                                 double eye_width_px) {
    if (!before.image.same_extent(after))
        throw PairMismatchError("purified image dimensions differ from content");
    PupilCenterResult res;
    res.center_before = pupil_center(before.image, before.mask, channel);
    res.center_after = pupil_center(after, before.mask, channel);
    const double dx = res.center_after.x - res.center_before.x;
    const double dy = res.center_after.y - res.center_before.y;
    res.shift_px = std::sqrt(dx * dx + dy * dy);
    res.eye_width_px = eye_width_px;
    res.shift_normalized = eye_width_px > 0.0 ? res.shift_px / eye_width_px : 0.0;
    return res;
}

template Point2 pupil_center<float>(const Image<float>&, const Image<float>&, int);
template Point2 pupil_center<double>(const Image<double>&, const Image<double>&, int);
template PupilCenterResult preserve_check<float>(const RgbMaskPair<float>&,
                                                 const Image<float>&, int, double);
template PupilCenterResult preserve_check<double>(const RgbMaskPair<double>&,
                                                  const Image<double>&, int, double);

} // namespace mgst

#include "mgst/fixtures.hpp"

#include <algorithm>
#include <cmath>

#include "mgst/prng.hpp"

namespace mgst {

template <typename T>
RgbMaskPair<T> make_toy_pair(int height, int width, ToyLook look,
                             std::uint64_t seed, double center_dx,
                             double center_dy) {
    Image<T> image(height, width, 3);
    Image<T> mask(height, width, 1);
    Lcg64 rng(seed);

    const double cx = (width - 1) / 2.0 + center_dx;
    const double cy = (height - 1) / 2.0 + center_dy;
    const double radius = std::min(height, width) / 5.0;

    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dist = std::hypot(x - cx, y - cy);
            double r, g, b;
            if (look == ToyLook::Real) {
                // Vertical gradient with mild per-pixel noise.
                const double base = 180.0 + 40.0 * y / std::max(1, height - 1);
                const double noise = (rng.next_pixel() - 127.5) * (10.0 / 127.5);
                r = base + noise + 10.0;
                g = base + noise;
                b = base + noise - 15.0;
                if (dist <= radius) {
                    // Radially shaded dark pupil.
                    const double depth = 1.0 - 0.5 * dist / radius;
                    r = 55.0 * (1.0 - depth) + 25.0;
                    g = 45.0 * (1.0 - depth) + 20.0;
                    b = 50.0 * (1.0 - depth) + 22.0;
                }
            } else {
                r = 108.0;
                g = 122.0;
                b = 140.0;
                if (dist <= radius) {
                    r = 18.0;
                    g = 18.0;
                    b = 26.0;
                }
            }
            image.at(y, x, 0) = static_cast<T>(std::clamp(r, 0.0, 255.0));
            image.at(y, x, 1) = static_cast<T>(std::clamp(g, 0.0, 255.0));
            image.at(y, x, 2) = static_cast<T>(std::clamp(b, 0.0, 255.0));
            mask.at(y, x, 0) = dist <= radius ? T(1) : T(0);
        }
    }
    return RgbMaskPair<T>(std::move(image), std::move(mask));
}

template RgbMaskPair<float> make_toy_pair<float>(int, int, ToyLook, std::uint64_t,
                                                 double, double);
template RgbMaskPair<double> make_toy_pair<double>(int, int, ToyLook, std::uint64_t,
                                                   double, double);

} // namespace mgst

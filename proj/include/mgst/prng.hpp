#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mgst {

/// 64-bit linear congruential generator with a pinned state transition
/// (x <- x * 6364136223846793005 + 1442695040888963407) so that every
/// consumer of a seed reproduces the exact same stream. The output of one
/// step is the high 32 bits of the new state.
class Lcg64 {
public:
    explicit Lcg64(std::uint64_t seed) : state_(seed) {}

    std::uint32_t next_u32() {
        state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
        return static_cast<std::uint32_t>(state_ >> 32);
    }

    /// Uniform on the closed interval [0, 255].
    double next_pixel() {
        return static_cast<double>(next_u32()) * (255.0 / 4294967295.0);
    }

    /// Uniform on [0, 1).
    double next_unit() {
        return static_cast<double>(next_u32()) * (1.0 / 4294967296.0);
    }

    /// Standard normal via Box-Muller. Consumes two u32 draws per pair of
    /// normals; the second value of each pair is cached.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        const double u1 =
            (static_cast<double>(next_u32()) + 1.0) * (1.0 / 4294967296.0);
        const double u2 = next_unit();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace mgst

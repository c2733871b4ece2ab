#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "mgst/errors.hpp"
#include "mgst/prng.hpp"

namespace mgst {

/// Dense H x W x C tensor stored row-major as (y, x, channel). Used both for
/// pixel data (C = 3, nominal range [0, 255]) and for soft segmentation masks
/// (C >= 1, values in [0, 1]). The container itself places no restriction on
/// size; operations that require e.g. H, W >= 8 check at their boundary.
template <typename T>
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, T fill = T(0))
        : height_(height), width_(width), channels_(channels),
          data_(static_cast<std::size_t>(height) * width * channels, fill) {}

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& at(int y, int x, int c) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    T at(int y, int x, int c) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    bool same_shape(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_ &&
               channels_ == other.channels_;
    }
    bool same_extent(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    template <typename U>
    Image<U> cast() const {
        Image<U> out(height_, width_, channels_);
        for (std::size_t i = 0; i < data_.size(); ++i)
            out.data()[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<T> data_;
};

/// An RGB image together with its segmentation mask. Extents always match.
template <typename T>
struct RgbMaskPair {
    Image<T> image;
    Image<T> mask;

    RgbMaskPair() = default;
    RgbMaskPair(Image<T> img, Image<T> msk)
        : image(std::move(img)), mask(std::move(msk)) {
        if (!image.same_extent(mask))
            throw PairMismatchError("image and mask dimensions differ");
    }
};

/// Validates the soft-partition invariant: every value in [0, 1] and the
/// per-pixel channel sum <= 1 + 1e-6.
template <typename T>
void validate_mask(const Image<T>& mask) {
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            double sum = 0.0;
            for (int c = 0; c < mask.channels(); ++c) {
                const double v = mask.at(y, x, c);
                if (v < 0.0 || v > 1.0)
                    throw ShapeMismatchError("mask value outside [0, 1]");
                sum += v;
            }
            if (sum > 1.0 + 1e-6)
                throw ShapeMismatchError("mask channel sum exceeds 1");
        }
    }
}

/// Deterministic white-noise image, i.i.d. uniform on [0, 255]. Pure function
/// of (height, width, seed).
template <typename T>
Image<T> white_noise_image(int height, int width, std::uint64_t seed) {
    if (height < 8 || width < 8)
        throw ShapeMismatchError("white-noise image must be at least 8x8");
    Image<T> out(height, width, 3);
    Lcg64 rng(seed);
    T* p = out.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        p[i] = static_cast<T>(rng.next_pixel());
    return out;
}

/// Clamp every value into the pixel box [0, 255]. Idempotent and monotone.
template <typename T>
void project_pixels_inplace(Image<T>& image) {
    T* p = image.data();
    for (std::size_t i = 0; i < image.size(); ++i)
        p[i] = std::clamp(p[i], T(0), T(255));
}

template <typename T>
Image<T> project_pixels(Image<T> image) {
    project_pixels_inplace(image);
    return image;
}

} // namespace mgst

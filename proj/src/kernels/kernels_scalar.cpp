#include "mgst/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>

// Reference kernels. Loop structure and accumulation order here define the
// semantics the vector backends must reproduce: reductions accumulate left to
// right in double, conv3x3 accumulates bias first then (ci, ky, kx) per
// output element.

namespace mgst::kernels::scalar {

template <typename T>
double dot(const T* a, const T* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

template <typename T>
double sum(const T* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += static_cast<double>(x[i]);
    return acc;
}

template <typename T>
double sum_sq_diff(const T* a, const T* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

template <typename T>
double masked_sum_sq_diff(const T* a, const T* b, const T* m, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (static_cast<double>(a[i]) - static_cast<double>(b[i])) *
                         static_cast<double>(m[i]);
        acc += d * d;
    }
    return acc;
}

template <typename T>
double max_abs(const T* x, std::size_t n) {
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        best = std::max(best, std::abs(static_cast<double>(x[i])));
    return best;
}

template <typename T>
void axpy(T* y, T alpha, const T* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        y[i] += alpha * x[i];
}

template <typename T>
void scale(T* x, T alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        x[i] *= alpha;
}

template <typename T>
void clamp(T* x, std::size_t n, T lo, T hi) {
    for (std::size_t i = 0; i < n; ++i)
        x[i] = std::clamp(x[i], lo, hi);
}

template <typename T>
void hadamard(T* out, const T* a, const T* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = a[i] * b[i];
}

template <typename T>
void relu(T* out, const T* in, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <typename T>
void relu_backward(T* dst, const T* activation, const T* grad, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        dst[i] = activation[i] > T(0) ? grad[i] : T(0);
}

template <typename T>
void accum_axpy(double* acc, double alpha, const T* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        acc[i] += alpha * static_cast<double>(x[i]);
}

template <typename T>
void masked_scaled_add(T* dst, const T* src, const T* mask, double coef,
                       std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        dst[i] += static_cast<T>(coef * static_cast<double>(src[i]) *
                                 static_cast<double>(mask[i]));
}

template <typename T>
void masked_scaled_add_d(T* dst, const double* src, const T* mask, double coef,
                         std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        dst[i] += static_cast<T>(coef * src[i] * static_cast<double>(mask[i]));
}

template <typename T>
void conv3x3(const T* in, int height, int width, int in_ch, const T* weights,
             const T* bias, T* out, int out_ch) {
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    for (int co = 0; co < out_ch; ++co) {
        T* out_plane = out + co * plane;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                double acc = static_cast<double>(bias[co]);
                for (int ci = 0; ci < in_ch; ++ci) {
                    const T* in_plane = in + ci * plane;
                    const T* w = weights + ((co * in_ch + ci) * 9);
                    for (int ky = 0; ky < 3; ++ky) {
                        const int yy = y + ky - 1;
                        if (yy < 0 || yy >= height)
                            continue;
                        const T* row = in_plane + static_cast<std::size_t>(yy) * width;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int xx = x + kx - 1;
                            if (xx < 0 || xx >= width)
                                continue;
                            acc += static_cast<double>(w[ky * 3 + kx]) *
                                   static_cast<double>(row[xx]);
                        }
                    }
                }
                out_plane[static_cast<std::size_t>(y) * width + x] =
                    static_cast<T>(acc);
            }
        }
    }
}

template <typename T>
void avgpool2x2(const T* in, int height, int width, int channels, T* out) {
    const int oh = height / 2, ow = width / 2;
    const std::size_t in_plane = static_cast<std::size_t>(height) * width;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    for (int c = 0; c < channels; ++c) {
        const T* src = in + c * in_plane;
        T* dst = out + c * out_plane;
        for (int y = 0; y < oh; ++y) {
            const T* r0 = src + static_cast<std::size_t>(2 * y) * width;
            const T* r1 = r0 + width;
            for (int x = 0; x < ow; ++x) {
                const double s = static_cast<double>(r0[2 * x]) +
                                 static_cast<double>(r0[2 * x + 1]) +
                                 static_cast<double>(r1[2 * x]) +
                                 static_cast<double>(r1[2 * x + 1]);
                dst[static_cast<std::size_t>(y) * ow + x] = static_cast<T>(s * 0.25);
            }
        }
    }
}

template <typename T>
void avgpool2x2_backward(const T* dout, int out_height, int out_width,
                         int channels, T* din) {
    const int h = out_height * 2, w = out_width * 2;
    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_plane = static_cast<std::size_t>(out_height) * out_width;
    for (int c = 0; c < channels; ++c) {
        const T* src = dout + c * out_plane;
        T* dst = din + c * in_plane;
        for (int y = 0; y < out_height; ++y) {
            T* r0 = dst + static_cast<std::size_t>(2 * y) * w;
            T* r1 = r0 + w;
            for (int x = 0; x < out_width; ++x) {
                const T v = static_cast<T>(
                    static_cast<double>(src[static_cast<std::size_t>(y) * out_width + x]) * 0.25);
                r0[2 * x] = v;
                r0[2 * x + 1] = v;
                r1[2 * x] = v;
                r1[2 * x + 1] = v;
            }
        }
    }
}

#define MGST_INSTANTIATE_SCALAR(T)                                              \
    template double dot<T>(const T*, const T*, std::size_t);                    \
    template double sum<T>(const T*, std::size_t);                              \
    template double sum_sq_diff<T>(const T*, const T*, std::size_t);            \
    template double masked_sum_sq_diff<T>(const T*, const T*, const T*,         \
                                          std::size_t);                         \
    template double max_abs<T>(const T*, std::size_t);                          \
    template void axpy<T>(T*, T, const T*, std::size_t);                        \
    template void scale<T>(T*, T, std::size_t);                                 \
    template void clamp<T>(T*, std::size_t, T, T);                              \
    template void hadamard<T>(T*, const T*, const T*, std::size_t);             \
    template void relu<T>(T*, const T*, std::size_t);                           \
    template void relu_backward<T>(T*, const T*, const T*, std::size_t);        \
    template void accum_axpy<T>(double*, double, const T*, std::size_t);        \
    template void masked_scaled_add<T>(T*, const T*, const T*, double,          \
                                       std::size_t);                            \
    template void masked_scaled_add_d<T>(T*, const double*, const T*, double,   \
                                         std::size_t);                          \
    template void conv3x3<T>(const T*, int, int, int, const T*, const T*, T*,   \
                             int);                                              \
    template void avgpool2x2<T>(const T*, int, int, int, T*);                   \
    template void avgpool2x2_backward<T>(const T*, int, int, int, T*);

MGST_INSTANTIATE_SCALAR(float)
MGST_INSTANTIATE_SCALAR(double)

#undef MGST_INSTANTIATE_SCALAR

} // namespace mgst::kernels::scalar

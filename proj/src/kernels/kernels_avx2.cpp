#include "mgst/kernels/kernels.hpp"

#if MGST_HAVE_AVX2_BACKEND

#include <immintrin.h>

#include <algorithm>
#include <cmath>

// AVX2+FMA kernel variants. This translation unit is the only one compiled
// with -mavx2 -mfma; it must not be entered unless the CPU supports both
// (the dispatcher guarantees that). Reductions keep four double lanes and
// combine them lane 0..3 at the end, so results are deterministic per
// machine but may differ from the scalar reference in the last bits;
// elementwise kernels reproduce the reference exactly.

namespace mgst::kernels::avx2 {

namespace {

inline __m256d load4d(const float* p) { return _mm256_cvtps_pd(_mm_loadu_ps(p)); }
inline __m256d load4d(const double* p) { return _mm256_loadu_pd(p); }
inline void store4(float* p, __m256d v) { _mm_storeu_ps(p, _mm256_cvtpd_ps(v)); }
inline void store4(double* p, __m256d v) { _mm256_storeu_pd(p, v); }

inline double hsum(__m256d v) {
    alignas(32) double lane[4];
    _mm256_store_pd(lane, v);
    return ((lane[0] + lane[1]) + lane[2]) + lane[3];
}

} // namespace

template <typename T>
double dot(const T* a, const T* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(load4d(a + i), load4d(b + i), acc);
    double r = hsum(acc);
    for (; i < n; ++i)
        r += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return r;
}

template <typename T>
double sum(const T* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, load4d(x + i));
    double r = hsum(acc);
    for (; i < n; ++i)
        r += static_cast<double>(x[i]);
    return r;
}

template <typename T>
double sum_sq_diff(const T* a, const T* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(load4d(a + i), load4d(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double r = hsum(acc);
    for (; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        r += d * d;
    }
    return r;
}

template <typename T>
double masked_sum_sq_diff(const T* a, const T* b, const T* m, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_mul_pd(
            _mm256_sub_pd(load4d(a + i), load4d(b + i)), load4d(m + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double r = hsum(acc);
    for (; i < n; ++i) {
        const double d = (static_cast<double>(a[i]) - static_cast<double>(b[i])) *
                         static_cast<double>(m[i]);
        r += d * d;
    }
    return r;
}

template <typename T>
double max_abs(const T* x, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d best = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        best = _mm256_max_pd(best, _mm256_andnot_pd(sign_mask, load4d(x + i)));
    alignas(32) double lane[4];
    _mm256_store_pd(lane, best);
    double r = std::max(std::max(lane[0], lane[1]), std::max(lane[2], lane[3]));
    for (; i < n; ++i)
        r = std::max(r, std::abs(static_cast<double>(x[i])));
    return r;
}

namespace {

void axpy_impl(float* y, float alpha, const float* x, std::size_t n) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i),
                                                _mm256_loadu_ps(y + i)));
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

void axpy_impl(double* y, double alpha, const double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                                _mm256_loadu_pd(y + i)));
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

void scale_impl(float* x, float alpha, std::size_t n) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(x + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i)
        x[i] *= alpha;
}

void scale_impl(double* x, double alpha, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i)
        x[i] *= alpha;
}

void clamp_impl(float* x, std::size_t n, float lo, float hi) {
    const __m256 vlo = _mm256_set1_ps(lo), vhi = _mm256_set1_ps(hi);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(
            x + i, _mm256_min_ps(vhi, _mm256_max_ps(vlo, _mm256_loadu_ps(x + i))));
    for (; i < n; ++i)
        x[i] = std::clamp(x[i], lo, hi);
}

void clamp_impl(double* x, std::size_t n, double lo, double hi) {
    const __m256d vlo = _mm256_set1_pd(lo), vhi = _mm256_set1_pd(hi);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(
            x + i, _mm256_min_pd(vhi, _mm256_max_pd(vlo, _mm256_loadu_pd(x + i))));
    for (; i < n; ++i)
        x[i] = std::clamp(x[i], lo, hi);
}

void hadamard_impl(float* out, const float* a, const float* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i,
                         _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i)
        out[i] = a[i] * b[i];
}

void hadamard_impl(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i,
                         _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i)
        out[i] = a[i] * b[i];
}

void relu_impl(float* out, const float* in, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_max_ps(zero, _mm256_loadu_ps(in + i)));
    for (; i < n; ++i)
        out[i] = in[i] > 0.0f ? in[i] : 0.0f;
}

void relu_impl(double* out, const double* in, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_max_pd(zero, _mm256_loadu_pd(in + i)));
    for (; i < n; ++i)
        out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward_impl(float* dst, const float* activation, const float* grad,
                   std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 keep = _mm256_cmp_ps(_mm256_loadu_ps(activation + i), zero,
                                          _CMP_GT_OQ);
        _mm256_storeu_ps(dst + i, _mm256_and_ps(keep, _mm256_loadu_ps(grad + i)));
    }
    for (; i < n; ++i)
        dst[i] = activation[i] > 0.0f ? grad[i] : 0.0f;
}

void relu_backward_impl(double* dst, const double* activation, const double* grad,
                   std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d keep = _mm256_cmp_pd(_mm256_loadu_pd(activation + i), zero,
                                           _CMP_GT_OQ);
        _mm256_storeu_pd(dst + i, _mm256_and_pd(keep, _mm256_loadu_pd(grad + i)));
    }
    for (; i < n; ++i)
        dst[i] = activation[i] > 0.0 ? grad[i] : 0.0;
}

} // namespace

template <typename T>
void axpy(T* y, T alpha, const T* x, std::size_t n) {
    axpy_impl(y, alpha, x, n);
}

template <typename T>
void scale(T* x, T alpha, std::size_t n) {
    scale_impl(x, alpha, n);
}

template <typename T>
void clamp(T* x, std::size_t n, T lo, T hi) {
    clamp_impl(x, n, lo, hi);
}

template <typename T>
void hadamard(T* out, const T* a, const T* b, std::size_t n) {
    hadamard_impl(out, a, b, n);
}

template <typename T>
void relu(T* out, const T* in, std::size_t n) {
    relu_impl(out, in, n);
}

template <typename T>
void relu_backward(T* dst, const T* activation, const T* grad, std::size_t n) {
    relu_backward_impl(dst, activation, grad, n);
}

template <typename T>
void accum_axpy(double* acc, double alpha, const T* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(va, load4d(x + i),
                                                  _mm256_loadu_pd(acc + i)));
    for (; i < n; ++i)
        acc[i] += alpha * static_cast<double>(x[i]);
}

template <typename T>
void masked_scaled_add(T* dst, const T* src, const T* mask, double coef,
                       std::size_t n) {
    const __m256d vc = _mm256_set1_pd(coef);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v =
            _mm256_mul_pd(vc, _mm256_mul_pd(load4d(src + i), load4d(mask + i)));
        store4(dst + i, _mm256_add_pd(load4d(dst + i), v));
    }
    for (; i < n; ++i)
        dst[i] += static_cast<T>(coef * static_cast<double>(src[i]) *
                                 static_cast<double>(mask[i]));
}

template <typename T>
void masked_scaled_add_d(T* dst, const double* src, const T* mask, double coef,
                         std::size_t n) {
    const __m256d vc = _mm256_set1_pd(coef);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_mul_pd(
            vc, _mm256_mul_pd(_mm256_loadu_pd(src + i), load4d(mask + i)));
        store4(dst + i, _mm256_add_pd(load4d(dst + i), v));
    }
    for (; i < n; ++i)
        dst[i] += static_cast<T>(coef * src[i] * static_cast<double>(mask[i]));
}

namespace {

// Reference-order scalar accumulation for the border columns the vector
// loop does not cover.
template <typename T>
inline void conv3x3_column(const T* in, int height, int width, int in_ch,
                           const T* weights, double bias, T* out_row, int co_stride,
                           std::size_t plane, int y, int x) {
    double acc = bias;
    for (int ci = 0; ci < in_ch; ++ci) {
        const T* in_plane = in + ci * plane;
        const T* w = weights + (co_stride + ci) * 9;
        for (int ky = 0; ky < 3; ++ky) {
            const int yy = y + ky - 1;
            if (yy < 0 || yy >= height)
                continue;
            const T* row = in_plane + static_cast<std::size_t>(yy) * width;
            for (int kx = 0; kx < 3; ++kx) {
                const int xx = x + kx - 1;
                if (xx < 0 || xx >= width)
                    continue;
                acc += static_cast<double>(w[ky * 3 + kx]) * static_cast<double>(row[xx]);
            }
        }
    }
    out_row[x] = static_cast<T>(acc);
}

} // namespace

template <typename T>
void conv3x3(const T* in, int height, int width, int in_ch, const T* weights,
             const T* bias, T* out, int out_ch) {
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    // Vector blocks need x-1 .. x+4 in bounds, i.e. x in [1, width-5].
    const int vec_end = width - 5;
    for (int co = 0; co < out_ch; ++co) {
        const double b = static_cast<double>(bias[co]);
        const int co_stride = co * in_ch;
        for (int y = 0; y < height; ++y) {
            T* out_row = out + co * plane + static_cast<std::size_t>(y) * width;
            int x = 1;
            for (; x <= vec_end; x += 4) {
                __m256d acc = _mm256_set1_pd(b);
                for (int ci = 0; ci < in_ch; ++ci) {
                    const T* in_plane = in + ci * plane;
                    const T* w = weights + (co_stride + ci) * 9;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int yy = y + ky - 1;
                        if (yy < 0 || yy >= height)
                            continue;
                        const T* row = in_plane + static_cast<std::size_t>(yy) * width;
                        acc = _mm256_fmadd_pd(_mm256_set1_pd(static_cast<double>(w[ky * 3])),
                                              load4d(row + x - 1), acc);
                        acc = _mm256_fmadd_pd(_mm256_set1_pd(static_cast<double>(w[ky * 3 + 1])),
                                              load4d(row + x), acc);
                        acc = _mm256_fmadd_pd(_mm256_set1_pd(static_cast<double>(w[ky * 3 + 2])),
                                              load4d(row + x + 1), acc);
                    }
                }
                store4(out_row + x, acc);
            }
            conv3x3_column(in, height, width, in_ch, weights, b, out_row, co_stride,
                           plane, y, 0);
            for (; x < width; ++x)
                conv3x3_column(in, height, width, in_ch, weights, b, out_row,
                               co_stride, plane, y, x);
        }
    }
}

// Pooling is memory-bound and a negligible share of the runtime; the
// dispatcher routes it to the scalar reference.
template <typename T>
void avgpool2x2(const T* in, int height, int width, int channels, T* out) {
    scalar::avgpool2x2(in, height, width, channels, out);
}

template <typename T>
void avgpool2x2_backward(const T* dout, int out_height, int out_width,
                         int channels, T* din) {
    scalar::avgpool2x2_backward(dout, out_height, out_width, channels, din);
}

#define MGST_INSTANTIATE_AVX2(T)                                                \
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

MGST_INSTANTIATE_AVX2(float)
MGST_INSTANTIATE_AVX2(double)

#undef MGST_INSTANTIATE_AVX2

} // namespace mgst::kernels::avx2

#endif // MGST_HAVE_AVX2_BACKEND

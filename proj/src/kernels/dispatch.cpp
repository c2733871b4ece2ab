#include "mgst/kernels/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <vector>

namespace mgst::kernels {

namespace {

bool cpu_has_avx2() {
#if MGST_HAVE_AVX2_BACKEND && (defined(__x86_64__) || defined(__i386__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend resolve_default() {
    if (const char* env = std::getenv("MGST_KERNEL_BACKEND")) {
        const std::string name(env);
        if (name == "scalar")
            return Backend::Scalar;
        if (name == "avx2" && backend_supported(Backend::Avx2))
            return Backend::Avx2;
    }
    return backend_supported(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<int> g_backend{-1};

} // namespace

std::string_view backend_name(Backend b) {
    switch (b) {
    case Backend::Scalar:
        return "scalar";
    case Backend::Avx2:
        return "avx2";
    }
    return "unknown";
}

bool backend_supported(Backend b) {
    switch (b) {
    case Backend::Scalar:
        return true;
    case Backend::Avx2:
        return cpu_has_avx2();
    }
    return false;
}

std::vector<Backend> supported_backends() {
    std::vector<Backend> out{Backend::Scalar};
    if (backend_supported(Backend::Avx2))
        out.push_back(Backend::Avx2);
    return out;
}

Backend active_backend() {
    int cur = g_backend.load(std::memory_order_relaxed);
    if (cur < 0) {
        const Backend b = resolve_default();
        g_backend.store(static_cast<int>(b), std::memory_order_relaxed);
        return b;
    }
    return static_cast<Backend>(cur);
}

bool set_backend(Backend b) {
    if (!backend_supported(b))
        return false;
    g_backend.store(static_cast<int>(b), std::memory_order_relaxed);
    return true;
}

#if MGST_HAVE_AVX2_BACKEND
#define MGST_DISPATCH(call_scalar, call_avx2)                                  \
    if (active_backend() == Backend::Avx2)                                     \
        return call_avx2;                                                      \
    return call_scalar
#else
#define MGST_DISPATCH(call_scalar, call_avx2) return call_scalar
#endif

template <typename T>
double dot(const T* a, const T* b, std::size_t n) {
    MGST_DISPATCH(scalar::dot(a, b, n), avx2::dot(a, b, n));
}

template <typename T>
double sum(const T* x, std::size_t n) {
    MGST_DISPATCH(scalar::sum(x, n), avx2::sum(x, n));
}

template <typename T>
double sum_sq_diff(const T* a, const T* b, std::size_t n) {
    MGST_DISPATCH(scalar::sum_sq_diff(a, b, n), avx2::sum_sq_diff(a, b, n));
}

template <typename T>
double masked_sum_sq_diff(const T* a, const T* b, const T* m, std::size_t n) {
    MGST_DISPATCH(scalar::masked_sum_sq_diff(a, b, m, n),
                  avx2::masked_sum_sq_diff(a, b, m, n));
}

template <typename T>
double max_abs(const T* x, std::size_t n) {
    MGST_DISPATCH(scalar::max_abs(x, n), avx2::max_abs(x, n));
}

template <typename T>
void axpy(T* y, T alpha, const T* x, std::size_t n) {
    MGST_DISPATCH(scalar::axpy(y, alpha, x, n), avx2::axpy(y, alpha, x, n));
}

template <typename T>
void scale(T* x, T alpha, std::size_t n) {
    MGST_DISPATCH(scalar::scale(x, alpha, n), avx2::scale(x, alpha, n));
}

template <typename T>
void clamp(T* x, std::size_t n, T lo, T hi) {
    MGST_DISPATCH(scalar::clamp(x, n, lo, hi), avx2::clamp(x, n, lo, hi));
}

template <typename T>
void hadamard(T* out, const T* a, const T* b, std::size_t n) {
    MGST_DISPATCH(scalar::hadamard(out, a, b, n), avx2::hadamard(out, a, b, n));
}

template <typename T>
void relu(T* out, const T* in, std::size_t n) {
    MGST_DISPATCH(scalar::relu(out, in, n), avx2::relu(out, in, n));
}

template <typename T>
void relu_backward(T* dst, const T* activation, const T* grad, std::size_t n) {
    MGST_DISPATCH(scalar::relu_backward(dst, activation, grad, n),
                  avx2::relu_backward(dst, activation, grad, n));
}

template <typename T>
void accum_axpy(double* acc, double alpha, const T* x, std::size_t n) {
    MGST_DISPATCH(scalar::accum_axpy(acc, alpha, x, n),
                  avx2::accum_axpy(acc, alpha, x, n));
}

template <typename T>
void masked_scaled_add(T* dst, const T* src, const T* mask, double coef,
                       std::size_t n) {
    MGST_DISPATCH(scalar::masked_scaled_add(dst, src, mask, coef, n),
                  avx2::masked_scaled_add(dst, src, mask, coef, n));
}

template <typename T>
void masked_scaled_add_d(T* dst, const double* src, const T* mask, double coef,
                         std::size_t n) {
    MGST_DISPATCH(scalar::masked_scaled_add_d(dst, src, mask, coef, n),
                  avx2::masked_scaled_add_d(dst, src, mask, coef, n));
}

template <typename T>
void conv3x3(const T* in, int height, int width, int in_ch, const T* weights,
             const T* bias, T* out, int out_ch) {
    MGST_DISPATCH(scalar::conv3x3(in, height, width, in_ch, weights, bias, out, out_ch),
                  avx2::conv3x3(in, height, width, in_ch, weights, bias, out, out_ch));
}

template <typename T>
void avgpool2x2(const T* in, int height, int width, int channels, T* out) {
    MGST_DISPATCH(scalar::avgpool2x2(in, height, width, channels, out),
                  avx2::avgpool2x2(in, height, width, channels, out));
}

template <typename T>
void avgpool2x2_backward(const T* dout, int out_height, int out_width,
                         int channels, T* din) {
    MGST_DISPATCH(scalar::avgpool2x2_backward(dout, out_height, out_width, channels, din),
                  avx2::avgpool2x2_backward(dout, out_height, out_width, channels, din));
}

#undef MGST_DISPATCH

template <typename T>
void masked_gram(const T* f, const T* a, int n, int m, double* g, T* scratch) {
    for (int p = 0; p < n; ++p)
        hadamard(scratch + static_cast<std::size_t>(p) * m, f + static_cast<std::size_t>(p) * m, a, m);
    for (int p = 0; p < n; ++p) {
        const T* wp = scratch + static_cast<std::size_t>(p) * m;
        for (int q = p; q < n; ++q) {
            const double v = dot(wp, scratch + static_cast<std::size_t>(q) * m,
                                 static_cast<std::size_t>(m));
            g[static_cast<std::size_t>(p) * n + q] = v;
            g[static_cast<std::size_t>(q) * n + p] = v;
        }
    }
}

template <typename T>
void gram_backprop(const double* d, const T* f, const T* a, int n, int m,
                   double coef, T* df, T* scratch) {
    for (int p = 0; p < n; ++p)
        hadamard(scratch + static_cast<std::size_t>(p) * m, f + static_cast<std::size_t>(p) * m, a, m);
    std::vector<double> row(static_cast<std::size_t>(m));
    for (int p = 0; p < n; ++p) {
        std::fill(row.begin(), row.end(), 0.0);
        const double* drow = d + static_cast<std::size_t>(p) * n;
        for (int q = 0; q < n; ++q)
            accum_axpy(row.data(), drow[q], scratch + static_cast<std::size_t>(q) * m,
                       static_cast<std::size_t>(m));
        masked_scaled_add_d(df + static_cast<std::size_t>(p) * m, row.data(), a, coef,
                            static_cast<std::size_t>(m));
    }
}

#define MGST_INSTANTIATE_DISPATCH(T)                                            \
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
    template void avgpool2x2_backward<T>(const T*, int, int, int, T*);          \
    template void masked_gram<T>(const T*, const T*, int, int, double*, T*);    \
    template void gram_backprop<T>(const double*, const T*, const T*, int, int, \
                                   double, T*, T*);

MGST_INSTANTIATE_DISPATCH(float)
MGST_INSTANTIATE_DISPATCH(double)

#undef MGST_INSTANTIATE_DISPATCH

} // namespace mgst::kernels

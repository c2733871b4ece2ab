#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

// Data-parallel inner loops used by the feature network, the losses and the
// optimizer. Every operation has a scalar reference implementation and, on
// x86-64 with AVX2+FMA, a vector variant selected at runtime. Reductions
// accumulate in double precision; elementwise kernels and the convolution
// keep the per-element accumulation order of the reference, so on a given
// input the vector variants are bit-identical for everything except the
// lane-parallel reductions (dot, sums, max), which are equivalence-tested
// against the reference under a tight tolerance instead.

namespace mgst::kernels {

enum class Backend { Scalar, Avx2 };

/// Name for logs and the benchmark table ("scalar", "avx2").
std::string_view backend_name(Backend b);

/// True if this process can execute the given backend.
bool backend_supported(Backend b);

/// All backends usable on this machine, reference first.
std::vector<Backend> supported_backends();

/// Currently selected backend. Resolved on first use: the best supported
/// backend, unless the environment variable MGST_KERNEL_BACKEND names one
/// of "scalar" or "avx2".
Backend active_backend();

/// Select a backend explicitly. Returns false (and leaves the selection
/// unchanged) if the backend is not supported on this CPU.
bool set_backend(Backend b);

// ---------------------------------------------------------------------------
// Vector ops (length n). Reductions return double accumulations.
// ---------------------------------------------------------------------------

template <typename T> double dot(const T* a, const T* b, std::size_t n);
template <typename T> double sum(const T* x, std::size_t n);
template <typename T> double sum_sq_diff(const T* a, const T* b, std::size_t n);
/// sum_j ((a_j - b_j) * m_j)^2
template <typename T>
double masked_sum_sq_diff(const T* a, const T* b, const T* m, std::size_t n);
template <typename T> double max_abs(const T* x, std::size_t n);

template <typename T> void axpy(T* y, T alpha, const T* x, std::size_t n);
template <typename T> void scale(T* x, T alpha, std::size_t n);
template <typename T> void clamp(T* x, std::size_t n, T lo, T hi);
/// out_j = a_j * b_j
template <typename T> void hadamard(T* out, const T* a, const T* b, std::size_t n);
template <typename T> void relu(T* out, const T* in, std::size_t n);
/// dst_j = activation_j > 0 ? grad_j : 0
template <typename T>
void relu_backward(T* dst, const T* activation, const T* grad, std::size_t n);
/// acc_j += alpha * x_j  (double accumulator)
template <typename T>
void accum_axpy(double* acc, double alpha, const T* x, std::size_t n);
/// dst_j += coef * src_j * mask_j
template <typename T>
void masked_scaled_add(T* dst, const T* src, const T* mask, double coef, std::size_t n);
template <typename T>
void masked_scaled_add_d(T* dst, const double* src, const T* mask, double coef, std::size_t n);

// ---------------------------------------------------------------------------
// Image-plane ops. Feature planes are stored channel-major: [c][y*width + x].
// ---------------------------------------------------------------------------

/// 3x3 convolution, stride 1, zero padding 1 ("same"). weights laid out
/// [out][in][ky][kx], bias length out_ch. May be called with in == out only
/// when the buffers do not alias (they never do in this codebase).
template <typename T>
void conv3x3(const T* in, int height, int width, int in_ch,
             const T* weights, const T* bias, T* out, int out_ch);

/// 2x2 mean pooling, stride 2. Output is (height/2) x (width/2).
template <typename T>
void avgpool2x2(const T* in, int height, int width, int channels, T* out);

/// Adjoint of avgpool2x2: distributes 1/4 of each pooled gradient to the
/// four source cells. out_height/out_width are the pooled dimensions.
template <typename T>
void avgpool2x2_backward(const T* dout, int out_height, int out_width,
                         int channels, T* din);

// ---------------------------------------------------------------------------
// Masked Gram ops. F is n x m row-major, A is a length-m spatial map,
// G and D are n x n row-major double matrices.
// ---------------------------------------------------------------------------

/// G = (F .* A)(F .* A)^T, unnormalized. scratch must hold n*m elements.
template <typename T>
void masked_gram(const T* f, const T* a, int n, int m, double* g, T* scratch);

/// df += coef * (D * (F .* A)) .* A for symmetric D. scratch: n*m elements.
template <typename T>
void gram_backprop(const double* d, const T* f, const T* a, int n, int m,
                   double coef, T* df, T* scratch);

// Reference implementations, callable directly (equivalence tests and the
// scalar row of the benchmark table go through these names as well as
// through set_backend).
namespace scalar {
template <typename T> double dot(const T* a, const T* b, std::size_t n);
template <typename T> double sum(const T* x, std::size_t n);
template <typename T> double sum_sq_diff(const T* a, const T* b, std::size_t n);
template <typename T>
double masked_sum_sq_diff(const T* a, const T* b, const T* m, std::size_t n);
template <typename T> double max_abs(const T* x, std::size_t n);
template <typename T> void axpy(T* y, T alpha, const T* x, std::size_t n);
template <typename T> void scale(T* x, T alpha, std::size_t n);
template <typename T> void clamp(T* x, std::size_t n, T lo, T hi);
template <typename T> void hadamard(T* out, const T* a, const T* b, std::size_t n);
template <typename T> void relu(T* out, const T* in, std::size_t n);
template <typename T>
void relu_backward(T* dst, const T* activation, const T* grad, std::size_t n);
template <typename T>
void accum_axpy(double* acc, double alpha, const T* x, std::size_t n);
template <typename T>
void masked_scaled_add(T* dst, const T* src, const T* mask, double coef, std::size_t n);
template <typename T>
void masked_scaled_add_d(T* dst, const double* src, const T* mask, double coef, std::size_t n);
template <typename T>
void conv3x3(const T* in, int height, int width, int in_ch,
             const T* weights, const T* bias, T* out, int out_ch);
template <typename T>
void avgpool2x2(const T* in, int height, int width, int channels, T* out);
template <typename T>
void avgpool2x2_backward(const T* dout, int out_height, int out_width,
                         int channels, T* din);
} // namespace scalar

#if MGST_HAVE_AVX2_BACKEND
namespace avx2 {
template <typename T> double dot(const T* a, const T* b, std::size_t n);
template <typename T> double sum(const T* x, std::size_t n);
template <typename T> double sum_sq_diff(const T* a, const T* b, std::size_t n);
template <typename T>
double masked_sum_sq_diff(const T* a, const T* b, const T* m, std::size_t n);
template <typename T> double max_abs(const T* x, std::size_t n);
template <typename T> void axpy(T* y, T alpha, const T* x, std::size_t n);
template <typename T> void scale(T* x, T alpha, std::size_t n);
template <typename T> void clamp(T* x, std::size_t n, T lo, T hi);
template <typename T> void hadamard(T* out, const T* a, const T* b, std::size_t n);
template <typename T> void relu(T* out, const T* in, std::size_t n);
template <typename T>
void relu_backward(T* dst, const T* activation, const T* grad, std::size_t n);
template <typename T>
void accum_axpy(double* acc, double alpha, const T* x, std::size_t n);
template <typename T>
void masked_scaled_add(T* dst, const T* src, const T* mask, double coef, std::size_t n);
template <typename T>
void masked_scaled_add_d(T* dst, const double* src, const T* mask, double coef, std::size_t n);
template <typename T>
void conv3x3(const T* in, int height, int width, int in_ch,
             const T* weights, const T* bias, T* out, int out_ch);
template <typename T>
void avgpool2x2(const T* in, int height, int width, int channels, T* out);
template <typename T>
void avgpool2x2_backward(const T* dout, int out_height, int out_width,
                         int channels, T* din);
} // namespace avx2
#endif

} // namespace mgst::kernels

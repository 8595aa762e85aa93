#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops used by the MLP training stack. Each kernel has a
// scalar reference implementation and an AVX2 variant; the active backend is
// picked at load time from CPU capabilities and can be pinned via
// set_backend() or the PSEUDOPOSE_KERNELS environment variable
// ("scalar"/"avx2"). All matrices are dense row-major double.

namespace pseudopose::kernels {

enum class Backend { Scalar, Avx2 };

Backend active_backend();
void set_backend(Backend b);
bool avx2_supported();
std::string backend_name(Backend b);

// C[M x N] += A[M x K] * B[K x N]
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n);

// C[M x N] += A[M x K] * B[N x K]^T
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n);

// C[K x N] += A[M x K]^T * B[M x N]
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n);

// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, size_t n);

// dx[i] = dy[i] * (1 - y[i]^2), tanh backward with y = tanh(x)
void tanh_backward(const double* y, const double* dy, double* dx, size_t n);

// Adam step: m,v updated in place, p -= lr_t * m_hat / (sqrt(v_hat) + eps).
// Bias correction factors are passed in precomputed.
void adam_update(double* p, double* m, double* v, const double* g, size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias_c1, double bias_c2);

namespace detail {
void gemm_nn_scalar(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_nt_scalar(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_tn_scalar(const double* a, const double* b, double* c, int m, int k, int n);
void axpy_scalar(double alpha, const double* x, double* y, size_t n);
void tanh_backward_scalar(const double* y, const double* dy, double* dx, size_t n);
void adam_update_scalar(double* p, double* m, double* v, const double* g, size_t n,
                        double lr, double beta1, double beta2, double eps,
                        double bias_c1, double bias_c2);

#if defined(__x86_64__) || defined(_M_X64)
#define PSEUDOPOSE_HAVE_AVX2_BUILD 1
void gemm_nn_avx2(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_nt_avx2(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_tn_avx2(const double* a, const double* b, double* c, int m, int k, int n);
void axpy_avx2(double alpha, const double* x, double* y, size_t n);
void tanh_backward_avx2(const double* y, const double* dy, double* dx, size_t n);
void adam_update_avx2(double* p, double* m, double* v, const double* g, size_t n,
                      double lr, double beta1, double beta2, double eps,
                      double bias_c1, double bias_c2);
#endif
}  // namespace detail

}  // namespace pseudopose::kernels

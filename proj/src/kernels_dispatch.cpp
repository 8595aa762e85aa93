#include <cstdlib>
#include <cstring>

#include "pseudopose/kernels.hpp"

namespace pseudopose::kernels {

namespace {

Backend detect_backend() {
#if defined(PSEUDOPOSE_HAVE_AVX2_BUILD)
    if (const char* env = std::getenv("PSEUDOPOSE_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
        if (std::strcmp(env, "avx2") == 0) return Backend::Avx2;
    }
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return Backend::Avx2;
#endif
    return Backend::Scalar;
}

Backend g_backend = detect_backend();

}  // namespace

Backend active_backend() { return g_backend; }

void set_backend(Backend b) { g_backend = b; }

bool avx2_supported() {
#if defined(PSEUDOPOSE_HAVE_AVX2_BUILD)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

std::string backend_name(Backend b) {
    return b == Backend::Avx2 ? "avx2" : "scalar";
}

#if defined(PSEUDOPOSE_HAVE_AVX2_BUILD)
#define PSEUDOPOSE_DISPATCH(fn, ...)                       \
    if (g_backend == Backend::Avx2) {                      \
        detail::fn##_avx2(__VA_ARGS__);                    \
    } else {                                               \
        detail::fn##_scalar(__VA_ARGS__);                  \
    }
#else
#define PSEUDOPOSE_DISPATCH(fn, ...) detail::fn##_scalar(__VA_ARGS__);
#endif

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    PSEUDOPOSE_DISPATCH(gemm_nn, a, b, c, m, k, n)
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
    PSEUDOPOSE_DISPATCH(gemm_nt, a, b, c, m, k, n)
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    PSEUDOPOSE_DISPATCH(gemm_tn, a, b, c, m, k, n)
}

void axpy(double alpha, const double* x, double* y, size_t n) {
    PSEUDOPOSE_DISPATCH(axpy, alpha, x, y, n)
}

void tanh_backward(const double* y, const double* dy, double* dx, size_t n) {
    PSEUDOPOSE_DISPATCH(tanh_backward, y, dy, dx, n)
}

void adam_update(double* p, double* m, double* v, const double* g, size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias_c1, double bias_c2) {
    PSEUDOPOSE_DISPATCH(adam_update, p, m, v, g, n, lr, beta1, beta2, eps, bias_c1, bias_c2)
}

}  // namespace pseudopose::kernels

#undef PSEUDOPOSE_DISPATCH

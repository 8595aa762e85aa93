#include "pseudopose/kernels.hpp"

#if defined(PSEUDOPOSE_HAVE_AVX2_BUILD)

#include <immintrin.h>

#include <cmath>

namespace pseudopose::kernels::detail {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

}  // namespace

void gemm_nn_avx2(const double* a, const double* b, double* c, int m, int k, int n) {
    const int n4 = n & ~3;
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        int p = 0;
        // two k-steps per pass keeps the FMA ports busier
        for (; p + 1 < k; p += 2) {
            const __m256d av0 = _mm256_set1_pd(ai[p]);
            const __m256d av1 = _mm256_set1_pd(ai[p + 1]);
            const double* bp0 = b + static_cast<size_t>(p) * n;
            const double* bp1 = bp0 + n;
            int j = 0;
            for (; j < n4; j += 4) {
                __m256d cv = _mm256_loadu_pd(ci + j);
                cv = _mm256_fmadd_pd(av0, _mm256_loadu_pd(bp0 + j), cv);
                cv = _mm256_fmadd_pd(av1, _mm256_loadu_pd(bp1 + j), cv);
                _mm256_storeu_pd(ci + j, cv);
            }
            for (; j < n; ++j) ci[j] += ai[p] * bp0[j] + ai[p + 1] * bp1[j];
        }
        for (; p < k; ++p) {
            const __m256d av = _mm256_set1_pd(ai[p]);
            const double* bp = b + static_cast<size_t>(p) * n;
            int j = 0;
            for (; j < n4; j += 4) {
                __m256d cv = _mm256_loadu_pd(ci + j);
                cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), cv);
                _mm256_storeu_pd(ci + j, cv);
            }
            for (; j < n; ++j) ci[j] += ai[p] * bp[j];
        }
    }
}

void gemm_nt_avx2(const double* a, const double* b, double* c, int m, int k, int n) {
    const int k4 = k & ~3;
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<size_t>(j) * k;
            __m256d acc = _mm256_setzero_pd();
            int p = 0;
            for (; p < k4; p += 4)
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(ai + p), _mm256_loadu_pd(bj + p), acc);
            double s = hsum(acc);
            for (; p < k; ++p) s += ai[p] * bj[p];
            ci[j] += s;
        }
    }
}

void gemm_tn_avx2(const double* a, const double* b, double* c, int m, int k, int n) {
    const int n4 = n & ~3;
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        const double* bi = b + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const __m256d av = _mm256_set1_pd(ai[p]);
            double* cp = c + static_cast<size_t>(p) * n;
            int j = 0;
            for (; j < n4; j += 4) {
                __m256d cv = _mm256_loadu_pd(cp + j);
                cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(bi + j), cv);
                _mm256_storeu_pd(cp + j, cv);
            }
            for (; j < n; ++j) cp[j] += ai[p] * bi[j];
        }
    }
}

void axpy_avx2(double alpha, const double* x, double* y, size_t n) {
    const size_t n4 = n & ~size_t{3};
    const __m256d av = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i < n4; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void tanh_backward_avx2(const double* y, const double* dy, double* dx, size_t n) {
    const size_t n4 = n & ~size_t{3};
    const __m256d one = _mm256_set1_pd(1.0);
    size_t i = 0;
    for (; i < n4; i += 4) {
        const __m256d yv = _mm256_loadu_pd(y + i);
        const __m256d g = _mm256_fnmadd_pd(yv, yv, one);
        _mm256_storeu_pd(dx + i, _mm256_mul_pd(_mm256_loadu_pd(dy + i), g));
    }
    for (; i < n; ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
}

void adam_update_avx2(double* p, double* m, double* v, const double* g, size_t n,
                      double lr, double beta1, double beta2, double eps,
                      double bias_c1, double bias_c2) {
    const size_t n4 = n & ~size_t{3};
    const __m256d b1 = _mm256_set1_pd(beta1);
    const __m256d b2 = _mm256_set1_pd(beta2);
    const __m256d ob1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d ob2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d lrv = _mm256_set1_pd(lr);
    const __m256d epsv = _mm256_set1_pd(eps);
    const __m256d ic1 = _mm256_set1_pd(1.0 / bias_c1);
    const __m256d ic2 = _mm256_set1_pd(1.0 / bias_c2);
    size_t i = 0;
    for (; i < n4; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        __m256d mv = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        mv = _mm256_fmadd_pd(ob1, gv, _mm256_mul_pd(b1, mv));
        vv = _mm256_fmadd_pd(ob2, _mm256_mul_pd(gv, gv), _mm256_mul_pd(b2, vv));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mh = _mm256_mul_pd(mv, ic1);
        const __m256d vh = _mm256_mul_pd(vv, ic2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vh), epsv);
        __m256d pv = _mm256_loadu_pd(p + i);
        pv = _mm256_sub_pd(pv, _mm256_div_pd(_mm256_mul_pd(lrv, mh), denom));
        _mm256_storeu_pd(p + i, pv);
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mh = m[i] / bias_c1;
        const double vh = v[i] / bias_c2;
        p[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
}

}  // namespace pseudopose::kernels::detail

#endif  // PSEUDOPOSE_HAVE_AVX2_BUILD

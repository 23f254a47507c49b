// Compiled with -mavx2 -mfma when the toolchain targets x86-64; only reached
// after a runtime CPU check.
#include "gigags/simd/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace gigags::simd::detail {
namespace {

inline double
hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double
dot_avx2(const double *a, const double *b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i)
        acc += a[i] * b[i];
    return acc;
}

void
axpy_avx2(double alpha, const double *x, double *y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

void
correlate_avx2(const double *in, std::size_t stride, std::size_t n_out, const double *taps,
               std::size_t n_taps, double *out) {
    std::size_t i = 0;
    if (stride == 1) {
        for (; i + 4 <= n_out; i += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t k = 0; k < n_taps; ++k)
                acc = _mm256_fmadd_pd(_mm256_set1_pd(taps[k]), _mm256_loadu_pd(in + i + k), acc);
            _mm256_storeu_pd(out + i, acc);
        }
    } else {
        const auto st = static_cast<long long>(stride);
        const __m256i offs = _mm256_set_epi64x(3 * st, 2 * st, st, 0);
        for (; i + 4 <= n_out; i += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t k = 0; k < n_taps; ++k) {
                const __m256d v = _mm256_i64gather_pd(in + (i + k) * stride, offs, 8);
                acc = _mm256_fmadd_pd(_mm256_set1_pd(taps[k]), v, acc);
            }
            _mm256_storeu_pd(out + i, acc);
        }
    }
    for (; i < n_out; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n_taps; ++k)
            acc += taps[k] * in[(i + k) * stride];
        out[i] = acc;
    }
}

void
conic_power_avx2(double a, double b, double c, double dx0, double dy, std::size_t n, double *out) {
    const double cy = c * dy * dy;
    const double by = 2.0 * b * dy;
    const __m256d va = _mm256_set1_pd(a), vby = _mm256_set1_pd(by), vcy = _mm256_set1_pd(cy);
    const __m256d half = _mm256_set1_pd(-0.5), four = _mm256_set1_pd(4.0);
    __m256d dx = _mm256_add_pd(_mm256_set1_pd(dx0), _mm256_set_pd(3.0, 2.0, 1.0, 0.0));
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        // (a*dx + by)*dx + cy
        __m256d q = _mm256_fmadd_pd(_mm256_fmadd_pd(va, dx, vby), dx, vcy);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(half, q));
        dx = _mm256_add_pd(dx, four);
    }
    for (; i < n; ++i) {
        const double d = dx0 + double(i);
        out[i] = -0.5 * (a * d * d + by * d + cy);
    }
}

void
tsdf_update_avx2(double *value, double *weight, const double *sdf, std::size_t n, double truncation,
                 double max_weight) {
    const __m256d vtr = _mm256_set1_pd(truncation), vntr = _mm256_set1_pd(-truncation);
    const __m256d one = _mm256_set1_pd(1.0), vmax = _mm256_set1_pd(max_weight);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d s = _mm256_loadu_pd(sdf + i);
        // ordered compare is false for NaN
        const __m256d live = _mm256_cmp_pd(s, vntr, _CMP_GT_OQ);
        const __m256d t = _mm256_min_pd(one, _mm256_div_pd(s, vtr));
        const __m256d w = _mm256_loadu_pd(weight + i);
        const __m256d v = _mm256_loadu_pd(value + i);
        const __m256d wp1 = _mm256_add_pd(w, one);
        const __m256d nv = _mm256_div_pd(_mm256_add_pd(_mm256_mul_pd(w, v), t), wp1);
        const __m256d nw = _mm256_min_pd(wp1, vmax);
        _mm256_storeu_pd(value + i, _mm256_blendv_pd(v, nv, live));
        _mm256_storeu_pd(weight + i, _mm256_blendv_pd(w, nw, live));
    }
    for (; i < n; ++i) {
        const double s = sdf[i];
        if (std::isnan(s) || s <= -truncation)
            continue;
        const double t = std::min(1.0, s / truncation);
        const double w = weight[i];
        value[i] = (w * value[i] + t) / (w + 1.0);
        weight[i] = std::min(w + 1.0, max_weight);
    }
}

const KernelTable table{
    Isa::Avx2, dot_avx2, axpy_avx2, correlate_avx2, conic_power_avx2, tsdf_update_avx2,
};

} // namespace

const KernelTable *
avx2_table() {
    return &table;
}

} // namespace gigags::simd::detail

#else

namespace gigags::simd::detail {
const KernelTable *
avx2_table() {
    return nullptr;
}
} // namespace gigags::simd::detail

#endif

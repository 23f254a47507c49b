#include "gigags/simd/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

#include <algorithm>
#include <cmath>

namespace gigags::simd::detail {
namespace {

double
dot_neon(const double *a, const double *b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i)
        acc += a[i] * b[i];
    return acc;
}

void
axpy_neon(double alpha, const double *x, double *y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

void
correlate_neon(const double *in, std::size_t stride, std::size_t n_out, const double *taps,
               std::size_t n_taps, double *out) {
    std::size_t i = 0;
    if (stride == 1) {
        for (; i + 2 <= n_out; i += 2) {
            float64x2_t acc = vdupq_n_f64(0.0);
            for (std::size_t k = 0; k < n_taps; ++k)
                acc = vfmaq_n_f64(acc, vld1q_f64(in + i + k), taps[k]);
            vst1q_f64(out + i, acc);
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
conic_power_neon(double a, double b, double c, double dx0, double dy, std::size_t n, double *out) {
    const double cy = c * dy * dy;
    const double by = 2.0 * b * dy;
    const float64x2_t va = vdupq_n_f64(a), vby = vdupq_n_f64(by), vcy = vdupq_n_f64(cy);
    const double init[2] = {dx0, dx0 + 1.0};
    float64x2_t dx = vld1q_f64(init);
    const float64x2_t two = vdupq_n_f64(2.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t q = vfmaq_f64(vcy, vfmaq_f64(vby, va, dx), dx);
        vst1q_f64(out + i, vmulq_n_f64(q, -0.5));
        dx = vaddq_f64(dx, two);
    }
    for (; i < n; ++i) {
        const double d = dx0 + double(i);
        out[i] = -0.5 * (a * d * d + by * d + cy);
    }
}

const KernelTable table{
    Isa::Neon, dot_neon, axpy_neon, correlate_neon, conic_power_neon, scalar_table.tsdf_update,
};

} // namespace

const KernelTable *
neon_table() {
    return &table;
}

} // namespace gigags::simd::detail

#else

namespace gigags::simd::detail {
const KernelTable *
neon_table() {
    return nullptr;
}
} // namespace gigags::simd::detail

#endif

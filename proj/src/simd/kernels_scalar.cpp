#include "gigags/simd/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace gigags::simd::detail {
namespace {

double
dot_scalar(const double *a, const double *b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += a[i] * b[i];
    return acc;
}

void
axpy_scalar(double alpha, const double *x, double *y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        y[i] += alpha * x[i];
}

void
correlate_scalar(const double *in, std::size_t stride, std::size_t n_out, const double *taps,
                 std::size_t n_taps, double *out) {
    for (std::size_t i = 0; i < n_out; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n_taps; ++k)
            acc += taps[k] * in[(i + k) * stride];
        out[i] = acc;
    }
}

void
conic_power_scalar(double a, double b, double c, double dx0, double dy, std::size_t n, double *out) {
    const double cy = c * dy * dy;
    const double by = 2.0 * b * dy;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = dx0 + double(i);
        out[i] = -0.5 * (a * dx * dx + by * dx + cy);
    }
}

void
tsdf_update_scalar(double *value, double *weight, const double *sdf, std::size_t n, double truncation,
                   double max_weight) {
    for (std::size_t i = 0; i < n; ++i) {
        const double s = sdf[i];
        if (std::isnan(s) || s <= -truncation)
            continue;
        const double t = std::min(1.0, s / truncation);
        const double w = weight[i];
        value[i] = (w * value[i] + t) / (w + 1.0);
        weight[i] = std::min(w + 1.0, max_weight);
    }
}

} // namespace

const KernelTable scalar_table{
    Isa::Scalar, dot_scalar, axpy_scalar, correlate_scalar, conic_power_scalar, tsdf_update_scalar,
};

} // namespace gigags::simd::detail

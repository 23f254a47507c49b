#include "gigags/pipeline/metrics.hpp"

#include "gigags/core/error.hpp"
#include "gigags/loss/ssim.hpp"

#include <cmath>

namespace gigags {

double
psnr(const ImageBuffer &a, const ImageBuffer &b) {
    if (!a.same_shape(b) || a.empty())
        throw Error(ErrorCode::DimensionMismatch, "psnr: images differ in shape");
    const auto x = a.data(), y = b.data();
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        s += (x[i] - y[i]) * (x[i] - y[i]);
    const double mse = s / double(x.size());
    return mse < 1e-10 ? 99.0 : 10.0 * std::log10(1.0 / mse);
}

double
ssim_metric(const ImageBuffer &a, const ImageBuffer &b) {
    if (!a.same_shape(b))
        throw Error(ErrorCode::DimensionMismatch, "ssim: images differ in shape");
    return ssim(a, b);
}

} // namespace gigags

#pragma once

#include "gigags/core/image.hpp"

namespace gigags {

/// 10 log10(1 / MSE) over all channels of [0,1] images; 99 dB when MSE < 1e-10.
/// Throws DimensionMismatch.
double psnr(const ImageBuffer &a, const ImageBuffer &b);

/// Mean SSIM, the same implementation the appearance loss uses. Throws DimensionMismatch.
double ssim_metric(const ImageBuffer &a, const ImageBuffer &b);

} // namespace gigags

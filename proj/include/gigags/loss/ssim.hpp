#pragma once

#include "gigags/core/image.hpp"

namespace gigags {

/// Structural similarity with an 11x11 Gaussian window (sigma 1.5), constants
/// c1 = 0.01^2 and c2 = 0.03^2 for data in [0,1]. The mean is taken over every
/// window position that fits inside the image, and over channels. This is the
/// single implementation behind both the training loss and the evaluation metric.
///
/// When grad_a is non-null it receives dSSIM/da (same shape as a).
/// Throws DimensionMismatch for differing shapes and InvalidArgument for images
/// smaller than the window.
double ssim(const ImageBuffer &a, const ImageBuffer &b, ImageBuffer *grad_a = nullptr);

} // namespace gigags

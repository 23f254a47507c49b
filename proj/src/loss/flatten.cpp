#include "gigags/loss/flatten.hpp"

#include "gigags/core/error.hpp"
#include "gigags/core/kink_trace.hpp"

namespace gigags {

double
flatten_loss(std::span<const GaussianKernel> kernels, std::span<KernelGrad> grads) {
    if (kernels.empty())
        throw Error(ErrorCode::EmptySet, "flatten_loss: no kernels");
    if (!grads.empty() && grads.size() != kernels.size())
        throw Error(ErrorCode::ShapeMismatch, "flatten_loss: gradient size mismatch");
    const double inv = 1.0 / double(kernels.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < kernels.size(); ++i) {
        const Vec3 s = kernels[i].scale();
        const int axis = min_scale_axis(s);
        note_kink(axis);
        sum += s[axis];
        // scale = exp(log_scale) > 0, so |s| = s and d s / d log_s = s
        if (!grads.empty())
            grads[i].log_scale[axis] += inv * s[axis];
    }
    return sum * inv;
}

} // namespace gigags

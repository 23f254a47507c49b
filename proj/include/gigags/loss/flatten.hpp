#pragma once

#include "gigags/field/kernel.hpp"

#include <span>

namespace gigags {

/// Mean over kernels of the smallest scale. When grads is non-empty it must
/// match kernels in size; the subgradient is added to the minimal axis only.
/// Throws EmptySet for an empty kernel list.
double flatten_loss(std::span<const GaussianKernel> kernels, std::span<KernelGrad> grads = {});

} // namespace gigags

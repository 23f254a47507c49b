#pragma once

// Data-parallel inner loops used by the renderer, the SSIM filter, the MLPs and
// TSDF fusion. Every kernel has a scalar reference implementation; vector
// variants are selected once at runtime and must agree with the reference to
// within rounding (see tests/unit/simd_equivalence_test.cpp).

#include <cstddef>
#include <string_view>

namespace gigags::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);

struct KernelTable {
    Isa isa;

    double (*dot)(const double *a, const double *b, std::size_t n);

    // y += alpha * x
    void (*axpy)(double alpha, const double *x, double *y, std::size_t n);

    // out[i] = sum_k taps[k] * in[(i + k) * stride], i in [0, n_out)
    void (*correlate)(const double *in, std::size_t stride, std::size_t n_out, const double *taps,
                      std::size_t n_taps, double *out);

    // Gaussian exponent along a pixel row:
    // out[i] = -0.5 * (a*dx^2 + 2*b*dx*dy + c*dy^2), dx = dx0 + i
    void (*conic_power)(double a, double b, double c, double dx0, double dy, std::size_t n,
                        double *out);

    // Running-average TSDF update for one row of voxels. A NaN sdf marks an
    // unobserved voxel; samples with sdf <= -truncation are ignored.
    void (*tsdf_update)(double *value, double *weight, const double *sdf, std::size_t n,
                        double truncation, double max_weight);
};

/// Table for the best ISA supported by this CPU. Setting GIGAGS_SIMD=scalar in
/// the environment forces the reference kernels.
const KernelTable &kernels();

/// Table for a specific ISA; falls back to scalar when unavailable.
const KernelTable &kernels(Isa isa);

bool isa_available(Isa isa);

namespace detail {
extern const KernelTable scalar_table;
const KernelTable *avx2_table();
const KernelTable *neon_table();
} // namespace detail

} // namespace gigags::simd

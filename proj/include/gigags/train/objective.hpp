#pragma once

#include "gigags/field/kernel.hpp"
#include "gigags/loss/appearance.hpp"
#include "gigags/loss/local_geometry.hpp"
#include "gigags/loss/multiview.hpp"
#include "gigags/loss/total.hpp"
#include "gigags/render/renderer.hpp"

#include <span>
#include <vector>

namespace gigags {

struct ObjectiveConfig {
    LossWeights weights;
    LocalGeomConfig local;
    PatchConfig patch;
    OcclusionConfig occlusion;
    SsimTarget ssim_target = SsimTarget::Render;
    RenderSettings render;
    DepthSettings depth;

    /// Renderer and depth cut-offs disabled: no alpha floor, no early
    /// termination, every pixel with a non-degenerate plane gets a depth.
    static ObjectiveConfig smooth();
};

/// Kernels decoded for one view.
struct ViewKernels {
    const View *view = nullptr;
    std::span<const GaussianKernel> kernels;
};

struct ObjectiveResult {
    LossTerms terms;
    double total = 0.0;
    std::vector<KernelGrad> ref_grads; // indexed like ref.kernels
    std::vector<KernelGrad> nbr_grads; // indexed like nbr.kernels (multi-view iterations only)
    std::vector<double> embedding_grad;
    std::vector<double> phi_grad;
    RenderBuffers ref_buffers;
    ImageBuffer adjusted;
    int geo_pixels = 0;
    int ncc_patches = 0;
    bool multiview_active = false;
};

/// Full training objective for one reference view (and optionally one neighbor):
/// w_flatten L_flatten + L_app + w_local L_local + w_mv (L_ncc + L_geo).
/// `appearance` may be null, in which case I_a = I. The ground truth is ref.view->image.
ObjectiveResult evaluate_objective(const ObjectiveConfig &cfg, int iter, const ViewKernels &ref,
                                   const ViewKernels *nbr, const AppearanceModel *appearance,
                                   bool want_grad = true);

} // namespace gigags

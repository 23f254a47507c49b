#pragma once

#include "gigags/core/image.hpp"
#include "gigags/scene/camera.hpp"

#include <cstdint>
#include <vector>

namespace gigags {

struct AppearanceConfig {
    int embedding_dim = 16;
    int hidden = 64;
    int downsample = 16;
};

/// Per-view embeddings plus a small perceptron that maps
/// (embedding, coarse luminance of the render) to a positive RGB multiplier.
/// The multiplier is computed on a coarse grid and upsampled bilinearly.
struct AppearanceModel {
    AppearanceConfig config;
    std::vector<std::vector<double>> embeddings; // indexed by View::embedding_id
    std::vector<double> phi;                     // W1 | b1 | W2 | b2

    int input_dim() const { return config.embedding_dim + 1; }
    std::size_t w1_offset() const { return 0; }
    std::size_t b1_offset() const { return std::size_t(config.hidden * input_dim()); }
    std::size_t w2_offset() const { return b1_offset() + std::size_t(config.hidden); }
    std::size_t b2_offset() const { return w2_offset() + std::size_t(3 * config.hidden); }
    std::size_t phi_size() const { return b2_offset() + 3; }

    /// Random embeddings and first layer; the output layer starts at zero so
    /// every multiplier is exactly 1 until training moves it.
    static AppearanceModel create(const AppearanceConfig &config, int num_views, std::uint64_t seed);
};

struct AppearanceCache {
    int grid_w = 0, grid_h = 0;
    std::vector<double> luminance;  // per coarse cell
    std::vector<double> hidden_pre; // per cell x hidden
    std::vector<double> multiplier; // per cell x 3 (after exp)
    ImageBuffer pixel_multiplier;   // upsampled, RGB
};

/// I_a = M(I, emb_v) * I elementwise. Throws UnknownView when the view's
/// embedding is missing and ShapeMismatch for a non-RGB render.
ImageBuffer apply_appearance(const AppearanceModel &model, const ImageBuffer &render, const View &view,
                             AppearanceCache *cache = nullptr);

/// Accumulates gradients of a scalar loss given dL/dI_a.
/// grad_render, grad_embedding and grad_phi are added to (sized by the caller).
void apply_appearance_backward(const AppearanceModel &model, const ImageBuffer &render, const View &view,
                               const AppearanceCache &cache, const ImageBuffer &grad_adjusted,
                               ImageBuffer &grad_render, std::vector<double> &grad_embedding,
                               std::vector<double> &grad_phi);

enum class SsimTarget { Render, Adjusted };

struct AppearanceLoss {
    double value = 0.0;
    double l1 = 0.0;
    double dssim = 0.0;
    ImageBuffer grad_render;   // dL/dI through the SSIM term (Render target)
    ImageBuffer grad_adjusted; // dL/dI_a through the L1 term (and SSIM for the Adjusted target)
};

/// L1(I_a, I0) + lambda * (1 - SSIM(x, I0)) / 2 where x is I or I_a.
/// Throws DimensionMismatch when shapes differ.
AppearanceLoss appearance_loss(const ImageBuffer &render, const ImageBuffer &adjusted, const ImageBuffer &target,
                               double lambda, SsimTarget ssim_target = SsimTarget::Render,
                               bool want_grad = true);

} // namespace gigags

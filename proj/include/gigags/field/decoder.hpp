#pragma once

#include "gigags/field/anchor_grid.hpp"
#include "gigags/field/kernel.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gigags {

/// Two-layer perceptron shared by all anchors of one partition:
///   input  = feature (F) | unit view direction (3) | distance / d_max (1)
///   hidden = relu(W1 input + b1), H units
///   output = W2 hidden + b2, 11 values per kernel:
///            opacity logit, color logits (3), quaternion delta (4), log-scale correction (3)
/// Parameters are packed as [W1 (H x In, row-major) | b1 | W2 (Out x H) | b2].
struct DecoderWeights {
    AnchorShape shape;
    int hidden = 32;
    std::vector<double> params;

    static constexpr int kOutputsPerKernel = 11;

    int input_dim() const { return shape.feature_dim + 4; }
    int output_dim() const { return kOutputsPerKernel * shape.kernels; }
    std::size_t param_count() const {
        return std::size_t(hidden) * std::size_t(input_dim() + 1) +
               std::size_t(output_dim()) * std::size_t(hidden + 1);
    }
    std::size_t w1_offset() const { return 0; }
    std::size_t b1_offset() const { return std::size_t(hidden) * std::size_t(input_dim()); }
    std::size_t w2_offset() const { return b1_offset() + std::size_t(hidden); }
    std::size_t b2_offset() const { return w2_offset() + std::size_t(output_dim()) * std::size_t(hidden); }

    static DecoderWeights zeros(const AnchorShape &shape, int hidden);
    /// Uniform fan-in initialization; the output layer is scaled by `output_gain`.
    static DecoderWeights random(const AnchorShape &shape, int hidden, std::uint64_t seed,
                                 double output_gain = 0.1);

    friend bool operator==(const DecoderWeights &, const DecoderWeights &) = default;
};

/// Intermediate activations kept for the backward pass.
struct DecodeCache {
    std::vector<double> input;
    std::vector<double> pre;
    std::vector<double> hidden;
};

/// Decodes n kernels for `view`. Kernel j: mu = center + offset_j * v_level,
/// quaternion = delta + (1,0,0,0), log-scale = anchor log-scale_j + correction,
/// opacity/color logits taken directly from the output. Throws ShapeMismatch.
std::vector<GaussianKernel> decode_anchor(const Anchor &anchor, const DecoderWeights &w,
                                          const View &view, const LodConfig &lod,
                                          DecodeCache *cache = nullptr);

/// Accumulates into anchor_grad (anchor.params layout) and decoder_grad
/// (w.params layout) given the gradients of the decoded kernels. When
/// `center_grad` is set, the gradient with respect to the anchor center
/// (through kernel positions and the view-direction and distance inputs) is
/// added to it; `view` must then be the view used for decoding.
void decode_anchor_backward(const Anchor &anchor, const DecoderWeights &w, const LodConfig &lod,
                            const DecodeCache &cache, std::span<const KernelGrad> kernel_grads,
                            std::span<double> anchor_grad, std::span<double> decoder_grad,
                            Vec3 *center_grad = nullptr, const View *view = nullptr);

} // namespace gigags

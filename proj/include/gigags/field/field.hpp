#pragma once

#include "gigags/field/anchor_grid.hpp"
#include "gigags/field/decoder.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace gigags {

/// Anchor grid plus the decoders it references. Anchor::partition indexes `decoders`.
struct GaussianField {
    AnchorGrid grid;
    std::vector<DecoderWeights> decoders;

    const DecoderWeights &decoder_for(const Anchor &a) const;
};

/// Decodes every anchor in `anchors` for `view` and concatenates the kernels.
std::vector<GaussianKernel> decode_anchors(const GaussianField &field,
                                           const std::vector<const Anchor *> &anchors,
                                           const View &view);

// ---- growth and pruning ---------------------------------------------------

struct AnchorStats {
    double grad_sum = 0.0;      // sum over observations of the mean offset-gradient norm
    int observations = 0;
    double max_opacity = 0.0;
    Vec3 weighted_position = Vec3::Zero(); // sum of |grad| * kernel position
    double weight = 0.0;
};

using AnchorStatsMap = std::map<AnchorKey, AnchorStats>;

/// Folds one rendered observation of `anchor` into its statistics.
void accumulate_stats(AnchorStats &stats, const Anchor &anchor, const LodConfig &lod,
                      std::span<const GaussianKernel> kernels, std::span<const KernelGrad> grads);

struct DensifyConfig {
    double grow_threshold = 2e-4; // mean offset-gradient norm that triggers growth
    double prune_opacity = 0.01;
    int interval = 100;
};

struct DensifyReport {
    std::vector<AnchorKey> grown;
    std::vector<AnchorKey> pruned;
};

/// Grows a child anchor one level finer (at the gradient-weighted kernel position)
/// for anchors whose mean gradient exceeds the threshold, and removes observed
/// anchors whose maximum decoded opacity stayed below prune_opacity.
DensifyReport densify_and_prune(AnchorGrid &grid, const AnchorStatsMap &stats,
                                const DensifyConfig &cfg, const AnchorInit &init, std::uint64_t seed);

// ---- checkpoint -----------------------------------------------------------
//
// Text format, one record per line, numbers printed with 17 significant digits:
//   gigags-checkpoint 1
//   lod <v0> <fork> <levels> <d_max>
//   shape <feature_dim> <kernels> <hidden>
//   decoders <count>
//   decoder <index> <param_count> <values...>
//   anchors <count>
//   anchor <level> <i> <j> <k> <partition> <expanded> <cx> <cy> <cz> <params...>
// Anchors appear in (level, cell) order, so a fixed model always serializes identically.

std::string checkpoint_to_string(const GaussianField &field);
GaussianField checkpoint_from_string(const std::string &text);
void write_checkpoint(const GaussianField &field, const std::filesystem::path &path);
GaussianField read_checkpoint(const std::filesystem::path &path);

} // namespace gigags

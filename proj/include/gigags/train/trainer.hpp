#pragma once

#include "gigags/field/field.hpp"
#include "gigags/loss/appearance.hpp"
#include "gigags/partition/planner.hpp"
#include "gigags/train/objective.hpp"
#include "gigags/train/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <vector>

namespace gigags {

struct LearningRates {
    double position = 1.6e-4; // anchor centers, decayed exponentially to position_final
    double position_final = 1.6e-6;
    double feature = 2.5e-3;
    double offset = 1e-2;
    double log_scale = 5e-3;
    double decoder = 2e-3;
    double embedding = 1e-3;
    double appearance = 1e-3; // appearance MLP weights
};

struct TrainConfig {
    int iterations = 2000;
    LearningRates lr;
    AdamConfig adam;
    ObjectiveConfig objective;
    DensifyConfig densify;
    double densify_stop_fraction = 0.6;
    double mv_start_fraction = 0.3;
    bool use_appearance = true;
    AppearanceConfig appearance;
    int decoder_hidden = 32;
    double decoder_output_gain = 0.1;
    int neighbor_candidates = 4;
    std::uint64_t seed = 0;
    int progress_interval = 100;  // 0 disables progress lines
    std::ostream *progress = nullptr;
    std::filesystem::path loss_csv; // empty: no file

    /// Throws InvalidArgument for negative iterations, non-positive rates or
    /// fractions outside [0, 1].
    void validate() const;
    int mv_start_iteration() const;
    int densify_stop_iteration() const;
};

struct AnchorMoments {
    AdamState feature, offset, log_scale, center;
};

/// Optimizer moments, keyed by anchor so that growth and pruning keep them aligned.
struct OptimState {
    std::map<AnchorKey, AnchorMoments> anchors;
    AdamState decoder;
    std::map<int, AdamState> embeddings; // by embedding id
    AdamState appearance;
};

struct LossRecord {
    int iteration = 0;
    LossTerms terms;
    double total = 0.0;
    int kernels = 0;
};

struct PartitionResult {
    TrainedPartition trained;
    AppearanceModel appearance;
    OptimState optim;
    std::vector<LossRecord> log;
};

/// Trains one planned and expanded partition. `grid` is the global anchor grid;
/// the partition's core and expanded anchors are copied out of it. Training
/// views are p.train_cameras looked up by View::id. Deterministic for a fixed
/// config. Throws NonFiniteLoss with the iteration and term values, EmptySet
/// when the partition has no training views or anchors.
PartitionResult train_partition(const Partition &p, const AnchorGrid &grid, const std::vector<View> &views,
                                const TrainConfig &cfg);

/// Trains each partition on up to `workers` threads and merges the results.
/// A failing partition does not affect the others; the first failure (by
/// partition id) is rethrown with the partition id in its message after all
/// workers finish.
GaussianField train_all(const std::vector<Partition> &partitions, const AnchorGrid &grid,
                        const std::vector<View> &views, const TrainConfig &cfg, int workers,
                        std::vector<PartitionResult> *results = nullptr);

/// Index of the neighbor candidates of views[ref] among `views`: the `count`
/// nearest camera centers whose viewing directions agree (positive dot product).
std::vector<std::size_t> neighbor_candidates(const std::vector<View> &views, std::size_t ref, int count);

} // namespace gigags

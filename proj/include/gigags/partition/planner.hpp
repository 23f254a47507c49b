#pragma once

#include "gigags/field/anchor_grid.hpp"
#include "gigags/field/decoder.hpp"
#include "gigags/field/field.hpp"
#include "gigags/scene/camera.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gigags {

/// Ground-plane rectangle [a0, a1) x [b0, b1) over the two non-up axes.
/// Outer cells of a layout use infinite edges so every point has a cell.
struct CellBounds {
    double a0 = 0, a1 = 0, b0 = 0, b1 = 0;
    int axis_a = 0, axis_b = 2;

    bool contains(double a, double b) const { return a >= a0 && a < a1 && b >= b0 && b < b1; }
    bool contains(const Vec3 &p) const { return contains(p[axis_a], p[axis_b]); }
};

/// gx strips along the first ground axis, each cut into gz cells along the
/// second. Edges are camera-count quantiles; cell id = strip * gz + cell.
struct PartitionLayout {
    int gx = 1, gz = 1;
    int up_axis = 1;
    std::vector<double> a_edges;              // gx + 1 values, camera extent at the ends
    std::vector<std::vector<double>> b_edges; // per strip, gz + 1 values

    int cell_count() const { return gx * gz; }
    /// The two ground axes, in increasing index order.
    std::pair<int, int> ground_axes() const;
    /// Bounds of a cell, with the outer edges pushed to infinity.
    CellBounds bounds(int cell) const;
    /// Bounds clipped to the camera rectangle (for reporting).
    CellBounds finite_bounds(int cell) const;
    int cell_of(const Vec3 &p) const;
};

/// Throws TooFewCameras when views.size() < gx * gz, InvalidArgument for a bad grid or axis.
PartitionLayout split_cameras(const std::vector<View> &views, int gx, int gz, int up_axis = 1);

struct Partition {
    int id = 0;
    CellBounds bounds{};
    std::vector<int> train_cameras; // View::id values
    std::vector<AnchorKey> core_anchors;
    std::vector<AnchorKey> expanded_anchors;
};

/// One partition per cell with its core anchors (centers inside the cell).
std::vector<Partition> assign_anchors(const PartitionLayout &layout, const AnchorGrid &grid);

struct PainterConfig {
    int min_visible = 1;    // tau_vis
    int occluders = 8;      // rho
    double radius_px = 2.0; // r
};

/// Anchors of `grid` (among those active for the view) that survive the painter
/// test: an anchor is hidden when at least `occluders` anchors earlier in
/// (depth, key) order project within radius_px of it.
std::vector<AnchorKey> painter_visible(const AnchorGrid &grid, const View &view, const PainterConfig &cfg = {});

/// Views that see at least min_visible unoccluded core anchors of the partition.
std::vector<int> select_training_cameras(const Partition &p, const std::vector<View> &views,
                                         const AnchorGrid &grid, const PainterConfig &cfg = {});

/// Adds every out-of-cell anchor that a training camera sees (positive depth,
/// inside the image, level <= floor-mode upper level). Sorted, deduplicated.
void expand_partition(Partition &p, const AnchorGrid &grid, const std::vector<View> &views);

/// Core plus expanded anchors of a partition, tagged with the partition id.
AnchorGrid partition_grid(const Partition &p, const AnchorGrid &grid);

struct TrainedPartition {
    Partition partition;
    AnchorGrid grid;
    DecoderWeights decoder;
};

/// Union of the non-expanded anchors that lie inside their partition's bounds;
/// decoders are kept per partition (indexed by partition id). Throws
/// OverlapDetected when two partitions claim the same anchor.
GaussianField merge_partitions(const std::vector<TrainedPartition> &trained);

// Plan manifest, human-readable:
//   gigags-plan 1
//   layout <gx> <gz> <up_axis>
//   a_edges <gx+1 values>
//   b_edges <strip> <gz+1 values>          (one line per strip)
//   partition <id> cameras <n> <ids...> core <n> expanded <n>
struct PlanManifest {
    PartitionLayout layout;
    std::vector<Partition> partitions; // anchor lists are not stored, only counts
    std::vector<std::size_t> core_counts, expanded_counts;
};

std::string manifest_to_string(const PlanManifest &m);
PlanManifest manifest_from_string(const std::string &text);
void write_manifest(const PlanManifest &m, const std::filesystem::path &path);
PlanManifest read_manifest(const std::filesystem::path &path);

/// Human-readable summary of a manifest (the `plan --report` output).
std::string manifest_report(const PlanManifest &m);

} // namespace gigags

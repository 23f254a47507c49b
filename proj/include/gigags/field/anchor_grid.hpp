#pragma once

#include "gigags/scene/camera.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

namespace gigags {

struct LodConfig {
    double v0 = 1.0;   // base voxel size
    int fork = 2;      // k
    int levels = 1;    // K
    double d_max = 1.0;

    void validate() const;
    double voxel_size(int level) const;
};

/// Level-selection rounding. PerAnchor uses round-to-nearest for core anchors
/// and floor for expansion anchors.
enum class LevelMode { Round, Floor, PerAnchor };

/// Finest level visible at distance d: clamp(rnd(log_k(d_max) - log_k(d)), 0, K-1).
/// Throws NonPositiveDistance for d <= 0.
int upper_level(double d, const LodConfig &cfg, LevelMode mode = LevelMode::Round);

using CellKey = std::array<std::int64_t, 3>;

struct AnchorShape {
    int feature_dim = 16; // F
    int kernels = 4;      // n

    int param_count() const { return feature_dim + 6 * kernels; }
    friend bool operator==(const AnchorShape &, const AnchorShape &) = default;
};

/// Voxel anchor that decodes into n kernels. Learnable parameters are packed as
/// [feature (F) | offsets (3n) | log-scales (3n)]; offsets are in units of the
/// level's voxel size.
struct Anchor {
    int level = 0;
    CellKey cell{0, 0, 0};
    Vec3 center = Vec3::Zero();
    std::vector<double> params;
    int partition = 0;     // owning partition (selects the decoder after merge)
    bool expanded = false; // helper anchor added by partition expansion

    std::span<double> feature(const AnchorShape &s) { return {params.data(), std::size_t(s.feature_dim)}; }
    std::span<const double> feature(const AnchorShape &s) const {
        return {params.data(), std::size_t(s.feature_dim)};
    }
    Vec3 offset(const AnchorShape &s, int j) const {
        const double *p = params.data() + s.feature_dim + 3 * j;
        return {p[0], p[1], p[2]};
    }
    Vec3 log_scale(const AnchorShape &s, int j) const {
        const double *p = params.data() + s.feature_dim + 3 * s.kernels + 3 * j;
        return {p[0], p[1], p[2]};
    }
    std::size_t offset_index(const AnchorShape &s, int j) const { return std::size_t(s.feature_dim + 3 * j); }
    std::size_t log_scale_index(const AnchorShape &s, int j) const {
        return std::size_t(s.feature_dim + 3 * s.kernels + 3 * j);
    }
};

struct AnchorKey {
    int level = 0;
    CellKey cell{0, 0, 0};
    auto operator<=>(const AnchorKey &) const = default;
};

inline AnchorKey key_of(const Anchor &a) { return {a.level, a.cell}; }

/// Per-level cell -> anchor maps. Iteration order is deterministic (level, then cell).
class AnchorGrid {
public:
    AnchorGrid() = default;
    AnchorGrid(LodConfig config, AnchorShape shape);

    const LodConfig &config() const { return config_; }
    const AnchorShape &shape() const { return shape_; }

    std::size_t size() const;
    bool empty() const { return size() == 0; }
    std::size_t level_size(int level) const { return levels_.at(std::size_t(level)).size(); }

    /// Inserts when the cell is free; returns false (and leaves the grid unchanged) otherwise.
    bool insert(Anchor anchor);
    bool contains(const AnchorKey &key) const;
    Anchor *find(const AnchorKey &key);
    const Anchor *find(const AnchorKey &key) const;
    bool erase(const AnchorKey &key);

    /// Center of `cell` at `level`: v_level * cell.
    Vec3 cell_center(int level, const CellKey &cell) const;
    CellKey cell_of(int level, const Vec3 &p) const;

    template <class F> void for_each(F &&f) const {
        for (const auto &lvl : levels_)
            for (const auto &[cell, a] : lvl)
                f(a);
    }
    template <class F> void for_each(F &&f) {
        for (auto &lvl : levels_)
            for (auto &[cell, a] : lvl)
                f(a);
    }

    std::vector<const Anchor *> anchors() const;

private:
    LodConfig config_;
    AnchorShape shape_;
    std::vector<std::map<CellKey, Anchor>> levels_;
};

struct AnchorInit {
    AnchorShape shape;
    double feature_std = 0.01;
    double offset_extent = 0.5; // offsets ~ U(-extent, extent) voxel units
    double scale_fraction = 0.3; // initial kernel scale as a fraction of the voxel size
};

/// Quantizes the point cloud at every level (v_i = v0 / k^i, round-to-nearest) and
/// initializes anchor parameters from `seed`. Throws EmptyPointCloud.
AnchorGrid build_hierarchy(std::span<const Vec3> points, const LodConfig &cfg, std::uint64_t seed,
                           const AnchorInit &init = {});

/// Fresh parameters for an anchor at `level` (used by build_hierarchy and growth).
std::vector<double> initial_anchor_params(const AnchorInit &init, std::uint64_t seed,
                                          const AnchorKey &key, double voxel_size);

/// Default LodConfig for a point cloud: d_max from the point extent, v0 =
/// min(d_max / k^(K-1), largest bounding-box side / cells).
LodConfig default_lod_config(std::span<const Vec3> points, int fork, int levels, double cells = 8.0);

/// Maximum pairwise distance (exact for small clouds, bounding-box diagonal bound otherwise).
double max_pairwise_distance(std::span<const Vec3> points);

/// Anchors whose level does not exceed upper_level(|center - camera|) and whose
/// centers project inside the image with positive depth.
std::vector<const Anchor *> active_anchors(const AnchorGrid &grid, const View &view,
                                           LevelMode mode = LevelMode::Round);

} // namespace gigags

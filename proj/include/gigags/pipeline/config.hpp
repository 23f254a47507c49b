#pragma once

#include "gigags/field/anchor_grid.hpp"
#include "gigags/partition/planner.hpp"
#include "gigags/train/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gigags {

struct LodSettings {
    int fork = 2;
    int levels = 3;
    double v0 = 0.0;    // 0: derived from the point cloud
    double d_max = 0.0; // 0: derived from the point cloud
    double cells = 32.0; // auto v0 = min(d_max / fork^(levels-1), largest side / cells)
};

struct PlanSettings {
    int grid_x = 2, grid_z = 1;
    PainterConfig painter;
};

struct MeshSettings {
    double voxel_size = 0.0; // 0: bounding-box diagonal / 256
    double truncation = 0.0; // 0: 4 * voxel_size
    double padding = 0.05;   // fraction of the anchor bounding box added on every side
    double min_weight = 1.0;
    int view_stride = 1;     // fuse every n-th training view
    int max_dim = 512;       // voxel_size grows when a side would exceed this
};

struct PipelineConfig {
    LodSettings lod;
    AnchorInit anchor;
    PlanSettings plan;
    TrainConfig train;
    MeshSettings mesh;
    std::uint64_t seed = 0;

    PipelineConfig() { train.objective.weights.multiview = 0.1; }

    /// Throws ConfigError for any out-of-range value.
    void validate() const;
};

/// Applies "key = value" lines grouped under [section] headers; '#' and ';'
/// start comments. Throws ConfigError naming the line for unknown sections or
/// keys and for unparsable values.
void apply_config_text(PipelineConfig &cfg, const std::string &text);

/// Applies one "section.key=value" override. Throws ConfigError.
void apply_config_override(PipelineConfig &cfg, const std::string &assignment);

/// Reads a config file, then applies overrides in order, then validates.
/// An empty path means defaults. Throws ConfigError (IoError for an unreadable file).
PipelineConfig load_config(const std::filesystem::path &path, const std::vector<std::string> &overrides = {});

/// Every key with its current value, in the accepted file syntax.
std::string config_to_string(const PipelineConfig &cfg);

/// All accepted "section.key" names.
std::vector<std::string> config_keys();

} // namespace gigags

#pragma once

#include "gigags/mesh/mesh.hpp"
#include "gigags/pipeline/bundle.hpp"
#include "gigags/pipeline/config.hpp"

#include <functional>
#include <string>
#include <vector>

namespace gigags {

/// Anchor hierarchy plus planned and expanded partitions for a bundle's training views.
struct ScenePlan {
    AnchorGrid grid;
    PartitionLayout layout;
    std::vector<Partition> partitions;

    PlanManifest manifest() const;
};

/// LodConfig used for a bundle: explicit values from the settings, the rest
/// derived from the point cloud.
LodConfig resolve_lod(const SceneBundle &bundle, const LodSettings &lod);

/// Builds the anchor hierarchy from the bundle's points, splits the training
/// cameras into grid_x x grid_z cells, assigns core anchors, selects training
/// cameras with the painter test and expands each partition. Deterministic.
/// Throws EmptyPointCloud, TooFewCameras.
ScenePlan plan_scene(const SceneBundle &bundle, const PipelineConfig &cfg);

/// Trains every partition on `workers` threads and merges them.
GaussianField train_scene(const SceneBundle &bundle, const ScenePlan &plan, const PipelineConfig &cfg, int workers,
                          std::vector<PartitionResult> *results = nullptr);

/// Decodes the anchors active for the view and renders them (color, normal,
/// plane distance, unbiased depth, alpha).
RenderBuffers render_field(const GaussianField &field, const View &view, const ObjectiveConfig &objective = {});

/// Fuses rendered depth of every view_stride-th view into a volume over the
/// padded anchor bounding box. Throws EmptySet for an empty field.
TsdfVolume fuse_field(const GaussianField &field, const std::vector<View> &views, const PipelineConfig &cfg);

struct ViewScore {
    int view_id = 0;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct EvalReport {
    std::vector<ViewScore> views;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;

    std::string to_string() const;
};

/// PSNR and SSIM of the rendered color against each view's image.
EvalReport evaluate_views(const GaussianField &field, const std::vector<View> &views,
                          const ObjectiveConfig &objective = {});

/// Mean of distance(v) over mesh vertices; NaN for an empty mesh.
double mean_vertex_distance(const TriangleMesh &mesh, const std::function<double(const Vec3 &)> &distance);

} // namespace gigags

#include "gigags/pipeline/pipeline.hpp"

#include "gigags/core/error.hpp"
#include "gigags/pipeline/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace gigags {

PlanManifest
ScenePlan::manifest() const {
    PlanManifest m;
    m.layout = layout;
    m.partitions = partitions;
    for (const Partition &p : partitions) {
        m.core_counts.push_back(p.core_anchors.size());
        m.expanded_counts.push_back(p.expanded_anchors.size());
    }
    return m;
}

LodConfig
resolve_lod(const SceneBundle &bundle, const LodSettings &s) {
    LodConfig lod = default_lod_config(bundle.points, s.fork, s.levels, s.cells);
    if (s.d_max > 0.0)
        lod.d_max = s.d_max;
    if (s.v0 > 0.0)
        lod.v0 = s.v0;
    lod.validate();
    return lod;
}

ScenePlan
plan_scene(const SceneBundle &bundle, const PipelineConfig &cfg) {
    cfg.validate();
    if (bundle.points.empty())
        throw Error(ErrorCode::EmptyPointCloud, "plan: the bundle has no points");
    const std::vector<View> train = bundle.train_views();
    ScenePlan plan;
    plan.grid = build_hierarchy(bundle.points, resolve_lod(bundle, cfg.lod), cfg.seed, cfg.anchor);
    plan.layout = split_cameras(train, cfg.plan.grid_x, cfg.plan.grid_z, bundle.up_axis);
    plan.partitions = assign_anchors(plan.layout, plan.grid);
    for (Partition &p : plan.partitions) {
        p.train_cameras = select_training_cameras(p, train, plan.grid, cfg.plan.painter);
        expand_partition(p, plan.grid, train);
    }
    return plan;
}

GaussianField
train_scene(const SceneBundle &bundle, const ScenePlan &plan, const PipelineConfig &cfg, int workers,
            std::vector<PartitionResult> *results) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    return train_all(plan.partitions, plan.grid, bundle.train_views(), tc, workers, results);
}

RenderBuffers
render_field(const GaussianField &field, const View &view, const ObjectiveConfig &objective) {
    const auto kernels = decode_anchors(field, active_anchors(field.grid, view, LevelMode::PerAnchor), view);
    RenderBuffers b = render(kernels, view, objective.render);
    depth_from_plane(b, view.intrinsics, objective.depth);
    return b;
}

TsdfVolume
fuse_field(const GaussianField &field, const std::vector<View> &views, const PipelineConfig &cfg) {
    if (field.grid.empty())
        throw Error(ErrorCode::EmptySet, "mesh: the field has no anchors");
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    field.grid.for_each([&](const Anchor &a) {
        lo = lo.cwiseMin(a.center);
        hi = hi.cwiseMax(a.center);
    });
    const Vec3 pad = cfg.mesh.padding * (hi - lo);
    lo -= pad;
    hi += pad;
    double voxel = cfg.mesh.voxel_size > 0.0 ? cfg.mesh.voxel_size : (hi - lo).norm() / 256.0;
    if (!(voxel > 0.0))
        voxel = field.grid.config().voxel_size(field.grid.config().levels - 1);
    voxel = std::max(voxel, (hi - lo).maxCoeff() / double(cfg.mesh.max_dim - 1));
    std::array<int, 3> dims{};
    for (int i = 0; i < 3; ++i)
        dims[std::size_t(i)] = int(std::ceil((hi[i] - lo[i]) / voxel)) + 1;
    TsdfVolume vol = TsdfVolume::create(lo, voxel, dims, cfg.mesh.truncation);
    for (std::size_t i = 0; i < views.size(); i += std::size_t(cfg.mesh.view_stride)) {
        const RenderBuffers b = render_field(field, views[i], cfg.train.objective);
        integrate_depth(vol, b.depth, b.depth_valid, views[i]);
    }
    return vol;
}

std::string
EvalReport::to_string() const {
    std::string out;
    char line[128];
    for (const ViewScore &s : views) {
        std::snprintf(line, sizeof line, "view %d psnr %.4f ssim %.4f\n", s.view_id, s.psnr, s.ssim);
        out += line;
    }
    std::snprintf(line, sizeof line, "mean psnr %.4f ssim %.4f over %zu views (LPIPS not computed)\n", mean_psnr,
                  mean_ssim, views.size());
    return out + line;
}

EvalReport
evaluate_views(const GaussianField &field, const std::vector<View> &views, const ObjectiveConfig &objective) {
    EvalReport r;
    for (const View &v : views) {
        const RenderBuffers b = render_field(field, v, objective);
        ViewScore s{v.id, psnr(b.color, v.image), ssim_metric(b.color, v.image)};
        r.mean_psnr += s.psnr;
        r.mean_ssim += s.ssim;
        r.views.push_back(s);
    }
    if (!r.views.empty()) {
        r.mean_psnr /= double(r.views.size());
        r.mean_ssim /= double(r.views.size());
    }
    return r;
}

double
mean_vertex_distance(const TriangleMesh &mesh, const std::function<double(const Vec3 &)> &distance) {
    if (mesh.vertices.empty())
        return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (const Vec3 &v : mesh.vertices)
        s += distance(v);
    return s / double(mesh.vertices.size());
}

} // namespace gigags

#include "gigags/field/anchor_grid.hpp"

#include "gigags/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gigags {

void
LodConfig::validate() const {
    if (!(v0 > 0.0))
        throw Error(ErrorCode::InvalidArgument, "lod: v0 must be positive");
    if (fork < 2)
        throw Error(ErrorCode::InvalidArgument, "lod: fork must be >= 2");
    if (levels < 1)
        throw Error(ErrorCode::InvalidArgument, "lod: levels must be >= 1");
    if (!(d_max > 0.0))
        throw Error(ErrorCode::InvalidArgument, "lod: d_max must be positive");
}

double
LodConfig::voxel_size(int level) const {
    return v0 / std::pow(double(fork), double(level));
}

int
upper_level(double d, const LodConfig &cfg, LevelMode mode) {
    if (!(d > 0.0))
        throw Error(ErrorCode::NonPositiveDistance, "level selection needs a positive distance");
    const double x = std::log(cfg.d_max / d) / std::log(double(cfg.fork));
    const double r = mode == LevelMode::Floor ? std::floor(x) : std::round(x);
    return int(std::clamp(r, 0.0, double(cfg.levels - 1)));
}

AnchorGrid::AnchorGrid(LodConfig config, AnchorShape shape)
    : config_(config), shape_(shape), levels_(std::size_t(config.levels)) {
    config_.validate();
}

std::size_t
AnchorGrid::size() const {
    std::size_t n = 0;
    for (const auto &l : levels_)
        n += l.size();
    return n;
}

bool
AnchorGrid::insert(Anchor anchor) {
    if (anchor.level < 0 || anchor.level >= config_.levels)
        throw Error(ErrorCode::InvalidArgument, "anchor level out of range");
    if (anchor.params.size() != std::size_t(shape_.param_count()))
        throw Error(ErrorCode::ShapeMismatch, "anchor parameter count does not match grid shape");
    auto &lvl = levels_[std::size_t(anchor.level)];
    const CellKey cell = anchor.cell;
    return lvl.emplace(cell, std::move(anchor)).second;
}

bool
AnchorGrid::contains(const AnchorKey &key) const {
    return find(key) != nullptr;
}

Anchor *
AnchorGrid::find(const AnchorKey &key) {
    if (key.level < 0 || key.level >= int(levels_.size()))
        return nullptr;
    auto &lvl = levels_[std::size_t(key.level)];
    auto it = lvl.find(key.cell);
    return it == lvl.end() ? nullptr : &it->second;
}

const Anchor *
AnchorGrid::find(const AnchorKey &key) const {
    return const_cast<AnchorGrid *>(this)->find(key);
}

bool
AnchorGrid::erase(const AnchorKey &key) {
    if (key.level < 0 || key.level >= int(levels_.size()))
        return false;
    return levels_[std::size_t(key.level)].erase(key.cell) > 0;
}

Vec3
AnchorGrid::cell_center(int level, const CellKey &c) const {
    const double v = config_.voxel_size(level);
    return {v * double(c[0]), v * double(c[1]), v * double(c[2])};
}

CellKey
AnchorGrid::cell_of(int level, const Vec3 &p) const {
    const double v = config_.voxel_size(level);
    return {std::int64_t(std::round(p.x() / v)), std::int64_t(std::round(p.y() / v)),
            std::int64_t(std::round(p.z() / v))};
}

std::vector<const Anchor *>
AnchorGrid::anchors() const {
    std::vector<const Anchor *> out;
    out.reserve(size());
    for_each([&](const Anchor &a) { out.push_back(&a); });
    return out;
}

namespace {

std::uint64_t
splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::vector<double>
initial_anchor_params(const AnchorInit &init, std::uint64_t seed, const AnchorKey &key,
                      double voxel_size) {
    // Seeded per cell so that the result does not depend on insertion order.
    std::uint64_t h = splitmix(seed);
    h = splitmix(h ^ std::uint64_t(key.level));
    for (auto c : key.cell)
        h = splitmix(h ^ std::uint64_t(c));
    std::mt19937_64 rng(h);
    std::normal_distribution<double> feat(0.0, init.feature_std);
    std::uniform_real_distribution<double> off(-init.offset_extent, init.offset_extent);

    const AnchorShape &s = init.shape;
    std::vector<double> p(std::size_t(s.param_count()), 0.0);
    for (int i = 0; i < s.feature_dim; ++i)
        p[std::size_t(i)] = init.feature_std > 0.0 ? feat(rng) : 0.0;
    for (int i = 0; i < 3 * s.kernels; ++i)
        p[std::size_t(s.feature_dim + i)] = init.offset_extent > 0.0 ? off(rng) : 0.0;
    const double ls = std::log(init.scale_fraction * voxel_size);
    for (int i = 0; i < 3 * s.kernels; ++i)
        p[std::size_t(s.feature_dim + 3 * s.kernels + i)] = ls;
    return p;
}

AnchorGrid
build_hierarchy(std::span<const Vec3> points, const LodConfig &cfg, std::uint64_t seed,
                const AnchorInit &init) {
    if (points.empty())
        throw Error(ErrorCode::EmptyPointCloud, "cannot build anchors from an empty point cloud");
    AnchorGrid grid(cfg, init.shape);
    for (int level = 0; level < cfg.levels; ++level) {
        for (const Vec3 &p : points) {
            const CellKey cell = grid.cell_of(level, p);
            const AnchorKey key{level, cell};
            if (grid.contains(key))
                continue;
            Anchor a;
            a.level = level;
            a.cell = cell;
            a.center = grid.cell_center(level, cell);
            a.params = initial_anchor_params(init, seed, key, cfg.voxel_size(level));
            grid.insert(std::move(a));
        }
    }
    return grid;
}

double
max_pairwise_distance(std::span<const Vec3> points) {
    if (points.size() <= 4096) {
        double best = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i)
            for (std::size_t j = i + 1; j < points.size(); ++j)
                best = std::max(best, (points[i] - points[j]).squaredNorm());
        return std::sqrt(best);
    }
    Vec3 lo = points[0], hi = points[0];
    for (const Vec3 &p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

LodConfig
default_lod_config(std::span<const Vec3> points, int fork, int levels, double cells) {
    if (!(cells > 0.0))
        throw Error(ErrorCode::InvalidArgument, "lod: cells must be positive");
    if (points.empty())
        throw Error(ErrorCode::EmptyPointCloud, "cannot size the anchor grid of an empty point cloud");
    Vec3 lo = points[0], hi = points[0];
    for (const Vec3 &p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    LodConfig cfg;
    cfg.fork = fork;
    cfg.levels = levels;
    cfg.d_max = std::max(max_pairwise_distance(points), 1e-9);
    const double by_levels = cfg.d_max / std::pow(double(fork), double(levels - 1));
    const double by_cells = (hi - lo).maxCoeff() / cells;
    cfg.v0 = by_cells > 0.0 ? std::min(by_levels, by_cells) : by_levels;
    return cfg;
}

std::vector<const Anchor *>
active_anchors(const AnchorGrid &grid, const View &view, LevelMode mode) {
    std::vector<const Anchor *> out;
    const auto &k = view.intrinsics;
    grid.for_each([&](const Anchor &a) {
        const double d = (a.center - view.camera_center()).norm();
        if (!(d > 0.0))
            return;
        const LevelMode m = mode == LevelMode::PerAnchor
                                ? (a.expanded ? LevelMode::Floor : LevelMode::Round)
                                : mode;
        if (a.level > upper_level(d, grid.config(), m))
            return;
        Projection pr;
        if (!try_project_point(k, view.pose, a.center, pr))
            return;
        if (pr.pixel.u < -0.5 || pr.pixel.u >= k.width - 0.5 || pr.pixel.v < -0.5 ||
            pr.pixel.v >= k.height - 0.5)
            return;
        out.push_back(&a);
    });
    return out;
}

} // namespace gigags

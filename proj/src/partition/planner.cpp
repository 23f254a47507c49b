#include "gigags/partition/planner.hpp"

#include "gigags/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

namespace gigags {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Splits sorted values into `parts` groups of (near) equal count and returns
/// parts + 1 edges: the extremes and midpoints between neighboring groups.
std::vector<double>
quantile_edges(const std::vector<double> &sorted, int parts) {
    const std::size_t n = sorted.size();
    std::vector<double> edges{sorted.front()};
    for (int i = 1; i < parts; ++i) {
        const std::size_t cut = n * std::size_t(i) / std::size_t(parts);
        edges.push_back(0.5 * (sorted[cut - 1] + sorted[cut]));
    }
    edges.push_back(sorted.back());
    return edges;
}

/// Index of the half-open interval [e_i, e_{i+1}) holding v, with the outer
/// intervals unbounded.
int
interval_of(const std::vector<double> &edges, double v) {
    const int parts = int(edges.size()) - 1;
    for (int i = 1; i < parts; ++i)
        if (v < edges[std::size_t(i)])
            return i - 1;
    return parts - 1;
}

bool
project_inside(const View &v, const Vec3 &x, Projection &pr) {
    if (!try_project_point(v.intrinsics, v.pose, x, pr))
        return false;
    return pr.pixel.u >= -0.5 && pr.pixel.u < v.intrinsics.width - 0.5 && pr.pixel.v >= -0.5 &&
           pr.pixel.v < v.intrinsics.height - 0.5;
}

void
put(std::ostream &os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ' ' << buf;
}

[[noreturn]] void
bad(const std::string &what) {
    throw Error(ErrorCode::IoError, "plan manifest: " + what);
}

void
expect(std::istream &is, const char *tag) {
    std::string t;
    if (!(is >> t) || t != tag)
        bad(std::string("expected '") + tag + "'");
}

} // namespace

std::pair<int, int>
PartitionLayout::ground_axes() const {
    switch (up_axis) {
    case 0:
        return {1, 2};
    case 2:
        return {0, 1};
    default:
        return {0, 2};
    }
}

CellBounds
PartitionLayout::finite_bounds(int cell) const {
    if (cell < 0 || cell >= cell_count())
        throw Error(ErrorCode::InvalidArgument, "cell id out of range");
    const int i = cell / gz, j = cell % gz;
    const auto [aa, ab] = ground_axes();
    const auto &be = b_edges[std::size_t(i)];
    return {a_edges[std::size_t(i)], a_edges[std::size_t(i + 1)], be[std::size_t(j)], be[std::size_t(j + 1)], aa, ab};
}

CellBounds
PartitionLayout::bounds(int cell) const {
    CellBounds b = finite_bounds(cell);
    const int i = cell / gz, j = cell % gz;
    if (i == 0)
        b.a0 = -kInf;
    if (i == gx - 1)
        b.a1 = kInf;
    if (j == 0)
        b.b0 = -kInf;
    if (j == gz - 1)
        b.b1 = kInf;
    return b;
}

int
PartitionLayout::cell_of(const Vec3 &p) const {
    const auto [aa, ab] = ground_axes();
    const int i = interval_of(a_edges, p[aa]);
    return i * gz + interval_of(b_edges[std::size_t(i)], p[ab]);
}

PartitionLayout
split_cameras(const std::vector<View> &views, int gx, int gz, int up_axis) {
    if (gx < 1 || gz < 1 || up_axis < 0 || up_axis > 2)
        throw Error(ErrorCode::InvalidArgument, "split_cameras: bad grid or up axis");
    if (views.size() < std::size_t(gx) * std::size_t(gz))
        throw Error(ErrorCode::TooFewCameras, "split_cameras: " + std::to_string(views.size()) +
                                                  " cameras for " + std::to_string(gx * gz) + " cells");
    PartitionLayout layout;
    layout.gx = gx;
    layout.gz = gz;
    layout.up_axis = up_axis;
    const auto [aa, ab] = layout.ground_axes();

    std::vector<double> as;
    for (const View &v : views)
        as.push_back(v.camera_center()[aa]);
    std::sort(as.begin(), as.end());
    layout.a_edges = quantile_edges(as, gx);

    std::vector<std::vector<double>> strips(static_cast<std::size_t>(gx));
    for (const View &v : views)
        strips[std::size_t(interval_of(layout.a_edges, v.camera_center()[aa]))].push_back(v.camera_center()[ab]);
    double b_lo = kInf, b_hi = -kInf;
    for (const View &v : views) {
        b_lo = std::min(b_lo, v.camera_center()[ab]);
        b_hi = std::max(b_hi, v.camera_center()[ab]);
    }
    for (auto &s : strips) {
        if (s.size() < std::size_t(gz))
            throw Error(ErrorCode::TooFewCameras, "split_cameras: a strip has fewer cameras than cells");
        std::sort(s.begin(), s.end());
        auto edges = quantile_edges(s, gz);
        // every strip spans the full camera rectangle
        edges.front() = b_lo;
        edges.back() = b_hi;
        layout.b_edges.push_back(std::move(edges));
    }
    return layout;
}

std::vector<Partition>
assign_anchors(const PartitionLayout &layout, const AnchorGrid &grid) {
    std::vector<Partition> parts(std::size_t(layout.cell_count()));
    for (int c = 0; c < layout.cell_count(); ++c) {
        parts[std::size_t(c)].id = c;
        parts[std::size_t(c)].bounds = layout.bounds(c);
    }
    grid.for_each([&](const Anchor &a) { parts[std::size_t(layout.cell_of(a.center))].core_anchors.push_back(key_of(a)); });
    return parts;
}

std::vector<AnchorKey>
painter_visible(const AnchorGrid &grid, const View &view, const PainterConfig &cfg) {
    struct Item {
        double depth;
        AnchorKey key;
        double u, v;
    };
    std::vector<Item> items;
    for (const Anchor *a : active_anchors(grid, view)) {
        Projection pr;
        if (project_inside(view, a->center, pr))
            items.push_back({pr.depth, key_of(*a), pr.pixel.u, pr.pixel.v});
    }
    std::sort(items.begin(), items.end(),
              [](const Item &x, const Item &y) { return std::tie(x.depth, x.key) < std::tie(y.depth, y.key); });

    // nearer anchors already placed, bucketed by radius-sized pixel cells
    const double r = cfg.radius_px, r2 = r * r;
    auto bucket = [&](double u, double v) {
        return (std::int64_t(std::floor(u / r)) << 32) ^ (std::int64_t(std::floor(v / r)) & 0xffffffff);
    };
    std::unordered_map<std::int64_t, std::vector<std::pair<double, double>>> placed;
    std::vector<AnchorKey> visible;
    for (const Item &it : items) {
        int count = 0;
        const auto bu = std::int64_t(std::floor(it.u / r)), bv = std::int64_t(std::floor(it.v / r));
        for (std::int64_t du = -1; du <= 1 && count < cfg.occluders; ++du)
            for (std::int64_t dv = -1; dv <= 1 && count < cfg.occluders; ++dv) {
                const auto found = placed.find(((bu + du) << 32) ^ ((bv + dv) & 0xffffffff));
                if (found == placed.end())
                    continue;
                for (const auto &[pu, pv] : found->second)
                    if ((pu - it.u) * (pu - it.u) + (pv - it.v) * (pv - it.v) <= r2 && ++count >= cfg.occluders)
                        break;
            }
        if (count < cfg.occluders)
            visible.push_back(it.key);
        placed[bucket(it.u, it.v)].emplace_back(it.u, it.v);
    }
    return visible;
}

std::vector<int>
select_training_cameras(const Partition &p, const std::vector<View> &views, const AnchorGrid &grid,
                        const PainterConfig &cfg) {
    const std::set<AnchorKey> core(p.core_anchors.begin(), p.core_anchors.end());
    std::vector<int> out;
    for (const View &v : views) {
        int seen = 0;
        for (const AnchorKey &k : painter_visible(grid, v, cfg))
            if (core.count(k) && ++seen >= cfg.min_visible)
                break;
        if (seen >= cfg.min_visible && !core.empty())
            out.push_back(v.id);
    }
    return out;
}

void
expand_partition(Partition &p, const AnchorGrid &grid, const std::vector<View> &views) {
    const std::set<int> cams(p.train_cameras.begin(), p.train_cameras.end());
    std::set<AnchorKey> expanded(p.expanded_anchors.begin(), p.expanded_anchors.end());
    const LodConfig &lod = grid.config();
    for (const View &v : views) {
        if (!cams.count(v.id))
            continue;
        grid.for_each([&](const Anchor &a) {
            if (p.bounds.contains(a.center))
                return;
            Projection pr;
            if (!project_inside(v, a.center, pr))
                return;
            const double d = (a.center - v.camera_center()).norm();
            if (a.level <= upper_level(d, lod, LevelMode::Floor))
                expanded.insert(key_of(a));
        });
    }
    p.expanded_anchors.assign(expanded.begin(), expanded.end());
}

AnchorGrid
partition_grid(const Partition &p, const AnchorGrid &grid) {
    AnchorGrid out(grid.config(), grid.shape());
    auto copy = [&](const AnchorKey &k, bool expanded) {
        const Anchor *a = grid.find(k);
        if (!a)
            throw Error(ErrorCode::InvalidArgument, "partition references a missing anchor");
        Anchor c = *a;
        c.partition = p.id;
        c.expanded = expanded;
        out.insert(std::move(c));
    };
    for (const AnchorKey &k : p.core_anchors)
        copy(k, false);
    for (const AnchorKey &k : p.expanded_anchors)
        copy(k, true);
    return out;
}

GaussianField
merge_partitions(const std::vector<TrainedPartition> &trained) {
    if (trained.empty())
        throw Error(ErrorCode::EmptySet, "merge_partitions: nothing to merge");
    GaussianField out;
    out.grid = AnchorGrid(trained.front().grid.config(), trained.front().grid.shape());
    int max_id = 0;
    for (const auto &t : trained)
        max_id = std::max(max_id, t.partition.id);
    out.decoders.assign(std::size_t(max_id + 1),
                        DecoderWeights::zeros(trained.front().decoder.shape, trained.front().decoder.hidden));
    std::vector<bool> seen(std::size_t(max_id + 1), false);
    for (const auto &t : trained) {
        const int id = t.partition.id;
        if (id < 0 || seen[std::size_t(id)])
            throw Error(ErrorCode::OverlapDetected, "partition " + std::to_string(id) + " appears twice");
        seen[std::size_t(id)] = true;
        out.decoders[std::size_t(id)] = t.decoder;
        t.grid.for_each([&](const Anchor &a) {
            if (a.expanded || !t.partition.bounds.contains(a.center))
                return;
            Anchor c = a;
            c.partition = id;
            if (!out.grid.insert(std::move(c)))
                throw Error(ErrorCode::OverlapDetected, "anchor claimed by two partitions");
        });
    }
    return out;
}

std::string
manifest_to_string(const PlanManifest &m) {
    std::ostringstream os;
    const auto &l = m.layout;
    os << "gigags-plan 1\n";
    os << "layout " << l.gx << ' ' << l.gz << ' ' << l.up_axis << '\n';
    os << "a_edges";
    for (double e : l.a_edges)
        put(os, e);
    os << '\n';
    for (std::size_t i = 0; i < l.b_edges.size(); ++i) {
        os << "b_edges " << i;
        for (double e : l.b_edges[i])
            put(os, e);
        os << '\n';
    }
    for (std::size_t i = 0; i < m.partitions.size(); ++i) {
        const Partition &p = m.partitions[i];
        os << "partition " << p.id << " cameras " << p.train_cameras.size();
        for (int c : p.train_cameras)
            os << ' ' << c;
        os << " core " << (i < m.core_counts.size() ? m.core_counts[i] : p.core_anchors.size());
        os << " expanded " << (i < m.expanded_counts.size() ? m.expanded_counts[i] : p.expanded_anchors.size())
           << '\n';
    }
    return os.str();
}

PlanManifest
manifest_from_string(const std::string &text) {
    std::istringstream is(text);
    PlanManifest m;
    int version = 0;
    expect(is, "gigags-plan");
    if (!(is >> version) || version != 1)
        bad("unsupported version");
    auto &l = m.layout;
    expect(is, "layout");
    if (!(is >> l.gx >> l.gz >> l.up_axis) || l.gx < 1 || l.gz < 1 || l.up_axis < 0 || l.up_axis > 2)
        bad("layout");
    expect(is, "a_edges");
    l.a_edges.resize(std::size_t(l.gx + 1));
    for (double &e : l.a_edges)
        if (!(is >> e))
            bad("a_edges");
    for (int i = 0; i < l.gx; ++i) {
        int idx = -1;
        expect(is, "b_edges");
        if (!(is >> idx) || idx != i)
            bad("b_edges index");
        std::vector<double> edges(std::size_t(l.gz + 1));
        for (double &e : edges)
            if (!(is >> e))
                bad("b_edges");
        l.b_edges.push_back(std::move(edges));
    }
    for (int c = 0; c < l.cell_count(); ++c) {
        Partition p;
        std::size_t n = 0, core = 0, expanded = 0;
        expect(is, "partition");
        if (!(is >> p.id) || p.id != c)
            bad("partition id");
        expect(is, "cameras");
        if (!(is >> n))
            bad("camera count");
        p.train_cameras.resize(n);
        for (int &cam : p.train_cameras)
            if (!(is >> cam))
                bad("camera id");
        expect(is, "core");
        if (!(is >> core))
            bad("core count");
        expect(is, "expanded");
        if (!(is >> expanded))
            bad("expanded count");
        p.bounds = l.bounds(c);
        m.partitions.push_back(std::move(p));
        m.core_counts.push_back(core);
        m.expanded_counts.push_back(expanded);
    }
    return m;
}

void
write_manifest(const PlanManifest &m, const std::filesystem::path &path) {
    std::ofstream os(path);
    if (!(os << manifest_to_string(m)))
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

PlanManifest
read_manifest(const std::filesystem::path &path) {
    std::ifstream is(path);
    if (!is)
        throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return manifest_from_string(ss.str());
}

std::string
manifest_report(const PlanManifest &m) {
    std::ostringstream os;
    const auto [aa, ab] = m.layout.ground_axes();
    const char axis[] = {'x', 'y', 'z'};
    os << "layout " << m.layout.gx << "x" << m.layout.gz << " over " << axis[aa] << axis[ab] << '\n';
    for (std::size_t i = 0; i < m.partitions.size(); ++i) {
        const Partition &p = m.partitions[i];
        const CellBounds b = m.layout.finite_bounds(p.id);
        char line[256];
        std::snprintf(line, sizeof line, "partition %d  %c [%.3f, %.3f)  %c [%.3f, %.3f)  cameras %zu  core %zu  expanded %zu\n",
                      p.id, axis[aa], b.a0, b.a1, axis[ab], b.b0, b.b1, p.train_cameras.size(),
                      m.core_counts.at(i), m.expanded_counts.at(i));
        os << line;
    }
    return os.str();
}

} // namespace gigags

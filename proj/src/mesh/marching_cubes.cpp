#include "gigags/mesh/mesh.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <unordered_map>

namespace gigags {
namespace {

Vec3
corner_pos(int c) {
    return {double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)};
}

struct EdgeDef {
    int a, b, axis;
};

// Edge id = axis * 4 + (bits of the two remaining axes, lower axis first).
std::array<EdgeDef, 12>
make_edges() {
    std::array<EdgeDef, 12> e{};
    for (int axis = 0; axis < 3; ++axis) {
        const int u = axis == 0 ? 1 : 0, v = axis == 2 ? 1 : 2;
        for (int r = 0; r < 4; ++r) {
            const int base = ((r & 1) << u) | (((r >> 1) & 1) << v);
            e[std::size_t(axis * 4 + r)] = {base, base | (1 << axis), axis};
        }
    }
    return e;
}

const std::array<EdgeDef, 12> kEdges = make_edges();

int
edge_between(int a, int b) {
    for (int i = 0; i < 12; ++i)
        if ((kEdges[std::size_t(i)].a == a && kEdges[std::size_t(i)].b == b) ||
            (kEdges[std::size_t(i)].a == b && kEdges[std::size_t(i)].b == a))
            return i;
    return -1;
}

Vec3
edge_mid(int e) {
    return 0.5 * (corner_pos(kEdges[std::size_t(e)].a) + corner_pos(kEdges[std::size_t(e)].b));
}

/// Contour loops of one case, each oriented with the inside corners on the left
/// as seen from outside the cube.
std::vector<std::vector<int>>
case_loops(int cfg) {
    auto inside = [&](int c) { return ((cfg >> c) & 1) != 0; };
    std::array<int, 12> next;
    next.fill(-1);
    for (int axis = 0; axis < 3; ++axis)
        for (int side = 0; side < 2; ++side) {
            const int u = axis == 0 ? 1 : 0, v = axis == 2 ? 1 : 2;
            const int s = side << axis;
            const int q[4] = {s, s | (1 << u), s | (1 << u) | (1 << v), s | (1 << v)};
            Vec3 n = Vec3::Zero();
            n[axis] = side ? 1.0 : -1.0;
            std::vector<std::pair<int, int>> segs; // (edge, adjacent inside corner)
            int crossings = 0;
            for (int i = 0; i < 4; ++i)
                crossings += inside(q[i]) != inside(q[(i + 1) % 4]);
            std::vector<std::array<int, 3>> cuts; // edge A, edge B, reference inside corner
            if (crossings == 2) {
                int ea = -1, eb = -1, ref = -1;
                for (int i = 0; i < 4; ++i) {
                    if (inside(q[i]))
                        ref = q[i];
                    if (inside(q[i]) != inside(q[(i + 1) % 4]))
                        (ea < 0 ? ea : eb) = edge_between(q[i], q[(i + 1) % 4]);
                }
                cuts.push_back({ea, eb, ref});
            } else if (crossings == 4) {
                // ambiguous face: every inside corner is cut off on its own
                for (int i = 0; i < 4; ++i)
                    if (inside(q[i]))
                        cuts.push_back({edge_between(q[(i + 3) % 4], q[i]), edge_between(q[i], q[(i + 1) % 4]), q[i]});
            }
            for (auto [ea, eb, ref] : cuts) {
                const Vec3 pa = edge_mid(ea), d = edge_mid(eb) - pa;
                if (n.cross(d).dot(corner_pos(ref) - pa) < 0.0)
                    std::swap(ea, eb);
                next[std::size_t(ea)] = eb;
            }
        }
    std::vector<std::vector<int>> loops;
    std::array<bool, 12> seen{};
    for (int e = 0; e < 12; ++e) {
        if (next[std::size_t(e)] < 0 || seen[std::size_t(e)])
            continue;
        std::vector<int> loop;
        for (int cur = e; !seen[std::size_t(cur)]; cur = next[std::size_t(cur)]) {
            seen[std::size_t(cur)] = true;
            loop.push_back(cur);
        }
        loops.push_back(loop);
    }
    return loops;
}

std::vector<std::vector<std::array<int, 3>>>
build_table() {
    std::vector<std::vector<std::array<int, 3>>> table(256);
    for (int cfg = 0; cfg < 256; ++cfg)
        for (const auto &loop : case_loops(cfg))
            for (std::size_t i = 1; i + 1 < loop.size(); ++i)
                table[std::size_t(cfg)].push_back({loop[0], loop[i], loop[i + 1]});
    // face the positive (outside) side: with only corner 0 inside, normals point away from it
    const auto &t = table[1].front();
    const Vec3 nrm = (edge_mid(t[1]) - edge_mid(t[0])).cross(edge_mid(t[2]) - edge_mid(t[0]));
    if (nrm.dot(Vec3(1, 1, 1)) < 0.0)
        for (auto &tris : table)
            for (auto &tri : tris)
                std::swap(tri[1], tri[2]);
    return table;
}

Vec3
grid_gradient(const TsdfVolume &vol, int i, int j, int k) {
    const int p[3] = {i, j, k};
    Vec3 g;
    for (int a = 0; a < 3; ++a) {
        int lo[3] = {i, j, k}, hi[3] = {i, j, k};
        lo[a] = std::max(p[a] - 1, 0);
        hi[a] = std::min(p[a] + 1, vol.dims[std::size_t(a)] - 1);
        const double span = double(hi[a] - lo[a]) * vol.voxel_size;
        g[a] = span > 0 ? (vol.values[vol.index(hi[0], hi[1], hi[2])] - vol.values[vol.index(lo[0], lo[1], lo[2])]) / span
                        : 0.0;
    }
    return g;
}

} // namespace

const std::vector<std::vector<std::array<int, 3>>> &
marching_cubes_table() {
    static const auto table = build_table();
    return table;
}

TriangleMesh
extract_mesh(const TsdfVolume &vol, double min_weight) {
    const auto &table = marching_cubes_table();
    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, int> edge_vertex;
    const double area_eps = 1e-12 * vol.voxel_size * vol.voxel_size;
    auto ok = [&](std::size_t idx) { return vol.weights[idx] > 0.0 && vol.weights[idx] >= min_weight; };

    for (int k = 0; k + 1 < vol.dims[2]; ++k)
        for (int j = 0; j + 1 < vol.dims[1]; ++j)
            for (int i = 0; i + 1 < vol.dims[0]; ++i) {
                std::array<std::size_t, 8> idx;
                int cfg = 0;
                bool usable = true;
                for (int c = 0; c < 8 && usable; ++c) {
                    idx[std::size_t(c)] = vol.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                    usable = ok(idx[std::size_t(c)]);
                    if (vol.values[idx[std::size_t(c)]] < 0.0)
                        cfg |= 1 << c;
                }
                if (!usable || cfg == 0 || cfg == 255)
                    continue;
                auto vertex_on = [&](int e) {
                    const EdgeDef &ed = kEdges[std::size_t(e)];
                    const std::size_t ga = idx[std::size_t(ed.a)];
                    const std::uint64_t key = std::uint64_t(ga) * 3 + std::uint64_t(ed.axis);
                    auto [it, fresh] = edge_vertex.try_emplace(key, int(mesh.vertices.size()));
                    if (fresh) {
                        const double va = vol.values[ga], vb = vol.values[idx[std::size_t(ed.b)]];
                        const double t = va / (va - vb);
                        const int ai = i + (ed.a & 1), aj = j + ((ed.a >> 1) & 1), ak = k + ((ed.a >> 2) & 1);
                        const int bi = i + (ed.b & 1), bj = j + ((ed.b >> 1) & 1), bk = k + ((ed.b >> 2) & 1);
                        const Vec3 pa = vol.center(ai, aj, ak), pb = vol.center(bi, bj, bk);
                        mesh.vertices.push_back(pa + t * (pb - pa));
                        Vec3 g = (1 - t) * grid_gradient(vol, ai, aj, ak) + t * grid_gradient(vol, bi, bj, bk);
                        mesh.normals.push_back(g.norm() > 0 ? Vec3(g.normalized()) : Vec3::Zero());
                    }
                    return it->second;
                };
                for (const auto &tri : table[std::size_t(cfg)]) {
                    const std::array<int, 3> t{vertex_on(tri[0]), vertex_on(tri[1]), vertex_on(tri[2])};
                    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
                        continue;
                    const Vec3 &a = mesh.vertices[std::size_t(t[0])], &b = mesh.vertices[std::size_t(t[1])],
                               &c = mesh.vertices[std::size_t(t[2])];
                    if (0.5 * (b - a).cross(c - a).norm() <= area_eps)
                        continue;
                    mesh.triangles.push_back(t);
                }
            }
    return mesh;
}

} // namespace gigags

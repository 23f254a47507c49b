#include "gigags/core/error.hpp"
#include "gigags/mesh/mesh.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

using namespace gigags;

namespace {

/// Volume filled with an exact signed distance function, all weights 1.
template <class F>
TsdfVolume
analytic_volume(const Vec3 &origin, double voxel, std::array<int, 3> dims, F &&sdf) {
    TsdfVolume v = TsdfVolume::create(origin, voxel, dims);
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                const std::size_t n = v.index(i, j, k);
                v.values[n] = std::clamp(sdf(v.center(i, j, k)) / v.truncation, -1.0, 1.0);
                v.weights[n] = 1.0;
            }
    return v;
}

TsdfVolume
sphere_volume(int n, double radius, Vec3 center = Vec3::Zero()) {
    const double voxel = 2.4 / (n - 1);
    return analytic_volume(Vec3(-1.2, -1.2, -1.2), voxel, {n, n, n},
                           [&](const Vec3 &p) { return (p - center).norm() - radius; });
}

/// Ray-sphere z-depth at pixel centers, computed directly.
void
sphere_depth(const View &view, const Vec3 &c, double r, ImageBuffer &depth, std::vector<std::uint8_t> &valid) {
    const auto &k = view.intrinsics;
    depth = ImageBuffer(k.width, k.height, 1);
    valid.assign(depth.pixel_count(), 0);
    for (int y = 0; y < k.height; ++y)
        for (int x = 0; x < k.width; ++x) {
            const Vec3 dcam((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
            const Vec3 d = view.pose.rotation * dcam;
            const Vec3 oc = view.pose.center - c;
            const double a = d.squaredNorm(), b = oc.dot(d), q = oc.squaredNorm() - r * r;
            const double disc = b * b - a * q;
            if (disc < 0)
                continue;
            depth.at(x, y) = (-b - std::sqrt(disc)) / a;
            valid[std::size_t(y) * std::size_t(k.width) + std::size_t(x)] = 1;
        }
}

std::vector<View>
six_views() {
    std::vector<View> out;
    const Vec3 dirs[6] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int i = 0; i < 6; ++i) {
        View v = test::make_view(96, 96, 110, Mat3::Identity(), Vec3::Zero(), i);
        const Vec3 up = std::abs(dirs[i].y()) > 0.5 ? Vec3(0, 0, 1) : Vec3(0, 1, 0);
        v.pose = look_at(3.0 * dirs[i], Vec3::Zero(), up);
        out.push_back(v);
    }
    return out;
}

double
mesh_area(const TriangleMesh &m) {
    double a = 0;
    for (const auto &t : m.triangles)
        a += 0.5 * (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]).norm();
    return a;
}

std::filesystem::path
temp_path(const std::string &name) {
    return std::filesystem::temp_directory_path() / ("gigags_mesh_test_" + name);
}

TriangleMesh
unit_triangle() {
    TriangleMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    m.triangles = {{0, 1, 2}};
    m.normals = {Vec3(0, 0, 1), Vec3(0, 0, 1), Vec3(0, 0, 1)};
    return m;
}

void
write_text(const std::filesystem::path &p, const std::string &s) {
    std::ofstream(p, std::ios::binary) << s;
}

} // namespace

TEST(MarchingCubesTable, UniformCasesAreEmpty) {
    const auto &t = marching_cubes_table();
    ASSERT_EQ(t.size(), 256u);
    EXPECT_TRUE(t[0].empty());
    EXPECT_TRUE(t[255].empty());
}

TEST(MarchingCubesTable, TrianglesUseOnlyCrossedEdgesAndCoverThemAll) {
    const auto &t = marching_cubes_table();
    auto corner = [](int axis, int bits, int end) {
        const int a = axis == 0 ? 1 : 0, b = axis == 2 ? 1 : 2;
        int c = (end << axis) | ((bits & 1) << a) | ((bits >> 1 & 1) << b);
        return c;
    };
    for (int cs = 0; cs < 256; ++cs) {
        std::set<int> used;
        for (const auto &tri : t[cs])
            for (int e : tri)
                used.insert(e);
        std::set<int> crossed;
        for (int e = 0; e < 12; ++e) {
            const int c0 = corner(e / 4, e % 4, 0), c1 = corner(e / 4, e % 4, 1);
            if (((cs >> c0) & 1) != ((cs >> c1) & 1))
                crossed.insert(e);
        }
        EXPECT_EQ(used, crossed) << "case " << cs;
    }
}

TEST(Extract, AllOutsideGivesEmptyMesh) {
    TsdfVolume v = analytic_volume(Vec3::Zero(), 0.1, {8, 8, 8}, [](const Vec3 &) { return 1.0; });
    EXPECT_TRUE(extract_mesh(v).triangles.empty());
}

TEST(Extract, UnobservedCellsAreSkipped) {
    TsdfVolume v = sphere_volume(24, 0.7);
    std::fill(v.weights.begin(), v.weights.end(), 0.0);
    EXPECT_TRUE(extract_mesh(v).triangles.empty());
}

TEST(Extract, AnalyticSphereIsClosedWithOutwardNormals) {
    const TsdfVolume v = sphere_volume(40, 0.8);
    const TriangleMesh m = extract_mesh(v);
    ASSERT_FALSE(m.triangles.empty());
    ASSERT_EQ(m.normals.size(), m.vertices.size());
    std::map<std::pair<int, int>, int> directed;
    for (const auto &t : m.triangles) {
        for (int e = 0; e < 3; ++e)
            ++directed[{t[e], t[(e + 1) % 3]}];
        const Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
        const Vec3 fn = (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
        EXPECT_GT(fn.dot(c), 0.0);
    }
    // every directed edge appears once and its reverse once: closed and consistently oriented
    for (const auto &[e, count] : directed) {
        EXPECT_EQ(count, 1);
        EXPECT_EQ(directed.count({e.second, e.first}), 1u);
    }
    const long V = long(m.vertices.size()), F = long(m.triangles.size()), E = long(directed.size()) / 2;
    EXPECT_EQ(V - E + F, 2);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        EXPECT_NEAR(m.vertices[i].norm(), 0.8, 0.05 * v.voxel_size);
        EXPECT_GT(m.normals[i].dot(m.vertices[i].normalized()), 0.99);
    }
}

TEST(Extract, TiltedPlaneAreaWithinTwoPercent) {
    const double voxel = 0.05, a = 0.3;
    const std::array<int, 3> dims{41, 31, 30};
    const Vec3 n = Vec3(-a, 0, 1).normalized();
    const TsdfVolume v =
        analytic_volume(Vec3::Zero(), voxel, dims, [&](const Vec3 &p) { return n.dot(p - Vec3(0, 0, 0.4)); });
    const TriangleMesh m = extract_mesh(v);
    const double lx = (dims[0] - 1) * voxel, ly = (dims[1] - 1) * voxel;
    const double expected = lx * ly * std::sqrt(1 + a * a);
    EXPECT_NEAR(mesh_area(m), expected, 0.02 * expected);
}

TEST(Integrate, SurfaceVoxelIsZeroAndFreeSpaceSaturates) {
    View view = test::make_view(32, 32, 30);
    ImageBuffer depth(32, 32, 1, 2.0);
    std::vector<std::uint8_t> valid(depth.pixel_count(), 1);
    TsdfVolume v = TsdfVolume::create(Vec3(0, 0, 1.0), 0.05, {1, 1, 41}, 0.2);
    integrate_depth(v, depth, valid, view);
    for (int k = 0; k < 41; ++k) {
        const double z = v.center(0, 0, k).z(), sdf = 2.0 - z;
        const std::size_t i = v.index(0, 0, k);
        if (sdf > -0.2 + 1e-9) {
            EXPECT_EQ(v.weights[i], 1.0) << z;
            EXPECT_NEAR(v.values[i], std::min(1.0, sdf / 0.2), 1e-12) << z;
        } else {
            EXPECT_EQ(v.weights[i], 0.0) << z;
            EXPECT_EQ(v.values[i], 1.0);
        }
    }
}

TEST(Integrate, InvalidPixelsAndOffscreenVoxelsAreSkipped) {
    View view = test::make_view(16, 16, 20);
    ImageBuffer depth(16, 16, 1, 2.0);
    std::vector<std::uint8_t> valid(depth.pixel_count(), 0);
    TsdfVolume v = TsdfVolume::create(Vec3(-0.2, -0.2, 1.8), 0.1, {5, 5, 5});
    integrate_depth(v, depth, valid, view);
    for (double w : v.weights)
        EXPECT_EQ(w, 0.0);
    TsdfVolume behind = TsdfVolume::create(Vec3(0, 0, -2), 0.1, {3, 3, 3});
    std::fill(valid.begin(), valid.end(), 1);
    integrate_depth(behind, depth, valid, view);
    for (double w : behind.weights)
        EXPECT_EQ(w, 0.0);
}

TEST(Integrate, WeightIsCapped) {
    View view = test::make_view(8, 8, 10);
    ImageBuffer depth(8, 8, 1, 2.0);
    std::vector<std::uint8_t> valid(depth.pixel_count(), 1);
    TsdfVolume v = TsdfVolume::create(Vec3(0, 0, 1.95), 0.1, {1, 1, 1});
    for (int i = 0; i < 80; ++i)
        integrate_depth(v, depth, valid, view);
    EXPECT_EQ(v.weights[0], 64.0);
}

TEST(Integrate, RejectsMismatchedDepth) {
    View view = test::make_view(8, 8, 10);
    ImageBuffer depth(9, 8, 1, 2.0);
    std::vector<std::uint8_t> valid(depth.pixel_count(), 1);
    TsdfVolume v = TsdfVolume::create(Vec3::Zero(), 0.1, {2, 2, 2});
    EXPECT_THROW(integrate_depth(v, depth, valid, view), Error);
}

class SphereFusion : public ::testing::Test {
protected:
    static constexpr double radius = 0.7;
    void SetUp() override {
        views = six_views();
        for (const auto &view : views) {
            depths.emplace_back();
            valids.emplace_back();
            sphere_depth(view, Vec3::Zero(), radius, depths.back(), valids.back());
        }
    }
    TsdfVolume fuse(const std::vector<int> &order) const {
        TsdfVolume v = TsdfVolume::create(Vec3(-1, -1, -1), 2.0 / 47, {48, 48, 48});
        for (int i : order)
            integrate_depth(v, depths[std::size_t(i)], valids[std::size_t(i)], views[std::size_t(i)]);
        return v;
    }
    std::vector<View> views;
    std::vector<ImageBuffer> depths;
    std::vector<std::vector<std::uint8_t>> valids;
};

TEST_F(SphereFusion, SignsMatchAndVerticesLieOnTheSphere) {
    const TsdfVolume v = fuse({0, 1, 2, 3, 4, 5});
    std::size_t checked = 0, agree = 0;
    for (int k = 0; k < v.dims[2]; ++k)
        for (int j = 0; j < v.dims[1]; ++j)
            for (int i = 0; i < v.dims[0]; ++i) {
                const std::size_t n = v.index(i, j, k);
                if (v.weights[n] <= 0)
                    continue;
                const double truth = v.center(i, j, k).norm() - radius;
                if (std::abs(truth) < v.voxel_size)
                    continue;
                ++checked;
                agree += (v.values[n] < 0) == (truth < 0);
            }
    ASSERT_GT(checked, 1000u);
    EXPECT_GE(double(agree), 0.99 * double(checked));
    const TriangleMesh m = extract_mesh(v);
    ASSERT_GT(m.triangles.size(), 500u);
    for (const auto &p : m.vertices)
        EXPECT_LE(std::abs(p.norm() - radius), v.voxel_size);
}

TEST_F(SphereFusion, IntegrationOrderDoesNotMatter) {
    const TsdfVolume a = fuse({0, 1, 2, 3, 4, 5});
    const TsdfVolume b = fuse({5, 3, 1, 4, 0, 2});
    ASSERT_EQ(a.values.size(), b.values.size());
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        EXPECT_EQ(a.weights[i], b.weights[i]);
        EXPECT_NEAR(a.values[i], b.values[i], 1e-6);
    }
}

TEST_F(SphereFusion, VerticesSitOnSignChangingEdges) {
    const TsdfVolume v = fuse({0, 1, 2, 3, 4, 5});
    const TriangleMesh m = extract_mesh(v);
    for (const auto &p : m.vertices) {
        const Vec3 g = (p - v.origin) / v.voxel_size;
        int axis = -1;
        std::array<int, 3> lo{};
        for (int a = 0; a < 3; ++a) {
            const double r = std::round(g[a]);
            if (std::abs(g[a] - r) < 1e-9) {
                lo[std::size_t(a)] = int(r);
            } else {
                ASSERT_EQ(axis, -1) << "vertex off the grid lines";
                axis = a;
                lo[std::size_t(a)] = int(std::floor(g[a]));
            }
        }
        if (axis < 0)
            continue; // vertex exactly on a voxel center
        std::array<int, 3> hi = lo;
        ++hi[std::size_t(axis)];
        const double s0 = v.values[v.index(lo[0], lo[1], lo[2])], s1 = v.values[v.index(hi[0], hi[1], hi[2])];
        EXPECT_LE(std::min(s0, s1), 0.0);
        EXPECT_GE(std::max(s0, s1), 0.0);
    }
}

TEST(Ply, BinaryRoundTripIsBitExact) {
    const TriangleMesh m = extract_mesh(sphere_volume(20, 0.6, Vec3(0.01, -0.02, 0.03)));
    const auto path = temp_path("binary.ply");
    write_ply(m, path);
    EXPECT_EQ(read_ply(path), m);
    std::filesystem::remove(path);
}

TEST(Ply, AsciiRoundTripIsExact) {
    const TriangleMesh m = extract_mesh(sphere_volume(16, 0.5));
    const auto path = temp_path("ascii.ply");
    write_ply(m, path, PlyFormat::Ascii);
    EXPECT_EQ(read_ply(path), m);
    std::filesystem::remove(path);
}

TEST(Ply, UnitTriangleAndEmptyMesh) {
    const auto path = temp_path("small.ply");
    for (const TriangleMesh &m : {unit_triangle(), TriangleMesh{}}) {
        for (PlyFormat f : {PlyFormat::Ascii, PlyFormat::BinaryLittleEndian}) {
            write_ply(m, path, f);
            EXPECT_EQ(read_ply(path), m);
        }
    }
    std::filesystem::remove(path);
}

TEST(Ply, ReadsFloatVerticesAndQuads) {
    const auto path = temp_path("quad.ply");
    write_text(path, "ply\nformat ascii 1.0\ncomment hand written\nelement vertex 4\nproperty float x\n"
                     "property float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\n"
                     "end_header\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
    const TriangleMesh m = read_ply(path);
    EXPECT_EQ(m.vertices.size(), 4u);
    EXPECT_EQ(m.triangles.size(), 2u);
    EXPECT_TRUE(m.normals.empty());
    EXPECT_DOUBLE_EQ(mesh_area(m), 1.0);
    std::filesystem::remove(path);
}

TEST(Ply, MalformedInputIsRejected) {
    const auto path = temp_path("bad.ply");
    const std::string head = "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nproperty double y\n"
                             "property double z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n";
    const std::pair<std::string, ErrorCode> cases[] = {
        {"plx\n", ErrorCode::MalformedLine},
        {head + "0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n", ErrorCode::MalformedLine},
        {head + "0 0 0\n1 0\n", ErrorCode::MalformedLine},
        {"ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\n", ErrorCode::MalformedLine},
    };
    for (const auto &[text, code] : cases) {
        write_text(path, text);
        try {
            read_ply(path);
            ADD_FAILURE() << "accepted: " << text;
        } catch (const Error &e) {
            EXPECT_EQ(e.code(), code) << e.what();
        }
    }
    std::filesystem::remove(path);
    EXPECT_THROW(read_ply(temp_path("missing.ply")), Error);
}

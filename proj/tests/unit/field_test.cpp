#include "gigags/core/error.hpp"
#include "gigags/field/anchor_grid.hpp"
#include "gigags/field/decoder.hpp"
#include "gigags/field/field.hpp"
#include "gigags/field/kernel.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace gigags;

namespace {

LodConfig
lod(double v0, int fork, int levels, double d_max) {
    LodConfig c;
    c.v0 = v0;
    c.fork = fork;
    c.levels = levels;
    c.d_max = d_max;
    return c;
}

AnchorGrid
one_point_grid(int levels = 2) {
    const std::vector<Vec3> pts{Vec3(0.3, 0, 0)};
    return build_hierarchy(pts, lod(1.0, 2, levels, 4.0), 7);
}

} // namespace

TEST(BuildHierarchy, OnePointRoundsPerLevel) {
    const AnchorGrid g = one_point_grid();
    ASSERT_EQ(g.size(), 2u);
    const Anchor *a0 = g.find({0, {0, 0, 0}});
    const Anchor *a1 = g.find({1, {1, 0, 0}});
    ASSERT_TRUE(a0 && a1);
    EXPECT_TRUE(a0->center.isApprox(Vec3(0, 0, 0)) || a0->center.norm() == 0.0);
    EXPECT_TRUE(a1->center.isApprox(Vec3(0.5, 0, 0)));
}

TEST(BuildHierarchy, DuplicatePointsGiveOneAnchorPerLevel) {
    const std::vector<Vec3> pts{Vec3(1.2, -0.4, 2.0), Vec3(1.2, -0.4, 2.0)};
    const AnchorGrid g = build_hierarchy(pts, lod(1.0, 2, 3, 4.0), 1);
    for (int l = 0; l < 3; ++l)
        EXPECT_EQ(g.level_size(l), 1u);
}

TEST(BuildHierarchy, QuantizationBoundAndCount) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-3, 3);
    std::vector<Vec3> pts;
    for (int i = 0; i < 300; ++i)
        pts.emplace_back(u(rng), u(rng), u(rng));
    const LodConfig cfg = lod(0.7, 3, 3, 10.0);
    const AnchorGrid g = build_hierarchy(pts, cfg, 4);
    for (int l = 0; l < cfg.levels; ++l) {
        EXPECT_LE(g.level_size(l), pts.size());
        const double v = cfg.voxel_size(l);
        for (const Vec3 &p : pts) {
            const CellKey c = g.cell_of(l, p);
            const Vec3 center = g.cell_center(l, c);
            EXPECT_LE((center - p).cwiseAbs().maxCoeff(), v / 2 + 1e-12);
            const Anchor *a = g.find({l, c});
            ASSERT_NE(a, nullptr);
            EXPECT_EQ(a->center, center);
        }
    }
}

TEST(BuildHierarchy, EmptyCloudThrows) {
    try {
        build_hierarchy(std::vector<Vec3>{}, lod(1, 2, 1, 1), 0);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyPointCloud);
    }
}

TEST(BuildHierarchy, SameSeedSameParameters) {
    std::vector<Vec3> pts{Vec3(0.1, 0.2, 0.3), Vec3(2, 1, 0)};
    const AnchorGrid a = build_hierarchy(pts, lod(1, 2, 2, 4), 99);
    std::reverse(pts.begin(), pts.end());
    const AnchorGrid b = build_hierarchy(pts, lod(1, 2, 2, 4), 99);
    const auto aa = a.anchors(), bb = b.anchors();
    ASSERT_EQ(aa.size(), bb.size());
    for (std::size_t i = 0; i < aa.size(); ++i)
        EXPECT_EQ(aa[i]->params, bb[i]->params);
}

TEST(UpperLevel, Examples) {
    const LodConfig cfg = lod(1, 2, 4, 8.0);
    EXPECT_EQ(upper_level(8.0, cfg), 0);
    EXPECT_EQ(upper_level(4.0, cfg), 1);
    EXPECT_EQ(upper_level(8.0 / std::pow(2.0, 10), cfg), 3);
    EXPECT_EQ(upper_level(100.0, cfg), 0);
    // floor versus round: log2(8/2.5) = 1.68
    EXPECT_EQ(upper_level(2.5, cfg, LevelMode::Round), 2);
    EXPECT_EQ(upper_level(2.5, cfg, LevelMode::Floor), 1);
    EXPECT_THROW(upper_level(0.0, cfg), Error);
}

TEST(UpperLevel, MonotoneAndBounded) {
    const LodConfig cfg = lod(1, 3, 5, 20.0);
    for (auto mode : {LevelMode::Round, LevelMode::Floor}) {
        int prev = cfg.levels;
        for (double d = 1e-3; d < 100; d *= 1.05) {
            const int l = upper_level(d, cfg, mode);
            EXPECT_GE(l, 0);
            EXPECT_LE(l, cfg.levels - 1);
            EXPECT_LE(l, prev);
            prev = l;
        }
    }
}

TEST(ActiveAnchors, DistanceSelectsLevels) {
    AnchorGrid g = one_point_grid(2);
    // anchors at (0,0,0) level 0 and (0.5,0,0) level 1; d_max = 4
    View far = test::make_view(64, 64, 40, Mat3::Identity(), Vec3(0.25, 0, -4.0));
    auto act = active_anchors(g, far);
    ASSERT_EQ(act.size(), 1u);
    EXPECT_EQ(act[0]->level, 0);
    View near = test::make_view(64, 64, 40, Mat3::Identity(), Vec3(0.25, 0, -1.5));
    EXPECT_EQ(active_anchors(g, near).size(), 2u);
}

TEST(ActiveAnchors, BehindCameraExcluded) {
    AnchorGrid g = one_point_grid(1);
    View v = test::make_view(64, 64, 40, Mat3::Identity(), Vec3(0, 0, 1.0));
    EXPECT_TRUE(active_anchors(g, v).empty());
}

TEST(ActiveAnchors, ApproachingNeverDropsLevels) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<Vec3> pts;
    for (int i = 0; i < 100; ++i)
        pts.emplace_back(u(rng), u(rng), u(rng));
    const AnchorGrid g = build_hierarchy(pts, lod(0.5, 2, 4, 3.5), 1);
    int prev = -1;
    for (double z = -12; z < -2.5; z += 0.5) {
        View v = test::make_view(400, 400, 150, Mat3::Identity(), Vec3(0, 0, z));
        int max_level = -1;
        for (const Anchor *a : active_anchors(g, v))
            max_level = std::max(max_level, a->level);
        EXPECT_GE(max_level, prev);
        prev = max_level;
    }
}

TEST(Decode, ZeroWeightsGiveCanonicalKernels) {
    const AnchorGrid g = one_point_grid(1);
    Anchor a = *g.anchors()[0];
    for (int j = 0; j < g.shape().kernels; ++j)
        for (int c = 0; c < 3; ++c)
            a.params[a.offset_index(g.shape(), j) + std::size_t(c)] = 0.0;
    const DecoderWeights w = DecoderWeights::zeros(g.shape(), 32);
    const View v = test::make_view(32, 32, 30, Mat3::Identity(), Vec3(0, 0, -3));
    const auto ks = decode_anchor(a, w, v, g.config());
    ASSERT_EQ(ks.size(), std::size_t(g.shape().kernels));
    for (int j = 0; j < g.shape().kernels; ++j) {
        EXPECT_EQ(ks[std::size_t(j)].mu, a.center);
        EXPECT_DOUBLE_EQ(ks[std::size_t(j)].opacity(), 0.5);
        EXPECT_LT((ks[std::size_t(j)].rotation() - Mat3::Identity()).norm(), 1e-15);
        EXPECT_TRUE(ks[std::size_t(j)].log_scale.isApprox(a.log_scale(g.shape(), j)));
    }
}

TEST(Decode, OutputCountIndependentOfView) {
    const AnchorGrid g = one_point_grid(1);
    const DecoderWeights w = DecoderWeights::random(g.shape(), 32, 3);
    for (double z : {-1.0, -5.0, -50.0}) {
        const View v = test::make_view(16, 16, 10, Mat3::Identity(), Vec3(0.3, 0.2, z));
        EXPECT_EQ(decode_anchor(*g.anchors()[0], w, v, g.config()).size(), std::size_t(g.shape().kernels));
    }
}

TEST(Decode, ShapeMismatchThrows) {
    const AnchorGrid g = one_point_grid(1);
    AnchorShape other;
    other.kernels = 2;
    const DecoderWeights w = DecoderWeights::zeros(other, 8);
    const View v = test::make_view(16, 16, 10, Mat3::Identity(), Vec3(0, 0, -3));
    EXPECT_THROW(decode_anchor(*g.anchors()[0], w, v, g.config()), Error);
}

namespace {

struct DecodeFixture {
    AnchorGrid grid;
    Anchor anchor;
    DecoderWeights w;
    View view;
    std::vector<std::vector<double>> coeff; // per kernel, one weight per raw parameter

    explicit DecodeFixture(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> n(0.0, 1.0);
        grid = build_hierarchy(std::vector<Vec3>{Vec3(0.2, -0.1, 0.4)}, lod(1.0, 2, 1, 4.0), seed);
        anchor = *grid.anchors()[0];
        for (double &p : anchor.params)
            p += 0.3 * n(rng);
        w = DecoderWeights::random(grid.shape(), 32, seed, 1.0);
        for (double &p : w.params)
            p += 0.05 * n(rng);
        view = test::make_view(16, 16, 10, Mat3::Identity(), Vec3(0.5, 0.3, -3));
        coeff.assign(std::size_t(grid.shape().kernels), std::vector<double>(14));
        for (auto &c : coeff)
            for (double &x : c)
                x = n(rng);
    }

    double loss() const {
        const auto ks = decode_anchor(anchor, w, view, grid.config());
        double l = 0.0;
        for (std::size_t j = 0; j < ks.size(); ++j) {
            GaussianKernel k = ks[j];
            std::size_t i = 0;
            test::for_each_param(k, [&](double &p) { l += coeff[j][i++] * p; });
        }
        return l;
    }

    void grads(std::vector<double> &ga, std::vector<double> &gw, Vec3 *gc = nullptr) const {
        DecodeCache cache;
        const auto ks = decode_anchor(anchor, w, view, grid.config(), &cache);
        std::vector<KernelGrad> kg(ks.size());
        for (std::size_t j = 0; j < ks.size(); ++j) {
            auto &g = kg[j];
            const auto &c = coeff[j];
            g.mu = Vec3(c[0], c[1], c[2]);
            g.rot = Vec4(c[3], c[4], c[5], c[6]);
            g.log_scale = Vec3(c[7], c[8], c[9]);
            g.opacity_logit = c[10];
            g.color_logit = Vec3(c[11], c[12], c[13]);
        }
        ga.assign(anchor.params.size(), 0.0);
        gw.assign(w.params.size(), 0.0);
        decode_anchor_backward(anchor, w, grid.config(), cache, kg, ga, gw, gc, &view);
    }
};

} // namespace

TEST(Decode, OpacityFeatureGradientMatchesFiniteDifferences) {
    DecodeFixture f(21);
    for (auto &c : f.coeff)
        std::fill(c.begin(), c.end(), 0.0);
    f.coeff[1][10] = 1.0; // opacity logit of kernel 1
    std::vector<double> ga, gw;
    f.grads(ga, gw);
    for (int i = 0; i < f.grid.shape().feature_dim; ++i) {
        // derivative of sigmoid(logit) follows from the logit derivative
        const double num = test::central_difference(
            [&] { return sigmoid(decode_anchor(f.anchor, f.w, f.view, f.grid.config())[1].opacity_logit); },
            f.anchor.params[std::size_t(i)], 1e-5);
        const double logit = decode_anchor(f.anchor, f.w, f.view, f.grid.config())[1].opacity_logit;
        const double ana = ga[std::size_t(i)] * sigmoid(logit) * (1 - sigmoid(logit));
        EXPECT_LT(test::relative_error(ana, num, 1e-8), 1e-4) << "feature " << i;
    }
}

class DecodeFd : public ::testing::TestWithParam<int> {};

TEST_P(DecodeFd, AllParametersMatchFiniteDifferences) {
    DecodeFixture f(static_cast<std::uint64_t>(GetParam()));
    std::vector<double> ga, gw;
    f.grads(ga, gw);
    for (std::size_t i = 0; i < f.anchor.params.size(); ++i) {
        const double num = test::central_difference([&] { return f.loss(); }, f.anchor.params[i], 1e-5);
        EXPECT_LT(test::relative_error(ga[i], num, 1e-4), 1e-3) << "anchor param " << i;
    }
    for (std::size_t i = 0; i < f.w.params.size(); i += 7) {
        const double num = test::central_difference([&] { return f.loss(); }, f.w.params[i], 1e-5);
        EXPECT_LT(test::relative_error(gw[i], num, 1e-4), 1e-3) << "decoder param " << i;
    }
}

TEST_P(DecodeFd, CenterMatchesFiniteDifferences) {
    DecodeFixture f(static_cast<std::uint64_t>(GetParam()));
    std::vector<double> ga, gw;
    Vec3 gc = Vec3::Zero();
    f.grads(ga, gw, &gc);
    for (int i = 0; i < 3; ++i) {
        const double num = test::central_difference([&] { return f.loss(); }, f.anchor.center[i], 1e-5);
        EXPECT_LT(test::relative_error(gc[i], num, 1e-4), 1e-3) << "center " << i;
    }
}

TEST(Decode, CenterGradientNeedsView) {
    DecodeFixture f(4);
    DecodeCache cache;
    const auto ks = decode_anchor(f.anchor, f.w, f.view, f.grid.config(), &cache);
    std::vector<KernelGrad> kg(ks.size());
    std::vector<double> ga(f.anchor.params.size()), gw(f.w.params.size());
    Vec3 gc = Vec3::Zero();
    EXPECT_THROW(decode_anchor_backward(f.anchor, f.w, f.grid.config(), cache, kg, ga, gw, &gc), Error);
}

INSTANTIATE_TEST_SUITE_P(Seeds, DecodeFd, ::testing::Values(1, 2, 3));

TEST(KernelNormal, AxisOrdering) {
    const auto k = GaussianKernel::from_values(Vec3::Zero(), Vec4(1, 0, 0, 0), Vec3(0.5, 0.2, 0.1), 0.5,
                                               Vec3::Constant(0.5));
    const View v = test::make_view(16, 16, 10, Mat3::Identity(), Vec3(0, 0, 5));
    EXPECT_TRUE(kernel_normal(k, v).isApprox(Vec3(0, 0, 1)));
    const View below = test::make_view(16, 16, 10, Mat3::Identity(), Vec3(0, 0, -5));
    EXPECT_TRUE(kernel_normal(k, below).isApprox(Vec3(0, 0, -1)));
}

TEST(KernelNormal, RotatedAboutX) {
    const double h = std::sqrt(0.5);
    const auto k = GaussianKernel::from_values(Vec3::Zero(), Vec4(h, h, 0, 0), Vec3(0.5, 0.2, 0.1), 0.5,
                                               Vec3::Constant(0.5));
    const View v = test::make_view(16, 16, 10, Mat3::Identity(), Vec3(0.3, -4, 0.2));
    const Vec3 n = kernel_normal(k, v);
    EXPECT_NEAR(std::abs(n.y()), 1.0, 1e-12);
    EXPECT_LT(n.y(), 0.0); // faces the camera below
}

TEST(KernelNormal, UnitNormPermutationInvarianceAndTies) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    for (int i = 0; i < 100; ++i) {
        const Mat3 r = test::random_rotation(rng);
        const Eigen::Quaterniond q(r);
        const Vec4 quat(q.w(), q.x(), q.y(), q.z());
        const double a = u(rng), b = u(rng);
        const View v = test::make_view(16, 16, 10, Mat3::Identity(), Vec3(u(rng), u(rng), 3));
        const auto k1 = GaussianKernel::from_values(Vec3::Zero(), quat, Vec3(a, b, 0.05), 0.5, Vec3::Constant(0.5));
        const auto k2 = GaussianKernel::from_values(Vec3::Zero(), quat, Vec3(b, a, 0.05), 0.5, Vec3::Constant(0.5));
        const Vec3 n1 = kernel_normal(k1, v), n2 = kernel_normal(k2, v);
        EXPECT_NEAR(n1.norm(), 1.0, 1e-12);
        EXPECT_LT((n1 - n2).norm(), 1e-12);
        EXPECT_LT(n1.dot(k1.mu - v.camera_center()), 0.0);
    }
    const auto tie = GaussianKernel::from_values(Vec3::Zero(), Vec4(1, 0, 0, 0), Vec3(0.5, 0.1, 0.1), 0.5,
                                                 Vec3::Constant(0.5));
    try {
        kernel_normal(tie, test::make_view(16, 16, 10, Mat3::Identity(), Vec3(0, 0, 3)));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateScale);
    }
    EXPECT_EQ(min_scale_axis(Vec3(0.5, 0.1, 0.1)), 1);
}

TEST(Densify, QuietStatsLeaveGridUnchanged) {
    AnchorGrid g = one_point_grid(2);
    const AnchorGrid before = g;
    AnchorStatsMap stats;
    g.for_each([&](const Anchor &a) { stats[key_of(a)] = {0.0, 5, 0.9, Vec3::Zero(), 0.0}; });
    const auto rep = densify_and_prune(g, stats, {}, {}, 1);
    EXPECT_TRUE(rep.grown.empty());
    EXPECT_TRUE(rep.pruned.empty());
    EXPECT_EQ(checkpoint_to_string({g, {}}), checkpoint_to_string({before, {}}));
}

TEST(Densify, TransparentAnchorIsPruned) {
    AnchorGrid g = one_point_grid(2);
    AnchorStatsMap stats;
    stats[{0, {0, 0, 0}}] = {0.0, 3, 0.0, Vec3::Zero(), 0.0};
    const auto rep = densify_and_prune(g, stats, {}, {}, 1);
    ASSERT_EQ(rep.pruned.size(), 1u);
    EXPECT_FALSE(g.contains({0, {0, 0, 0}}));
    EXPECT_TRUE(g.contains({1, {1, 0, 0}}));
}

TEST(Densify, GrowthAddsFinerChildWithoutDuplicates) {
    AnchorGrid g = one_point_grid(2);
    AnchorStatsMap stats;
    // gradient-weighted position (0.1, 0, 0) lands in level-1 cell (0,0,0), which is free
    stats[{0, {0, 0, 0}}] = {1.0, 1, 0.9, Vec3(0.1, 0, 0), 1.0};
    auto rep = densify_and_prune(g, stats, {}, {}, 1);
    ASSERT_EQ(rep.grown.size(), 1u);
    EXPECT_TRUE(g.contains({1, {0, 0, 0}}));
    EXPECT_EQ(g.size(), 3u);
    // same request again: the cell is now taken
    rep = densify_and_prune(g, stats, {}, {}, 1);
    EXPECT_TRUE(rep.grown.empty());
    EXPECT_EQ(g.size(), 3u);
    // the finest level never grows
    stats.clear();
    stats[{1, {1, 0, 0}}] = {1.0, 1, 0.9, Vec3(0.5, 0, 0), 1.0};
    rep = densify_and_prune(g, stats, {}, {}, 1);
    EXPECT_TRUE(rep.grown.empty());
}

TEST(Checkpoint, RoundTripIsExact) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-2, 2);
    std::vector<Vec3> pts;
    for (int i = 0; i < 40; ++i)
        pts.emplace_back(u(rng), u(rng), u(rng));
    GaussianField f;
    f.grid = build_hierarchy(pts, lod(0.9, 2, 3, 7.0), 5);
    f.decoders.push_back(DecoderWeights::random(f.grid.shape(), 32, 1));
    f.decoders.push_back(DecoderWeights::random(f.grid.shape(), 32, 2));
    f.grid.for_each([&](Anchor &a) {
        a.partition = int(a.cell[0] & 1);
        a.expanded = a.cell[1] > 0;
    });
    const std::string text = checkpoint_to_string(f);
    const GaussianField back = checkpoint_from_string(text);
    EXPECT_EQ(checkpoint_to_string(back), text);
    ASSERT_EQ(back.grid.size(), f.grid.size());
    EXPECT_EQ(back.decoders, f.decoders);
    const auto a = f.grid.anchors(), b = back.grid.anchors();
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i]->params, b[i]->params);
        EXPECT_EQ(a[i]->center, b[i]->center);
        EXPECT_EQ(a[i]->partition, b[i]->partition);
        EXPECT_EQ(a[i]->expanded, b[i]->expanded);
    }
    EXPECT_THROW(checkpoint_from_string("gigags-checkpoint 2\n"), Error);
}

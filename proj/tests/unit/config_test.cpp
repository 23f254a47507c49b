#include "gigags/core/error.hpp"
#include "gigags/loss/ssim.hpp"
#include "gigags/pipeline/config.hpp"
#include "gigags/pipeline/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace gigags;

namespace {

ErrorCode
code_of(const std::function<void()> &f) {
    try {
        f();
    } catch (const Error &e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::InvalidArgument;
}

ImageBuffer
noise_image(std::uint64_t seed, int w = 24, int h = 20) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.2, 0.8);
    ImageBuffer img(w, h, 3);
    for (double &x : img.data())
        x = u(rng);
    return img;
}

} // namespace

TEST(Config, DefaultsValidate) {
    PipelineConfig c;
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, SectionsAndOverrides) {
    PipelineConfig c;
    apply_config_text(c, "# desk run\n[train]\niterations = 50 ; short\nuse_appearance = false\n\n[loss]\n"
                         "w_mv=0.5\nlocal_weight = edge\n[lod]\nv0 = 0.3\n");
    EXPECT_EQ(c.train.iterations, 50);
    EXPECT_FALSE(c.train.use_appearance);
    EXPECT_EQ(c.train.objective.weights.multiview, 0.5);
    EXPECT_EQ(c.train.objective.local.weight, LocalWeight::EdgeAware);
    EXPECT_EQ(c.lod.v0, 0.3);
    apply_config_override(c, "train.iterations=7");
    apply_config_override(c, "general.seed = 12");
    EXPECT_EQ(c.train.iterations, 7);
    EXPECT_EQ(c.seed, 12u);
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
    PipelineConfig c;
    EXPECT_EQ(code_of([&] { apply_config_text(c, "[train]\niteration = 5\n"); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([&] { apply_config_text(c, "[bogus]\n"); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([&] { apply_config_text(c, "iterations = 5\n"); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([&] { apply_config_text(c, "[train]\niterations = many\n"); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([&] { apply_config_text(c, "[train]\niterations = 5x\n"); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([&] { apply_config_override(c, "train.iterations"); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([&] { apply_config_override(c, "nope.key=1"); }), ErrorCode::ConfigError);
    try {
        apply_config_text(c, "[train]\n\niterations = 5\nfoo = 1\n");
        FAIL();
    } catch (const Error &e) {
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
}

TEST(Config, OutOfRangeValuesFailValidation) {
    for (const char *o : {"train.iterations=-1", "train.lr_feature=0", "loss.w_mv=-1", "lod.fork=1",
                          "plan.grid_x=0", "mesh.view_stride=0", "loss.patch_half_size=0", "loss.occlusion_px=0",
                          "train.mv_start_fraction=1.5", "render.alpha_max=2"}) {
        EXPECT_EQ(code_of([&] { load_config({}, {o}); }), ErrorCode::ConfigError) << o;
    }
}

TEST(Config, DumpRoundTrips) {
    PipelineConfig c;
    c.train.iterations = 123;
    c.train.objective.weights.multiview = 0.125;
    c.train.objective.ssim_target = SsimTarget::Adjusted;
    c.seed = 99;
    const std::string text = config_to_string(c);
    PipelineConfig r;
    apply_config_text(r, text);
    EXPECT_EQ(config_to_string(r), text);
    // every key appears in the dump
    for (const auto &k : config_keys())
        EXPECT_NE(text.find(k.substr(k.find('.') + 1) + " = "), std::string::npos) << k;
}

TEST(Config, LoadFromFile) {
    const auto path = std::filesystem::temp_directory_path() / "gigags_config_test.ini";
    std::ofstream(path) << "[train]\niterations = 10\n";
    const PipelineConfig c = load_config(path, {"train.iterations=11"});
    EXPECT_EQ(c.train.iterations, 11);
    std::filesystem::remove(path);
    EXPECT_EQ(code_of([&] { load_config(path); }), ErrorCode::IoError);
}

TEST(Metrics, PsnrExamples) {
    const ImageBuffer a = noise_image(1);
    EXPECT_EQ(psnr(a, a), 99.0);
    ImageBuffer b = a;
    for (double &x : b.data())
        x += 0.1;
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
    EXPECT_EQ(code_of([&] { psnr(a, noise_image(1, 23, 20)); }), ErrorCode::DimensionMismatch);
}

TEST(Metrics, PsnrOfUniformNoiseMatchesClosedForm) {
    // noise U(-e, e) has variance e^2 / 3, so PSNR = 10 log10(3 / e^2)
    const double e = 0.05;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-e, e);
    const ImageBuffer a = noise_image(2, 128, 128);
    ImageBuffer b = a;
    for (double &x : b.data())
        x += u(rng);
    EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(3.0 / (e * e)), 0.5);
}

TEST(Metrics, SsimIdentitySymmetryAndSharedImplementation) {
    const ImageBuffer a = noise_image(4), b = noise_image(5);
    EXPECT_NEAR(ssim_metric(a, a), 1.0, 1e-12);
    EXPECT_NEAR(ssim_metric(a, b), ssim_metric(b, a), 1e-12);
    EXPECT_NEAR(ssim_metric(a, b), ssim(a, b), 1e-12);
    EXPECT_LT(ssim_metric(a, b), 0.5);
    EXPECT_EQ(code_of([&] { ssim_metric(a, noise_image(1, 23, 20)); }), ErrorCode::DimensionMismatch);
}

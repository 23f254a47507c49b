#pragma once

#include "gigags/pipeline/bundle.hpp"

#include <cstdint>
#include <optional>

namespace gigags {

/// Textured ground plane (y = 0, |x|,|z| <= plane_half_extent) with a textured
/// sphere resting on it, seen by a ring of cameras.
struct SynthConfig {
    int width = 64, height = 64;
    int train_views = 8;
    int test_views = 2;
    double fov_deg = 50.0;
    double ring_radius = 3.2;
    double camera_height = 2.4;
    Vec3 target = Vec3(0.0, 0.3, 0.0);
    Vec3 sphere_center = Vec3(0.0, 0.6, 0.0);
    double sphere_radius = 0.6;
    double plane_half_extent = 3.0;
    double texture_period = 1.5;
    int points = 3000;
    int supersample = 4;
    std::uint64_t seed = 0;

    /// Throws InvalidArgument.
    void validate() const;
};

struct SynthHit {
    double t = 0.0; // ray parameter
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    int surface = -1; // 0 plane, 1 sphere
};

/// Nearest hit with t > 0 along origin + t * dir.
std::optional<SynthHit> synth_ray_cast(const SynthConfig &cfg, const Vec3 &origin, const Vec3 &dir);

/// Unlit albedo at a surface point.
Vec3 synth_albedo(const SynthConfig &cfg, const SynthHit &hit);

/// Supersampled ground-truth color for a view (background black).
ImageBuffer synth_render(const SynthConfig &cfg, const View &view);

/// Analytic z-depth at pixel centers plus validity (ray hits a surface).
void synth_depth(const SynthConfig &cfg, const View &view, ImageBuffer &depth, std::vector<std::uint8_t> &valid);

/// Distance from p to the nearest analytic surface (plane square or sphere).
double synth_surface_distance(const SynthConfig &cfg, const Vec3 &p);

/// Cameras, images, sparse colored points and the train/test split.
SceneBundle make_synth_scene(const SynthConfig &cfg);

/// Key-value text form ("key value" lines) used to recover the analytic scene later.
std::string synth_config_to_string(const SynthConfig &cfg);
/// Throws MalformedLine.
SynthConfig synth_config_from_string(const std::string &text);

} // namespace gigags

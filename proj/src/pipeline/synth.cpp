#include "gigags/pipeline/synth.hpp"

#include "gigags/core/error.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace gigags {

void
SynthConfig::validate() const {
    if (width < 16 || height < 16 || train_views < 1 || test_views < 0 || !(fov_deg > 0 && fov_deg < 170) ||
        !(ring_radius > 0) || !(sphere_radius > 0) || !(plane_half_extent > 0) || !(texture_period > 0) ||
        points < 1 || supersample < 1)
        throw Error(ErrorCode::InvalidArgument, "synth: invalid configuration");
}

std::optional<SynthHit>
synth_ray_cast(const SynthConfig &cfg, const Vec3 &o, const Vec3 &d) {
    std::optional<SynthHit> best;
    if (std::abs(d.y()) > 1e-12) {
        const double t = -o.y() / d.y();
        const Vec3 p = o + t * d;
        if (t > 1e-9 && std::abs(p.x()) <= cfg.plane_half_extent && std::abs(p.z()) <= cfg.plane_half_extent)
            best = SynthHit{t, p, Vec3(0, o.y() > 0 ? 1 : -1, 0), 0};
    }
    const Vec3 oc = o - cfg.sphere_center;
    const double a = d.squaredNorm(), b = oc.dot(d), c = oc.squaredNorm() - cfg.sphere_radius * cfg.sphere_radius;
    const double disc = b * b - a * c;
    if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        for (double t : {(-b - s) / a, (-b + s) / a})
            if (t > 1e-9) {
                if (!best || t < best->t) {
                    const Vec3 p = o + t * d;
                    best = SynthHit{t, p, (p - cfg.sphere_center) / cfg.sphere_radius, 1};
                }
                break;
            }
    }
    return best;
}

Vec3
synth_albedo(const SynthConfig &cfg, const SynthHit &hit) {
    const double w = 2.0 * std::numbers::pi / cfg.texture_period;
    if (hit.surface == 0) {
        const double s = std::sin(w * hit.point.x()) * std::cos(w * hit.point.z());
        const double r = std::sin(0.5 * w * (hit.point.x() + hit.point.z()));
        return Vec3(0.45 + 0.2 * s, 0.5 + 0.15 * r, 0.35 - 0.15 * s);
    }
    const Vec3 n = hit.normal;
    const double band = std::sin(2.0 * w * cfg.sphere_radius * n.y());
    return Vec3(0.6 + 0.25 * n.x(), 0.3 + 0.15 * band, 0.55 + 0.25 * n.z());
}

ImageBuffer
synth_render(const SynthConfig &cfg, const View &view) {
    const auto &k = view.intrinsics;
    ImageBuffer img(k.width, k.height, 3);
    const int ss = cfg.supersample;
    const double inv = 1.0 / double(ss * ss);
    for (int y = 0; y < k.height; ++y)
        for (int x = 0; x < k.width; ++x) {
            Vec3 acc = Vec3::Zero();
            for (int sy = 0; sy < ss; ++sy)
                for (int sx = 0; sx < ss; ++sx) {
                    const double u = x - 0.5 + (sx + 0.5) / ss, v = y - 0.5 + (sy + 0.5) / ss;
                    const Vec3 dir = view.pose.rotation * k.ray(u, v);
                    if (auto hit = synth_ray_cast(cfg, view.pose.center, dir))
                        acc += synth_albedo(cfg, *hit);
                }
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = acc[c] * inv;
        }
    return img;
}

void
synth_depth(const SynthConfig &cfg, const View &view, ImageBuffer &depth, std::vector<std::uint8_t> &valid) {
    const auto &k = view.intrinsics;
    depth = ImageBuffer(k.width, k.height, 1);
    valid.assign(depth.pixel_count(), 0);
    for (int y = 0; y < k.height; ++y)
        for (int x = 0; x < k.width; ++x)
            if (auto hit = synth_ray_cast(cfg, view.pose.center, view.pose.rotation * k.ray(x, y))) {
                // the camera-space ray has unit z, so t is the z-depth
                depth.at(x, y) = hit->t;
                valid[std::size_t(y) * std::size_t(k.width) + std::size_t(x)] = 1;
            }
}

double
synth_surface_distance(const SynthConfig &cfg, const Vec3 &p) {
    const double e = cfg.plane_half_extent;
    const Vec3 q(std::clamp(p.x(), -e, e), 0.0, std::clamp(p.z(), -e, e));
    const double d_plane = (p - q).norm();
    const double d_sphere = std::abs((p - cfg.sphere_center).norm() - cfg.sphere_radius);
    return std::min(d_plane, d_sphere);
}

SceneBundle
make_synth_scene(const SynthConfig &cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SceneBundle b;
    const int n = cfg.train_views + cfg.test_views;
    const double f = 0.5 * cfg.width / std::tan(0.5 * cfg.fov_deg * std::numbers::pi / 180.0);
    for (int i = 0; i < n; ++i) {
        const double az = 2.0 * std::numbers::pi * (i + 0.3 * (u(rng) - 0.5)) / n;
        const double h = cfg.camera_height * (1.0 + 0.1 * (u(rng) - 0.5));
        const Vec3 eye(cfg.ring_radius * std::cos(az), h, cfg.ring_radius * std::sin(az));
        View v;
        v.id = i;
        v.embedding_id = i;
        v.intrinsics = {f, f, (cfg.width - 1) / 2.0, (cfg.height - 1) / 2.0, cfg.width, cfg.height};
        v.pose = look_at(eye, cfg.target);
        v.image = synth_render(cfg, v);
        b.views.push_back(v);
        char name[32];
        std::snprintf(name, sizeof name, "view_%03d.ppm", i);
        b.image_names.push_back(name);
    }
    if (cfg.test_views > 0) {
        const double step = double(n) / cfg.test_views;
        for (int t = 0; t < cfg.test_views; ++t)
            b.test_ids.push_back(int(std::floor((t + 0.5) * step)));
    }
    // half the points on the sphere, half on the visible part of the plane
    while (int(b.points.size()) < cfg.points) {
        SynthHit hit;
        if (b.points.size() % 2 == 0) {
            const double z = 2.0 * u(rng) - 1.0, phi = 2.0 * std::numbers::pi * u(rng);
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            hit.normal = Vec3(r * std::cos(phi), z, r * std::sin(phi));
            hit.point = cfg.sphere_center + cfg.sphere_radius * hit.normal;
            hit.surface = 1;
            if (hit.point.y() < 1e-3)
                continue;
        } else {
            const double e = cfg.plane_half_extent;
            hit.point = Vec3(e * (2.0 * u(rng) - 1.0), 0.0, e * (2.0 * u(rng) - 1.0));
            hit.normal = Vec3(0, 1, 0);
            hit.surface = 0;
            if ((hit.point - cfg.sphere_center).norm() < cfg.sphere_radius)
                continue;
        }
        b.points.push_back(hit.point);
        b.point_colors.push_back(synth_albedo(cfg, hit));
    }
    b.up_axis = 1;
    return b;
}

std::string
synth_config_to_string(const SynthConfig &c) {
    std::ostringstream o;
    o.precision(17);
    o << "width " << c.width << "\nheight " << c.height << "\ntrain_views " << c.train_views << "\ntest_views "
      << c.test_views << "\nfov_deg " << c.fov_deg << "\nring_radius " << c.ring_radius << "\ncamera_height "
      << c.camera_height << "\ntarget " << c.target.x() << " " << c.target.y() << " " << c.target.z()
      << "\nsphere_center " << c.sphere_center.x() << " " << c.sphere_center.y() << " " << c.sphere_center.z()
      << "\nsphere_radius " << c.sphere_radius << "\nplane_half_extent " << c.plane_half_extent
      << "\ntexture_period " << c.texture_period << "\npoints " << c.points << "\nsupersample " << c.supersample
      << "\nseed " << c.seed << "\n";
    return o.str();
}

SynthConfig
synth_config_from_string(const std::string &text) {
    SynthConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key))
            continue;
        bool ok = true;
        if (key == "width") ok = bool(ls >> c.width);
        else if (key == "height") ok = bool(ls >> c.height);
        else if (key == "train_views") ok = bool(ls >> c.train_views);
        else if (key == "test_views") ok = bool(ls >> c.test_views);
        else if (key == "fov_deg") ok = bool(ls >> c.fov_deg);
        else if (key == "ring_radius") ok = bool(ls >> c.ring_radius);
        else if (key == "camera_height") ok = bool(ls >> c.camera_height);
        else if (key == "target") ok = bool(ls >> c.target.x() >> c.target.y() >> c.target.z());
        else if (key == "sphere_center") ok = bool(ls >> c.sphere_center.x() >> c.sphere_center.y() >> c.sphere_center.z());
        else if (key == "sphere_radius") ok = bool(ls >> c.sphere_radius);
        else if (key == "plane_half_extent") ok = bool(ls >> c.plane_half_extent);
        else if (key == "texture_period") ok = bool(ls >> c.texture_period);
        else if (key == "points") ok = bool(ls >> c.points);
        else if (key == "supersample") ok = bool(ls >> c.supersample);
        else if (key == "seed") ok = bool(ls >> c.seed);
        else
            throw Error(ErrorCode::MalformedLine, "synth line " + std::to_string(lineno) + ": unknown key " + key);
        if (!ok)
            throw Error(ErrorCode::MalformedLine, "synth line " + std::to_string(lineno) + ": bad value for " + key);
    }
    c.validate();
    return c;
}

} // namespace gigags

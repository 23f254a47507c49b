#include "gigags/loss/local_geometry.hpp"

#include "gigags/core/error.hpp"
#include "gigags/core/kink_trace.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace gigags {
namespace {

struct Neighborhood {
    int xs[4], ys[4]; // up, down, left, right
    Vec3 p[4];
    Vec3 a, b, c;
};

bool
gather(const ImageBuffer &depth, const std::vector<std::uint8_t> &valid, const CameraIntrinsics &k, int x, int y,
       Neighborhood &nb) {
    const int w = depth.width(), h = depth.height();
    if (x < 1 || y < 1 || x >= w - 1 || y >= h - 1)
        return false;
    auto ok = [&](int px, int py) { return valid[std::size_t(py) * std::size_t(w) + std::size_t(px)] != 0; };
    if (!ok(x, y))
        return false;
    const int dx[4] = {0, 0, -1, 1}, dy[4] = {-1, 1, 0, 0};
    for (int j = 0; j < 4; ++j) {
        nb.xs[j] = x + dx[j];
        nb.ys[j] = y + dy[j];
        if (!ok(nb.xs[j], nb.ys[j]))
            return false;
        nb.p[j] = depth.at(nb.xs[j], nb.ys[j]) * k.ray(nb.xs[j], nb.ys[j]);
    }
    nb.a = nb.p[0] - nb.p[1];
    nb.b = nb.p[2] - nb.p[3];
    nb.c = nb.a.cross(nb.b);
    return nb.c.norm() > 1e-300;
}

double
sgn(double v) {
    return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
}

} // namespace

bool
depth_normal(const ImageBuffer &depth, const std::vector<std::uint8_t> &valid, const CameraIntrinsics &k, int x,
             int y, Vec3 &normal) {
    Neighborhood nb;
    if (!gather(depth, valid, k, x, y, nb))
        return false;
    normal = nb.c.normalized();
    return true;
}

LocalGeomResult
local_geom_loss(const ImageBuffer &depth, const std::vector<std::uint8_t> &valid, const ImageBuffer &normal,
                const CameraIntrinsics &k, const LocalGeomConfig &config, bool want_grad) {
    const int w = depth.width(), h = depth.height();
    if (!depth.same_size(normal) || depth.channels() != 1 || normal.channels() != 3 ||
        valid.size() != depth.pixel_count())
        throw Error(ErrorCode::DimensionMismatch, "local_geom_loss: buffer shapes differ");

    struct Term {
        Neighborhood nb;
        int x, y;
        double r, omega;
        Vec3 nhat, n;
    };
    std::vector<Term> terms;
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) {
            Term t;
            if (!gather(depth, valid, k, x, y, t.nb))
                continue;
            note_kink(std::int64_t(y) * w + x);
            t.x = x;
            t.y = y;
            t.nhat = t.nb.c.normalized();
            t.n = Vec3(normal.at(x, y, 0), normal.at(x, y, 1), normal.at(x, y, 2));
            t.r = (t.nhat - t.n).cwiseAbs().sum();
            for (int c = 0; c < 3; ++c)
                note_kink(int(sgn(t.nhat[c] - t.n[c])));
            if (config.weight == LocalWeight::AbsDot) {
                t.omega = std::abs(t.nb.a.dot(t.nb.b));
                note_kink(int(sgn(t.nb.a.dot(t.nb.b))));
            } else {
                const double g = 0.5 * (std::abs(depth.at(x + 1, y) - depth.at(x - 1, y)) +
                                        std::abs(depth.at(x, y + 1) - depth.at(x, y - 1)));
                t.omega = std::exp(-g / config.edge_tau);
                note_kink(int(sgn(depth.at(x + 1, y) - depth.at(x - 1, y))));
                note_kink(int(sgn(depth.at(x, y + 1) - depth.at(x, y - 1))));
            }
            terms.push_back(t);
        }

    LocalGeomResult out;
    out.pixels = int(terms.size());
    if (want_grad) {
        out.grad_depth = ImageBuffer(w, h, 1);
        out.grad_normal = ImageBuffer(w, h, 3);
    }
    if (terms.empty())
        return out;
    const double inv = 1.0 / double(terms.size());
    double sum = 0.0;
    for (const Term &t : terms) {
        sum += t.r * t.omega;
        if (!want_grad)
            continue;
        const Vec3 s((t.nhat - t.n).unaryExpr([](double v) { return sgn(v); }));
        for (int c = 0; c < 3; ++c)
            out.grad_normal.at(t.x, t.y, c) -= inv * t.omega * s[c];

        const double cn = t.nb.c.norm();
        const Vec3 g_nhat = inv * t.omega * s;
        const Vec3 g_c = (g_nhat - t.nhat * t.nhat.dot(g_nhat)) / cn;
        Vec3 g_a = t.nb.b.cross(g_c);
        Vec3 g_b = g_c.cross(t.nb.a);
        const double g_omega = inv * t.r;
        if (config.weight == LocalWeight::AbsDot) {
            const double sd = sgn(t.nb.a.dot(t.nb.b));
            g_a += g_omega * sd * t.nb.b;
            g_b += g_omega * sd * t.nb.a;
        } else {
            const double f = -g_omega * t.omega * 0.5 / config.edge_tau;
            const double sx = sgn(depth.at(t.x + 1, t.y) - depth.at(t.x - 1, t.y));
            const double sy = sgn(depth.at(t.x, t.y + 1) - depth.at(t.x, t.y - 1));
            out.grad_depth.at(t.x + 1, t.y) += f * sx;
            out.grad_depth.at(t.x - 1, t.y) -= f * sx;
            out.grad_depth.at(t.x, t.y + 1) += f * sy;
            out.grad_depth.at(t.x, t.y - 1) -= f * sy;
        }
        const Vec3 g_p[4] = {g_a, -g_a, g_b, -g_b};
        for (int j = 0; j < 4; ++j)
            out.grad_depth.at(t.nb.xs[j], t.nb.ys[j]) += g_p[j].dot(k.ray(t.nb.xs[j], t.nb.ys[j]));
    }
    out.value = sum * inv;
    return out;
}

} // namespace gigags

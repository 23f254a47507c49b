#include "gigags/loss/multiview.hpp"

#include "gigags/core/error.hpp"
#include "gigags/core/kink_trace.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gigags {
namespace {

using Mat23 = Eigen::Matrix<double, 2, 3>;

/// A plane-induced warp from one camera to another, split so that the plane
/// parameters stay free: q = A p~ - u (n . K_src^-1 p~) / d.
struct PlaneWarp {
    Mat3 a;
    Vec3 u;
    const CameraIntrinsics *src;

    PlaneWarp(const CameraIntrinsics &k_src, const CameraIntrinsics &k_dst, const RelativeTransform &rel)
        : a(k_dst.matrix() * rel.rotation * k_src.inverse_matrix()), u(k_dst.matrix() * rel.translation),
          src(&k_src) {}

    struct Result {
        Vec2 p;
        Eigen::Matrix2d d_p;
        Mat23 d_n;
        Vec2 d_d;
    };

    // false for a degenerate plane or a point at infinity
    bool apply(const Vec2 &p, const Vec3 &n, double d, Result &r, bool jac) const {
        if (std::abs(d) < 1e-12)
            return false;
        const Vec3 ray = src->ray(p.x(), p.y());
        const double s = n.dot(ray);
        const Vec3 q = a * Vec3(p.x(), p.y(), 1.0) - u * (s / d);
        if (std::abs(q.z()) < 1e-12)
            return false;
        r.p = Vec2(q.x() / q.z(), q.y() / q.z());
        if (!jac)
            return true;
        Mat23 jq;
        jq << 1 / q.z(), 0, -q.x() / (q.z() * q.z()), 0, 1 / q.z(), -q.y() / (q.z() * q.z());
        // H = A - u n^T K^-1 / d; the first two columns give dq/dp
        const Vec3 m(n.x() / src->fx, n.y() / src->fy, 0.0);
        Eigen::Matrix<double, 3, 2> h2;
        h2.col(0) = a.col(0) - u * (m.x() / d);
        h2.col(1) = a.col(1) - u * (m.y() / d);
        r.d_p = jq * h2;
        r.d_n = jq * (-u * ray.transpose() / d);
        r.d_d = jq * (u * (s / (d * d)));
        return true;
    }
};

Vec3
sample_normal(const ImageBuffer &n, const BilinearTaps &t) {
    return {bilinear_sample(n, t, 0), bilinear_sample(n, t, 1), bilinear_sample(n, t, 2)};
}

bool
taps_valid(const RenderBuffers &b, const BilinearTaps &t) {
    const int x1 = t.x0 + 1, y1 = t.y0 + 1;
    return b.valid(t.x0, t.y0) && b.valid(x1, t.y0) && b.valid(t.x0, y1) && b.valid(x1, y1);
}

/// Adds g * bilinear weight to each tap of channel c.
void
scatter(ImageBuffer &img, const BilinearTaps &t, int c, double g) {
    const int x1 = t.x0 + 1, y1 = t.y0 + 1;
    img.at(t.x0, t.y0, c) += g * (1 - t.fx) * (1 - t.fy);
    img.at(x1, t.y0, c) += g * t.fx * (1 - t.fy);
    img.at(t.x0, y1, c) += g * (1 - t.fx) * t.fy;
    img.at(x1, y1, c) += g * t.fx * t.fy;
}

void
ensure_plane_grads(RenderGrads *g, int w, int h) {
    if (!g)
        return;
    if (g->normal.empty())
        g->normal = ImageBuffer(w, h, 3);
    if (g->plane_dist.empty())
        g->plane_dist = ImageBuffer(w, h, 1);
}

} // namespace

Mat3
plane_homography(const CameraIntrinsics &k_ref, const CameraIntrinsics &k_nbr, const RelativeTransform &rel,
                 const Vec3 &n_ref, double d_ref) {
    if (std::abs(d_ref) < 1e-12)
        throw Error(ErrorCode::ZeroPlaneDistance, "plane_homography: plane passes through the camera");
    return k_nbr.matrix() * (rel.rotation - rel.translation * n_ref.transpose() / d_ref) * k_ref.inverse_matrix();
}

PixelCoord
warp_pixel(const Mat3 &h, const PixelCoord &p) {
    const Vec3 q = h * p.homogeneous();
    if (std::abs(q.z()) < 1e-12)
        throw Error(ErrorCode::PointAtInfinity, "warp_pixel: homogeneous coordinate vanishes");
    return {q.x() / q.z(), q.y() / q.z()};
}

double
ncc(std::span<const double> a, std::span<const double> b, std::span<double> grad_b) {
    if (a.size() != b.size() || a.size() < 2 || (!grad_b.empty() && grad_b.size() != b.size()))
        throw Error(ErrorCode::DimensionMismatch, "ncc: patch sizes");
    constexpr double eps = 1e-8;
    const bool flat_a = std::all_of(a.begin(), a.end(), [&](double v) { return v == a[0]; });
    const bool flat_b = std::all_of(b.begin(), b.end(), [&](double v) { return v == b[0]; });
    if (flat_a && flat_b) {
        std::fill(grad_b.begin(), grad_b.end(), 0.0);
        return 0.0;
    }
    const double n = double(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = eps, sbb = eps;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    const double denom = std::sqrt(saa * sbb);
    const double r = sab / denom;
    note_kink(int(r > 1.0) - int(r < -1.0));
    if (!grad_b.empty())
        for (std::size_t i = 0; i < a.size(); ++i)
            grad_b[i] = (a[i] - ma) / denom - r * (b[i] - mb) / sbb;
    return std::clamp(r, -1.0, 1.0);
}

void
PatchConfig::validate() const {
    if (half_size < 1 || stride < 1)
        throw Error(ErrorCode::InvalidArgument, "patch: half_size and stride must be >= 1");
}

void
OcclusionConfig::validate() const {
    if (!(pixel_threshold > 0))
        throw Error(ErrorCode::InvalidArgument, "occlusion: pixel_threshold must be > 0");
}

GeoConsistency
geometric_consistency(const View &ref, const RenderBuffers &rb, const View &nbr, const RenderBuffers &nb,
                      const OcclusionConfig &occ, RenderGrads *grad_ref, RenderGrads *grad_nbr) {
    occ.validate();
    const int w = rb.color.width(), h = rb.color.height();
    const int nw = nb.color.width(), nh = nb.color.height();
    const PlaneWarp fwd(ref.intrinsics, nbr.intrinsics, relative_transform(ref.pose, nbr.pose));
    const PlaneWarp bwd(nbr.intrinsics, ref.intrinsics, relative_transform(nbr.pose, ref.pose));
    const bool want = grad_ref || grad_nbr;
    ensure_plane_grads(grad_ref, w, h);
    ensure_plane_grads(grad_nbr, nw, nh);

    GeoConsistency out;
    out.valid.assign(std::size_t(w) * std::size_t(h), 0);
    out.error.assign(out.valid.size(), std::numeric_limits<double>::quiet_NaN());

    struct Hit {
        int x, y;
        Vec2 pr;
        Vec3 nr;
        double dr;
        PlaneWarp::Result f, b;
        BilinearTaps t;
        Vec3 nn;
        double dn, err;
    };
    std::vector<Hit> hits;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!rb.valid(x, y))
                continue;
            Hit hit;
            hit.x = x;
            hit.y = y;
            hit.pr = Vec2(x, y);
            hit.nr = Vec3(rb.normal.at(x, y, 0), rb.normal.at(x, y, 1), rb.normal.at(x, y, 2));
            hit.dr = rb.plane_dist.at(x, y);
            if (!fwd.apply(hit.pr, hit.nr, hit.dr, hit.f, want))
                continue;
            if (!bilinear_taps(nw, nh, hit.f.p.x(), hit.f.p.y(), hit.t) || !taps_valid(nb, hit.t))
                continue;
            hit.nn = sample_normal(nb.normal, hit.t);
            hit.dn = bilinear_sample(nb.plane_dist, hit.t);
            if (!bwd.apply(hit.f.p, hit.nn, hit.dn, hit.b, want))
                continue;
            hit.err = (hit.b.p - hit.pr).norm();
            out.error[std::size_t(y) * std::size_t(w) + std::size_t(x)] = hit.err;
            if (hit.err > occ.pixel_threshold)
                continue;
            note_kink(std::int64_t(y) * w + x);
            note_kink(std::int64_t(hit.t.y0) * nw + hit.t.x0);
            // |r| is a cone at r = 0; the orthant of r flips whenever it passes the apex
            note_kink(int(hit.b.p.x() > hit.pr.x()) + 2 * int(hit.b.p.y() > hit.pr.y()));
            out.valid[std::size_t(y) * std::size_t(w) + std::size_t(x)] = 1;
            hits.push_back(hit);
        }
    out.count = int(hits.size());
    if (hits.empty())
        return out;
    const double inv = 1.0 / double(hits.size());
    double sum = 0.0;
    for (const Hit &hit : hits) {
        sum += hit.err;
        if (!want || hit.err < 1e-300)
            continue;
        const Vec2 g_b = inv * (hit.b.p - hit.pr) / hit.err;
        const Vec3 g_nn = hit.b.d_n.transpose() * g_b;
        const double g_dn = hit.b.d_d.dot(g_b);
        Vec2 g_pn = hit.b.d_p.transpose() * g_b;
        for (int c = 0; c < 3; ++c) {
            double du, dv;
            bilinear_gradient(nb.normal, hit.t, c, du, dv);
            g_pn += g_nn[c] * Vec2(du, dv);
        }
        double du, dv;
        bilinear_gradient(nb.plane_dist, hit.t, 0, du, dv);
        g_pn += g_dn * Vec2(du, dv);
        if (grad_nbr) {
            for (int c = 0; c < 3; ++c)
                scatter(grad_nbr->normal, hit.t, c, g_nn[c]);
            scatter(grad_nbr->plane_dist, hit.t, 0, g_dn);
        }
        if (grad_ref) {
            const Vec3 g_nr = hit.f.d_n.transpose() * g_pn;
            for (int c = 0; c < 3; ++c)
                grad_ref->normal.at(hit.x, hit.y, c) += g_nr[c];
            grad_ref->plane_dist.at(hit.x, hit.y) += hit.f.d_d.dot(g_pn);
        }
    }
    out.value = sum * inv;
    return out;
}

PhotometricResult
multiview_photometric_loss(const View &ref, const RenderBuffers &rb, const ImageBuffer &ref_gray, const View &nbr,
                           const ImageBuffer &nbr_gray, const PatchConfig &patch,
                           const std::vector<std::uint8_t> &valid, RenderGrads *grad_ref) {
    patch.validate();
    const int w = rb.color.width(), h = rb.color.height();
    if (ref_gray.width() != w || ref_gray.height() != h || ref_gray.channels() != 1 || nbr_gray.channels() != 1 ||
        valid.size() != std::size_t(w) * std::size_t(h))
        throw Error(ErrorCode::DimensionMismatch, "multiview_photometric_loss: buffer shapes");
    const PlaneWarp fwd(ref.intrinsics, nbr.intrinsics, relative_transform(ref.pose, nbr.pose));
    ensure_plane_grads(grad_ref, w, h);
    const int r = patch.half_size;
    const std::size_t samples = std::size_t((2 * r + 1) * (2 * r + 1));

    struct Patch {
        int x, y;
        double score;
        std::vector<double> grad_b;
        std::vector<PlaneWarp::Result> warps;
        std::vector<BilinearTaps> taps;
    };
    std::vector<Patch> patches;
    std::vector<double> a(samples), b(samples);
    for (int y = r; y < h - r; y += patch.stride)
        for (int x = r; x < w - r; x += patch.stride) {
            if (!valid[std::size_t(y) * std::size_t(w) + std::size_t(x)])
                continue;
            const Vec3 n(rb.normal.at(x, y, 0), rb.normal.at(x, y, 1), rb.normal.at(x, y, 2));
            const double d = rb.plane_dist.at(x, y);
            Patch p;
            p.x = x;
            p.y = y;
            p.warps.resize(samples);
            p.taps.resize(samples);
            bool ok = true;
            std::size_t k = 0;
            for (int oy = -r; oy <= r && ok; ++oy)
                for (int ox = -r; ox <= r && ok; ++ox, ++k) {
                    a[k] = ref_gray.at(x + ox, y + oy);
                    ok = fwd.apply(Vec2(x + ox, y + oy), n, d, p.warps[k], grad_ref != nullptr) &&
                         bilinear_taps(nbr_gray.width(), nbr_gray.height(), p.warps[k].p.x(), p.warps[k].p.y(),
                                       p.taps[k]);
                    if (ok)
                        b[k] = bilinear_sample(nbr_gray, p.taps[k]);
                }
            if (!ok)
                continue;
            note_kink(std::int64_t(y) * w + x);
            for (const BilinearTaps &t : p.taps)
                note_kink(std::int64_t(t.y0) * nbr_gray.width() + t.x0);
            if (grad_ref)
                p.grad_b.resize(samples);
            p.score = 1.0 - ncc(a, b, p.grad_b);
            patches.push_back(std::move(p));
        }

    PhotometricResult out;
    out.patches = int(patches.size());
    if (patches.empty())
        return out;
    const double inv = 1.0 / double(patches.size());
    double sum = 0.0;
    for (const Patch &p : patches) {
        sum += p.score;
        if (!grad_ref)
            continue;
        Vec3 g_n = Vec3::Zero();
        double g_d = 0.0;
        for (std::size_t k = 0; k < samples; ++k) {
            double du, dv;
            bilinear_gradient(nbr_gray, p.taps[k], 0, du, dv);
            const Vec2 g_p = -inv * p.grad_b[k] * Vec2(du, dv);
            g_n += p.warps[k].d_n.transpose() * g_p;
            g_d += p.warps[k].d_d.dot(g_p);
        }
        for (int c = 0; c < 3; ++c)
            grad_ref->normal.at(p.x, p.y, c) += g_n[c];
        grad_ref->plane_dist.at(p.x, p.y) += g_d;
    }
    out.value = sum * inv;
    return out;
}

} // namespace gigags

#include "gigags/render/renderer.hpp"

#include "gigags/core/error.hpp"
#include "gigags/core/kink_trace.hpp"
#include "gigags/simd/kernels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gigags {

std::optional<Splat2D>
project_gaussian(const GaussianKernel &kern, const View &view, const RenderSettings &settings,
                 int kernel_index) {
    const auto &k = view.intrinsics;
    const Mat3 w = view.pose.rotation.transpose();
    const Vec3 t = w * (kern.mu - view.pose.center);
    if (!(t.z() > settings.near_plane))
        return std::nullopt;

    Splat2D s;
    s.kernel_index = kernel_index;
    s.cam_point = t;
    s.depth_key = t.z();
    s.opacity = kern.opacity();
    if (!(s.opacity > settings.alpha_min))
        return std::nullopt;
    s.color = kern.color();
    s.rotation = kern.rotation();
    s.scale = kern.scale();

    const double iz = 1.0 / t.z();
    s.mean2d = Vec2(k.fx * t.x() * iz + k.cx, k.fy * t.y() * iz + k.cy);
    s.jacobian << k.fx * iz, 0.0, -k.fx * t.x() * iz * iz, 0.0, k.fy * iz, -k.fy * t.y() * iz * iz;
    s.cov3d = s.rotation * s.scale.array().square().matrix().asDiagonal() * s.rotation.transpose();
    const Eigen::Matrix<double, 2, 3> tw = s.jacobian * w;
    s.cov2d = tw * s.cov3d * tw.transpose();
    s.cov2d(0, 0) += settings.dilation;
    s.cov2d(1, 1) += settings.dilation;
    const double det = s.cov2d.determinant();
    if (!(det > 0.0))
        return std::nullopt;
    s.conic = Vec3(s.cov2d(1, 1) / det, -s.cov2d(0, 1) / det, s.cov2d(0, 0) / det);

    // Shortest axis, oriented toward the camera.
    s.normal_axis = min_scale_axis(s.scale);
    const Vec3 n_raw = w * s.rotation.col(s.normal_axis);
    s.normal_sign = n_raw.dot(t) > 0.0 ? -1.0 : 1.0;
    s.cam_normal = s.normal_sign * n_raw;
    s.plane_dist = -t.dot(s.cam_normal);

    // Footprint: the level set where opacity * G reaches alpha_min.
    const double r2 = 2.0 * std::log(s.opacity / settings.alpha_min);
    const double ex = std::sqrt(r2 * s.cov2d(0, 0)) + 1e-9;
    const double ey = std::sqrt(r2 * s.cov2d(1, 1)) + 1e-9;
    const double fx0 = std::ceil(s.mean2d.x() - ex), fx1 = std::floor(s.mean2d.x() + ex);
    const double fy0 = std::ceil(s.mean2d.y() - ey), fy1 = std::floor(s.mean2d.y() + ey);
    if (fx1 < 0.0 || fy1 < 0.0 || fx0 > k.width - 1 || fy0 > k.height - 1)
        return std::nullopt;
    s.x0 = int(std::max(fx0, 0.0));
    s.x1 = int(std::min(fx1, double(k.width - 1)));
    s.y0 = int(std::max(fy0, 0.0));
    s.y1 = int(std::min(fy1, double(k.height - 1)));
    if (s.x0 > s.x1 || s.y0 > s.y1)
        return std::nullopt;
    return s;
}

namespace {

void
build_state(std::span<const GaussianKernel> kernels, const View &view, const RenderSettings &settings,
            RenderState &state) {
    state.splats.clear();
    for (std::size_t i = 0; i < kernels.size(); ++i)
        if (auto s = project_gaussian(kernels[i], view, settings, int(i)))
            state.splats.push_back(*s);
    std::sort(state.splats.begin(), state.splats.end(), [](const Splat2D &a, const Splat2D &b) {
        if (a.depth_key != b.depth_key)
            return a.depth_key < b.depth_key;
        return a.kernel_index < b.kernel_index;
    });
    if (KinkTrace *trace = active_kink_trace()) {
        trace->note(std::int64_t(state.splats.size()));
        for (const Splat2D &s : state.splats)
            for (int v : {s.kernel_index, s.normal_axis, int(s.normal_sign > 0), s.x0, s.x1, s.y0, s.y1})
                trace->note(v);
    }
    state.row_splats.assign(std::size_t(view.intrinsics.height), {});
    for (std::size_t i = 0; i < state.splats.size(); ++i)
        for (int y = state.splats[i].y0; y <= state.splats[i].y1; ++y)
            state.row_splats[std::size_t(y)].push_back(int(i));
}

/// Gaussian values of every candidate splat along one row.
struct RowEval {
    std::vector<std::size_t> start; // offset of each row splat's x-span in `gauss`
    std::vector<double> gauss;

    void run(const RenderState &state, int y) {
        const auto &simd = simd::kernels();
        const auto &row = state.row_splats[std::size_t(y)];
        start.resize(row.size());
        std::size_t total = 0;
        for (std::size_t r = 0; r < row.size(); ++r) {
            const Splat2D &s = state.splats[std::size_t(row[r])];
            start[r] = total;
            total += std::size_t(s.x1 - s.x0 + 1);
        }
        gauss.resize(total);
        for (std::size_t r = 0; r < row.size(); ++r) {
            const Splat2D &s = state.splats[std::size_t(row[r])];
            const std::size_t n = std::size_t(s.x1 - s.x0 + 1);
            double *g = gauss.data() + start[r];
            simd.conic_power(s.conic[0], s.conic[1], s.conic[2], double(s.x0) - s.mean2d.x(),
                             double(y) - s.mean2d.y(), n, g);
            for (std::size_t i = 0; i < n; ++i)
                g[i] = std::exp(g[i]);
        }
    }
};

} // namespace

RenderBuffers
render(std::span<const GaussianKernel> kernels, const View &view, const RenderSettings &settings,
       RenderState *state_out) {
    const int w = view.intrinsics.width, h = view.intrinsics.height;
    RenderState local;
    RenderState &state = state_out ? *state_out : local;
    build_state(kernels, view, settings, state);

    RenderBuffers out;
    out.color = ImageBuffer(w, h, 3);
    out.normal = ImageBuffer(w, h, 3);
    out.plane_dist = ImageBuffer(w, h, 1);
    out.alpha = ImageBuffer(w, h, 1);

    KinkTrace *trace = active_kink_trace();
    RowEval eval;
    for (int y = 0; y < h; ++y) {
        eval.run(state, y);
        const auto &row = state.row_splats[std::size_t(y)];
        for (int x = 0; x < w; ++x) {
            double t = 1.0;
            Vec3 c = Vec3::Zero(), n = Vec3::Zero();
            double d = 0.0;
            for (std::size_t r = 0; r < row.size(); ++r) {
                const Splat2D &s = state.splats[std::size_t(row[r])];
                if (x < s.x0 || x > s.x1)
                    continue;
                const double raw = s.opacity * eval.gauss[eval.start[r] + std::size_t(x - s.x0)];
                if (trace)
                    trace->note(int(raw < settings.alpha_min) + 2 * int(raw > settings.alpha_max) +
                                4 * int(t * (1.0 - std::min(raw, settings.alpha_max)) < settings.min_transmittance));
                if (raw < settings.alpha_min)
                    continue;
                const double a = std::min(raw, settings.alpha_max);
                const double next = t * (1.0 - a);
                if (next < settings.min_transmittance)
                    break;
                const double wgt = a * t;
                c += wgt * s.color;
                n += wgt * s.cam_normal;
                d += wgt * s.plane_dist;
                t = next;
            }
            c += t * settings.background;
            for (int ch = 0; ch < 3; ++ch) {
                out.color.at(x, y, ch) = c[ch];
                out.normal.at(x, y, ch) = n[ch];
            }
            out.plane_dist.at(x, y) = d;
            out.alpha.at(x, y) = 1.0 - t;
        }
    }
    depth_from_plane(out, view.intrinsics);
    return out;
}

void
depth_from_plane(RenderBuffers &b, const CameraIntrinsics &k, const DepthSettings &ds) {
    const int w = b.plane_dist.width(), h = b.plane_dist.height();
    b.depth = ImageBuffer(w, h, 1);
    b.depth_valid.assign(std::size_t(w) * std::size_t(h), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (b.alpha.at(x, y) < ds.min_alpha)
                continue;
            const Vec3 r = k.ray(x, y);
            const double den = -(b.normal.at(x, y, 0) * r.x() + b.normal.at(x, y, 1) * r.y() +
                                 b.normal.at(x, y, 2) * r.z());
            if (std::abs(den) < ds.min_denominator)
                continue;
            const double depth = b.plane_dist.at(x, y) / den;
            if (!(depth > 0.0) || !std::isfinite(depth))
                continue;
            note_kink(std::int64_t(y) * w + x);
            b.depth.at(x, y) = depth;
            b.depth_valid[std::size_t(y) * std::size_t(w) + std::size_t(x)] = 1;
        }
}

void
depth_from_plane_backward(const RenderBuffers &b, const CameraIntrinsics &k, const ImageBuffer &gd,
                          ImageBuffer &gn, ImageBuffer &gp) {
    const int w = b.depth.width(), h = b.depth.height();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double g = gd.at(x, y);
            if (g == 0.0 || !b.valid(x, y))
                continue;
            const Vec3 r = k.ray(x, y);
            const double den = -(b.normal.at(x, y, 0) * r.x() + b.normal.at(x, y, 1) * r.y() +
                                 b.normal.at(x, y, 2) * r.z());
            const double pd = b.plane_dist.at(x, y);
            gp.at(x, y) += g / den;
            // D = pd / den, den = -N.r  =>  dD/dN = pd / den^2 * r
            const double s = g * pd / (den * den);
            for (int c = 0; c < 3; ++c)
                gn.at(x, y, c) += s * r[c];
        }
}

RenderGrads
RenderGrads::zeros(int width, int height) {
    return {ImageBuffer(width, height, 3), ImageBuffer(width, height, 3), ImageBuffer(width, height, 1),
            ImageBuffer(width, height, 1)};
}

namespace {

struct SplatGrad {
    Vec2 mean = Vec2::Zero();
    Vec3 conic = Vec3::Zero();
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    double plane_dist = 0.0;
};

struct Contribution {
    std::size_t row_slot;
    int splat;
    double alpha;
    double gauss;
    bool clamped;
    double t_before;
};

/// Chains splat-level gradients back to the raw kernel parameters.
KernelGrad
splat_backward(const Splat2D &s, const GaussianKernel &kern, const View &view, const SplatGrad &g) {
    const auto &k = view.intrinsics;
    const Mat3 w = view.pose.rotation.transpose();
    const Vec3 &t = s.cam_point;
    const double iz = 1.0 / t.z();

    KernelGrad out;
    // plane distance d = -t . n_cam
    Vec3 d_t = -g.plane_dist * s.cam_normal;
    const Vec3 d_ncam = g.normal - g.plane_dist * t;

    // mean2d
    d_t.x() += g.mean.x() * k.fx * iz;
    d_t.y() += g.mean.y() * k.fy * iz;
    d_t.z() += -g.mean.x() * k.fx * t.x() * iz * iz - g.mean.y() * k.fy * t.y() * iz * iz;

    // conic = inverse(cov2d); symmetric gradient convention
    const Mat2 q = s.cov2d.inverse();
    Mat2 m;
    m << g.conic[0], 0.5 * g.conic[1], 0.5 * g.conic[1], g.conic[2];
    const Mat2 d_cov2d = -q * m * q;

    const Eigen::Matrix<double, 2, 3> tw = s.jacobian * w;
    const Mat3 d_cov3d = tw.transpose() * d_cov2d * tw;
    const Eigen::Matrix<double, 2, 3> d_tw = 2.0 * d_cov2d * tw * s.cov3d;
    const Eigen::Matrix<double, 2, 3> d_j = d_tw * w.transpose();

    const double fx = k.fx, fy = k.fy;
    d_t.x() += d_j(0, 2) * (-fx * iz * iz);
    d_t.y() += d_j(1, 2) * (-fy * iz * iz);
    d_t.z() += d_j(0, 0) * (-fx * iz * iz) + d_j(0, 2) * (2.0 * fx * t.x() * iz * iz * iz) +
               d_j(1, 1) * (-fy * iz * iz) + d_j(1, 2) * (2.0 * fy * t.y() * iz * iz * iz);

    out.mu = w.transpose() * d_t;

    // cov3d = R diag(s^2) R^T
    const Vec3 s2 = s.scale.array().square();
    Mat3 d_rot = 2.0 * d_cov3d * s.rotation * s2.asDiagonal();
    const Mat3 rtgr = s.rotation.transpose() * d_cov3d * s.rotation;
    for (int i = 0; i < 3; ++i)
        out.log_scale[i] = 2.0 * s2[i] * rtgr(i, i);

    // n_cam = sign * W R[:, axis]
    d_rot.col(s.normal_axis) += s.normal_sign * (w.transpose() * d_ncam);
    out.rot = quat_rotation_backward(kern.rot, d_rot);

    out.opacity_logit = g.opacity * s.opacity * (1.0 - s.opacity);
    for (int i = 0; i < 3; ++i)
        out.color_logit[i] = g.color[i] * s.color[i] * (1.0 - s.color[i]);
    return out;
}

} // namespace

void
render_backward(std::span<const GaussianKernel> kernels, const View &view, const RenderSettings &settings,
                const RenderState &state, const RenderGrads &up, std::span<KernelGrad> kernel_grads) {
    if (kernel_grads.size() != kernels.size())
        throw Error(ErrorCode::ShapeMismatch, "kernel gradient buffer size");
    const int w = view.intrinsics.width, h = view.intrinsics.height;
    const bool has_c = !up.color.empty(), has_n = !up.normal.empty();
    const bool has_d = !up.plane_dist.empty(), has_a = !up.alpha.empty();
    if (!has_c && !has_n && !has_d && !has_a)
        return;

    std::vector<SplatGrad> sg(state.splats.size());
    std::vector<Contribution> contrib;
    RowEval eval;
    for (int y = 0; y < h; ++y) {
        const auto &row = state.row_splats[std::size_t(y)];
        if (row.empty())
            continue;
        eval.run(state, y);
        for (int x = 0; x < w; ++x) {
            const Vec3 gc = has_c ? Vec3(up.color.at(x, y, 0), up.color.at(x, y, 1), up.color.at(x, y, 2))
                                  : Vec3::Zero();
            const Vec3 gn = has_n ? Vec3(up.normal.at(x, y, 0), up.normal.at(x, y, 1), up.normal.at(x, y, 2))
                                  : Vec3::Zero();
            const double gd = has_d ? up.plane_dist.at(x, y) : 0.0;
            const double ga = has_a ? up.alpha.at(x, y) : 0.0;
            if (gc.isZero(0.0) && gn.isZero(0.0) && gd == 0.0 && ga == 0.0)
                continue;

            contrib.clear();
            double t = 1.0;
            for (std::size_t r = 0; r < row.size(); ++r) {
                const Splat2D &s = state.splats[std::size_t(row[r])];
                if (x < s.x0 || x > s.x1)
                    continue;
                const double gauss = eval.gauss[eval.start[r] + std::size_t(x - s.x0)];
                const double raw = s.opacity * gauss;
                if (raw < settings.alpha_min)
                    continue;
                const double a = std::min(raw, settings.alpha_max);
                const double next = t * (1.0 - a);
                if (next < settings.min_transmittance)
                    break;
                contrib.push_back({r, row[r], a, gauss, raw > settings.alpha_max, t});
                t = next;
            }
            const double t_final = t;

            // Suffix sums S(i) = sum_{j>i} f_j a_j T_j (+ T_final * background for color).
            Vec3 sc = t_final * settings.background;
            Vec3 sn = Vec3::Zero();
            double sd = 0.0;
            for (auto it = contrib.rbegin(); it != contrib.rend(); ++it) {
                const Splat2D &s = state.splats[std::size_t(it->splat)];
                SplatGrad &g = sg[std::size_t(it->splat)];
                const double wgt = it->alpha * it->t_before;
                g.color += wgt * gc;
                g.normal += wgt * gn;
                g.plane_dist += wgt * gd;

                const double inv = 1.0 / (1.0 - it->alpha);
                double d_alpha = gc.dot(s.color * it->t_before - sc * inv) +
                                 gn.dot(s.cam_normal * it->t_before - sn * inv) +
                                 gd * (s.plane_dist * it->t_before - sd * inv) + ga * t_final * inv;

                sc += wgt * s.color;
                sn += wgt * s.cam_normal;
                sd += wgt * s.plane_dist;

                if (it->clamped)
                    continue;
                g.opacity += d_alpha * it->gauss;
                // d alpha / d power = alpha
                const double d_pow = d_alpha * it->alpha;
                const double dx = double(x) - s.mean2d.x(), dy = double(y) - s.mean2d.y();
                g.conic[0] += -0.5 * dx * dx * d_pow;
                g.conic[1] += -dx * dy * d_pow;
                g.conic[2] += -0.5 * dy * dy * d_pow;
                g.mean.x() += (s.conic[0] * dx + s.conic[1] * dy) * d_pow;
                g.mean.y() += (s.conic[1] * dx + s.conic[2] * dy) * d_pow;
            }
        }
    }

    for (std::size_t i = 0; i < state.splats.size(); ++i) {
        const Splat2D &s = state.splats[i];
        kernel_grads[std::size_t(s.kernel_index)] +=
            splat_backward(s, kernels[std::size_t(s.kernel_index)], view, sg[i]);
    }
}

void
dump_buffers(const RenderBuffers &b, const std::filesystem::path &stem, const DumpSettings &ds) {
    const int w = b.color.width(), h = b.color.height();
    ImageBuffer normal(w, h, 3), depth(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c)
                normal.at(x, y, c) = 0.5 * (b.normal.at(x, y, c) + 1.0);
            depth.at(x, y) = b.depth.at(x, y) / ds.far_plane;
        }
    const std::string s = stem.string();
    write_pnm(b.color, s + "_color.ppm");
    write_pnm(normal, s + "_normal.ppm");
    write_pnm(depth, s + "_depth.pgm");
    write_pnm(b.alpha, s + "_alpha.pgm");
}

} // namespace gigags

#include "gigags/field/decoder.hpp"

#include "gigags/core/error.hpp"
#include "gigags/simd/kernels.hpp"

#include <cmath>
#include <random>

namespace gigags {

DecoderWeights
DecoderWeights::zeros(const AnchorShape &shape, int hidden) {
    DecoderWeights w;
    w.shape = shape;
    w.hidden = hidden;
    w.params.assign(w.param_count(), 0.0);
    return w;
}

DecoderWeights
DecoderWeights::random(const AnchorShape &shape, int hidden, std::uint64_t seed, double output_gain) {
    DecoderWeights w = zeros(shape, hidden);
    std::mt19937_64 rng(seed);
    const double a1 = 1.0 / std::sqrt(double(w.input_dim()));
    const double a2 = output_gain / std::sqrt(double(hidden));
    std::uniform_real_distribution<double> u1(-a1, a1), u2(-a2, a2);
    for (std::size_t i = w.w1_offset(); i < w.b1_offset(); ++i)
        w.params[i] = u1(rng);
    for (std::size_t i = w.w2_offset(); i < w.b2_offset(); ++i)
        w.params[i] = u2(rng);
    return w;
}

namespace {

void
check_shapes(const Anchor &a, const DecoderWeights &w) {
    if (a.params.size() != std::size_t(w.shape.param_count()) || w.params.size() != w.param_count())
        throw Error(ErrorCode::ShapeMismatch, "anchor and decoder shapes disagree");
}

} // namespace

std::vector<GaussianKernel>
decode_anchor(const Anchor &a, const DecoderWeights &w, const View &view, const LodConfig &lod,
              DecodeCache *cache) {
    check_shapes(a, w);
    const auto &simd = simd::kernels();
    const AnchorShape &s = w.shape;
    const int in_dim = w.input_dim(), out_dim = w.output_dim(), hid = w.hidden;

    DecodeCache local;
    DecodeCache &c = cache ? *cache : local;
    c.input.resize(std::size_t(in_dim));
    c.pre.resize(std::size_t(hid));
    c.hidden.resize(std::size_t(hid));

    for (int i = 0; i < s.feature_dim; ++i)
        c.input[std::size_t(i)] = a.params[std::size_t(i)];
    Vec3 dir = a.center - view.camera_center();
    const double dist = dir.norm();
    if (dist > 0.0)
        dir /= dist;
    c.input[std::size_t(s.feature_dim)] = dir.x();
    c.input[std::size_t(s.feature_dim + 1)] = dir.y();
    c.input[std::size_t(s.feature_dim + 2)] = dir.z();
    c.input[std::size_t(s.feature_dim + 3)] = dist / lod.d_max;

    const double *w1 = w.params.data() + w.w1_offset();
    const double *b1 = w.params.data() + w.b1_offset();
    const double *w2 = w.params.data() + w.w2_offset();
    const double *b2 = w.params.data() + w.b2_offset();
    for (int h = 0; h < hid; ++h) {
        const double z = simd.dot(w1 + std::size_t(h) * std::size_t(in_dim), c.input.data(),
                                  std::size_t(in_dim)) +
                         b1[h];
        c.pre[std::size_t(h)] = z;
        c.hidden[std::size_t(h)] = z > 0.0 ? z : 0.0;
    }
    std::vector<double> out(static_cast<std::size_t>(out_dim));
    for (int o = 0; o < out_dim; ++o)
        out[std::size_t(o)] =
            simd.dot(w2 + std::size_t(o) * std::size_t(hid), c.hidden.data(), std::size_t(hid)) + b2[o];

    const double voxel = lod.voxel_size(a.level);
    std::vector<GaussianKernel> kernels(std::size_t(s.kernels));
    for (int j = 0; j < s.kernels; ++j) {
        const double *o = out.data() + DecoderWeights::kOutputsPerKernel * j;
        GaussianKernel &k = kernels[std::size_t(j)];
        k.mu = a.center + a.offset(s, j) * voxel;
        k.opacity_logit = o[0];
        k.color_logit = Vec3(o[1], o[2], o[3]);
        k.rot = Vec4(1.0 + o[4], o[5], o[6], o[7]);
        k.log_scale = a.log_scale(s, j) + Vec3(o[8], o[9], o[10]);
    }
    return kernels;
}

void
decode_anchor_backward(const Anchor &a, const DecoderWeights &w, const LodConfig &lod,
                       const DecodeCache &c, std::span<const KernelGrad> kernel_grads,
                       std::span<double> anchor_grad, std::span<double> decoder_grad, Vec3 *center_grad,
                       const View *view) {
    check_shapes(a, w);
    const AnchorShape &s = w.shape;
    if (kernel_grads.size() != std::size_t(s.kernels) || anchor_grad.size() != a.params.size() ||
        decoder_grad.size() != w.params.size())
        throw Error(ErrorCode::ShapeMismatch, "gradient buffers do not match decoder shape");
    const auto &simd = simd::kernels();
    const int in_dim = w.input_dim(), out_dim = w.output_dim(), hid = w.hidden;
    const double voxel = lod.voxel_size(a.level);

    std::vector<double> d_out(static_cast<std::size_t>(out_dim));
    for (int j = 0; j < s.kernels; ++j) {
        const KernelGrad &g = kernel_grads[std::size_t(j)];
        double *o = d_out.data() + DecoderWeights::kOutputsPerKernel * j;
        o[0] = g.opacity_logit;
        for (int i = 0; i < 3; ++i)
            o[1 + i] = g.color_logit[i];
        for (int i = 0; i < 4; ++i)
            o[4 + i] = g.rot[i];
        for (int i = 0; i < 3; ++i)
            o[8 + i] = g.log_scale[i];
        const std::size_t oi = a.offset_index(s, j), li = a.log_scale_index(s, j);
        for (int i = 0; i < 3; ++i) {
            anchor_grad[oi + std::size_t(i)] += g.mu[i] * voxel;
            anchor_grad[li + std::size_t(i)] += g.log_scale[i];
        }
    }

    const double *w1 = w.params.data() + w.w1_offset();
    const double *w2 = w.params.data() + w.w2_offset();
    double *dw1 = decoder_grad.data() + w.w1_offset();
    double *db1 = decoder_grad.data() + w.b1_offset();
    double *dw2 = decoder_grad.data() + w.w2_offset();
    double *db2 = decoder_grad.data() + w.b2_offset();

    std::vector<double> d_hidden(std::size_t(hid), 0.0);
    for (int o = 0; o < out_dim; ++o) {
        const double g = d_out[std::size_t(o)];
        if (g == 0.0)
            continue;
        db2[o] += g;
        simd.axpy(g, c.hidden.data(), dw2 + std::size_t(o) * std::size_t(hid), std::size_t(hid));
        simd.axpy(g, w2 + std::size_t(o) * std::size_t(hid), d_hidden.data(), std::size_t(hid));
    }
    std::vector<double> d_input(std::size_t(in_dim), 0.0);
    for (int h = 0; h < hid; ++h) {
        if (!(c.pre[std::size_t(h)] > 0.0))
            continue;
        const double g = d_hidden[std::size_t(h)];
        db1[h] += g;
        simd.axpy(g, c.input.data(), dw1 + std::size_t(h) * std::size_t(in_dim), std::size_t(in_dim));
        simd.axpy(g, w1 + std::size_t(h) * std::size_t(in_dim), d_input.data(), std::size_t(in_dim));
    }
    for (int i = 0; i < s.feature_dim; ++i)
        anchor_grad[std::size_t(i)] += d_input[std::size_t(i)];

    if (!center_grad)
        return;
    if (!view)
        throw Error(ErrorCode::InvalidArgument, "decode_anchor_backward: center gradient needs the view");
    Vec3 gc = Vec3::Zero();
    for (const KernelGrad &g : kernel_grads)
        gc += g.mu;
    const Vec3 rel = a.center - view->camera_center();
    const double dist = rel.norm();
    if (dist > 0.0) {
        const Vec3 dir = rel / dist;
        const double *di = d_input.data() + s.feature_dim;
        const Vec3 g_dir(di[0], di[1], di[2]);
        gc += (g_dir - dir * dir.dot(g_dir)) / dist + dir * (di[3] / lod.d_max);
    }
    *center_grad += gc;
}

} // namespace gigags

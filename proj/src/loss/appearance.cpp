#include "gigags/loss/appearance.hpp"

#include "gigags/core/error.hpp"
#include "gigags/core/kink_trace.hpp"
#include "gigags/loss/ssim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gigags {
namespace {

constexpr double kLuma[3] = {0.299, 0.587, 0.114};

const std::vector<double> &
embedding_for(const AppearanceModel &model, const View &view) {
    if (view.embedding_id < 0 || std::size_t(view.embedding_id) >= model.embeddings.size())
        throw Error(ErrorCode::UnknownView, "no appearance embedding for view " + std::to_string(view.id));
    return model.embeddings[std::size_t(view.embedding_id)];
}

struct UpsampleTap {
    int i0, i1;
    double f;
};

UpsampleTap
upsample_tap(int x, int ds, int cells) {
    const double g = std::clamp((x + 0.5) / ds - 0.5, 0.0, double(cells - 1));
    const int i0 = std::min(int(std::floor(g)), cells - 1);
    return {i0, std::min(i0 + 1, cells - 1), g - i0};
}

} // namespace

AppearanceModel
AppearanceModel::create(const AppearanceConfig &config, int num_views, std::uint64_t seed) {
    if (config.embedding_dim < 1 || config.hidden < 1 || config.downsample < 1 || num_views < 0)
        throw Error(ErrorCode::InvalidArgument, "appearance config");
    AppearanceModel m;
    m.config = config;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> emb(0.0, 0.1);
    m.embeddings.assign(std::size_t(num_views), std::vector<double>(std::size_t(config.embedding_dim)));
    for (auto &e : m.embeddings)
        for (double &v : e)
            v = emb(rng);
    m.phi.assign(m.phi_size(), 0.0);
    std::normal_distribution<double> w1(0.0, 1.0 / std::sqrt(double(m.input_dim())));
    for (std::size_t i = 0; i < m.b1_offset(); ++i)
        m.phi[i] = w1(rng);
    return m;
}

ImageBuffer
apply_appearance(const AppearanceModel &model, const ImageBuffer &render, const View &view,
                 AppearanceCache *cache) {
    const auto &emb = embedding_for(model, view);
    if (render.channels() != 3)
        throw Error(ErrorCode::ShapeMismatch, "apply_appearance: render must be RGB");
    const int w = render.width(), h = render.height(), ds = model.config.downsample;
    const int hid = model.config.hidden, in = model.input_dim(), e_dim = model.config.embedding_dim;
    AppearanceCache local;
    AppearanceCache &c = cache ? *cache : local;
    c.grid_w = (w + ds - 1) / ds;
    c.grid_h = (h + ds - 1) / ds;
    const std::size_t cells = std::size_t(c.grid_w) * std::size_t(c.grid_h);
    c.luminance.assign(cells, 0.0);
    c.hidden_pre.assign(cells * std::size_t(hid), 0.0);
    c.multiplier.assign(cells * 3, 1.0);

    for (int gy = 0; gy < c.grid_h; ++gy)
        for (int gx = 0; gx < c.grid_w; ++gx) {
            const int x1 = std::min(w, (gx + 1) * ds), y1 = std::min(h, (gy + 1) * ds);
            double sum = 0.0;
            for (int y = gy * ds; y < y1; ++y)
                for (int x = gx * ds; x < x1; ++x)
                    for (int ch = 0; ch < 3; ++ch)
                        sum += kLuma[ch] * render.at(x, y, ch);
            const double lum = sum / double((x1 - gx * ds) * (y1 - gy * ds));
            const std::size_t cell = std::size_t(gy) * std::size_t(c.grid_w) + std::size_t(gx);
            c.luminance[cell] = lum;

            double *pre = c.hidden_pre.data() + cell * std::size_t(hid);
            for (int j = 0; j < hid; ++j) {
                const double *row = model.phi.data() + model.w1_offset() + std::size_t(j * in);
                double acc = model.phi[model.b1_offset() + std::size_t(j)];
                for (int k = 0; k < e_dim; ++k)
                    acc += row[k] * emb[std::size_t(k)];
                acc += row[e_dim] * lum;
                pre[j] = acc;
                note_kink(acc > 0.0);
            }
            for (int o = 0; o < 3; ++o) {
                const double *row = model.phi.data() + model.w2_offset() + std::size_t(o * hid);
                double acc = model.phi[model.b2_offset() + std::size_t(o)];
                for (int j = 0; j < hid; ++j)
                    acc += row[j] * std::max(0.0, pre[j]);
                c.multiplier[cell * 3 + std::size_t(o)] = std::exp(acc);
            }
        }

    c.pixel_multiplier = ImageBuffer(w, h, 3);
    ImageBuffer out(w, h, 3);
    for (int y = 0; y < h; ++y) {
        const UpsampleTap ty = upsample_tap(y, ds, c.grid_h);
        for (int x = 0; x < w; ++x) {
            const UpsampleTap tx = upsample_tap(x, ds, c.grid_w);
            for (int ch = 0; ch < 3; ++ch) {
                auto m = [&](int gx, int gy) {
                    return c.multiplier[(std::size_t(gy) * std::size_t(c.grid_w) + std::size_t(gx)) * 3 +
                                        std::size_t(ch)];
                };
                const double top = (1 - tx.f) * m(tx.i0, ty.i0) + tx.f * m(tx.i1, ty.i0);
                const double bot = (1 - tx.f) * m(tx.i0, ty.i1) + tx.f * m(tx.i1, ty.i1);
                const double mult = (1 - ty.f) * top + ty.f * bot;
                c.pixel_multiplier.at(x, y, ch) = mult;
                out.at(x, y, ch) = mult * render.at(x, y, ch);
            }
        }
    }
    return out;
}

void
apply_appearance_backward(const AppearanceModel &model, const ImageBuffer &render, const View &view,
                          const AppearanceCache &c, const ImageBuffer &grad_adjusted, ImageBuffer &grad_render,
                          std::vector<double> &grad_embedding, std::vector<double> &grad_phi) {
    const auto &emb = embedding_for(model, view);
    const int w = render.width(), h = render.height(), ds = model.config.downsample;
    const int hid = model.config.hidden, in = model.input_dim(), e_dim = model.config.embedding_dim;
    if (!grad_adjusted.same_shape(render) || !grad_render.same_shape(render) ||
        grad_embedding.size() != std::size_t(e_dim) || grad_phi.size() != model.phi_size())
        throw Error(ErrorCode::ShapeMismatch, "apply_appearance_backward: buffer sizes");

    const std::size_t cells = std::size_t(c.grid_w) * std::size_t(c.grid_h);
    std::vector<double> g_mult(cells * 3, 0.0);
    for (int y = 0; y < h; ++y) {
        const UpsampleTap ty = upsample_tap(y, ds, c.grid_h);
        for (int x = 0; x < w; ++x) {
            const UpsampleTap tx = upsample_tap(x, ds, c.grid_w);
            for (int ch = 0; ch < 3; ++ch) {
                const double g = grad_adjusted.at(x, y, ch);
                grad_render.at(x, y, ch) += g * c.pixel_multiplier.at(x, y, ch);
                const double gm = g * render.at(x, y, ch);
                auto add = [&](int gx, int gy, double wgt) {
                    g_mult[(std::size_t(gy) * std::size_t(c.grid_w) + std::size_t(gx)) * 3 + std::size_t(ch)] +=
                        wgt * gm;
                };
                add(tx.i0, ty.i0, (1 - tx.f) * (1 - ty.f));
                add(tx.i1, ty.i0, tx.f * (1 - ty.f));
                add(tx.i0, ty.i1, (1 - tx.f) * ty.f);
                add(tx.i1, ty.i1, tx.f * ty.f);
            }
        }
    }

    std::vector<double> g_pre(static_cast<std::size_t>(hid));
    for (int gy = 0; gy < c.grid_h; ++gy)
        for (int gx = 0; gx < c.grid_w; ++gx) {
            const std::size_t cell = std::size_t(gy) * std::size_t(c.grid_w) + std::size_t(gx);
            const double *pre = c.hidden_pre.data() + cell * std::size_t(hid);
            std::fill(g_pre.begin(), g_pre.end(), 0.0);
            for (int o = 0; o < 3; ++o) {
                const double g_out = g_mult[cell * 3 + std::size_t(o)] * c.multiplier[cell * 3 + std::size_t(o)];
                const std::size_t row = model.w2_offset() + std::size_t(o * hid);
                grad_phi[model.b2_offset() + std::size_t(o)] += g_out;
                for (int j = 0; j < hid; ++j) {
                    grad_phi[row + std::size_t(j)] += g_out * std::max(0.0, pre[j]);
                    g_pre[std::size_t(j)] += g_out * model.phi[row + std::size_t(j)];
                }
            }
            double g_lum = 0.0;
            for (int j = 0; j < hid; ++j) {
                if (pre[j] <= 0.0)
                    continue;
                const double gp = g_pre[std::size_t(j)];
                const std::size_t row = model.w1_offset() + std::size_t(j * in);
                grad_phi[model.b1_offset() + std::size_t(j)] += gp;
                for (int k = 0; k < e_dim; ++k) {
                    grad_phi[row + std::size_t(k)] += gp * emb[std::size_t(k)];
                    grad_embedding[std::size_t(k)] += gp * model.phi[row + std::size_t(k)];
                }
                grad_phi[row + std::size_t(e_dim)] += gp * c.luminance[cell];
                g_lum += gp * model.phi[row + std::size_t(e_dim)];
            }
            if (g_lum == 0.0)
                continue;
            const int x1 = std::min(w, (gx + 1) * ds), y1 = std::min(h, (gy + 1) * ds);
            const double per = g_lum / double((x1 - gx * ds) * (y1 - gy * ds));
            for (int y = gy * ds; y < y1; ++y)
                for (int x = gx * ds; x < x1; ++x)
                    for (int ch = 0; ch < 3; ++ch)
                        grad_render.at(x, y, ch) += per * kLuma[ch];
        }
}

AppearanceLoss
appearance_loss(const ImageBuffer &render, const ImageBuffer &adjusted, const ImageBuffer &target, double lambda,
                SsimTarget ssim_target, bool want_grad) {
    if (!render.same_shape(target) || !adjusted.same_shape(target))
        throw Error(ErrorCode::DimensionMismatch, "appearance_loss: image shapes differ");
    AppearanceLoss out;
    const std::size_t n = target.data().size();
    const double inv = 1.0 / double(n);
    if (want_grad) {
        out.grad_render = ImageBuffer(target.width(), target.height(), target.channels());
        out.grad_adjusted = ImageBuffer(target.width(), target.height(), target.channels());
    }
    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = adjusted.data()[i] - target.data()[i];
        l1 += std::abs(d);
        note_kink((d > 0) - (d < 0));
        if (want_grad)
            out.grad_adjusted.data()[i] = d > 0 ? inv : (d < 0 ? -inv : 0.0);
    }
    out.l1 = l1 * inv;
    out.value = out.l1;
    if (lambda != 0.0) {
        const ImageBuffer &x = ssim_target == SsimTarget::Render ? render : adjusted;
        ImageBuffer g;
        const double s = ssim(x, target, want_grad ? &g : nullptr);
        out.dssim = 0.5 * (1.0 - s);
        out.value += lambda * out.dssim;
        if (want_grad) {
            ImageBuffer &dst = ssim_target == SsimTarget::Render ? out.grad_render : out.grad_adjusted;
            for (std::size_t i = 0; i < n; ++i)
                dst.data()[i] += -0.5 * lambda * g.data()[i];
        }
    }
    return out;
}

} // namespace gigags

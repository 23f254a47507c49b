#include "gigags/loss/ssim.hpp"

#include "gigags/core/error.hpp"
#include "gigags/simd/kernels.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace gigags {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWindow> &
taps() {
    static const std::array<double, kWindow> t = [] {
        std::array<double, kWindow> w{};
        double sum = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            const double x = i - kWindow / 2;
            w[std::size_t(i)] = std::exp(-x * x / (2 * kSigma * kSigma));
            sum += w[std::size_t(i)];
        }
        for (double &v : w)
            v /= sum;
        return w;
    }();
    return t;
}

/// Separable "valid" Gaussian filter of a w x h plane -> (w-10) x (h-10).
void
blur_valid(const std::vector<double> &in, int w, int h, std::vector<double> &out) {
    const auto &simd = simd::kernels();
    const int ow = w - (kWindow - 1), oh = h - (kWindow - 1);
    std::vector<double> tmp(std::size_t(ow) * std::size_t(h));
    for (int y = 0; y < h; ++y)
        simd.correlate(in.data() + std::size_t(y) * std::size_t(w), 1, std::size_t(ow), taps().data(), kWindow,
                       tmp.data() + std::size_t(y) * std::size_t(ow));
    out.assign(std::size_t(ow) * std::size_t(oh), 0.0);
    std::vector<double> col(static_cast<std::size_t>(oh));
    for (int x = 0; x < ow; ++x) {
        simd.correlate(tmp.data() + x, std::size_t(ow), std::size_t(oh), taps().data(), kWindow, col.data());
        for (int y = 0; y < oh; ++y)
            out[std::size_t(y) * std::size_t(ow) + std::size_t(x)] = col[std::size_t(y)];
    }
}

/// Adjoint of blur_valid: (w-10) x (h-10) -> w x h.
void
blur_adjoint(const std::vector<double> &in, int w, int h, std::vector<double> &out) {
    const int ow = w - (kWindow - 1), oh = h - (kWindow - 1);
    const int pad = kWindow - 1;
    // zero-pad by the window size and correlate again (the taps are symmetric)
    const int pw = ow + 2 * pad, ph = oh + 2 * pad;
    std::vector<double> padded(std::size_t(pw) * std::size_t(ph), 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            padded[std::size_t(y + pad) * std::size_t(pw) + std::size_t(x + pad)] =
                in[std::size_t(y) * std::size_t(ow) + std::size_t(x)];
    blur_valid(padded, pw, ph, out);
    (void)w;
    (void)h;
}

} // namespace

double
ssim(const ImageBuffer &a, const ImageBuffer &b, ImageBuffer *grad_a) {
    if (!a.same_shape(b))
        throw Error(ErrorCode::DimensionMismatch, "ssim: image shapes differ");
    const int w = a.width(), h = a.height(), ch = a.channels();
    if (w < kWindow || h < kWindow)
        throw Error(ErrorCode::InvalidArgument, "ssim: image smaller than the 11x11 window");
    const int ow = w - (kWindow - 1), oh = h - (kWindow - 1);
    const std::size_t n = std::size_t(w) * std::size_t(h), on = std::size_t(ow) * std::size_t(oh);
    const double norm = 1.0 / (double(on) * double(ch));
    if (grad_a)
        *grad_a = ImageBuffer(w, h, ch);

    std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
    std::vector<double> mu_a, mu_b, e_aa, e_bb, e_ab;
    double total = 0.0;
    for (int c = 0; c < ch; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            const double va = a.data()[i * std::size_t(ch) + std::size_t(c)];
            const double vb = b.data()[i * std::size_t(ch) + std::size_t(c)];
            pa[i] = va;
            pb[i] = vb;
            paa[i] = va * va;
            pbb[i] = vb * vb;
            pab[i] = va * vb;
        }
        blur_valid(pa, w, h, mu_a);
        blur_valid(pb, w, h, mu_b);
        blur_valid(paa, w, h, e_aa);
        blur_valid(pbb, w, h, e_bb);
        blur_valid(pab, w, h, e_ab);

        std::vector<double> d_mu, d_eaa, d_eab;
        if (grad_a) {
            d_mu.resize(on);
            d_eaa.resize(on);
            d_eab.resize(on);
        }
        for (std::size_t i = 0; i < on; ++i) {
            const double ma = mu_a[i], mb = mu_b[i];
            const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
            const double a1 = 2 * ma * mb + kC1, a2 = 2 * cov + kC2;
            const double b1 = ma * ma + mb * mb + kC1, b2 = va + vb + kC2;
            const double s = (a1 * a2) / (b1 * b2);
            total += s;
            if (grad_a) {
                d_mu[i] = norm * s * (2 * mb / a1 - 2 * mb / a2 - 2 * ma / b1 + 2 * ma / b2);
                d_eaa[i] = -norm * s / b2;
                d_eab[i] = norm * 2 * s / a2;
            }
        }
        if (grad_a) {
            std::vector<double> g_mu, g_aa, g_ab;
            blur_adjoint(d_mu, w, h, g_mu);
            blur_adjoint(d_eaa, w, h, g_aa);
            blur_adjoint(d_eab, w, h, g_ab);
            for (std::size_t i = 0; i < n; ++i)
                grad_a->data()[i * std::size_t(ch) + std::size_t(c)] =
                    g_mu[i] + 2 * pa[i] * g_aa[i] + pb[i] * g_ab[i];
        }
    }
    return total * norm;
}

} // namespace gigags

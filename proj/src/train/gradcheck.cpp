#include "gigags/train/gradcheck.hpp"

#include "gigags/core/kink_trace.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

namespace gigags {
namespace {

double
rel_error(double a, double n, double floor) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

struct Difference {
    double value;
    bool straddles;
};

void
record(GradCheckGroup &g, int index, double a, Difference n, double floor) {
    const double e = rel_error(a, n.value, floor);
    g.raw_max_rel_error = std::max(g.raw_max_rel_error, e);
    if (n.straddles) {
        ++g.straddled;
        return;
    }
    ++g.checked;
    if (e > g.max_rel_error || g.worst_index < 0) {
        g.max_rel_error = e;
        g.worst_index = index;
        g.analytic = a;
        g.numeric = n.value;
    }
}

Difference
central(const std::function<double()> &f, double &x, double eps) {
    const double saved = x;
    KinkTrace tp, tm;
    double fp, fm;
    x = saved + eps;
    {
        KinkTraceScope scope(tp);
        fp = f();
    }
    x = saved - eps;
    {
        KinkTraceScope scope(tm);
        fm = f();
    }
    x = saved;
    return {(fp - fm) / (2 * eps), !(tp == tm)};
}

View
camera(int id, int size, const Vec3 &eye, const Vec3 &target) {
    View v;
    v.id = id;
    v.embedding_id = id;
    v.intrinsics = {double(size), double(size), size / 2.0, size / 2.0, size, size};
    const Vec3 z = (target - eye).normalized();
    const Vec3 x = z.cross(Vec3(0, -1, 0)).normalized();
    v.pose.rotation.col(0) = x;
    v.pose.rotation.col(1) = z.cross(x);
    v.pose.rotation.col(2) = z;
    v.pose.center = eye;
    return v;
}

ImageBuffer
smooth_target(std::mt19937_64 &rng, int size) {
    std::uniform_real_distribution<double> u(0, 1);
    ImageBuffer img(size, size, 3);
    for (int c = 0; c < 3; ++c) {
        const double a = 0.1 + 0.3 * u(rng), b = 0.1 + 0.3 * u(rng), p = 6 * u(rng);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                img.at(x, y, c) = 0.5 + 0.35 * std::sin(a * x + b * y + p);
    }
    return img;
}

} // namespace

std::string
GradCheckReport::to_string() const {
    std::string s;
    char line[256];
    for (const auto &g : groups) {
        std::snprintf(line, sizeof line,
                      "%-12s checked %5d  straddled %4d  max rel err %.3e  raw %.3e  (index %d: analytic %.6e "
                      "numeric %.6e)\n",
                      g.name.c_str(), g.checked, g.straddled, g.max_rel_error, g.raw_max_rel_error, g.worst_index,
                      g.analytic, g.numeric);
        s += line;
    }
    std::snprintf(line, sizeof line, "overall checked %d  straddled %d  max rel err %.3e  raw %.3e\n", checked,
                  straddled, max_rel_error, raw_max_rel_error);
    s += line;
    return s;
}

GradCheckReport
gradient_check(const std::vector<GaussianKernel> &kernels_in, const View &ref, const View *nbr,
               const ObjectiveConfig &cfg, const AppearanceModel *appearance_in, const GradCheckOptions &opt) {
    std::vector<GaussianKernel> kernels = kernels_in;
    AppearanceModel appearance = appearance_in ? *appearance_in : AppearanceModel{};
    const AppearanceModel *app = appearance_in ? &appearance : nullptr;

    auto loss = [&] {
        ViewKernels r{&ref, kernels};
        ViewKernels n{nbr, kernels};
        return evaluate_objective(cfg, opt.iteration, r, nbr ? &n : nullptr, app, false).total;
    };
    ViewKernels r{&ref, kernels};
    ViewKernels n{nbr, kernels};
    const ObjectiveResult res = evaluate_objective(cfg, opt.iteration, r, nbr ? &n : nullptr, app, true);
    std::vector<KernelGrad> grads = res.ref_grads;
    for (std::size_t i = 0; i < res.nbr_grads.size(); ++i)
        grads[i] += res.nbr_grads[i];

    GradCheckReport rep;
    GradCheckGroup g_mu{"position"}, g_rot{"rotation"}, g_scale{"log_scale"}, g_op{"opacity"}, g_col{"color"};
    for (std::size_t k = 0; k < kernels.size(); ++k) {
        const int base = int(k);
        for (int i = 0; i < 3; ++i)
            record(g_mu, 3 * base + i, grads[k].mu[i], central(loss, kernels[k].mu[i], opt.eps), opt.floor);
        for (int i = 0; i < 4; ++i)
            record(g_rot, 4 * base + i, grads[k].rot[i], central(loss, kernels[k].rot[i], opt.eps), opt.floor);
        for (int i = 0; i < 3; ++i)
            record(g_scale, 3 * base + i, grads[k].log_scale[i], central(loss, kernels[k].log_scale[i], opt.eps),
                   opt.floor);
        record(g_op, base, grads[k].opacity_logit, central(loss, kernels[k].opacity_logit, opt.eps), opt.floor);
        for (int i = 0; i < 3; ++i)
            record(g_col, 3 * base + i, grads[k].color_logit[i], central(loss, kernels[k].color_logit[i], opt.eps),
                   opt.floor);
    }
    rep.groups = {g_mu, g_rot, g_scale, g_op, g_col};
    if (app) {
        GradCheckGroup g_emb{"embedding"}, g_phi{"appearance"};
        auto &emb = appearance.embeddings[std::size_t(ref.embedding_id)];
        for (std::size_t i = 0; i < emb.size(); ++i)
            record(g_emb, int(i), res.embedding_grad[i], central(loss, emb[i], opt.eps), opt.floor);
        for (std::size_t i = 0; i < appearance.phi.size(); i += std::size_t(std::max(1, opt.phi_stride)))
            record(g_phi, int(i), res.phi_grad[i], central(loss, appearance.phi[i], opt.eps), opt.floor);
        rep.groups.push_back(g_emb);
        rep.groups.push_back(g_phi);
    }
    for (const auto &g : rep.groups) {
        rep.max_rel_error = std::max(rep.max_rel_error, g.max_rel_error);
        rep.raw_max_rel_error = std::max(rep.raw_max_rel_error, g.raw_max_rel_error);
        rep.checked += g.checked;
        rep.straddled += g.straddled;
    }
    return rep;
}

GradCheckScene
make_gradcheck_scene(std::uint64_t seed, int count, int size) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::normal_distribution<double> n(0, 1);
    GradCheckScene s;
    const Vec3 target(0, 0, 3);
    s.ref = camera(0, size, Vec3(0, 0, 0), target);
    s.nbr = camera(1, size, Vec3(0.3 + 0.2 * u(rng), 0.1 * (u(rng) - 0.5), 0.1), target);
    s.ref.image = smooth_target(rng, size);
    s.nbr.image = smooth_target(rng, size);
    for (int i = 0; i < count; ++i) {
        GaussianKernel k;
        k.mu = Vec3(0.8 * (u(rng) - 0.5), 0.8 * (u(rng) - 0.5), 2.6 + 0.8 * u(rng));
        // mostly camera-facing discs with a random tilt
        const Eigen::Quaterniond q(Eigen::AngleAxisd(0.6 * (u(rng) - 0.5), Vec3(n(rng), n(rng), 0).normalized()) *
                                   Eigen::AngleAxisd(6.283 * u(rng), Vec3::UnitZ()));
        k.rot = Vec4(q.w(), q.x(), q.y(), q.z()) * (0.8 + 0.4 * u(rng));
        k.log_scale = Vec3(std::log(0.25 + 0.3 * u(rng)), std::log(0.25 + 0.3 * u(rng)), std::log(0.02 + 0.02 * u(rng)));
        k.opacity_logit = 0.5 + 1.5 * u(rng);
        k.color_logit = Vec3(n(rng), n(rng), n(rng));
        s.kernels.push_back(k);
    }
    AppearanceConfig ac;
    ac.downsample = 8;
    s.appearance = AppearanceModel::create(ac, 2, seed + 1);
    for (std::size_t i = s.appearance.w2_offset(); i < s.appearance.phi_size(); ++i)
        s.appearance.phi[i] = 0.2 * n(rng);
    return s;
}

} // namespace gigags

#include "gigags/train/objective.hpp"

#include "gigags/core/error.hpp"
#include "gigags/loss/flatten.hpp"

namespace gigags {

ObjectiveConfig
ObjectiveConfig::smooth() {
    ObjectiveConfig c;
    c.render.alpha_min = 0.0;
    c.render.min_transmittance = 0.0;
    c.depth.min_alpha = 0.0;
    return c;
}

ObjectiveResult
evaluate_objective(const ObjectiveConfig &cfg, int iter, const ViewKernels &ref, const ViewKernels *nbr,
                   const AppearanceModel *appearance, bool want_grad) {
    const View &rv = *ref.view;
    const int w = rv.intrinsics.width, h = rv.intrinsics.height;
    const TermScales scales = term_scales(cfg.weights, iter);
    ObjectiveResult out;
    out.multiview_active = nbr && scales.multiview > 0.0;

    RenderState ref_state;
    out.ref_buffers = render(ref.kernels, rv, cfg.render, &ref_state);
    depth_from_plane(out.ref_buffers, rv.intrinsics, cfg.depth);
    const RenderBuffers &rb = out.ref_buffers;
    if (want_grad) {
        out.ref_grads.assign(ref.kernels.size(), KernelGrad{});
        if (appearance) {
            out.embedding_grad.assign(std::size_t(appearance->config.embedding_dim), 0.0);
            out.phi_grad.assign(appearance->phi_size(), 0.0);
        }
    }
    RenderGrads ref_up = RenderGrads::zeros(w, h);

    // flatten
    if (scales.flatten > 0.0 && !ref.kernels.empty()) {
        std::vector<KernelGrad> fg(want_grad ? ref.kernels.size() : 0);
        out.terms.flatten = flatten_loss(ref.kernels, fg);
        for (std::size_t i = 0; i < fg.size(); ++i) {
            fg[i] *= scales.flatten;
            out.ref_grads[i] += fg[i];
        }
    }

    // appearance
    AppearanceCache app_cache;
    out.adjusted = appearance ? apply_appearance(*appearance, rb.color, rv, &app_cache) : rb.color;
    const auto app = appearance_loss(rb.color, out.adjusted, rv.image, cfg.weights.lambda, cfg.ssim_target, want_grad);
    out.terms.appearance = app.value;
    if (want_grad) {
        for (std::size_t i = 0; i < ref_up.color.data().size(); ++i)
            ref_up.color.data()[i] += app.grad_render.data()[i];
        if (appearance)
            apply_appearance_backward(*appearance, rb.color, rv, app_cache, app.grad_adjusted, ref_up.color,
                                      out.embedding_grad, out.phi_grad);
        else
            for (std::size_t i = 0; i < ref_up.color.data().size(); ++i)
                ref_up.color.data()[i] += app.grad_adjusted.data()[i];
    }

    // single-view depth-normal consistency
    if (scales.local > 0.0) {
        auto lg = local_geom_loss(rb.depth, rb.depth_valid, rb.normal, rv.intrinsics, cfg.local, want_grad);
        out.terms.local = lg.value;
        if (want_grad) {
            for (double &v : lg.grad_depth.data())
                v *= scales.local;
            for (std::size_t i = 0; i < ref_up.normal.data().size(); ++i)
                ref_up.normal.data()[i] += scales.local * lg.grad_normal.data()[i];
            depth_from_plane_backward(rb, rv.intrinsics, lg.grad_depth, ref_up.normal, ref_up.plane_dist);
        }
    }

    // multi-view consistency
    RenderState nbr_state;
    RenderBuffers nb;
    RenderGrads nbr_up;
    if (out.multiview_active) {
        const View &nv = *nbr->view;
        nb = render(nbr->kernels, nv, cfg.render, &nbr_state);
        depth_from_plane(nb, nv.intrinsics, cfg.depth);
        if (want_grad)
            nbr_up = RenderGrads::zeros(nv.intrinsics.width, nv.intrinsics.height);
        RenderGrads geo_ref = RenderGrads::zeros(w, h);
        const auto geo = geometric_consistency(rv, rb, nv, nb, cfg.occlusion, want_grad ? &geo_ref : nullptr,
                                               want_grad ? &nbr_up : nullptr);
        out.terms.geo = geo.value;
        out.geo_pixels = geo.count;
        const auto photo = multiview_photometric_loss(rv, rb, to_grayscale(rv.image), nv, to_grayscale(nv.image),
                                                      cfg.patch, geo.valid, want_grad ? &geo_ref : nullptr);
        out.terms.ncc = photo.value;
        out.ncc_patches = photo.patches;
        if (want_grad) {
            const double s = scales.multiview;
            for (std::size_t i = 0; i < ref_up.normal.data().size(); ++i)
                ref_up.normal.data()[i] += s * geo_ref.normal.data()[i];
            for (std::size_t i = 0; i < ref_up.plane_dist.data().size(); ++i)
                ref_up.plane_dist.data()[i] += s * geo_ref.plane_dist.data()[i];
            for (double &v : nbr_up.normal.data())
                v *= s;
            for (double &v : nbr_up.plane_dist.data())
                v *= s;
        }
    }

    out.total = total_loss(out.terms, cfg.weights, iter);
    if (!want_grad)
        return out;
    render_backward(ref.kernels, rv, cfg.render, ref_state, ref_up, out.ref_grads);
    if (out.multiview_active) {
        out.nbr_grads.assign(nbr->kernels.size(), KernelGrad{});
        render_backward(nbr->kernels, *nbr->view, cfg.render, nbr_state, nbr_up, out.nbr_grads);
    }
    return out;
}

} // namespace gigags

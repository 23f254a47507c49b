#include "gigags/train/trainer.hpp"

#include "gigags/core/error.hpp"
#include "gigags/loss/total.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <thread>

namespace gigags {
namespace {

std::mutex g_progress_mutex;

std::uint64_t
mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (a + 1) + 0xbf58476d1ce4e5b9ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Active anchors of one view decoded into kernels, with the caches for backward.
struct DecodedView {
    const View *view = nullptr;
    std::vector<Anchor *> anchors;
    std::vector<DecodeCache> caches;
    std::vector<GaussianKernel> kernels;
};

DecodedView
decode_view(AnchorGrid &grid, const DecoderWeights &w, const View &view) {
    DecodedView d;
    d.view = &view;
    const int n = grid.shape().kernels;
    for (const Anchor *a : active_anchors(grid, view, LevelMode::PerAnchor))
        d.anchors.push_back(grid.find(key_of(*a)));
    d.caches.resize(d.anchors.size());
    d.kernels.reserve(d.anchors.size() * std::size_t(n));
    for (std::size_t i = 0; i < d.anchors.size(); ++i) {
        auto ks = decode_anchor(*d.anchors[i], w, view, grid.config(), &d.caches[i]);
        d.kernels.insert(d.kernels.end(), ks.begin(), ks.end());
    }
    return d;
}

struct AnchorGrad {
    std::vector<double> params;
    Vec3 center = Vec3::Zero();
};

void
backward_view(const DecodedView &d, const std::vector<KernelGrad> &grads, const DecoderWeights &w,
              const LodConfig &lod, std::map<AnchorKey, AnchorGrad> &anchor_grads, std::vector<double> &decoder_grad) {
    const std::size_t n = std::size_t(w.shape.kernels);
    for (std::size_t i = 0; i < d.anchors.size(); ++i) {
        const Anchor &a = *d.anchors[i];
        AnchorGrad &g = anchor_grads[key_of(a)];
        if (g.params.empty())
            g.params.assign(a.params.size(), 0.0);
        decode_anchor_backward(a, w, lod, d.caches[i], std::span(grads).subspan(i * n, n), g.params, decoder_grad,
                               &g.center, d.view);
    }
}

std::string
term_report(const LossTerms &t, double total) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "flatten=%.9g appearance=%.9g local=%.9g ncc=%.9g geo=%.9g total=%.9g",
                  t.flatten, t.appearance, t.local, t.ncc, t.geo, total);
    return buf;
}

bool
terms_finite(const LossTerms &t, double total) {
    return std::isfinite(t.flatten) && std::isfinite(t.appearance) && std::isfinite(t.local) &&
           std::isfinite(t.ncc) && std::isfinite(t.geo) && std::isfinite(total);
}

} // namespace

void
TrainConfig::validate() const {
    auto positive = [](double v) { return v > 0.0; };
    if (iterations < 0)
        throw Error(ErrorCode::InvalidArgument, "train: iterations must be >= 0");
    if (!positive(lr.position) || !positive(lr.position_final) || !positive(lr.feature) || !positive(lr.offset) ||
        !positive(lr.log_scale) || !positive(lr.decoder) || !positive(lr.embedding) || !positive(lr.appearance))
        throw Error(ErrorCode::InvalidArgument, "train: learning rates must be > 0");
    if (!(densify_stop_fraction >= 0.0 && densify_stop_fraction <= 1.0) ||
        !(mv_start_fraction >= 0.0 && mv_start_fraction <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "train: fractions must lie in [0, 1]");
    if (densify.interval < 1 || decoder_hidden < 1 || neighbor_candidates < 0 || progress_interval < 0)
        throw Error(ErrorCode::InvalidArgument, "train: intervals and sizes must be positive");
    objective.weights.validate();
}

int
TrainConfig::mv_start_iteration() const {
    return int(std::floor(mv_start_fraction * iterations));
}

int
TrainConfig::densify_stop_iteration() const {
    return int(std::floor(densify_stop_fraction * iterations));
}

std::vector<std::size_t>
neighbor_candidates(const std::vector<View> &views, std::size_t ref, int count) {
    const View &r = views.at(ref);
    const Vec3 fwd = r.pose.rotation.col(2);
    std::vector<std::size_t> cand;
    for (std::size_t j = 0; j < views.size(); ++j)
        if (j != ref && views[j].pose.rotation.col(2).dot(fwd) > 0.0)
            cand.push_back(j);
    auto dist = [&](std::size_t j) { return (views[j].camera_center() - r.camera_center()).squaredNorm(); };
    std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });
    if (cand.size() > std::size_t(std::max(count, 0)))
        cand.resize(std::size_t(std::max(count, 0)));
    return cand;
}

PartitionResult
train_partition(const Partition &p, const AnchorGrid &grid, const std::vector<View> &views, const TrainConfig &cfg) {
    cfg.validate();
    std::vector<View> train_views;
    for (int id : p.train_cameras) {
        auto it = std::find_if(views.begin(), views.end(), [&](const View &v) { return v.id == id; });
        if (it == views.end())
            throw Error(ErrorCode::UnknownView, "train_partition: camera " + std::to_string(id) + " not found");
        train_views.push_back(*it);
    }
    if (train_views.empty())
        throw Error(ErrorCode::EmptySet, "train_partition: no training views");

    PartitionResult res;
    res.trained.partition = p;
    res.trained.grid = partition_grid(p, grid);
    AnchorGrid &g = res.trained.grid;
    if (g.empty())
        throw Error(ErrorCode::EmptySet, "train_partition: no anchors");
    const LodConfig &lod = g.config();
    const AnchorShape shape = g.shape();
    DecoderWeights &dec = res.trained.decoder;
    dec = DecoderWeights::random(shape, cfg.decoder_hidden, mix_seed(cfg.seed, std::uint64_t(p.id), 0),
                                 cfg.decoder_output_gain);
    AppearanceModel *app = nullptr;
    if (cfg.use_appearance) {
        int num = 0;
        for (const View &v : train_views)
            num = std::max(num, v.embedding_id + 1);
        res.appearance = AppearanceModel::create(cfg.appearance, num, mix_seed(cfg.seed, std::uint64_t(p.id), 1));
        app = &res.appearance;
    }

    ObjectiveConfig ocfg = cfg.objective;
    ocfg.weights.mv_start_iter = cfg.mv_start_iteration();
    const int densify_stop = cfg.densify_stop_iteration();
    std::mt19937_64 rng(mix_seed(cfg.seed, std::uint64_t(p.id), 2));
    std::vector<std::vector<std::size_t>> neighbors(train_views.size());
    for (std::size_t i = 0; i < train_views.size(); ++i)
        neighbors[i] = neighbor_candidates(train_views, i, cfg.neighbor_candidates);

    std::optional<LossLog> csv;
    if (!cfg.loss_csv.empty())
        csv.emplace(cfg.loss_csv);
    AnchorInit init;
    init.shape = shape;
    AnchorStatsMap stats;
    OptimState &opt = res.optim;
    const int F = shape.feature_dim, n = shape.kernels;

    for (int it = 0; it < cfg.iterations; ++it) {
        const std::size_t ri = std::uniform_int_distribution<std::size_t>(0, train_views.size() - 1)(rng);
        std::optional<std::size_t> ni;
        if (!neighbors[ri].empty())
            ni = neighbors[ri][std::uniform_int_distribution<std::size_t>(0, neighbors[ri].size() - 1)(rng)];
        const bool mv = ni && term_scales(ocfg.weights, it).multiview > 0.0;

        const DecodedView ref = decode_view(g, dec, train_views[ri]);
        DecodedView nbr;
        if (mv)
            nbr = decode_view(g, dec, train_views[*ni]);
        const ViewKernels rk{ref.view, ref.kernels};
        const ViewKernels nk{nbr.view, nbr.kernels};
        ObjectiveResult r = evaluate_objective(ocfg, it, rk, mv ? &nk : nullptr, app, true);
        if (!terms_finite(r.terms, r.total))
            throw Error(ErrorCode::NonFiniteLoss, "partition " + std::to_string(p.id) + " iteration " +
                                                      std::to_string(it) + ": " + term_report(r.terms, r.total));

        std::map<AnchorKey, AnchorGrad> ag;
        std::vector<double> dg(dec.params.size(), 0.0);
        backward_view(ref, r.ref_grads, dec, lod, ag, dg);
        if (r.multiview_active)
            backward_view(nbr, r.nbr_grads, dec, lod, ag, dg);
        for (std::size_t i = 0; i < ref.anchors.size(); ++i)
            accumulate_stats(stats[key_of(*ref.anchors[i])], *ref.anchors[i], lod,
                             std::span(ref.kernels).subspan(i * std::size_t(n), std::size_t(n)),
                             std::span(r.ref_grads).subspan(i * std::size_t(n), std::size_t(n)));

        const double lr_pos = exponential_decay(cfg.lr.position, cfg.lr.position_final, it, cfg.iterations);
        for (auto &[key, grad] : ag) {
            Anchor *a = g.find(key);
            AnchorMoments &m = opt.anchors[key];
            std::span<double> prm(a->params);
            std::span<const double> gr(grad.params);
            adam_step(prm.subspan(0, std::size_t(F)), gr.subspan(0, std::size_t(F)), m.feature, cfg.lr.feature,
                      cfg.adam);
            adam_step(prm.subspan(std::size_t(F), std::size_t(3 * n)), gr.subspan(std::size_t(F), std::size_t(3 * n)),
                      m.offset, cfg.lr.offset, cfg.adam);
            adam_step(prm.subspan(std::size_t(F + 3 * n), std::size_t(3 * n)),
                      gr.subspan(std::size_t(F + 3 * n), std::size_t(3 * n)), m.log_scale, cfg.lr.log_scale, cfg.adam);
            adam_step(std::span<double>(a->center.data(), 3), std::span<const double>(grad.center.data(), 3), m.center,
                      lr_pos, cfg.adam);
        }
        adam_step(dec.params, dg, opt.decoder, cfg.lr.decoder, cfg.adam);
        if (app) {
            const int eid = train_views[ri].embedding_id;
            adam_step(app->embeddings[std::size_t(eid)], r.embedding_grad, opt.embeddings[eid], cfg.lr.embedding,
                      cfg.adam);
            adam_step(app->phi, r.phi_grad, opt.appearance, cfg.lr.appearance, cfg.adam);
        }

        if ((it + 1) % cfg.densify.interval == 0 && it + 1 < densify_stop) {
            const DensifyReport rep =
                densify_and_prune(g, stats, cfg.densify, init, mix_seed(cfg.seed, std::uint64_t(p.id), 3 + it));
            for (const AnchorKey &k : rep.grown)
                if (Anchor *a = g.find(k))
                    a->partition = p.id;
            for (const AnchorKey &k : rep.pruned)
                opt.anchors.erase(k);
            stats.clear();
        }

        const LossRecord rec{it, r.terms, r.total, int(ref.kernels.size())};
        res.log.push_back(rec);
        if (csv)
            csv->append(it, r.terms, r.total);
        if (cfg.progress && cfg.progress_interval > 0 &&
            ((it + 1) % cfg.progress_interval == 0 || it + 1 == cfg.iterations)) {
            char line[160];
            std::snprintf(line, sizeof line, "partition %d iter %d loss %.6f kernels %d anchors %zu\n", p.id, it + 1,
                          r.total, rec.kernels, g.size());
            std::lock_guard lock(g_progress_mutex);
            *cfg.progress << line << std::flush;
        }
    }
    return res;
}

GaussianField
train_all(const std::vector<Partition> &partitions, const AnchorGrid &grid, const std::vector<View> &views,
          const TrainConfig &cfg, int workers, std::vector<PartitionResult> *results) {
    cfg.validate();
    if (workers < 1)
        throw Error(ErrorCode::InvalidArgument, "train_all: workers must be >= 1");
    const std::size_t n = partitions.size();
    std::vector<std::optional<PartitionResult>> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            TrainConfig c = cfg;
            if (!cfg.loss_csv.empty()) {
                auto path = cfg.loss_csv;
                path.replace_filename(cfg.loss_csv.stem().string() + "_p" + std::to_string(partitions[i].id) +
                                      cfg.loss_csv.extension().string());
                c.loss_csv = path;
            }
            try {
                out[i] = train_partition(partitions[i], grid, views, c);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int threads = int(std::min<std::size_t>(std::size_t(workers), std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(work);
        for (auto &t : pool)
            t.join();
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return partitions[a].id < partitions[b].id; });
    for (std::size_t i : order) {
        if (!errors[i])
            continue;
        const std::string prefix = "partition " + std::to_string(partitions[i].id) + ": ";
        try {
            std::rethrow_exception(errors[i]);
        } catch (const Error &e) {
            throw Error(e.code(), prefix + e.message());
        }
    }
    std::vector<TrainedPartition> trained;
    for (std::size_t i : order)
        trained.push_back(out[i]->trained);
    GaussianField merged = merge_partitions(trained);
    if (results) {
        results->clear();
        for (std::size_t i : order)
            results->push_back(std::move(*out[i]));
    }
    return merged;
}

} // namespace gigags

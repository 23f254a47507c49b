#include "gigags/field/field.hpp"

#include "gigags/core/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gigags {

const DecoderWeights &
GaussianField::decoder_for(const Anchor &a) const {
    if (a.partition < 0 || std::size_t(a.partition) >= decoders.size())
        throw Error(ErrorCode::ShapeMismatch, "anchor references a missing decoder");
    return decoders[std::size_t(a.partition)];
}

std::vector<GaussianKernel>
decode_anchors(const GaussianField &field, const std::vector<const Anchor *> &anchors, const View &view) {
    std::vector<GaussianKernel> out;
    out.reserve(anchors.size() * std::size_t(field.grid.shape().kernels));
    for (const Anchor *a : anchors) {
        auto ks = decode_anchor(*a, field.decoder_for(*a), view, field.grid.config());
        out.insert(out.end(), ks.begin(), ks.end());
    }
    return out;
}

void
accumulate_stats(AnchorStats &stats, const Anchor &anchor, const LodConfig &lod,
                 std::span<const GaussianKernel> kernels, std::span<const KernelGrad> grads) {
    const double voxel = lod.voxel_size(anchor.level);
    double mean = 0.0;
    for (std::size_t j = 0; j < kernels.size(); ++j) {
        const double g = grads[j].mu.norm() * voxel;
        mean += g;
        stats.weighted_position += g * kernels[j].mu;
        stats.weight += g;
        stats.max_opacity = std::max(stats.max_opacity, kernels[j].opacity());
    }
    if (!kernels.empty())
        stats.grad_sum += mean / double(kernels.size());
    stats.observations += 1;
}

DensifyReport
densify_and_prune(AnchorGrid &grid, const AnchorStatsMap &stats, const DensifyConfig &cfg,
                  const AnchorInit &init, std::uint64_t seed) {
    DensifyReport report;
    const LodConfig &lod = grid.config();
    std::vector<Anchor> children;
    for (const auto &[key, st] : stats) {
        const Anchor *a = grid.find(key);
        if (!a || st.observations == 0)
            continue;
        if (st.max_opacity < cfg.prune_opacity) {
            report.pruned.push_back(key);
            continue;
        }
        if (st.grad_sum / st.observations <= cfg.grow_threshold || a->level + 1 >= lod.levels)
            continue;
        const Vec3 target = st.weight > 0.0 ? Vec3(st.weighted_position / st.weight) : a->center;
        Anchor child;
        child.level = a->level + 1;
        child.cell = grid.cell_of(child.level, target);
        const AnchorKey ck{child.level, child.cell};
        if (grid.contains(ck) ||
            std::any_of(children.begin(), children.end(), [&](const Anchor &c) { return key_of(c) == ck; }))
            continue;
        child.center = grid.cell_center(child.level, child.cell);
        child.params = initial_anchor_params(init, seed, ck, lod.voxel_size(child.level));
        // children inherit the parent's feature
        std::copy(a->params.begin(), a->params.begin() + grid.shape().feature_dim, child.params.begin());
        child.partition = a->partition;
        child.expanded = a->expanded;
        children.push_back(std::move(child));
    }
    for (const AnchorKey &k : report.pruned)
        grid.erase(k);
    for (Anchor &c : children) {
        report.grown.push_back(key_of(c));
        grid.insert(std::move(c));
    }
    return report;
}

namespace {

void
put(std::ostream &os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ' ' << buf;
}

[[noreturn]] void
bad(const std::string &what) {
    throw Error(ErrorCode::IoError, "checkpoint: " + what);
}

void
expect(std::istream &is, const char *tag) {
    std::string t;
    if (!(is >> t) || t != tag)
        bad(std::string("expected '") + tag + "'");
}

} // namespace

std::string
checkpoint_to_string(const GaussianField &field) {
    std::ostringstream os;
    const LodConfig &lod = field.grid.config();
    const AnchorShape &s = field.grid.shape();
    os << "gigags-checkpoint 1\n";
    os << "lod";
    put(os, lod.v0);
    os << ' ' << lod.fork << ' ' << lod.levels;
    put(os, lod.d_max);
    os << "\nshape " << s.feature_dim << ' ' << s.kernels << ' '
       << (field.decoders.empty() ? 0 : field.decoders.front().hidden) << '\n';
    os << "decoders " << field.decoders.size() << '\n';
    for (std::size_t d = 0; d < field.decoders.size(); ++d) {
        os << "decoder " << d << ' ' << field.decoders[d].params.size();
        for (double v : field.decoders[d].params)
            put(os, v);
        os << '\n';
    }
    os << "anchors " << field.grid.size() << '\n';
    field.grid.for_each([&](const Anchor &a) {
        os << "anchor " << a.level << ' ' << a.cell[0] << ' ' << a.cell[1] << ' ' << a.cell[2] << ' '
           << a.partition << ' ' << (a.expanded ? 1 : 0);
        for (int i = 0; i < 3; ++i)
            put(os, a.center[i]);
        for (double v : a.params)
            put(os, v);
        os << '\n';
    });
    return os.str();
}

GaussianField
checkpoint_from_string(const std::string &text) {
    std::istringstream is(text);
    expect(is, "gigags-checkpoint");
    int version = 0;
    is >> version;
    if (version != 1)
        bad("unsupported version");
    LodConfig lod;
    expect(is, "lod");
    is >> lod.v0 >> lod.fork >> lod.levels >> lod.d_max;
    AnchorShape shape;
    int hidden = 0;
    expect(is, "shape");
    is >> shape.feature_dim >> shape.kernels >> hidden;
    if (!is)
        bad("malformed header");
    GaussianField field{AnchorGrid(lod, shape), {}};
    std::size_t n_dec = 0;
    expect(is, "decoders");
    is >> n_dec;
    for (std::size_t d = 0; d < n_dec; ++d) {
        expect(is, "decoder");
        std::size_t idx = 0, count = 0;
        is >> idx >> count;
        DecoderWeights w = DecoderWeights::zeros(shape, hidden);
        if (idx != d || count != w.param_count())
            bad("decoder shape mismatch");
        for (double &v : w.params)
            is >> v;
        field.decoders.push_back(std::move(w));
    }
    std::size_t n_anchor = 0;
    expect(is, "anchors");
    is >> n_anchor;
    for (std::size_t i = 0; i < n_anchor; ++i) {
        expect(is, "anchor");
        Anchor a;
        int expanded = 0;
        is >> a.level >> a.cell[0] >> a.cell[1] >> a.cell[2] >> a.partition >> expanded;
        a.expanded = expanded != 0;
        is >> a.center[0] >> a.center[1] >> a.center[2];
        a.params.resize(std::size_t(shape.param_count()));
        for (double &v : a.params)
            is >> v;
        if (!is)
            bad("truncated anchor record");
        if (!field.grid.insert(std::move(a)))
            bad("duplicate anchor cell");
    }
    return field;
}

void
write_checkpoint(const GaussianField &field, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << checkpoint_to_string(field);
    if (!out)
        throw Error(ErrorCode::IoError, "short write to " + path.string());
}

GaussianField
read_checkpoint(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_string(ss.str());
}

} // namespace gigags

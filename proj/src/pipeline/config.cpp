#include "gigags/pipeline/config.hpp"

#include "gigags/core/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace gigags {
namespace {

struct Key {
    std::function<void(PipelineConfig &, const std::string &)> set;
    std::function<std::string(const PipelineConfig &)> get;
};

[[noreturn]] void
bad_value(const std::string &value) {
    throw Error(ErrorCode::ConfigError, "bad value '" + value + "'");
}

double
parse_double(const std::string &s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception &) {
        bad_value(s);
    }
    if (used != s.size() || !std::isfinite(v))
        bad_value(s);
    return v;
}

long long
parse_int(const std::string &s) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception &) {
        bad_value(s);
    }
    if (used != s.size())
        bad_value(s);
    return v;
}

bool
parse_bool(const std::string &s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on")
        return true;
    if (s == "false" || s == "0" || s == "no" || s == "off")
        return false;
    bad_value(s);
}

std::string
fmt(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v); // shortest exact form
    return std::string(buf, r.ptr);
}

template <class Field>
Key
real(Field f) {
    return {[f](PipelineConfig &c, const std::string &s) { f(c) = parse_double(s); },
            [f](const PipelineConfig &c) { return fmt(f(const_cast<PipelineConfig &>(c))); }};
}

template <class Field>
Key
integer(Field f) {
    return {[f](PipelineConfig &c, const std::string &s) {
                const long long v = parse_int(s);
                using T = std::remove_reference_t<decltype(f(c))>;
                if (v < (long long)std::numeric_limits<T>::min() || v > (long long)std::numeric_limits<T>::max())
                    bad_value(s);
                f(c) = T(v);
            },
            [f](const PipelineConfig &c) { return std::to_string(f(const_cast<PipelineConfig &>(c))); }};
}

template <class Field>
Key
boolean(Field f) {
    return {[f](PipelineConfig &c, const std::string &s) { f(c) = parse_bool(s); },
            [f](const PipelineConfig &c) { return std::string(f(const_cast<PipelineConfig &>(c)) ? "true" : "false"); }};
}

const std::map<std::string, Key> &
registry() {
    static const std::map<std::string, Key> keys = [] {
        std::map<std::string, Key> k;
        // general
        k["general.seed"] = {[](PipelineConfig &c, const std::string &s) {
                                 const long long v = parse_int(s);
                                 if (v < 0)
                                     bad_value(s);
                                 c.seed = std::uint64_t(v);
                             },
                             [](const PipelineConfig &c) { return std::to_string(c.seed); }};
        // lod
        k["lod.fork"] = integer([](PipelineConfig &c) -> int & { return c.lod.fork; });
        k["lod.levels"] = integer([](PipelineConfig &c) -> int & { return c.lod.levels; });
        k["lod.v0"] = real([](PipelineConfig &c) -> double & { return c.lod.v0; });
        k["lod.d_max"] = real([](PipelineConfig &c) -> double & { return c.lod.d_max; });
        k["lod.cells"] = real([](PipelineConfig &c) -> double & { return c.lod.cells; });
        // anchor
        k["anchor.feature_dim"] = integer([](PipelineConfig &c) -> int & { return c.anchor.shape.feature_dim; });
        k["anchor.kernels"] = integer([](PipelineConfig &c) -> int & { return c.anchor.shape.kernels; });
        k["anchor.feature_std"] = real([](PipelineConfig &c) -> double & { return c.anchor.feature_std; });
        k["anchor.offset_extent"] = real([](PipelineConfig &c) -> double & { return c.anchor.offset_extent; });
        k["anchor.scale_fraction"] = real([](PipelineConfig &c) -> double & { return c.anchor.scale_fraction; });
        // plan
        k["plan.grid_x"] = integer([](PipelineConfig &c) -> int & { return c.plan.grid_x; });
        k["plan.grid_z"] = integer([](PipelineConfig &c) -> int & { return c.plan.grid_z; });
        k["plan.min_visible"] = integer([](PipelineConfig &c) -> int & { return c.plan.painter.min_visible; });
        k["plan.occluders"] = integer([](PipelineConfig &c) -> int & { return c.plan.painter.occluders; });
        k["plan.radius_px"] = real([](PipelineConfig &c) -> double & { return c.plan.painter.radius_px; });
        // train
        k["train.iterations"] = integer([](PipelineConfig &c) -> int & { return c.train.iterations; });
        k["train.lr_position"] = real([](PipelineConfig &c) -> double & { return c.train.lr.position; });
        k["train.lr_position_final"] = real([](PipelineConfig &c) -> double & { return c.train.lr.position_final; });
        k["train.lr_feature"] = real([](PipelineConfig &c) -> double & { return c.train.lr.feature; });
        k["train.lr_offset"] = real([](PipelineConfig &c) -> double & { return c.train.lr.offset; });
        k["train.lr_log_scale"] = real([](PipelineConfig &c) -> double & { return c.train.lr.log_scale; });
        k["train.lr_decoder"] = real([](PipelineConfig &c) -> double & { return c.train.lr.decoder; });
        k["train.lr_embedding"] = real([](PipelineConfig &c) -> double & { return c.train.lr.embedding; });
        k["train.lr_appearance"] = real([](PipelineConfig &c) -> double & { return c.train.lr.appearance; });
        k["train.densify_interval"] = integer([](PipelineConfig &c) -> int & { return c.train.densify.interval; });
        k["train.densify_grow_threshold"] =
            real([](PipelineConfig &c) -> double & { return c.train.densify.grow_threshold; });
        k["train.densify_prune_opacity"] =
            real([](PipelineConfig &c) -> double & { return c.train.densify.prune_opacity; });
        k["train.densify_stop_fraction"] =
            real([](PipelineConfig &c) -> double & { return c.train.densify_stop_fraction; });
        k["train.mv_start_fraction"] = real([](PipelineConfig &c) -> double & { return c.train.mv_start_fraction; });
        k["train.use_appearance"] = boolean([](PipelineConfig &c) -> bool & { return c.train.use_appearance; });
        k["train.decoder_hidden"] = integer([](PipelineConfig &c) -> int & { return c.train.decoder_hidden; });
        k["train.decoder_output_gain"] =
            real([](PipelineConfig &c) -> double & { return c.train.decoder_output_gain; });
        k["train.neighbor_candidates"] =
            integer([](PipelineConfig &c) -> int & { return c.train.neighbor_candidates; });
        k["train.progress_interval"] = integer([](PipelineConfig &c) -> int & { return c.train.progress_interval; });
        // loss
        k["loss.lambda"] = real([](PipelineConfig &c) -> double & { return c.train.objective.weights.lambda; });
        k["loss.w_flatten"] = real([](PipelineConfig &c) -> double & { return c.train.objective.weights.flatten; });
        k["loss.w_local"] = real([](PipelineConfig &c) -> double & { return c.train.objective.weights.local; });
        k["loss.w_mv"] = real([](PipelineConfig &c) -> double & { return c.train.objective.weights.multiview; });
        k["loss.local_weight"] = {[](PipelineConfig &c, const std::string &s) {
                                      if (s == "absdot")
                                          c.train.objective.local.weight = LocalWeight::AbsDot;
                                      else if (s == "edge")
                                          c.train.objective.local.weight = LocalWeight::EdgeAware;
                                      else
                                          bad_value(s);
                                  },
                                  [](const PipelineConfig &c) {
                                      return std::string(c.train.objective.local.weight == LocalWeight::AbsDot
                                                             ? "absdot"
                                                             : "edge");
                                  }};
        k["loss.edge_tau"] = real([](PipelineConfig &c) -> double & { return c.train.objective.local.edge_tau; });
        k["loss.ssim_target"] = {[](PipelineConfig &c, const std::string &s) {
                                     if (s == "render")
                                         c.train.objective.ssim_target = SsimTarget::Render;
                                     else if (s == "adjusted")
                                         c.train.objective.ssim_target = SsimTarget::Adjusted;
                                     else
                                         bad_value(s);
                                 },
                                 [](const PipelineConfig &c) {
                                     return std::string(c.train.objective.ssim_target == SsimTarget::Render
                                                            ? "render"
                                                            : "adjusted");
                                 }};
        k["loss.patch_half_size"] = integer([](PipelineConfig &c) -> int & { return c.train.objective.patch.half_size; });
        k["loss.patch_stride"] = integer([](PipelineConfig &c) -> int & { return c.train.objective.patch.stride; });
        k["loss.occlusion_px"] =
            real([](PipelineConfig &c) -> double & { return c.train.objective.occlusion.pixel_threshold; });
        // appearance
        k["appearance.embedding_dim"] =
            integer([](PipelineConfig &c) -> int & { return c.train.appearance.embedding_dim; });
        k["appearance.hidden"] = integer([](PipelineConfig &c) -> int & { return c.train.appearance.hidden; });
        k["appearance.downsample"] = integer([](PipelineConfig &c) -> int & { return c.train.appearance.downsample; });
        // render
        k["render.near_plane"] = real([](PipelineConfig &c) -> double & { return c.train.objective.render.near_plane; });
        k["render.alpha_min"] = real([](PipelineConfig &c) -> double & { return c.train.objective.render.alpha_min; });
        k["render.alpha_max"] = real([](PipelineConfig &c) -> double & { return c.train.objective.render.alpha_max; });
        k["render.min_transmittance"] =
            real([](PipelineConfig &c) -> double & { return c.train.objective.render.min_transmittance; });
        k["render.dilation"] = real([](PipelineConfig &c) -> double & { return c.train.objective.render.dilation; });
        k["render.depth_min_alpha"] =
            real([](PipelineConfig &c) -> double & { return c.train.objective.depth.min_alpha; });
        // mesh
        k["mesh.voxel_size"] = real([](PipelineConfig &c) -> double & { return c.mesh.voxel_size; });
        k["mesh.truncation"] = real([](PipelineConfig &c) -> double & { return c.mesh.truncation; });
        k["mesh.padding"] = real([](PipelineConfig &c) -> double & { return c.mesh.padding; });
        k["mesh.min_weight"] = real([](PipelineConfig &c) -> double & { return c.mesh.min_weight; });
        k["mesh.view_stride"] = integer([](PipelineConfig &c) -> int & { return c.mesh.view_stride; });
        k["mesh.max_dim"] = integer([](PipelineConfig &c) -> int & { return c.mesh.max_dim; });
        return k;
    }();
    return keys;
}

std::string
trim(const std::string &s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

void
set_key(PipelineConfig &cfg, const std::string &name, const std::string &value, const std::string &where) {
    const auto &keys = registry();
    const auto it = keys.find(name);
    if (it == keys.end())
        throw Error(ErrorCode::ConfigError, where + "unknown key " + name);
    try {
        it->second.set(cfg, value);
    } catch (const Error &) {
        throw Error(ErrorCode::ConfigError, where + name + ": bad value '" + value + "'");
    }
}

} // namespace

void
PipelineConfig::validate() const {
    auto fail = [](const std::string &what) { throw Error(ErrorCode::ConfigError, what); };
    if (lod.fork < 2 || lod.levels < 1 || lod.v0 < 0 || lod.d_max < 0 || !(lod.cells > 0))
        fail("lod: fork >= 2, levels >= 1, v0 >= 0, d_max >= 0 and cells > 0 required");
    if (anchor.shape.feature_dim < 1 || anchor.shape.kernels < 1 || !(anchor.feature_std >= 0) ||
        !(anchor.offset_extent >= 0) || !(anchor.scale_fraction > 0))
        fail("anchor: sizes must be positive");
    if (plan.grid_x < 1 || plan.grid_z < 1 || plan.painter.min_visible < 1 || plan.painter.occluders < 1 ||
        !(plan.painter.radius_px > 0))
        fail("plan: grid and painter settings must be positive");
    if (!(mesh.voxel_size >= 0) || !(mesh.truncation >= 0) || !(mesh.padding >= 0) || !(mesh.min_weight > 0) ||
        mesh.view_stride < 1 || mesh.max_dim < 2)
        fail("mesh: settings out of range");
    const auto &o = train.objective;
    if (train.appearance.embedding_dim < 1 || train.appearance.hidden < 1 || train.appearance.downsample < 1)
        fail("appearance: sizes must be positive");
    if (!(o.render.near_plane > 0) || !(o.render.alpha_min >= 0) || !(o.render.alpha_max <= 1) ||
        !(o.render.alpha_min < o.render.alpha_max) || !(o.render.min_transmittance >= 0) ||
        !(o.render.dilation >= 0) || !(o.depth.min_alpha >= 0 && o.depth.min_alpha <= 1) || !(o.local.edge_tau > 0))
        fail("render: settings out of range");
    try {
        train.validate();
        o.patch.validate();
        o.occlusion.validate();
    } catch (const Error &e) {
        throw Error(ErrorCode::ConfigError, e.message());
    }
}

void
apply_config_text(PipelineConfig &cfg, const std::string &text) {
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = "config line " + std::to_string(lineno) + ": ";
        line = trim(line.substr(0, line.find_first_of("#;")));
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw Error(ErrorCode::ConfigError, where + "bad section header");
            section = trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const auto &[name, key] : registry())
                known = known || name.compare(0, section.size() + 1, section + ".") == 0;
            if (!known)
                throw Error(ErrorCode::ConfigError, where + "unknown section " + section);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ConfigError, where + "expected key = value");
        if (section.empty())
            throw Error(ErrorCode::ConfigError, where + "key outside a section");
        set_key(cfg, section + "." + trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
    }
}

void
apply_config_override(PipelineConfig &cfg, const std::string &assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw Error(ErrorCode::ConfigError, "override '" + assignment + "' is not section.key=value");
    set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), "override: ");
}

PipelineConfig
load_config(const std::filesystem::path &path, const std::vector<std::string> &overrides) {
    PipelineConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in)
            throw Error(ErrorCode::IoError, "cannot read config " + path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        apply_config_text(cfg, ss.str());
    }
    for (const auto &o : overrides)
        apply_config_override(cfg, o);
    cfg.validate();
    return cfg;
}

std::string
config_to_string(const PipelineConfig &cfg) {
    std::ostringstream out;
    std::string section;
    for (const auto &[name, key] : registry()) {
        const auto dot = name.find('.');
        const std::string s = name.substr(0, dot);
        if (s != section) {
            out << (section.empty() ? "" : "\n") << "[" << s << "]\n";
            section = s;
        }
        out << name.substr(dot + 1) << " = " << key.get(cfg) << "\n";
    }
    return out.str();
}

std::vector<std::string>
config_keys() {
    std::vector<std::string> out;
    for (const auto &[name, key] : registry())
        out.push_back(name);
    return out;
}

} // namespace gigags

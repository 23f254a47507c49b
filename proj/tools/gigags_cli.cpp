#include "gigags/core/error.hpp"
#include "gigags/mesh/mesh.hpp"
#include "gigags/pipeline/bundle.hpp"
#include "gigags/pipeline/config.hpp"
#include "gigags/pipeline/ingest.hpp"
#include "gigags/pipeline/pipeline.hpp"
#include "gigags/pipeline/synth.hpp"
#include "gigags/train/gradcheck.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace gigags;

namespace {

std::string
read_text(const fs::path &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void
write_text(const fs::path &path, const std::string &text) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!(out << text))
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

struct ConfigArgs {
    std::string path;
    std::vector<std::string> overrides;

    void add(CLI::App *app) {
        app->add_option("--config", path, "Config file");
        app->add_option("--set", overrides, "Override, section.key=value")->allow_extra_args(false);
    }
    PipelineConfig load() const { return load_config(path, overrides); }
};

std::vector<View>
select_views(const SceneBundle &b, const std::string &which) {
    if (which == "test")
        return b.test_views();
    if (which == "train")
        return b.train_views();
    if (which == "all")
        return b.views;
    throw Error(ErrorCode::InvalidArgument, "--views must be test, train or all");
}

double
seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
    std::string out, config;
    std::vector<std::string> overrides;
};

int
run_synth(const SynthArgs &a) {
    std::string text = a.config.empty() ? std::string() : read_text(a.config);
    for (std::string o : a.overrides) {
        std::replace(o.begin(), o.end(), '=', ' ');
        text += "\n" + o;
    }
    const SynthConfig sc = synth_config_from_string(text);
    sc.validate();
    const SceneBundle b = make_synth_scene(sc);
    const fs::path out = a.out;
    fs::create_directories(out / "images");
    for (std::size_t i = 0; i < b.views.size(); ++i)
        write_pnm(b.views[i].image, out / "images" / b.image_names[i]);
    write_colmap(b, out / "sparse", [&](const View &v, const Vec3 &p) {
        const auto hit = synth_ray_cast(sc, v.pose.center, (p - v.pose.center).normalized());
        return hit && (hit->point - p).norm() < 1e-6;
    });
    std::string ids = "# held-out view ids\n";
    for (int id : b.test_ids)
        ids += std::to_string(id) + "\n";
    write_text(out / "test_ids.txt", ids);
    write_text(out / "synth.txt", synth_config_to_string(sc));
    std::printf("synth: %zu views (%zu test), %zu points -> %s\n", b.views.size(), b.test_ids.size(),
                b.points.size(), out.string().c_str());
    return 0;
}

// ---- ingest ----------------------------------------------------------------

struct IngestArgs {
    std::string colmap, images, test_ids, out;
    int downscale = 1;
    bool no_align = false;
};

int
run_ingest(const IngestArgs &a) {
    if (a.downscale < 1)
        throw Error(ErrorCode::InvalidArgument, "--downscale must be >= 1");
    SceneBundle b = parse_colmap(a.colmap);
    load_images(b, a.images);
    if (!a.test_ids.empty())
        b.test_ids = read_test_ids(a.test_ids);
    if (a.downscale > 1)
        downscale_bundle(b, a.downscale);
    if (!a.no_align)
        b = manhattan_align(b);
    b.validate();
    write_bundle(b, a.out);
    std::printf("ingest: %zu views (%zu test), %zu points, %dx%d -> %s\n", b.views.size(), b.test_ids.size(),
                b.points.size(), b.views.empty() ? 0 : b.views[0].intrinsics.width,
                b.views.empty() ? 0 : b.views[0].intrinsics.height, a.out.c_str());
    return 0;
}

// ---- plan ------------------------------------------------------------------

struct PlanArgs {
    std::string bundle, out;
    ConfigArgs config;
    bool report = false;
};

int
run_plan(const PlanArgs &a) {
    const PipelineConfig cfg = a.config.load();
    const SceneBundle b = read_bundle(a.bundle);
    const ScenePlan plan = plan_scene(b, cfg);
    const PlanManifest m = plan.manifest();
    if (!a.out.empty())
        write_manifest(m, a.out);
    std::printf("plan: %zu anchors, %zu partitions\n", plan.grid.size(), plan.partitions.size());
    if (a.report)
        std::cout << manifest_report(m);
    return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
    std::string bundle, out, loss_csv;
    ConfigArgs config;
    int workers = 0;
    bool quiet = false;
};

int
run_train(const TrainArgs &a) {
    PipelineConfig cfg = a.config.load();
    const SceneBundle b = read_bundle(a.bundle);
    const int workers = a.workers > 0 ? a.workers : int(std::max(1u, std::thread::hardware_concurrency()));
    if (!a.quiet)
        cfg.train.progress = &std::cout;
    if (!a.loss_csv.empty())
        cfg.train.loss_csv = a.loss_csv;
    const auto t0 = std::chrono::steady_clock::now();
    const ScenePlan plan = plan_scene(b, cfg);
    std::printf("train: %zu partitions, %d workers, %d iterations\n", plan.partitions.size(), workers,
                cfg.train.iterations);
    std::fflush(stdout);
    const GaussianField field = train_scene(b, plan, cfg, workers);
    write_checkpoint(field, a.out);
    write_text(a.out + ".config", config_to_string(cfg));
    std::printf("train: %zu anchors in %.1f s -> %s\n", field.grid.size(), seconds_since(t0), a.out.c_str());
    return 0;
}

// ---- render ----------------------------------------------------------------

struct RenderArgs {
    std::string bundle, checkpoint, out, views = "test";
    ConfigArgs config;
};

int
run_render(const RenderArgs &a) {
    const PipelineConfig cfg = a.config.load();
    const SceneBundle b = read_bundle(a.bundle);
    const GaussianField field = read_checkpoint(a.checkpoint);
    const fs::path out = a.out;
    fs::create_directories(out);
    for (const View &v : select_views(b, a.views)) {
        const RenderBuffers r = render_field(field, v, cfg.train.objective);
        double far = 0.0;
        for (std::size_t i = 0; i < r.depth_valid.size(); ++i)
            if (r.depth_valid[i])
                far = std::max(far, r.depth.data()[i]);
        ImageBuffer depth(r.depth.width(), r.depth.height(), 1);
        for (std::size_t i = 0; i < r.depth_valid.size(); ++i)
            depth.data()[i] = r.depth_valid[i] && far > 0 ? r.depth.data()[i] / far : 0.0;
        char name[64];
        std::snprintf(name, sizeof name, "view_%03d", v.id);
        write_pnm(r.color, out / (std::string(name) + "_color.ppm"));
        write_pnm(depth, out / (std::string(name) + "_depth.pgm"));
    }
    std::printf("render: %s views -> %s\n", a.views.c_str(), a.out.c_str());
    return 0;
}

// ---- mesh ------------------------------------------------------------------

struct MeshArgs {
    std::string bundle, checkpoint, out;
    ConfigArgs config;
    bool ascii = false;
};

int
run_mesh(const MeshArgs &a) {
    const PipelineConfig cfg = a.config.load();
    const SceneBundle b = read_bundle(a.bundle);
    const GaussianField field = read_checkpoint(a.checkpoint);
    const TsdfVolume vol = fuse_field(field, b.train_views(), cfg);
    const TriangleMesh mesh = extract_mesh(vol, cfg.mesh.min_weight);
    write_ply(mesh, a.out, a.ascii ? PlyFormat::Ascii : PlyFormat::BinaryLittleEndian);
    std::printf("mesh: voxel %.6g, %dx%dx%d, %zu vertices, %zu triangles -> %s\n", vol.voxel_size, vol.dims[0],
                vol.dims[1], vol.dims[2], mesh.vertices.size(), mesh.triangles.size(), a.out.c_str());
    return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string bundle, checkpoint, synth, views = "test";
    ConfigArgs config;
};

int
run_eval(const EvalArgs &a) {
    const PipelineConfig cfg = a.config.load();
    const SceneBundle b = read_bundle(a.bundle);
    const GaussianField field = read_checkpoint(a.checkpoint);
    std::cout << evaluate_views(field, select_views(b, a.views), cfg.train.objective).to_string();
    if (!a.synth.empty()) {
        const SynthConfig sc = synth_config_from_string(read_text(a.synth));
        const TsdfVolume vol = fuse_field(field, b.train_views(), cfg);
        const TriangleMesh mesh = extract_mesh(vol, cfg.mesh.min_weight);
        const Mat3 to_source = b.alignment.transpose();
        const double d = mean_vertex_distance(mesh, [&](const Vec3 &p) {
            return synth_surface_distance(sc, to_source * p);
        });
        std::printf("mesh vertices %zu  voxel %.6g  mean surface distance %.6g  (%.3f voxel)\n",
                    mesh.vertices.size(), vol.voxel_size, d, d / vol.voxel_size);
    }
    return 0;
}

// ---- gradcheck -------------------------------------------------------------

struct GradcheckArgs {
    int seeds = 10, kernels = 5, size = 32;
    double eps = 1e-4, tolerance = 1e-3;
    bool sweep = false, verbose = false;
    ConfigArgs config;
};

int
run_gradcheck(const GradcheckArgs &a) {
    const PipelineConfig cfg = a.config.load();
    std::vector<double> eps_list{a.eps};
    if (a.sweep)
        eps_list = {1e-3, 3e-4, 1e-4, 3e-5, 1e-5};
    bool ok = true;
    for (double eps : eps_list) {
        double worst = 0.0;
        int straddled = 0;
        for (int s = 0; s < a.seeds; ++s) {
            const GradCheckScene scene = make_gradcheck_scene(std::uint64_t(s), a.kernels, a.size);
            GradCheckOptions opt;
            opt.eps = eps;
            const GradCheckReport r =
                gradient_check(scene.kernels, scene.ref, &scene.nbr, cfg.train.objective, &scene.appearance, opt);
            worst = std::max(worst, r.max_rel_error);
            straddled += r.straddled;
            if (a.verbose)
                std::cout << "seed " << s << " eps " << eps << "\n" << r.to_string();
        }
        std::printf("eps %.0e  seeds %d  max rel err %.3e  straddled %d\n", eps, a.seeds, worst, straddled);
        if (eps == a.eps || !a.sweep)
            ok = ok && worst <= a.tolerance;
    }
    std::printf("gradcheck %s (tolerance %.0e at eps %.0e)\n", ok ? "PASS" : "FAIL", a.tolerance, a.eps);
    return ok ? 0 : 1;
}

} // namespace

int
main(int argc, char **argv) {
    CLI::App app{"gigags: partitioned anchor Gaussian surface reconstruction"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto *c_synth = app.add_subcommand("synth", "Write the synthetic plane+sphere scene as COLMAP text and images");
    c_synth->add_option("--out", synth.out, "Output directory")->required();
    c_synth->add_option("--config", synth.config, "Synth settings file (key value lines)");
    c_synth->add_option("--set", synth.overrides, "Override, key=value")->allow_extra_args(false);

    IngestArgs ingest;
    auto *c_ingest = app.add_subcommand("ingest", "Convert COLMAP text output and images into a bundle");
    c_ingest->add_option("--colmap", ingest.colmap, "Directory with cameras.txt, images.txt, points3D.txt")
        ->required();
    c_ingest->add_option("--images", ingest.images, "Image directory")->required();
    c_ingest->add_option("--test-ids", ingest.test_ids, "File listing held-out image ids");
    c_ingest->add_option("--downscale", ingest.downscale, "Integer box-filter factor");
    c_ingest->add_flag("--no-align", ingest.no_align, "Skip Manhattan alignment");
    c_ingest->add_option("--out", ingest.out, "Bundle directory")->required();

    PlanArgs plan;
    auto *c_plan = app.add_subcommand("plan", "Build the anchor hierarchy and partition plan");
    c_plan->add_option("--bundle", plan.bundle, "Bundle directory")->required();
    c_plan->add_option("--out", plan.out, "Manifest file");
    c_plan->add_flag("--report", plan.report, "Print per-partition statistics");
    plan.config.add(c_plan);

    TrainArgs train;
    auto *c_train = app.add_subcommand("train", "Train all partitions and write the merged checkpoint");
    c_train->add_option("--bundle", train.bundle, "Bundle directory")->required();
    c_train->add_option("--out", train.out, "Checkpoint file")->required();
    c_train->add_option("--workers", train.workers, "Parallel partitions (default: hardware threads)");
    c_train->add_option("--loss-csv", train.loss_csv, "Per-iteration loss log (suffixed _p<id>)");
    c_train->add_flag("--quiet", train.quiet, "No progress lines");
    train.config.add(c_train);

    RenderArgs render;
    auto *c_render = app.add_subcommand("render", "Render color and depth images of bundle views");
    c_render->add_option("--bundle", render.bundle, "Bundle directory")->required();
    c_render->add_option("--checkpoint", render.checkpoint, "Checkpoint file")->required();
    c_render->add_option("--out", render.out, "Output directory")->required();
    c_render->add_option("--views", render.views, "test, train or all");
    render.config.add(c_render);

    MeshArgs mesh;
    auto *c_mesh = app.add_subcommand("mesh", "Fuse rendered depth into a TSDF and extract a PLY mesh");
    c_mesh->add_option("--bundle", mesh.bundle, "Bundle directory")->required();
    c_mesh->add_option("--checkpoint", mesh.checkpoint, "Checkpoint file")->required();
    c_mesh->add_option("--out", mesh.out, "PLY file")->required();
    c_mesh->add_flag("--ascii", mesh.ascii, "ASCII PLY");
    mesh.config.add(c_mesh);

    EvalArgs eval;
    auto *c_eval = app.add_subcommand("eval", "PSNR and SSIM on held-out views; mesh error against a synth scene");
    c_eval->add_option("--bundle", eval.bundle, "Bundle directory")->required();
    c_eval->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
    c_eval->add_option("--synth", eval.synth, "synth.txt of the scene, enables the mesh distance");
    c_eval->add_option("--views", eval.views, "test, train or all");
    eval.config.add(c_eval);

    GradcheckArgs grad;
    auto *c_grad = app.add_subcommand("gradcheck", "Analytic against central-difference gradients");
    c_grad->add_option("--seeds", grad.seeds, "Number of seeded scenes");
    c_grad->add_option("--kernels", grad.kernels, "Kernels per scene");
    c_grad->add_option("--size", grad.size, "Image side");
    c_grad->add_option("--eps", grad.eps, "Difference step");
    c_grad->add_option("--tolerance", grad.tolerance, "Maximum relative error");
    c_grad->add_flag("--sweep", grad.sweep, "Report several steps");
    c_grad->add_flag("--verbose", grad.verbose, "Per-group reports");
    grad.config.add(c_grad);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*c_synth)
            return run_synth(synth);
        if (*c_ingest)
            return run_ingest(ingest);
        if (*c_plan)
            return run_plan(plan);
        if (*c_train)
            return run_train(train);
        if (*c_render)
            return run_render(render);
        if (*c_mesh)
            return run_mesh(mesh);
        if (*c_eval)
            return run_eval(eval);
        if (*c_grad)
            return run_gradcheck(grad);
    } catch (const Error &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e.code());
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}

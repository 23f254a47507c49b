#include "gigags/pipeline/ingest.hpp"

#include "gigags/core/error.hpp"

#include <Eigen/Geometry>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace gigags {
namespace {

struct LineReader {
    std::ifstream in;
    std::string file;
    int lineno = 0;

    explicit LineReader(const std::filesystem::path &p) : in(p), file(p.filename().string()) {
        if (!in)
            throw Error(ErrorCode::IoError, "cannot read " + p.string());
    }
    /// Next non-empty, non-comment line.
    bool next(std::string &line) {
        while (std::getline(in, line)) {
            ++lineno;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#')
                continue;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string &what) const {
        throw Error(ErrorCode::MalformedLine, file + " line " + std::to_string(lineno) + ": " + what);
    }
};

std::string
num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream
open_out(const std::filesystem::path &p) {
    std::ofstream out(p);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + p.string());
    return out;
}

bool
projects_inside(const View &v, const Vec3 &x) {
    const Vec3 c = v.pose.to_camera(x);
    if (c.z() <= 1e-9)
        return false;
    const auto &k = v.intrinsics;
    const double u = k.fx * c.x() / c.z() + k.cx, w = k.fy * c.y() / c.z() + k.cy;
    return u >= -0.5 && w >= -0.5 && u < k.width - 0.5 && w < k.height - 0.5;
}

} // namespace

SceneBundle
parse_colmap(const std::filesystem::path &dir) {
    std::map<int, CameraIntrinsics> cameras;
    {
        LineReader r(dir / "cameras.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream ls(line);
            int id = 0;
            std::string model;
            CameraIntrinsics k;
            if (!(ls >> id >> model >> k.width >> k.height))
                r.fail("expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS");
            if (model == "PINHOLE") {
                if (!(ls >> k.fx >> k.fy >> k.cx >> k.cy))
                    r.fail("PINHOLE needs fx fy cx cy");
            } else if (model == "SIMPLE_PINHOLE") {
                if (!(ls >> k.fx >> k.cx >> k.cy))
                    r.fail("SIMPLE_PINHOLE needs f cx cy");
                k.fy = k.fx;
            } else {
                throw Error(ErrorCode::UnsupportedCameraModel,
                            r.file + " line " + std::to_string(r.lineno) + ": camera model " + model);
            }
            try {
                k.validate();
            } catch (const Error &e) {
                r.fail(e.what());
            }
            if (!cameras.emplace(id, k).second)
                r.fail("duplicate camera id");
        }
    }
    SceneBundle b;
    {
        LineReader r(dir / "images.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream ls(line);
            int id = 0, cam = 0;
            double qw, qx, qy, qz;
            Vec3 t;
            std::string name;
            if (!(ls >> id >> qw >> qx >> qy >> qz >> t.x() >> t.y() >> t.z() >> cam >> name))
                r.fail("expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME");
            const auto it = cameras.find(cam);
            if (it == cameras.end())
                r.fail("unknown camera id " + std::to_string(cam));
            const Eigen::Quaterniond q(qw, qx, qy, qz);
            if (!(q.norm() > 1e-12))
                r.fail("zero quaternion");
            const Mat3 r_cw = q.normalized().toRotationMatrix();
            View v;
            v.id = id;
            v.embedding_id = id;
            v.intrinsics = it->second;
            v.pose.rotation = r_cw.transpose();
            v.pose.center = -(r_cw.transpose() * t);
            b.views.push_back(v);
            b.image_names.push_back(name);
            // the observation line may be blank, so it is read raw
            if (!std::getline(r.in, line))
                r.fail("missing POINTS2D line");
            ++r.lineno;
        }
    }
    {
        LineReader r(dir / "points3D.txt");
        std::string line;
        while (r.next(line)) {
            std::istringstream ls(line);
            long long id = 0;
            Vec3 p;
            int cr, cg, cb;
            double err;
            if (!(ls >> id >> p.x() >> p.y() >> p.z() >> cr >> cg >> cb >> err))
                r.fail("expected POINT3D_ID X Y Z R G B ERROR TRACK");
            int track = 0;
            long long image_id, point2d;
            while (ls >> image_id) {
                if (!(ls >> point2d))
                    r.fail("odd track entry");
                ++track;
            }
            if (!ls.eof())
                r.fail("bad track entry");
            if (track < 2)
                continue;
            b.points.push_back(p);
            b.point_colors.emplace_back(cr / 255.0, cg / 255.0, cb / 255.0);
        }
    }
    b.validate();
    return b;
}

void
write_colmap(const SceneBundle &b, const std::filesystem::path &dir, const Visibility &visible) {
    b.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create " + dir.string());
    const Visibility vis = visible ? visible : Visibility(projects_inside);
    // observations[view][k] = (u, v, point id)
    std::vector<std::vector<std::tuple<double, double, std::size_t>>> obs(b.views.size());
    std::vector<std::vector<std::pair<int, std::size_t>>> tracks(b.points.size());
    for (std::size_t pi = 0; pi < b.points.size(); ++pi)
        for (std::size_t vi = 0; vi < b.views.size(); ++vi) {
            const View &v = b.views[vi];
            if (!projects_inside(v, b.points[pi]) || !vis(v, b.points[pi]))
                continue;
            const Vec3 c = v.pose.to_camera(b.points[pi]);
            const auto &k = v.intrinsics;
            tracks[pi].emplace_back(v.id, obs[vi].size());
            obs[vi].emplace_back(k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy, pi + 1);
        }
    auto cams = open_out(dir / "cameras.txt");
    cams << "# Camera list with one line of data per camera:\n#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
    for (const View &v : b.views) {
        const auto &k = v.intrinsics;
        cams << v.id << " PINHOLE " << k.width << " " << k.height << " " << num(k.fx) << " " << num(k.fy) << " "
             << num(k.cx) << " " << num(k.cy) << "\n";
    }
    auto imgs = open_out(dir / "images.txt");
    imgs << "# Image list with two lines of data per image:\n"
            "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
    for (std::size_t vi = 0; vi < b.views.size(); ++vi) {
        const View &v = b.views[vi];
        const Mat3 r_cw = v.pose.rotation.transpose();
        const Eigen::Quaterniond q(r_cw);
        const Vec3 t = -(r_cw * v.pose.center);
        imgs << v.id << " " << num(q.w()) << " " << num(q.x()) << " " << num(q.y()) << " " << num(q.z()) << " "
             << num(t.x()) << " " << num(t.y()) << " " << num(t.z()) << " " << v.id << " " << b.image_names[vi]
             << "\n";
        bool first = true;
        for (const auto &[u, w, id] : obs[vi]) {
            imgs << (first ? "" : " ") << num(u) << " " << num(w) << " " << id;
            first = false;
        }
        imgs << "\n";
    }
    auto pts = open_out(dir / "points3D.txt");
    pts << "# 3D point list with one line of data per point:\n"
           "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
    for (std::size_t pi = 0; pi < b.points.size(); ++pi) {
        const Vec3 &p = b.points[pi];
        const Vec3 c = b.point_colors.empty() ? Vec3(0.5, 0.5, 0.5) : b.point_colors[pi];
        auto byte = [](double x) { return int(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); };
        pts << pi + 1 << " " << num(p.x()) << " " << num(p.y()) << " " << num(p.z()) << " " << byte(c.x()) << " "
            << byte(c.y()) << " " << byte(c.z()) << " 0";
        for (const auto &[view, idx] : tracks[pi])
            pts << " " << view << " " << idx;
        pts << "\n";
    }
    if (!cams || !imgs || !pts)
        throw Error(ErrorCode::IoError, "write failed in " + dir.string());
}

void
load_images(SceneBundle &b, const std::filesystem::path &image_dir) {
    for (std::size_t i = 0; i < b.views.size(); ++i)
        b.views[i].image = read_pnm(image_dir / b.image_names[i]);
    b.validate();
}

std::vector<int>
read_test_ids(const std::filesystem::path &path) {
    LineReader r(path);
    std::vector<int> ids;
    std::string line;
    while (r.next(line)) {
        std::istringstream ls(line.substr(0, line.find('#')));
        std::string tok;
        while (ls >> tok) {
            std::size_t used = 0;
            int id = 0;
            try {
                id = std::stoi(tok, &used);
            } catch (const std::exception &) {
                used = 0;
            }
            if (used != tok.size())
                r.fail("not a view id: " + tok);
            ids.push_back(id);
        }
    }
    return ids;
}

ImageBuffer
downscale_image(const ImageBuffer &img, int f) {
    if (f < 1)
        throw Error(ErrorCode::InvalidArgument, "downscale factor must be >= 1");
    const int w = img.width() / f, h = img.height() / f, ch = img.channels();
    if (w < 1 || h < 1)
        throw Error(ErrorCode::InvalidArgument, "downscale factor larger than the image");
    ImageBuffer out(w, h, ch);
    const double inv = 1.0 / double(f * f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double s = 0.0;
                for (int dy = 0; dy < f; ++dy)
                    for (int dx = 0; dx < f; ++dx)
                        s += img.at(x * f + dx, y * f + dy, c);
                out.at(x, y, c) = s * inv;
            }
    return out;
}

void
downscale_bundle(SceneBundle &b, int f) {
    if (f < 1)
        throw Error(ErrorCode::InvalidArgument, "downscale factor must be >= 1");
    if (f == 1)
        return;
    for (View &v : b.views) {
        auto &k = v.intrinsics;
        // pixel centers sit at integer coordinates: block centers map to (x + 0.5) / f - 0.5
        k.fx /= f;
        k.fy /= f;
        k.cx = (k.cx + 0.5) / f - 0.5;
        k.cy = (k.cy + 0.5) / f - 0.5;
        k.width /= f;
        k.height /= f;
        if (!v.image.empty())
            v.image = downscale_image(v.image, f);
    }
    b.validate();
}

Mat3
manhattan_rotation(const std::vector<View> &views) {
    if (views.size() < 3)
        throw Error(ErrorCode::TooFewCameras, "manhattan_align needs at least 3 cameras");
    Vec3 down = Vec3::Zero();
    for (const View &v : views)
        down += v.pose.rotation.col(1);
    down /= double(views.size());
    if (down.norm() < 0.1)
        throw Error(ErrorCode::DegenerateOrientation, "camera down axes cancel out");
    return Eigen::Quaterniond::FromTwoVectors(down.normalized(), Vec3(0, -1, 0)).toRotationMatrix();
}

SceneBundle
manhattan_align(const SceneBundle &bundle) {
    const Mat3 r = manhattan_rotation(bundle.views);
    SceneBundle out = bundle;
    for (View &v : out.views) {
        v.pose.rotation = r * v.pose.rotation;
        v.pose.center = r * v.pose.center;
    }
    for (Vec3 &p : out.points)
        p = r * p;
    out.alignment = r * bundle.alignment;
    out.up_axis = 1;
    return out;
}

} // namespace gigags

#include "gigags/pipeline/bundle.hpp"

#include "gigags/core/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace gigags {
namespace {

std::string
num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[noreturn]] void
malformed(int line, const std::string &what) {
    throw Error(ErrorCode::MalformedLine, "bundle line " + std::to_string(line) + ": " + what);
}

} // namespace

void
SceneBundle::validate() const {
    if (image_names.size() != views.size())
        throw Error(ErrorCode::InvalidArgument, "bundle: one image name per view required");
    if (!point_colors.empty() && point_colors.size() != points.size())
        throw Error(ErrorCode::InvalidArgument, "bundle: point colors do not match points");
    if (up_axis < 0 || up_axis > 2)
        throw Error(ErrorCode::InvalidArgument, "bundle: up_axis must be 0, 1 or 2");
    std::set<int> ids;
    for (const View &v : views) {
        v.validate();
        if (!ids.insert(v.id).second)
            throw Error(ErrorCode::InvalidArgument, "bundle: duplicate view id " + std::to_string(v.id));
    }
    for (int t : test_ids)
        if (!ids.count(t))
            throw Error(ErrorCode::UnknownView, "bundle: test id " + std::to_string(t) + " has no view");
    for (const auto &n : image_names)
        if (n.empty() || n.find_first_of(" \t\n") != std::string::npos)
            throw Error(ErrorCode::InvalidArgument, "bundle: image names must be non-empty without whitespace");
}

bool
SceneBundle::is_test(int view_id) const {
    return std::find(test_ids.begin(), test_ids.end(), view_id) != test_ids.end();
}

std::vector<View>
SceneBundle::train_views() const {
    std::vector<View> out;
    for (const View &v : views)
        if (!is_test(v.id))
            out.push_back(v);
    return out;
}

std::vector<View>
SceneBundle::test_views() const {
    std::vector<View> out;
    for (const View &v : views)
        if (is_test(v.id))
            out.push_back(v);
    return out;
}

std::string
bundle_to_string(const SceneBundle &b) {
    std::ostringstream out;
    out << "gigags-bundle 1\nup_axis " << b.up_axis << "\nalignment";
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            out << " " << num(b.alignment(r, c));
    out << "\nviews " << b.views.size() << "\n";
    for (std::size_t i = 0; i < b.views.size(); ++i) {
        const View &v = b.views[i];
        const auto &k = v.intrinsics;
        out << "view " << v.id << " " << v.embedding_id << " " << k.width << " " << k.height << " " << num(k.fx)
            << " " << num(k.fy) << " " << num(k.cx) << " " << num(k.cy);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                out << " " << num(v.pose.rotation(r, c));
        for (int a = 0; a < 3; ++a)
            out << " " << num(v.pose.center[a]);
        out << " " << b.image_names.at(i) << "\n";
    }
    const bool colors = !b.point_colors.empty();
    out << "points " << b.points.size() << " " << int(colors) << "\n";
    for (std::size_t i = 0; i < b.points.size(); ++i) {
        out << num(b.points[i].x()) << " " << num(b.points[i].y()) << " " << num(b.points[i].z());
        if (colors)
            out << " " << num(b.point_colors[i].x()) << " " << num(b.point_colors[i].y()) << " "
                << num(b.point_colors[i].z());
        out << "\n";
    }
    out << "test " << b.test_ids.size();
    for (int t : b.test_ids)
        out << " " << t;
    out << "\n";
    return out.str();
}

SceneBundle
bundle_from_string(const std::string &text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto next = [&]() -> std::istringstream {
        if (!std::getline(in, line))
            malformed(lineno + 1, "unexpected end of file");
        ++lineno;
        return std::istringstream(line);
    };
    auto expect = [&](std::istringstream &ls, const char *word) {
        std::string w;
        if (!(ls >> w) || w != word)
            malformed(lineno, std::string("expected '") + word + "'");
    };
    SceneBundle b;
    {
        auto ls = next();
        int version = 0;
        expect(ls, "gigags-bundle");
        if (!(ls >> version) || version != 1)
            malformed(lineno, "unsupported version");
    }
    {
        auto ls = next();
        expect(ls, "up_axis");
        if (!(ls >> b.up_axis))
            malformed(lineno, "up_axis");
    }
    {
        auto ls = next();
        expect(ls, "alignment");
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                if (!(ls >> b.alignment(r, c)))
                    malformed(lineno, "alignment");
    }
    std::size_t n = 0;
    {
        auto ls = next();
        expect(ls, "views");
        if (!(ls >> n))
            malformed(lineno, "view count");
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto ls = next();
        expect(ls, "view");
        View v;
        auto &k = v.intrinsics;
        std::string name;
        if (!(ls >> v.id >> v.embedding_id >> k.width >> k.height >> k.fx >> k.fy >> k.cx >> k.cy))
            malformed(lineno, "view intrinsics");
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                if (!(ls >> v.pose.rotation(r, c)))
                    malformed(lineno, "view rotation");
        for (int a = 0; a < 3; ++a)
            if (!(ls >> v.pose.center[a]))
                malformed(lineno, "view center");
        if (!(ls >> name))
            malformed(lineno, "image name");
        b.views.push_back(v);
        b.image_names.push_back(name);
    }
    std::size_t m = 0;
    int colors = 0;
    {
        auto ls = next();
        expect(ls, "points");
        if (!(ls >> m >> colors))
            malformed(lineno, "point count");
    }
    for (std::size_t i = 0; i < m; ++i) {
        auto ls = next();
        Vec3 p, c;
        if (!(ls >> p.x() >> p.y() >> p.z()))
            malformed(lineno, "point");
        b.points.push_back(p);
        if (colors) {
            if (!(ls >> c.x() >> c.y() >> c.z()))
                malformed(lineno, "point color");
            b.point_colors.push_back(c);
        }
    }
    {
        auto ls = next();
        expect(ls, "test");
        std::size_t k = 0;
        if (!(ls >> k))
            malformed(lineno, "test count");
        b.test_ids.resize(k);
        for (int &t : b.test_ids)
            if (!(ls >> t))
                malformed(lineno, "test id");
    }
    return b;
}

void
write_bundle(const SceneBundle &bundle, const std::filesystem::path &dir) {
    bundle.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir / "images", ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create " + (dir / "images").string());
    std::ofstream out(dir / "bundle.txt");
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + (dir / "bundle.txt").string());
    out << bundle_to_string(bundle);
    for (std::size_t i = 0; i < bundle.views.size(); ++i)
        if (!bundle.views[i].image.empty())
            write_pnm(bundle.views[i].image, dir / "images" / bundle.image_names[i]);
}

SceneBundle
read_bundle(const std::filesystem::path &dir) {
    std::ifstream in(dir / "bundle.txt");
    if (!in)
        throw Error(ErrorCode::IoError, "cannot read " + (dir / "bundle.txt").string());
    std::stringstream ss;
    ss << in.rdbuf();
    SceneBundle b = bundle_from_string(ss.str());
    for (std::size_t i = 0; i < b.views.size(); ++i)
        b.views[i].image = read_pnm(dir / "images" / b.image_names[i]);
    b.validate();
    return b;
}

} // namespace gigags

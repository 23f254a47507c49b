#include "gigags/mesh/mesh.hpp"

#include "gigags/core/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gigags {
namespace {

void
put_le(std::ostream &out, const void *src, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(static_cast<const char *>(src), std::streamsize(n));
    } else {
        const char *p = static_cast<const char *>(src);
        for (std::size_t i = n; i-- > 0;)
            out.put(p[i]);
    }
}

void
get_le(std::istream &in, void *dst, std::size_t n) {
    char buf[8];
    in.read(buf, std::streamsize(n));
    if (!in)
        throw Error(ErrorCode::MalformedLine, "ply: truncated binary data");
    if constexpr (std::endian::native != std::endian::little)
        for (std::size_t i = 0; i < n / 2; ++i)
            std::swap(buf[i], buf[n - 1 - i]);
    std::memcpy(dst, buf, n);
}

enum class Scalar { I8, U8, I16, U16, I32, U32, F32, F64 };

Scalar
parse_scalar(const std::string &t, int line) {
    if (t == "char" || t == "int8")
        return Scalar::I8;
    if (t == "uchar" || t == "uint8")
        return Scalar::U8;
    if (t == "short" || t == "int16")
        return Scalar::I16;
    if (t == "ushort" || t == "uint16")
        return Scalar::U16;
    if (t == "int" || t == "int32")
        return Scalar::I32;
    if (t == "uint" || t == "uint32")
        return Scalar::U32;
    if (t == "float" || t == "float32")
        return Scalar::F32;
    if (t == "double" || t == "float64")
        return Scalar::F64;
    throw Error(ErrorCode::MalformedLine, "ply header line " + std::to_string(line) + ": unknown type " + t);
}

double
read_scalar(std::istream &in, Scalar s, bool binary) {
    if (!binary) {
        double v;
        if (!(in >> v))
            throw Error(ErrorCode::MalformedLine, "ply: truncated ascii data");
        return v;
    }
    switch (s) {
    case Scalar::I8: { std::int8_t v; get_le(in, &v, 1); return v; }
    case Scalar::U8: { std::uint8_t v; get_le(in, &v, 1); return v; }
    case Scalar::I16: { std::int16_t v; get_le(in, &v, 2); return v; }
    case Scalar::U16: { std::uint16_t v; get_le(in, &v, 2); return v; }
    case Scalar::I32: { std::int32_t v; get_le(in, &v, 4); return v; }
    case Scalar::U32: { std::uint32_t v; get_le(in, &v, 4); return v; }
    case Scalar::F32: { float v; get_le(in, &v, 4); return v; }
    case Scalar::F64: { double v; get_le(in, &v, 8); return v; }
    }
    return 0.0;
}

struct Property {
    std::string name;
    Scalar type;
    bool list = false;
    Scalar count_type = Scalar::U8;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> props;
};

} // namespace

void
write_ply(const TriangleMesh &mesh, const std::filesystem::path &path, PlyFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    const bool normals = !mesh.normals.empty();
    if (normals && mesh.normals.size() != mesh.vertices.size())
        throw Error(ErrorCode::ShapeMismatch, "write_ply: normals do not match vertices");
    const bool binary = format == PlyFormat::BinaryLittleEndian;
    out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (normals)
        out << "property double nx\nproperty double ny\nproperty double nz\n";
    out << "element face " << mesh.triangles.size() << "\n";
    out << "property list uchar int vertex_indices\nend_header\n";
    if (binary) {
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            for (int a = 0; a < 3; ++a)
                put_le(out, &mesh.vertices[i][a], 8);
            if (normals)
                for (int a = 0; a < 3; ++a)
                    put_le(out, &mesh.normals[i][a], 8);
        }
        for (const auto &t : mesh.triangles) {
            const std::uint8_t n = 3;
            put_le(out, &n, 1);
            for (int v : t) {
                const std::int32_t x = v;
                put_le(out, &x, 4);
            }
        }
    } else {
        char buf[64];
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            for (int a = 0; a < 3; ++a) {
                std::snprintf(buf, sizeof buf, a ? " %.17g" : "%.17g", mesh.vertices[i][a]);
                out << buf;
            }
            if (normals)
                for (int a = 0; a < 3; ++a) {
                    std::snprintf(buf, sizeof buf, " %.17g", mesh.normals[i][a]);
                    out << buf;
                }
            out << "\n";
        }
        for (const auto &t : mesh.triangles)
            out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
    }
    if (!out)
        throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

TriangleMesh
read_ply(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::string line;
    int lineno = 0;
    auto next_line = [&] {
        if (!std::getline(in, line))
            throw Error(ErrorCode::MalformedLine, "ply: unexpected end of header");
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
    };
    next_line();
    if (line != "ply")
        throw Error(ErrorCode::MalformedLine, "ply header line 1: missing magic");
    bool binary = false;
    std::vector<Element> elements;
    for (;;) {
        next_line();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "end_header")
            break;
        if (word == "comment" || word == "obj_info" || word.empty())
            continue;
        if (word == "format") {
            std::string f;
            ls >> f;
            if (f == "binary_little_endian")
                binary = true;
            else if (f != "ascii")
                throw Error(ErrorCode::MalformedLine, "ply header line " + std::to_string(lineno) + ": format " + f);
        } else if (word == "element") {
            Element e;
            if (!(ls >> e.name >> e.count))
                throw Error(ErrorCode::MalformedLine, "ply header line " + std::to_string(lineno));
            elements.push_back(e);
        } else if (word == "property") {
            if (elements.empty())
                throw Error(ErrorCode::MalformedLine, "ply header line " + std::to_string(lineno) + ": property before element");
            Property p;
            std::string t;
            ls >> t;
            if (t == "list") {
                std::string ct, it;
                ls >> ct >> it;
                p.list = true;
                p.count_type = parse_scalar(ct, lineno);
                p.type = parse_scalar(it, lineno);
            } else {
                p.type = parse_scalar(t, lineno);
            }
            if (!(ls >> p.name))
                throw Error(ErrorCode::MalformedLine, "ply header line " + std::to_string(lineno));
            elements.back().props.push_back(p);
        } else {
            throw Error(ErrorCode::MalformedLine, "ply header line " + std::to_string(lineno) + ": " + word);
        }
    }

    TriangleMesh mesh;
    for (const Element &e : elements) {
        const bool is_vertex = e.name == "vertex", is_face = e.name == "face";
        int xi[3] = {-1, -1, -1}, ni[3] = {-1, -1, -1};
        for (std::size_t k = 0; k < e.props.size(); ++k) {
            const std::string &nm = e.props[k].name;
            for (int a = 0; a < 3; ++a) {
                if (nm == std::string(1, char('x' + a)))
                    xi[a] = int(k);
                if (nm == std::string("n") + char('x' + a))
                    ni[a] = int(k);
            }
        }
        const bool has_normals = is_vertex && ni[0] >= 0 && ni[1] >= 0 && ni[2] >= 0;
        if (is_vertex && (xi[0] < 0 || xi[1] < 0 || xi[2] < 0))
            throw Error(ErrorCode::MalformedLine, "ply: vertex element lacks x/y/z");
        for (std::size_t r = 0; r < e.count; ++r) {
            std::vector<double> vals(e.props.size());
            std::vector<int> poly;
            for (std::size_t k = 0; k < e.props.size(); ++k) {
                const Property &p = e.props[k];
                if (!p.list) {
                    vals[k] = read_scalar(in, p.type, binary);
                    continue;
                }
                const auto n = std::size_t(read_scalar(in, p.count_type, binary));
                for (std::size_t q = 0; q < n; ++q) {
                    const double v = read_scalar(in, p.type, binary);
                    if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index"))
                        poly.push_back(int(v));
                }
            }
            if (is_vertex) {
                mesh.vertices.emplace_back(vals[std::size_t(xi[0])], vals[std::size_t(xi[1])], vals[std::size_t(xi[2])]);
                if (has_normals)
                    mesh.normals.emplace_back(vals[std::size_t(ni[0])], vals[std::size_t(ni[1])], vals[std::size_t(ni[2])]);
            } else if (is_face) {
                if (poly.size() < 3)
                    throw Error(ErrorCode::MalformedLine, "ply: face with fewer than 3 vertices");
                for (std::size_t q = 1; q + 1 < poly.size(); ++q)
                    mesh.triangles.push_back({poly[0], poly[q], poly[q + 1]});
            }
        }
    }
    for (const auto &t : mesh.triangles)
        for (int v : t)
            if (v < 0 || std::size_t(v) >= mesh.vertices.size())
                throw Error(ErrorCode::MalformedLine, "ply: face index out of range");
    return mesh;
}

} // namespace gigags

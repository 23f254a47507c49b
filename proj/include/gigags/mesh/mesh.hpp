#pragma once

#include "gigags/mesh/tsdf.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace gigags {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec3> normals; // empty or one per vertex

    friend bool operator==(const TriangleMesh &, const TriangleMesh &) = default;
};

/// Marching cubes over cells whose eight corners all carry weight >= min_weight
/// (and > 0). Vertices sit at the linear zero crossing on each cell edge and are
/// shared between neighboring cells; triangles face the positive side; vertex
/// normals are the normalized volume gradient. Zero-area triangles are dropped.
TriangleMesh extract_mesh(const TsdfVolume &vol, double min_weight = 1.0);

/// Triangle list of the generated case table: for each of the 256 inside/outside
/// corner patterns, edge index triples. Corner c sits at (c&1, c>>1&1, c>>2&1);
/// edges are numbered by (axis, the two remaining corner bits).
const std::vector<std::vector<std::array<int, 3>>> &marching_cubes_table();

enum class PlyFormat { Ascii, BinaryLittleEndian };

/// Throws IoError.
void write_ply(const TriangleMesh &mesh, const std::filesystem::path &path,
               PlyFormat format = PlyFormat::BinaryLittleEndian);

/// Reads vertex x/y/z (float or double), optional nx/ny/nz, and triangular faces.
/// Throws IoError (unreadable file) or MalformedLine (bad or truncated content).
TriangleMesh read_ply(const std::filesystem::path &path);

} // namespace gigags

#pragma once

#include "gigags/scene/camera.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace gigags {

/// Dense truncated signed distance volume. Values are positive in front of
/// (outside) the surface and clamped to [-1, 1] in units of the truncation.
struct TsdfVolume {
    Vec3 origin = Vec3::Zero(); // center of voxel (0,0,0)
    double voxel_size = 1.0;
    std::array<int, 3> dims{0, 0, 0};
    double truncation = 4.0;
    double max_weight = 64.0;
    std::vector<double> values;
    std::vector<double> weights;

    /// Empty volume (values 1, weights 0). truncation <= 0 selects 4 * voxel_size.
    /// Throws InvalidArgument for non-positive voxel size or dims.
    static TsdfVolume create(const Vec3 &origin, double voxel_size, std::array<int, 3> dims,
                             double truncation = 0.0);

    std::size_t voxel_count() const { return values.size(); }
    std::size_t index(int i, int j, int k) const {
        return (std::size_t(k) * std::size_t(dims[1]) + std::size_t(j)) * std::size_t(dims[0]) + std::size_t(i);
    }
    Vec3 center(int i, int j, int k) const { return origin + voxel_size * Vec3(i, j, k); }
};

/// Fuses one depth map (z-depth, as produced by depth_from_plane) into the
/// volume. Each voxel center projects to its nearest pixel; invalid pixels and
/// voxels behind the camera are skipped.
void integrate_depth(TsdfVolume &vol, const ImageBuffer &depth, const std::vector<std::uint8_t> &valid,
                     const View &view);

} // namespace gigags

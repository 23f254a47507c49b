#include "gigags/mesh/tsdf.hpp"

#include "gigags/core/error.hpp"
#include "gigags/simd/kernels.hpp"

#include <cmath>
#include <limits>

namespace gigags {

TsdfVolume
TsdfVolume::create(const Vec3 &origin, double voxel_size, std::array<int, 3> dims, double truncation) {
    if (!(voxel_size > 0.0) || dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
        throw Error(ErrorCode::InvalidArgument, "tsdf: voxel size and dims must be positive");
    TsdfVolume v;
    v.origin = origin;
    v.voxel_size = voxel_size;
    v.dims = dims;
    v.truncation = truncation > 0.0 ? truncation : 4.0 * voxel_size;
    const std::size_t n = std::size_t(dims[0]) * std::size_t(dims[1]) * std::size_t(dims[2]);
    v.values.assign(n, 1.0);
    v.weights.assign(n, 0.0);
    return v;
}

void
integrate_depth(TsdfVolume &vol, const ImageBuffer &depth, const std::vector<std::uint8_t> &valid,
                const View &view) {
    const auto &k = view.intrinsics;
    if (depth.width() != k.width || depth.height() != k.height || depth.channels() != 1 ||
        valid.size() != depth.pixel_count())
        throw Error(ErrorCode::DimensionMismatch, "integrate_depth: depth does not match the view");
    const auto &simd = simd::kernels();
    const Mat3 rt = view.pose.rotation.transpose();
    std::vector<double> sdf(std::size_t(vol.dims[0]));
    for (int kz = 0; kz < vol.dims[2]; ++kz)
        for (int j = 0; j < vol.dims[1]; ++j) {
            const Vec3 c0 = rt * (vol.center(0, j, kz) - view.pose.center);
            const Vec3 step = rt * Vec3(vol.voxel_size, 0, 0);
            for (int i = 0; i < vol.dims[0]; ++i) {
                const Vec3 c = c0 + double(i) * step;
                double s = std::numeric_limits<double>::quiet_NaN();
                if (c.z() > 1e-9) {
                    const double u = k.fx * c.x() / c.z() + k.cx, v = k.fy * c.y() / c.z() + k.cy;
                    const double ui = std::round(u), vi = std::round(v);
                    if (ui >= 0 && vi >= 0 && ui < k.width && vi < k.height) {
                        const int px = int(ui), py = int(vi);
                        if (valid[std::size_t(py) * std::size_t(k.width) + std::size_t(px)])
                            s = depth.at(px, py) - c.z();
                    }
                }
                sdf[std::size_t(i)] = s;
            }
            const std::size_t row = vol.index(0, j, kz);
            simd.tsdf_update(vol.values.data() + row, vol.weights.data() + row, sdf.data(), sdf.size(),
                             vol.truncation, vol.max_weight);
        }
}

} // namespace gigags

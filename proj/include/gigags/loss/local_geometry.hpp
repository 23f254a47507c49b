#pragma once

#include "gigags/core/image.hpp"
#include "gigags/scene/camera.hpp"

#include <cstdint>
#include <vector>

namespace gigags {

enum class LocalWeight {
    AbsDot,    // |(P0-P1) . (P2-P3)|
    EdgeAware, // exp(-|grad D| / tau)
};

struct LocalGeomConfig {
    LocalWeight weight = LocalWeight::AbsDot;
    double edge_tau = 0.1;
};

struct LocalGeomResult {
    double value = 0.0;
    int pixels = 0;
    ImageBuffer grad_depth;  // 1 channel, empty when gradients were not requested
    ImageBuffer grad_normal; // 3 channels
};

/// Normal from the cross product of the backprojected up-down and left-right
/// neighbors, compared against the rendered normal with an L1 norm and weighted
/// per pixel. Averaged over interior pixels whose four neighbors and self are valid.
LocalGeomResult local_geom_loss(const ImageBuffer &depth, const std::vector<std::uint8_t> &valid,
                                const ImageBuffer &normal, const CameraIntrinsics &k,
                                const LocalGeomConfig &config = {}, bool want_grad = true);

/// The unweighted depth-derived normal at (x, y); false when it cannot be formed.
bool depth_normal(const ImageBuffer &depth, const std::vector<std::uint8_t> &valid, const CameraIntrinsics &k,
                  int x, int y, Vec3 &normal);

} // namespace gigags

#pragma once

#include "gigags/core/image.hpp"
#include "gigags/field/kernel.hpp"
#include "gigags/scene/camera.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace gigags {

struct RenderSettings {
    double near_plane = 0.01;
    double alpha_max = 0.99;
    double alpha_min = 1.0 / 255.0;
    double min_transmittance = 1e-4;
    double dilation = 0.3; // px^2 added to the projected covariance
    Vec3 background = Vec3::Zero();
};

/// Screen-space footprint of one kernel plus what the backward pass needs.
///
/// Plane convention: cam_normal is the kernel's shortest axis in camera
/// coordinates oriented toward the camera, and plane_dist = -(x_cam . cam_normal)
/// is the (non-negative) distance from the camera origin to the kernel plane, so
/// points X on the plane satisfy cam_normal . X + plane_dist = 0.
struct Splat2D {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    Vec3 conic = Vec3::Zero(); // inverse covariance (a, b, c) = [[a, b], [b, c]]
    double depth_key = 0.0;
    int kernel_index = 0;
    double plane_dist = 0.0;
    Vec3 cam_normal = Vec3::Zero();
    Vec3 color = Vec3::Zero();
    double opacity = 0.0;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1; // inclusive pixel bounds with alpha >= alpha_min

    // cached intermediates
    Vec3 cam_point = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();
    Vec3 scale = Vec3::Ones();
    int normal_axis = 0;
    double normal_sign = 1.0;
    Mat3 cov3d = Mat3::Identity();
    Eigen::Matrix<double, 2, 3> jacobian = Eigen::Matrix<double, 2, 3>::Zero();
};

/// EWA projection of a kernel. Returns nullopt when the kernel is culled (in
/// front of the near plane, or its footprint misses the image).
std::optional<Splat2D> project_gaussian(const GaussianKernel &kern, const View &view,
                                        const RenderSettings &settings = {}, int kernel_index = 0);

struct RenderBuffers {
    ImageBuffer color;      // RGB over background
    ImageBuffer normal;     // blended camera-frame normal
    ImageBuffer plane_dist; // blended plane distance
    ImageBuffer depth;      // unbiased depth, 0 where invalid
    ImageBuffer alpha;      // 1 - final transmittance
    std::vector<std::uint8_t> depth_valid;

    bool valid(int x, int y) const { return depth_valid[std::size_t(y) * std::size_t(color.width()) + std::size_t(x)] != 0; }
};

/// Sorted splats and per-row candidate lists retained for the backward pass.
struct RenderState {
    std::vector<Splat2D> splats;              // sorted by (depth_key, kernel_index)
    std::vector<std::vector<int>> row_splats; // per image row, indices into splats
};

RenderBuffers render(std::span<const GaussianKernel> kernels, const View &view,
                     const RenderSettings &settings = {}, RenderState *state = nullptr);

struct DepthSettings {
    double min_alpha = 0.5;
    double min_denominator = 1e-6;
};

/// Ray-plane intersection per pixel: D = plane_dist / (-N . K^-1 p~). Fills
/// buffers.depth and buffers.depth_valid; invalid pixels get depth 0.
void depth_from_plane(RenderBuffers &buffers, const CameraIntrinsics &k, const DepthSettings &ds = {});

/// Adds the contribution of dL/dD to dL/dN and dL/d(plane_dist). Invalid pixels are skipped.
void depth_from_plane_backward(const RenderBuffers &buffers, const CameraIntrinsics &k,
                               const ImageBuffer &grad_depth, ImageBuffer &grad_normal,
                               ImageBuffer &grad_plane_dist);

/// Upstream gradients of the loss with respect to the render buffers. Empty
/// buffers are treated as zero.
struct RenderGrads {
    ImageBuffer color;
    ImageBuffer normal;
    ImageBuffer plane_dist;
    ImageBuffer alpha;

    static RenderGrads zeros(int width, int height);
};

/// Exact reverse-mode gradients of the forward blending with respect to every
/// kernel's raw parameters. `kernel_grads` is indexed like `kernels` and is
/// accumulated into (not overwritten).
void render_backward(std::span<const GaussianKernel> kernels, const View &view,
                     const RenderSettings &settings, const RenderState &state,
                     const RenderGrads &upstream, std::span<KernelGrad> kernel_grads);

struct DumpSettings {
    double far_plane = 10.0;
};

/// Writes <stem>_color.ppm, <stem>_normal.ppm, <stem>_depth.pgm, <stem>_alpha.pgm.
void dump_buffers(const RenderBuffers &buffers, const std::filesystem::path &stem,
                  const DumpSettings &ds = {});

} // namespace gigags

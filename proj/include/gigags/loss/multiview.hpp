#pragma once

#include "gigags/render/renderer.hpp"
#include "gigags/scene/camera.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gigags {

/// H_rn = K_n (R_rn - T_rn n^T / d) K_r^-1 for the plane n.X + d = 0 in the
/// reference camera frame. Throws ZeroPlaneDistance when |d| < 1e-12.
Mat3 plane_homography(const CameraIntrinsics &k_ref, const CameraIntrinsics &k_nbr, const RelativeTransform &rel,
                      const Vec3 &n_ref, double d_ref);

/// Dehomogenized H (u, v, 1). Throws PointAtInfinity when |w| < 1e-12.
PixelCoord warp_pixel(const Mat3 &h, const PixelCoord &p);

/// Zero-mean normalized cross correlation with a 1e-8 floor on both variance
/// sums. Two constant patches give 0. When grad_b is non-empty it receives dNCC/db.
/// Throws DimensionMismatch for unequal sizes or fewer than two samples.
double ncc(std::span<const double> a, std::span<const double> b, std::span<double> grad_b = {});

struct PatchConfig {
    int half_size = 3;
    int stride = 2;
    void validate() const;
};

struct OcclusionConfig {
    double pixel_threshold = 1.0;
    void validate() const;
};

struct GeoConsistency {
    std::vector<std::uint8_t> valid; // reference pixels kept for the multi-view terms
    std::vector<double> error;       // forward-backward error in pixels, NaN where undefined
    double value = 0.0;              // mean error over valid pixels
    int count = 0;
};

/// Forward-backward homography reprojection between two rendered views.
/// Plane gradients are accumulated into the normal and plane_dist channels of
/// grad_ref and grad_nbr when those are non-null.
GeoConsistency geometric_consistency(const View &ref, const RenderBuffers &ref_buf, const View &nbr,
                                     const RenderBuffers &nbr_buf, const OcclusionConfig &occ = {},
                                     RenderGrads *grad_ref = nullptr, RenderGrads *grad_nbr = nullptr);

struct PhotometricResult {
    double value = 0.0;
    int patches = 0;
};

/// Mean of (1 - NCC) between grayscale reference patches and their warps into
/// the neighbor image, over sampled pixels of `valid`. Each patch is warped by
/// the homography of its center pixel's rendered plane.
PhotometricResult multiview_photometric_loss(const View &ref, const RenderBuffers &ref_buf,
                                             const ImageBuffer &ref_gray, const View &nbr,
                                             const ImageBuffer &nbr_gray, const PatchConfig &patch,
                                             const std::vector<std::uint8_t> &valid,
                                             RenderGrads *grad_ref = nullptr);

} // namespace gigags

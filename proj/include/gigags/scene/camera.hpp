#pragma once

#include "gigags/core/image.hpp"

#include <Eigen/Core>

#include <utility>

namespace gigags {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics. Pixel (0,0) is the center of the top-left pixel.
struct CameraIntrinsics {
    double fx = 1.0, fy = 1.0;
    double cx = 0.5, cy = 0.5;
    int width = 1, height = 1;

    /// Throws InvalidArgument unless fx,fy > 0 and the principal point lies inside the image.
    void validate() const;

    Mat3 matrix() const;
    Mat3 inverse_matrix() const;
    /// K^-1 (u, v, 1)
    Vec3 ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }

    friend bool operator==(const CameraIntrinsics &, const CameraIntrinsics &) = default;
};

/// Camera-to-world rigid transform: x_world = rotation * x_cam + center.
/// World-to-camera is always derived on demand.
struct CameraPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 center = Vec3::Zero();

    /// Throws InvalidArgument unless rotation is orthonormal with det +1 (tolerance 1e-9).
    void validate() const;

    Vec3 to_camera(const Vec3 &x_world) const { return rotation.transpose() * (x_world - center); }
    Vec3 to_world(const Vec3 &x_cam) const { return rotation * x_cam + center; }
};

bool is_rotation(const Mat3 &r, double tol = 1e-9);

struct PixelCoord {
    double u = 0.0, v = 0.0;
    Vec3 homogeneous() const { return {u, v, 1.0}; }
};

struct View {
    int id = 0;
    CameraIntrinsics intrinsics;
    CameraPose pose;
    ImageBuffer image;
    int embedding_id = 0;

    /// Checks intrinsics, pose, and that the image (when present) matches the intrinsics.
    void validate() const;
    Vec3 camera_center() const { return pose.center; }
};

struct Projection {
    PixelCoord pixel;
    double depth = 0.0;
};

/// Camera at `eye` looking at `target`, image x to the right and image y along
/// -up (projected). Throws DegenerateOrientation when the view direction is
/// parallel to `up`.
CameraPose look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up = Vec3(0, 1, 0));

/// Pinhole projection. Throws NonPositiveDepth when the camera-space z <= 1e-9.
Projection project_point(const CameraIntrinsics &k, const CameraPose &pose, const Vec3 &x_world);

/// Non-throwing variant; returns false for points at or behind the camera.
bool try_project_point(const CameraIntrinsics &k, const CameraPose &pose, const Vec3 &x_world,
                       Projection &out);

/// Camera-space point depth * K^-1 (u, v, 1). Throws NonPositiveDepth for depth <= 0.
Vec3 backproject(const CameraIntrinsics &k, const PixelCoord &p, double depth);

struct RelativeTransform {
    Mat3 rotation;
    Vec3 translation;
};

/// Maps reference-camera coordinates to neighbor-camera coordinates:
/// x_nbr = rotation * x_ref + translation.
RelativeTransform relative_transform(const CameraPose &ref, const CameraPose &nbr);

} // namespace gigags

#include "gigags/scene/camera.hpp"

#include "gigags/core/error.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>
#include <string>

namespace gigags {

void
CameraIntrinsics::validate() const {
    if (!(fx > 0.0 && fy > 0.0))
        throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
    if (width <= 0 || height <= 0)
        throw Error(ErrorCode::InvalidArgument, "image size must be positive");
    if (!(cx > 0.0 && cx < width && cy > 0.0 && cy < height))
        throw Error(ErrorCode::InvalidArgument, "principal point outside image");
}

Mat3
CameraIntrinsics::matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
}

Mat3
CameraIntrinsics::inverse_matrix() const {
    Mat3 k;
    k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return k;
}

bool
is_rotation(const Mat3 &r, double tol) {
    if (!r.allFinite())
        return false;
    const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

void
CameraPose::validate() const {
    if (!is_rotation(rotation))
        throw Error(ErrorCode::InvalidArgument, "camera rotation is not a proper rotation");
    if (!center.allFinite())
        throw Error(ErrorCode::InvalidArgument, "camera center is not finite");
}

void
View::validate() const {
    intrinsics.validate();
    pose.validate();
    if (!image.empty() && (image.width() != intrinsics.width || image.height() != intrinsics.height))
        throw Error(ErrorCode::DimensionMismatch,
                    "view " + std::to_string(id) + ": image size does not match intrinsics");
}

bool
try_project_point(const CameraIntrinsics &k, const CameraPose &pose, const Vec3 &x_world,
                  Projection &out) {
    const Vec3 xc = pose.to_camera(x_world);
    if (!(xc.z() > 1e-9))
        return false;
    out.pixel = {k.fx * xc.x() / xc.z() + k.cx, k.fy * xc.y() / xc.z() + k.cy};
    out.depth = xc.z();
    return true;
}

Projection
project_point(const CameraIntrinsics &k, const CameraPose &pose, const Vec3 &x_world) {
    Projection out;
    if (!try_project_point(k, pose, x_world, out))
        throw Error(ErrorCode::NonPositiveDepth, "point is behind the camera");
    return out;
}

Vec3
backproject(const CameraIntrinsics &k, const PixelCoord &p, double depth) {
    if (!(depth > 0.0))
        throw Error(ErrorCode::NonPositiveDepth, "backprojection depth must be positive");
    return depth * k.ray(p.u, p.v);
}

RelativeTransform
relative_transform(const CameraPose &ref, const CameraPose &nbr) {
    const Mat3 nbr_t = nbr.rotation.transpose();
    return {nbr_t * ref.rotation, nbr_t * (ref.center - nbr.center)};
}

CameraPose
look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up) {
    const Vec3 z = (target - eye).normalized();
    const Vec3 x = (-up).cross(z);
    if (!(x.norm() > 1e-9))
        throw Error(ErrorCode::DegenerateOrientation, "look_at: view direction parallel to up");
    CameraPose p;
    p.rotation.col(0) = x.normalized();
    p.rotation.col(2) = z;
    p.rotation.col(1) = z.cross(p.rotation.col(0));
    p.center = eye;
    return p;
}

} // namespace gigags

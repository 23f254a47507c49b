#pragma once

#include "gigags/scene/camera.hpp"

#include <cmath>

namespace gigags {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// One flattened 3D Gaussian in its raw (optimizable) parameterization.
/// rot is an unnormalized (w, x, y, z) quaternion; the renderer normalizes it.
struct GaussianKernel {
    Vec3 mu = Vec3::Zero();
    Vec4 rot = Vec4(1.0, 0.0, 0.0, 0.0);
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    Vec3 color_logit = Vec3::Zero();

    Vec3 scale() const { return log_scale.array().exp(); }
    double opacity() const { return sigmoid(opacity_logit); }
    Vec3 color() const { return color_logit.unaryExpr([](double v) { return sigmoid(v); }); }
    Mat3 rotation() const;

    static GaussianKernel from_values(const Vec3 &mu, const Vec4 &quat, const Vec3 &scale,
                                      double opacity, const Vec3 &color);
};

/// Gradient with respect to the raw parameters of a GaussianKernel.
struct KernelGrad {
    Vec3 mu = Vec3::Zero();
    Vec4 rot = Vec4::Zero();
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    Vec3 color_logit = Vec3::Zero();

    KernelGrad &operator+=(const KernelGrad &o);
    KernelGrad &operator*=(double s);
};

/// Rotation matrix of the normalized quaternion (w, x, y, z).
Mat3 quat_to_rotation(const Vec4 &q);

/// Backpropagates dL/dR through R(q / |q|) to the raw quaternion q.
Vec4 quat_rotation_backward(const Vec4 &q, const Mat3 &grad_r);

/// Index of the smallest scale axis; ties resolve to the lowest index.
int min_scale_axis(const Vec3 &scale);

/// World-space normal: rotation column of the smallest scale axis, oriented so
/// that it faces the camera. Throws DegenerateScale when the two smallest scales
/// agree within 1e-12, NonPositiveDistance when the kernel sits at the camera center.
Vec3 kernel_normal(const GaussianKernel &kern, const View &view);

} // namespace gigags

#include "gigags/field/kernel.hpp"

#include "gigags/core/error.hpp"

#include <algorithm>
#include <array>

namespace gigags {

Mat3
quat_to_rotation(const Vec4 &q_raw) {
    const Vec4 q = q_raw / q_raw.norm();
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Vec4
quat_rotation_backward(const Vec4 &q_raw, const Mat3 &g) {
    const double norm = q_raw.norm();
    const Vec4 q = q_raw / norm;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Vec4 dq;
    dq[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    dq[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) +
                 z * g(2, 0) + w * g(2, 1) - 2 * x * g(2, 2));
    dq[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
                 w * g(2, 0) + z * g(2, 1) - 2 * y * g(2, 2));
    dq[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) +
                 y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
    // project out the radial component of the normalization
    return (dq - q * q.dot(dq)) / norm;
}

Mat3
GaussianKernel::rotation() const {
    return quat_to_rotation(rot);
}

GaussianKernel
GaussianKernel::from_values(const Vec3 &mu, const Vec4 &quat, const Vec3 &scale, double opacity,
                            const Vec3 &color) {
    GaussianKernel k;
    k.mu = mu;
    k.rot = quat;
    k.log_scale = scale.array().log();
    k.opacity_logit = logit(opacity);
    k.color_logit = color.unaryExpr([](double c) { return logit(c); });
    return k;
}

KernelGrad &
KernelGrad::operator+=(const KernelGrad &o) {
    mu += o.mu;
    rot += o.rot;
    log_scale += o.log_scale;
    opacity_logit += o.opacity_logit;
    color_logit += o.color_logit;
    return *this;
}

KernelGrad &
KernelGrad::operator*=(double s) {
    mu *= s;
    rot *= s;
    log_scale *= s;
    opacity_logit *= s;
    color_logit *= s;
    return *this;
}

int
min_scale_axis(const Vec3 &s) {
    int axis = 0;
    for (int i = 1; i < 3; ++i)
        if (s[i] < s[axis])
            axis = i;
    return axis;
}

Vec3
kernel_normal(const GaussianKernel &kern, const View &view) {
    const Vec3 s = kern.scale();
    if (!(s.array() > 0.0).all())
        throw Error(ErrorCode::DegenerateScale, "kernel scales must be positive");
    std::array<double, 3> sorted{s[0], s[1], s[2]};
    std::sort(sorted.begin(), sorted.end());
    if (sorted[1] - sorted[0] <= 1e-12)
        throw Error(ErrorCode::DegenerateScale, "two smallest kernel scales coincide");
    const Vec3 view_dir = kern.mu - view.camera_center();
    if (view_dir.norm() == 0.0)
        throw Error(ErrorCode::NonPositiveDistance, "kernel at camera center");
    Vec3 n = kern.rotation().col(min_scale_axis(s));
    if (n.dot(view_dir) > 0.0)
        n = -n;
    return n / n.norm();
}

} // namespace gigags

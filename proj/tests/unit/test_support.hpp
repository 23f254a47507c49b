#pragma once

// Shared fixtures for the unit tests: small random scenes and a central
// finite-difference helper that is independent of any analytic gradient code.

#include "gigags/field/kernel.hpp"
#include "gigags/scene/camera.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace gigags::test {

inline View
make_view(int w, int h, double f, const Mat3 &rot = Mat3::Identity(), const Vec3 &center = Vec3::Zero(),
          int id = 0) {
    View v;
    v.id = id;
    v.intrinsics = {f, f, w / 2.0, h / 2.0, w, h};
    v.pose.rotation = rot;
    v.pose.center = center;
    return v;
}

using gigags::look_at;

inline Mat3
random_rotation(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    return q.toRotationMatrix();
}

/// A few kernels in front of an identity camera (looking down +z), with opacities
/// well below the alpha clamp.
inline std::vector<GaussianKernel>
random_kernels(std::mt19937_64 &rng, int count, double depth_lo = 2.0, double depth_hi = 4.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<GaussianKernel> out;
    for (int i = 0; i < count; ++i) {
        GaussianKernel k;
        const double z = depth_lo + (depth_hi - depth_lo) * u(rng);
        k.mu = Vec3((u(rng) - 0.5) * 0.5 * z, (u(rng) - 0.5) * 0.5 * z, z);
        k.rot = Vec4(n(rng), n(rng), n(rng), n(rng));
        k.log_scale = Vec3(std::log(0.08 + 0.25 * u(rng)), std::log(0.08 + 0.25 * u(rng)),
                           std::log(0.01 + 0.05 * u(rng)));
        k.opacity_logit = -0.8 + 1.6 * u(rng);
        k.color_logit = Vec3(n(rng), n(rng), n(rng));
        out.push_back(k);
    }
    return out;
}

inline double
central_difference(const std::function<double()> &f, double &param, double eps) {
    const double saved = param;
    param = saved + eps;
    const double fp = f();
    param = saved - eps;
    const double fm = f();
    param = saved;
    return (fp - fm) / (2.0 * eps);
}

inline double
relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Visits every raw scalar of a kernel.
template <class F>
void
for_each_param(GaussianKernel &k, F &&f) {
    for (int i = 0; i < 3; ++i)
        f(k.mu[i]);
    for (int i = 0; i < 4; ++i)
        f(k.rot[i]);
    for (int i = 0; i < 3; ++i)
        f(k.log_scale[i]);
    f(k.opacity_logit);
    for (int i = 0; i < 3; ++i)
        f(k.color_logit[i]);
}

template <class F>
void
for_each_param(const KernelGrad &g, F &&f) {
    for (int i = 0; i < 3; ++i)
        f(g.mu[i]);
    for (int i = 0; i < 4; ++i)
        f(g.rot[i]);
    for (int i = 0; i < 3; ++i)
        f(g.log_scale[i]);
    f(g.opacity_logit);
    for (int i = 0; i < 3; ++i)
        f(g.color_logit[i]);
}

inline std::vector<double>
flatten(const KernelGrad &g) {
    std::vector<double> v;
    for_each_param(g, [&](double x) { v.push_back(x); });
    return v;
}

} // namespace gigags::test

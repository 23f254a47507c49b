#include "gigags/train/optimizer.hpp"

#include "gigags/core/error.hpp"

#include <algorithm>
#include <cmath>

namespace gigags {

bool
adam_step(std::span<double> params, std::span<const double> grad, AdamState &s, double lr, const AdamConfig &cfg) {
    if (grad.size() != params.size())
        throw Error(ErrorCode::ShapeMismatch, "adam_step: gradient size");
    if (!(lr > 0.0))
        throw Error(ErrorCode::InvalidArgument, "adam_step: learning rate must be > 0");
    if (std::all_of(grad.begin(), grad.end(), [](double g) { return g == 0.0; }))
        return false;
    if (s.m.empty()) {
        s.m.assign(params.size(), 0.0);
        s.v.assign(params.size(), 0.0);
    } else if (s.m.size() != params.size()) {
        throw Error(ErrorCode::ShapeMismatch, "adam_step: state size");
    }
    ++s.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, double(s.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, double(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * grad[i];
        s.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        params[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + cfg.eps);
    }
    return true;
}

double
exponential_decay(double lr0, double lr1, double t, double total) {
    if (!(total > 0.0))
        return lr0;
    const double f = std::clamp(t / total, 0.0, 1.0);
    return lr0 * std::pow(lr1 / lr0, f);
}

} // namespace gigags

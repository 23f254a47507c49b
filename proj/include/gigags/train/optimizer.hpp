#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gigags {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

/// Moments of one parameter block.
struct AdamState {
    std::vector<double> m, v;
    std::int64_t step = 0;

    friend bool operator==(const AdamState &, const AdamState &) = default;
};

/// One bias-corrected Adam update of `params`. A block whose gradient is all
/// zero (not observed this iteration) is left untouched, moments included;
/// returns whether an update happened. Throws ShapeMismatch or InvalidArgument
/// for a non-positive rate.
bool adam_step(std::span<double> params, std::span<const double> grad, AdamState &state, double lr,
               const AdamConfig &cfg = {});

/// lr0 * (lr1 / lr0)^(t / T), clamped to t in [0, T].
double exponential_decay(double lr0, double lr1, double t, double total);

} // namespace gigags

#pragma once

#include "gigags/train/objective.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gigags {

struct GradCheckGroup {
    std::string name;
    double max_rel_error = 0.0;
    int worst_index = -1; // flat index of the worst parameter within the group
    double analytic = 0.0;
    double numeric = 0.0;
    int checked = 0;
    int straddled = 0;      // components whose stencil crosses a kink, excluded from the maximum
    double raw_max_rel_error = 0.0; // maximum including straddled components
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double max_rel_error = 0.0;
    double raw_max_rel_error = 0.0;
    int checked = 0;
    int straddled = 0;

    std::string to_string() const;
};

struct GradCheckOptions {
    double eps = 1e-4;
    double floor = 1e-6;    // denominator floor of the relative error
    int phi_stride = 13;    // check every n-th appearance MLP weight
    int iteration = 1 << 30; // evaluation iteration (past the multi-view start by default)
};

/// Compares the analytic gradient of the full objective against central
/// differences for every kernel parameter, every embedding entry of the
/// reference view, and a strided subset of the appearance MLP. The neighbor
/// view (optional) renders the same kernels, so kernel gradients from both
/// views are summed. The objective is piecewise smooth; a component whose
/// +-eps stencil records different kink traces is reported as straddled and
/// left out of `max_rel_error`.
GradCheckReport gradient_check(const std::vector<GaussianKernel> &kernels, const View &ref, const View *nbr,
                               const ObjectiveConfig &cfg, const AppearanceModel *appearance,
                               const GradCheckOptions &opt = {});

/// A small seeded scene for gradient checking: up to `count` flattened kernels
/// in front of two 32x32 cameras, smooth random target images, and an
/// appearance model with a non-trivial output layer.
struct GradCheckScene {
    std::vector<GaussianKernel> kernels;
    View ref, nbr;
    AppearanceModel appearance;
};

GradCheckScene make_gradcheck_scene(std::uint64_t seed, int count = 5, int size = 32);

} // namespace gigags

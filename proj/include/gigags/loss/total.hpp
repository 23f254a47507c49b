#pragma once

#include <filesystem>
#include <fstream>

namespace gigags {

struct LossWeights {
    double lambda = 0.25;
    double flatten = 1.0;
    double local = 1.0;
    double multiview = 1.0;
    int mv_start_iter = 0;

    /// Throws InvalidArgument for a negative weight.
    void validate() const;
};

struct LossTerms {
    double flatten = 0.0;
    double appearance = 0.0;
    double local = 0.0;
    double ncc = 0.0;
    double geo = 0.0;
};

/// Multipliers applied to each component (and its gradient) at a given iteration.
struct TermScales {
    double flatten, appearance, local, multiview;
};

TermScales term_scales(const LossWeights &w, int iter);
double total_loss(const LossTerms &terms, const LossWeights &w, int iter);

/// Append-only CSV of per-iteration loss components.
class LossLog {
public:
    explicit LossLog(const std::filesystem::path &path);
    void append(int iter, const LossTerms &terms, double total);

private:
    std::ofstream out_;
};

} // namespace gigags

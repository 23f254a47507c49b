#include "gigags/loss/total.hpp"

#include "gigags/core/error.hpp"

#include <cstdio>

namespace gigags {

void
LossWeights::validate() const {
    if (lambda < 0 || flatten < 0 || local < 0 || multiview < 0)
        throw Error(ErrorCode::InvalidArgument, "loss weights must be non-negative");
}

TermScales
term_scales(const LossWeights &w, int iter) {
    return {w.flatten, 1.0, w.local, iter >= w.mv_start_iter ? w.multiview : 0.0};
}

double
total_loss(const LossTerms &t, const LossWeights &w, int iter) {
    const TermScales s = term_scales(w, iter);
    double mv = 0.0;
    if (s.multiview != 0.0)
        mv = s.multiview * (t.ncc + t.geo);
    return s.flatten * t.flatten + s.appearance * t.appearance + s.local * t.local + mv;
}

LossLog::LossLog(const std::filesystem::path &path) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    if (!out_)
        throw Error(ErrorCode::IoError, "cannot open loss log " + path.string());
    if (fresh)
        out_ << "iteration,flatten,appearance,local,ncc,geo,total\n";
}

void
LossLog::append(int iter, const LossTerms &t, double total) {
    char line[256];
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", iter, t.flatten, t.appearance, t.local,
                  t.ncc, t.geo, total);
    out_ << line;
    out_.flush();
}

} // namespace gigags

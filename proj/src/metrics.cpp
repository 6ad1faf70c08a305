#include "gsmotion/metrics.hpp"

#include "gsmotion/errors.hpp"

#include <cmath>

namespace gsmotion {

MotionSummary aggregate(const MotionField& motions) {
    if (motions.size() == 0) throw ContractError("aggregate: motion field is empty");
    const double n = static_cast<double>(motions.size());
    MotionSummary out;
    for (const auto& d : motions.displacements) out.mean = out.mean + d;
    out.mean = (1.0 / n) * out.mean;
    Point var;
    for (const auto& d : motions.displacements) {
        const Point r = d - out.mean;
        var.x += r.x * r.x;
        var.y += r.y * r.y;
    }
    out.std_dev = {std::sqrt(var.x / n), std::sqrt(var.y / n)};
    return out;
}

ErrorStats error_stats(const MotionField& motions, Point applied) {
    if (!std::isfinite(applied.x) || !std::isfinite(applied.y)) {
        throw ContractError("error_stats: applied motion must be finite");
    }
    const auto summary = aggregate(motions);
    ErrorStats out;
    out.n_kernels = motions.size();
    out.applied = applied;
    out.mean_motion = summary.mean;
    out.std_dev = summary.std_dev;
    out.avg_error = {std::abs(summary.mean.x - applied.x), std::abs(summary.mean.y - applied.y)};
    if (applied.x != 0.0) out.relative_error_x = 100.0 * out.avg_error.x / std::abs(applied.x);
    if (applied.y != 0.0) out.relative_error_y = 100.0 * out.avg_error.y / std::abs(applied.y);

    Point abs_sum;
    for (const auto& d : motions.displacements) {
        abs_sum.x += std::abs(d.x - applied.x);
        abs_sum.y += std::abs(d.y - applied.y);
    }
    out.mean_abs_kernel_error = (1.0 / static_cast<double>(motions.size())) * abs_sum;
    return out;
}

}  // namespace gsmotion

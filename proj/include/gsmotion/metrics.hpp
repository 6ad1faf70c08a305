#pragma once

#include "gsmotion/kernel.hpp"
#include "gsmotion/optimizer.hpp"

#include <optional>
#include <span>

namespace gsmotion {

struct MotionSummary {
    Point mean;
    Point std_dev;  // population, per axis
};

MotionSummary aggregate(const MotionField& motions);

/// Error of a kernel motion field against a known applied displacement.
/// avg_error is the absolute bias of the aggregated motion per axis;
/// relative_error is in percent and absent for an axis with zero applied motion.
struct ErrorStats {
    std::size_t n_kernels = 0;
    Point applied;
    Point mean_motion;
    Point avg_error;
    std::optional<double> relative_error_x;
    std::optional<double> relative_error_y;
    Point std_dev;
    // Mean of per-kernel absolute errors, logged alongside the bias.
    Point mean_abs_kernel_error;
};

ErrorStats error_stats(const MotionField& motions, Point applied);

}  // namespace gsmotion

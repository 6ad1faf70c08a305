#pragma once

#include "gsmotion/image.hpp"
#include "gsmotion/kernel.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gsmotion {

/// Which frames feed the combined L1 term of the pair loss.
enum class L1Mode { Mean, Frame1, Frame2 };

/// Adam step sizes per parameter group. Shape covers log-sigma and the
/// squashed correlation; color is log(c); motion is the translation shared
/// by all kernels and deviation the per-kernel offset from it.
struct StepSizes {
    double position = 0.0;
    double shape = 0.0;
    double color = 0.0;
    double motion = 0.0;
    double deviation = 0.0;
};

struct OptimConfig {
    std::uint64_t seed = 0;

    // Initialization.
    int initial_kernel_count = 400;
    double prune_threshold = 1e-5;
    double sigma_min = 1.0;
    double sigma_max = 10.0;

    // Single-frame fit.
    double stage2_target_l1 = 1e-4;
    int stage2_max_iterations = 6000;
    StepSizes stage2_steps{0.05, 0.02, 0.02, 0.0, 0.0};
    double stage2_final_lr_scale = 0.05;

    // Pair fit.
    double lambda1 = 0.25;
    double lambda2 = 0.25;
    double lambda3 = 0.50;
    double smooth_eps = 1e-12;
    L1Mode l1_mode = L1Mode::Mean;
    bool freeze_kernels = false;
    int stage3_max_iterations = 5000;
    StepSizes stage3_steps{0.02, 0.01, 0.01, 1e-3, 1e-6};
    double stage3_final_lr_scale = 0.01;
    int plateau_window = 500;
    double plateau_rel_tol = 1e-8;

    // Adam moments.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-15;
};

/// Throws ConfigError naming the offending field.
void validate(const OptimConfig& cfg);

/// Per-kernel displacement, frame 1 -> frame 2, aligned by index with a KernelSet.
struct MotionField {
    std::vector<Point> displacements;

    std::size_t size() const noexcept { return displacements.size(); }
};

struct LossBreakdown {
    double l1_frame1 = 0.0;
    double l1_frame2 = 0.0;
    double l_diff = 0.0;
    double l_smooth = 0.0;
    double total = 0.0;
};

/// Value of the combined L1 term for the configured mode.
double combined_l1(const LossBreakdown& loss, L1Mode mode) noexcept;

struct LossGradients {
    std::vector<KernelPartials> kernels;
    std::vector<Point> motions;
};

/// Mean absolute error between the render of `ks` and a normalized frame.
double l1_loss(std::span<const Kernel2D> ks, const ContinuousImage& target);

/// Coefficient-of-variation smoothness term: sqrt(var_x + var_y) / (|mean| + eps).
double smoothness_loss(std::span<const Point> d, double eps);
std::vector<Point> smoothness_gradient(std::span<const Point> d, double eps);

LossBreakdown compute_loss(std::span<const Kernel2D> ks, const MotionField& motions,
                           const GrayImage16& frame1, const GrayImage16& frame2,
                           const OptimConfig& cfg);

/// Gradient of LossBreakdown::total. Row-parallel with a fixed reduction
/// order, bitwise independent of thread count.
LossGradients loss_gradients(std::span<const Kernel2D> ks, const MotionField& motions,
                             const GrayImage16& frame1, const GrayImage16& frame2,
                             const OptimConfig& cfg);

/// Serial reference built from render_reference and kernel_partials.
LossGradients loss_gradients_reference(std::span<const Kernel2D> ks, const MotionField& motions,
                                       const GrayImage16& frame1, const GrayImage16& frame2,
                                       const OptimConfig& cfg);

/// Draws cfg.initial_kernel_count random kernels and drops those sitting on
/// pixels of frame1 darker than cfg.prune_threshold. Throws
/// InitializationFailure if nothing survives.
KernelSet init_kernels(const OptimConfig& cfg, const GrayImage16& frame1);

enum class FitStatus { Converged, MaxIterations, NotConverged, Diverged };

const char* to_string(FitStatus s) noexcept;

struct TraceRow {
    int iteration = 0;
    LossBreakdown loss;
};

struct SingleFrameFit {
    KernelSet kernels;  // best-so-far state
    double l1 = 0.0;
    int iterations = 0;
    FitStatus status = FitStatus::NotConverged;
    std::vector<TraceRow> trace;

    bool ok() const noexcept { return status == FitStatus::Converged; }
};

/// Adam on all kernel parameters against the frame-1 L1 loss until the
/// target is met or the iteration budget runs out. Failure to reach the
/// target is reported through `status`.
SingleFrameFit fit_single_frame(std::span<const Kernel2D> ks, const GrayImage16& frame1,
                                const OptimConfig& cfg);

struct PairFit {
    KernelSet kernels;
    MotionField motions;
    LossBreakdown loss;
    int iterations = 0;
    FitStatus status = FitStatus::MaxIterations;
    std::vector<TraceRow> trace;

    bool ok() const noexcept { return status != FitStatus::Diverged; }
};

/// Joint fit of shared kernels and per-kernel displacements (initially zero)
/// against the composite pair loss. On divergence the last finite state is
/// returned with status Diverged.
PairFit fit_pair(std::span<const Kernel2D> ks, const GrayImage16& frame1, const GrayImage16& frame2,
                 const OptimConfig& cfg);

}  // namespace gsmotion

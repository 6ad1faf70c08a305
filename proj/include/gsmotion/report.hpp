#pragma once

#include "gsmotion/baselines.hpp"
#include "gsmotion/metrics.hpp"
#include "gsmotion/optimizer.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gsmotion {

/// One fitted case. `stats` is empty when the case never produced a motion
/// field (initialization failed, or no ground truth was supplied).
struct CaseResult {
    int index = 0;
    std::uint64_t seed = 0;
    int stage2_iterations = 0;
    double stage2_l1 = 0.0;
    FitStatus stage2_status = FitStatus::NotConverged;
    int stage3_iterations = 0;
    FitStatus stage3_status = FitStatus::NotConverged;
    LossBreakdown final_loss;
    KernelSet kernels;
    MotionField motions;
    std::optional<ErrorStats> stats;
    std::string failure;  // non-empty when the case failed outright
    double wall_seconds = 0.0;

    /// Stage 2 met its target and stage 3 finished with a finite loss.
    bool ok() const noexcept;
};

struct SummaryRow {
    Point avg_error;
    std::optional<double> relative_error_x;
    std::optional<double> relative_error_y;
};

struct ExperimentReport {
    std::vector<CaseResult> cases;  // ordered by index
    std::uint64_t config_hash = 0;
    double wall_seconds = 0.0;

    bool all_ok() const noexcept;
    /// Aggregates over cases carrying stats; empty when none do.
    std::optional<SummaryRow> average() const;
    std::optional<SummaryRow> max() const;
    std::optional<SummaryRow> min() const;
};

/// Columns: case, n_kernels, applied_x, applied_y, avg_error_x, avg_error_y,
/// rel_error_x, rel_error_y, std_x, std_y, status. Summary rows Average, Max
/// and Min fill only the error columns.
void write_report_csv(std::ostream& os, const ExperimentReport& report);

/// Provenance sidecar (JSON): config hash, seeds, iteration counts, wall time.
void write_provenance_json(std::ostream& os, const ExperimentReport& report);

/// Columns: iteration, l1_frame1, l1_frame2, l_diff, l_smooth, total.
void write_trace_csv(std::ostream& os, std::span<const TraceRow> trace);

/// Columns: x, y, u, v, valid.
void write_flow_csv(std::ostream& os, const FlowField& flow);

struct QuiverOptions {
    double arrow_scale = 500.0;
    double pixel_size = 4.0;  // SVG user units per image pixel
};

/// One arrow per kernel, from its center along its displacement times
/// arrow_scale, drawn over kernel ellipses at one sigma.
void write_motion_svg(std::ostream& os, int width, int height, std::span<const Kernel2D> kernels,
                      const MotionField& motions, const QuiverOptions& opt = {});

/// One arrow per valid pixel on a `stride` grid.
void write_flow_svg(std::ostream& os, const FlowField& flow, int stride, const QuiverOptions& opt = {});

struct FlowSummary {
    std::size_t valid = 0;
    Point median;  // per-axis median over valid pixels
    Point mean;
    std::optional<Point> truth;
    std::optional<double> median_error;  // median Euclidean error vs truth
    std::optional<double> mean_error;
};

FlowSummary summarize_flow(const FlowField& flow, std::optional<Point> truth);

void write_flow_summary_csv(std::ostream& os, const std::string& method, const FlowSummary& s);

}  // namespace gsmotion

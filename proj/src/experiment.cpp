#include "gsmotion/experiment.hpp"

#include "gsmotion/errors.hpp"

#include <spdlog/spdlog.h>

#include <chrono>

namespace gsmotion {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

CaseResult run_case(const OptimConfig& cfg, const GrayImage16& frame1, const GrayImage16& frame2,
                    std::optional<Point> truth, int index, std::vector<TraceRow>* stage2_trace,
                    std::vector<TraceRow>* stage3_trace) {
    const auto t0 = std::chrono::steady_clock::now();
    CaseResult out;
    out.index = index;
    out.seed = cfg.seed;

    KernelSet init;
    try {
        init = init_kernels(cfg, frame1);
    } catch (const InitializationFailure& e) {
        out.failure = e.what();
        out.wall_seconds = seconds_since(t0);
        spdlog::warn("case {}: {}", index + 1, out.failure);
        return out;
    }

    auto s2 = fit_single_frame(init, frame1, cfg);
    out.stage2_iterations = s2.iterations;
    out.stage2_l1 = s2.l1;
    out.stage2_status = s2.status;
    if (!s2.ok()) {
        spdlog::warn("case {}: single-frame fit stopped at L1 {:.3e} > target {:.3e} ({})", index + 1, s2.l1,
                     cfg.stage2_target_l1, to_string(s2.status));
    }
    if (stage2_trace) *stage2_trace = std::move(s2.trace);

    auto s3 = fit_pair(s2.kernels, frame1, frame2, cfg);
    out.stage3_iterations = s3.iterations;
    out.stage3_status = s3.status;
    out.final_loss = s3.loss;
    out.kernels = std::move(s3.kernels);
    out.motions = std::move(s3.motions);
    if (stage3_trace) *stage3_trace = std::move(s3.trace);
    if (s3.status == FitStatus::Diverged) spdlog::warn("case {}: pair fit diverged", index + 1);

    if (truth && out.motions.size() > 0) out.stats = error_stats(out.motions, *truth);
    out.wall_seconds = seconds_since(t0);
    return out;
}

ExperimentReport run_experiment(const OptimConfig& cfg, const GrayImage16& frame1, const GrayImage16& frame2,
                                int n_cases, std::optional<Point> truth) {
    if (n_cases < 1) throw ContractError("run_experiment: n_cases must be >= 1");
    validate(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport report;
    for (int i = 0; i < n_cases; ++i) {
        OptimConfig c = cfg;
        c.seed = cfg.seed + static_cast<std::uint64_t>(i);
        report.cases.push_back(run_case(c, frame1, frame2, truth, i));
    }
    report.wall_seconds = seconds_since(t0);
    return report;
}

}  // namespace gsmotion

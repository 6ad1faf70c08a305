#pragma once

#include "gsmotion/image.hpp"
#include "gsmotion/optimizer.hpp"
#include "gsmotion/report.hpp"

#include <optional>

namespace gsmotion {

/// init -> single-frame fit -> pair fit for one seed. Initialization failure
/// is recorded in `failure`, not thrown.
CaseResult run_case(const OptimConfig& cfg, const GrayImage16& frame1, const GrayImage16& frame2,
                    std::optional<Point> truth, int index, std::vector<TraceRow>* stage2_trace = nullptr,
                    std::vector<TraceRow>* stage3_trace = nullptr);

/// Case i uses seed cfg.seed + i. Cases run in index order.
ExperimentReport run_experiment(const OptimConfig& cfg, const GrayImage16& frame1, const GrayImage16& frame2,
                                int n_cases, std::optional<Point> truth);

}  // namespace gsmotion

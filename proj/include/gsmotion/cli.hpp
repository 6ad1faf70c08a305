#pragma once

#include "gsmotion/kernel.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gsmotion::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kConfigError = 2,
    kIoError = 3,
    kConvergenceFailure = 4,
};

/// Log verbosity: trace, debug, info, warn, error, critical, off.
inline constexpr const char* kLogLevelEnv = "GSMOTION_LOG_LEVEL";

struct SynthOptions {
    std::filesystem::path config;
    std::filesystem::path out;
};

struct FitOptions {
    std::filesystem::path config;
    std::filesystem::path frame1;
    std::filesystem::path frame2;
    std::filesystem::path out;
    int cases = 5;
    std::optional<Point> truth;  // overrides the config's `motion`
    std::optional<double> arrow_scale;
};

struct BaselineOptions {
    std::string method;  // lucas-kanade, horn-schunck, phase
    std::filesystem::path frame1;
    std::filesystem::path frame2;
    std::filesystem::path out;
    std::optional<Point> truth;
    int window = 5;
    double min_eigenvalue = 1e-6;
    double max_condition = 1e3;
    double lambda = 1e-3;
    int iterations = 2000;
    std::vector<double> filters_deg{0.0, 90.0};
    double frequency = 0.05;
    double sigma = 5.0;
    double min_amplitude = 0.05;
    double arrow_scale = 10.0;
    int stride = 4;
};

/// Writes frame1.pgm, frame2.pgm and truth.json into `out`.
int cmd_synth(const SynthOptions& opt);

/// Writes report.csv, provenance.json and per-case motion SVGs and traces.
int cmd_fit(const FitOptions& opt);

/// Writes flow.csv, flow.svg and summary.csv.
int cmd_baseline(const BaselineOptions& opt);

/// Parses argv and dispatches. Diagnostics go to stderr.
int run(int argc, const char* const* argv);

}  // namespace gsmotion::cli

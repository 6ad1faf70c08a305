#include "gsmotion/cli.hpp"

#include "gsmotion/baselines.hpp"
#include "gsmotion/config.hpp"
#include "gsmotion/errors.hpp"
#include "gsmotion/experiment.hpp"
#include "gsmotion/report.hpp"
#include "gsmotion/synthetic.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <numbers>

namespace gsmotion::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    return os;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

template <class Fn>
int guarded(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        fmt::print(stderr, "{}: config error: {}\n", name, e.what());
        return kConfigError;
    } catch (const ParameterDomainError& e) {
        fmt::print(stderr, "{}: config error: {}\n", name, e.what());
        return kConfigError;
    } catch (const IoError& e) {
        fmt::print(stderr, "{}: i/o error: {}\n", name, e.what());
        return kIoError;
    } catch (const ContractError& e) {
        fmt::print(stderr, "{}: invalid input: {}\n", name, e.what());
        return kIoError;
    }
}

Point parse_point(const std::string& key, const std::string& text) {
    const auto v = parse_list(key, text);
    if (v.size() != 2) throw ConfigError(key, "expected U,V");
    return {v[0], v[1]};
}

void setup_logging() {
    static bool done = false;
    if (done) return;
    done = true;
    auto logger = spdlog::stderr_color_mt("gsmotion");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv(kLogLevelEnv)) {
        spdlog::set_level(spdlog::level::from_str(env));
    }
}

}  // namespace

int cmd_synth(const SynthOptions& opt) {
    return guarded("synth", [&] {
        const auto cfg = KeyValueConfig::load(opt.config);
        const auto spec = scene_from_config(cfg);
        const auto pair = make_pair(spec);
        ensure_dir(opt.out);
        write_pgm(opt.out / "frame1.pgm", pair.frame1);
        write_pgm(opt.out / "frame2.pgm", pair.frame2);

        nlohmann::json j;
        j["width"] = spec.width;
        j["height"] = spec.height;
        j["applied_motion"] = {pair.ground_truth.x, pair.ground_truth.y};
        j["kernels"] = nlohmann::json::array();
        for (const auto& k : spec.kernels) {
            j["kernels"].push_back(
                {{"x", k.mu.x}, {"y", k.mu.y}, {"sigma_x", k.sigma_x}, {"sigma_y", k.sigma_y}, {"rho", k.rho}, {"c", k.c}});
        }
        auto os = open_out(opt.out / "truth.json");
        os << j.dump(2) << '\n';
        if (!os) throw IoError("failed writing truth.json");
        spdlog::info("synth: wrote {}x{} pair to {}", spec.width, spec.height, opt.out.string());
        return kOk;
    });
}

int cmd_fit(const FitOptions& opt) {
    return guarded("fit", [&] {
        if (opt.cases < 1) throw ConfigError("cases", "must be >= 1");
        const auto cfg = KeyValueConfig::load(opt.config);
        check_known_keys(cfg);
        const auto optim = optim_from_config(cfg);
        std::optional<Point> truth = opt.truth ? opt.truth : motion_from_config(cfg);
        QuiverOptions quiver;
        if (auto v = cfg.get("arrow_scale")) quiver.arrow_scale = parse_double("arrow_scale", *v);
        if (opt.arrow_scale) quiver.arrow_scale = *opt.arrow_scale;
        if (!(quiver.arrow_scale > 0.0)) throw ConfigError("arrow_scale", "must be positive");

        const auto frame1 = read_pgm(opt.frame1);
        const auto frame2 = read_pgm(opt.frame2);
        if (frame1.width() != frame2.width() || frame1.height() != frame2.height()) {
            throw ContractError("frames differ in size");
        }
        ensure_dir(opt.out);

        const auto t0 = std::chrono::steady_clock::now();
        ExperimentReport report;
        report.config_hash = fnv1a64(cfg.text());
        for (int i = 0; i < opt.cases; ++i) {
            OptimConfig c = optim;
            c.seed = optim.seed + static_cast<std::uint64_t>(i);
            std::vector<TraceRow> t2, t3;
            auto r = run_case(c, frame1, frame2, truth, i, &t2, &t3);
            const auto stem = fmt::format("case{}", i + 1);
            {
                auto os = open_out(opt.out / (stem + "_stage2_trace.csv"));
                write_trace_csv(os, t2);
            }
            {
                auto os = open_out(opt.out / (stem + "_stage3_trace.csv"));
                write_trace_csv(os, t3);
            }
            if (r.failure.empty()) {
                auto os = open_out(opt.out / (stem + "_motion.svg"));
                write_motion_svg(os, frame1.width(), frame1.height(), r.kernels, r.motions, quiver);
            }
            spdlog::info("case {}: seed {} kernels {} stage2 {} stage3 {}", i + 1, r.seed, r.kernels.size(),
                         to_string(r.stage2_status), to_string(r.stage3_status));
            report.cases.push_back(std::move(r));
        }
        report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        {
            auto os = open_out(opt.out / "report.csv");
            write_report_csv(os, report);
            if (!os) throw IoError("failed writing report.csv");
        }
        {
            auto os = open_out(opt.out / "provenance.json");
            write_provenance_json(os, report);
        }
        if (!report.all_ok()) {
            fmt::print(stderr, "fit: one or more cases failed to converge; see report.csv\n");
            return kConvergenceFailure;
        }
        return kOk;
    });
}

int cmd_baseline(const BaselineOptions& opt) {
    return guarded("baseline", [&] {
        if (opt.method != "lucas-kanade" && opt.method != "horn-schunck" && opt.method != "phase") {
            fmt::print(stderr, "baseline: unknown method '{}' (expected lucas-kanade, horn-schunck or phase)\n",
                       opt.method);
            return static_cast<int>(kUsage);
        }
        const auto frame1 = read_pgm(opt.frame1);
        const auto frame2 = read_pgm(opt.frame2);
        if (frame1.width() != frame2.width() || frame1.height() != frame2.height()) {
            throw ContractError("frames differ in size");
        }

        auto flow = [&]() -> FlowField {
            if (opt.method == "lucas-kanade") {
                return lucas_kanade(frame1, frame2, {opt.window, opt.min_eigenvalue, opt.max_condition});
            }
            if (opt.method == "horn-schunck") {
                if (!(opt.lambda >= 0.0)) throw ConfigError("lambda", "must be >= 0");
                if (opt.iterations < 0) throw ConfigError("iterations", "must be >= 0");
                return horn_schunck(frame1, frame2, {opt.lambda, opt.iterations});
            }
            std::vector<GaborFilter> filters;
            for (double deg : opt.filters_deg) {
                filters.push_back({deg * std::numbers::pi / 180.0, opt.frequency, opt.sigma, opt.sigma});
            }
            return phase_flow(frame1, frame2, filters, {opt.min_amplitude});
        }();

        ensure_dir(opt.out);
        {
            auto os = open_out(opt.out / "flow.csv");
            write_flow_csv(os, flow);
        }
        {
            auto os = open_out(opt.out / "flow.svg");
            write_flow_svg(os, flow, opt.stride, {opt.arrow_scale});
        }
        const auto summary = summarize_flow(flow, opt.truth);
        auto os = open_out(opt.out / "summary.csv");
        write_flow_summary_csv(os, opt.method, summary);
        if (!os) throw IoError("failed writing summary.csv");
        spdlog::info("baseline {}: {} valid pixels, median flow ({:.6e}, {:.6e})", opt.method, summary.valid,
                     summary.median.x, summary.median.y);
        return static_cast<int>(kOk);
    });
}

int run(int argc, const char* const* argv) {
    setup_logging();
    CLI::App app{"Sub-pixel motion estimation with 2D Gaussian kernels"};
    app.require_subcommand(1);

    SynthOptions synth;
    auto* s = app.add_subcommand("synth", "render a synthetic frame pair from a scene config");
    s->add_option("--config", synth.config, "scene config")->required();
    s->add_option("--out", synth.out, "output directory")->required();

    FitOptions fit;
    std::string fit_truth;
    double fit_arrow = 0.0;
    auto* f = app.add_subcommand("fit", "estimate per-kernel motion between two frames");
    f->add_option("--config", fit.config, "optimizer config (scene keys allowed)")->required();
    f->add_option("--frame1", fit.frame1, "first frame (16-bit PGM)")->required();
    f->add_option("--frame2", fit.frame2, "second frame (16-bit PGM)")->required();
    f->add_option("--cases", fit.cases, "number of seeds, base_seed + i")->capture_default_str();
    f->add_option("--out", fit.out, "output directory")->required();
    auto* f_truth = f->add_option("--truth", fit_truth, "ground-truth motion U,V in pixels");
    auto* f_arrow = f->add_option("--arrow-scale", fit_arrow, "quiver arrow scale");

    BaselineOptions base;
    std::string base_truth;
    std::string base_filters;
    auto* b = app.add_subcommand("baseline", "run a classical optical-flow estimator");
    b->add_option("--method", base.method, "lucas-kanade, horn-schunck or phase")->required();
    b->add_option("--frame1", base.frame1, "first frame (16-bit PGM)")->required();
    b->add_option("--frame2", base.frame2, "second frame (16-bit PGM)")->required();
    b->add_option("--out", base.out, "output directory")->required();
    auto* b_truth = b->add_option("--truth", base_truth, "ground-truth motion U,V in pixels");
    b->add_option("--window", base.window, "Lucas-Kanade window (odd)")->capture_default_str();
    b->add_option("--min-eigenvalue", base.min_eigenvalue, "Lucas-Kanade eigenvalue floor")->capture_default_str();
    b->add_option("--max-condition", base.max_condition, "Lucas-Kanade condition ceiling")->capture_default_str();
    b->add_option("--lambda", base.lambda, "Horn-Schunck smoothness weight")->capture_default_str();
    b->add_option("--iterations", base.iterations, "Horn-Schunck sweeps")->capture_default_str();
    auto* b_filters = b->add_option("--filters", base_filters, "Gabor orientations in degrees, comma separated");
    b->add_option("--frequency", base.frequency, "Gabor frequency, cycles/pixel")->capture_default_str();
    b->add_option("--sigma", base.sigma, "Gabor envelope sigma, pixels")->capture_default_str();
    b->add_option("--min-amplitude", base.min_amplitude, "phase validity threshold, fraction of max")
        ->capture_default_str();
    b->add_option("--arrow-scale", base.arrow_scale, "quiver arrow scale")->capture_default_str();
    b->add_option("--stride", base.stride, "quiver grid stride")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*s) return cmd_synth(synth);
        if (*f) {
            if (*f_truth) fit.truth = parse_point("truth", fit_truth);
            if (*f_arrow) fit.arrow_scale = fit_arrow;
            return cmd_fit(fit);
        }
        if (*b_truth) base.truth = parse_point("truth", base_truth);
        if (*b_filters) base.filters_deg = parse_list("filters", base_filters);
        return cmd_baseline(base);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfigError;
    }
}

}  // namespace gsmotion::cli

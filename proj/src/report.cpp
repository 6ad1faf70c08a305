#include "gsmotion/report.hpp"

#include "gsmotion/errors.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace gsmotion {

namespace {

std::string num(double v) { return fmt::format("{:.6e}", v); }

std::string pct(const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string(); }

std::string coord(double v) { return fmt::format("{:.3f}", v); }

template <class Pick>
std::optional<SummaryRow> fold(const std::vector<CaseResult>& cases, Pick pick) {
    std::optional<SummaryRow> out;
    auto merge = [&](std::optional<double>& acc, const std::optional<double>& v) {
        if (!v) return;
        acc = acc ? pick(*acc, *v) : *v;
    };
    for (const auto& c : cases) {
        if (!c.stats) continue;
        const auto& s = *c.stats;
        if (!out) {
            out = SummaryRow{s.avg_error, s.relative_error_x, s.relative_error_y};
            continue;
        }
        out->avg_error = {pick(out->avg_error.x, s.avg_error.x), pick(out->avg_error.y, s.avg_error.y)};
        merge(out->relative_error_x, s.relative_error_x);
        merge(out->relative_error_y, s.relative_error_y);
    }
    return out;
}

double median_of(std::vector<double> v) {
    const auto n = v.size();
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
    const double hi = v[n / 2];
    if (n % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2));
    return 0.5 * (lo + hi);
}

void svg_open(std::ostream& os, double w, double h) {
    fmt::print(os,
               "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
               "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" "
               "viewBox=\"0 0 {0} {1}\">\n"
               "<defs><marker id=\"head\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" refY=\"3\" "
               "orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 z\" fill=\"#c0392b\"/></marker></defs>\n"
               "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"#ffffff\" stroke=\"#888888\"/>\n",
               coord(w), coord(h));
}

void svg_arrow(std::ostream& os, double x0, double y0, double x1, double y1) {
    fmt::print(os,
               "<line class=\"arrow\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#c0392b\" "
               "stroke-width=\"1\" marker-end=\"url(#head)\"/>\n",
               coord(x0), coord(y0), coord(x1), coord(y1));
}

}  // namespace

bool CaseResult::ok() const noexcept {
    return failure.empty() && stage2_status == FitStatus::Converged && stage3_status != FitStatus::Diverged;
}

bool ExperimentReport::all_ok() const noexcept {
    return std::all_of(cases.begin(), cases.end(), [](const CaseResult& c) { return c.ok(); });
}

std::optional<SummaryRow> ExperimentReport::average() const {
    std::optional<SummaryRow> out;
    Point sum;
    double rx = 0.0, ry = 0.0;
    int n = 0, nx = 0, ny = 0;
    for (const auto& c : cases) {
        if (!c.stats) continue;
        ++n;
        sum = sum + c.stats->avg_error;
        if (c.stats->relative_error_x) rx += *c.stats->relative_error_x, ++nx;
        if (c.stats->relative_error_y) ry += *c.stats->relative_error_y, ++ny;
    }
    if (n == 0) return out;
    out = SummaryRow{(1.0 / n) * sum, std::nullopt, std::nullopt};
    if (nx > 0) out->relative_error_x = rx / nx;
    if (ny > 0) out->relative_error_y = ry / ny;
    return out;
}

std::optional<SummaryRow> ExperimentReport::max() const {
    return fold(cases, [](double a, double b) { return std::max(a, b); });
}

std::optional<SummaryRow> ExperimentReport::min() const {
    return fold(cases, [](double a, double b) { return std::min(a, b); });
}

void write_report_csv(std::ostream& os, const ExperimentReport& report) {
    os << "case,n_kernels,applied_x,applied_y,avg_error_x,avg_error_y,rel_error_x,rel_error_y,std_x,std_y,status\n";
    for (const auto& c : report.cases) {
        std::string status;
        if (!c.failure.empty()) {
            status = "failed";
        } else {
            status = fmt::format("stage2 {}; stage3 {}", to_string(c.stage2_status), to_string(c.stage3_status));
        }
        if (c.stats) {
            const auto& s = *c.stats;
            fmt::print(os, "{},{},{},{},{},{},{},{},{},{},{}\n", c.index + 1, s.n_kernels, num(s.applied.x),
                       num(s.applied.y), num(s.avg_error.x), num(s.avg_error.y), pct(s.relative_error_x),
                       pct(s.relative_error_y), num(s.std_dev.x), num(s.std_dev.y), status);
        } else {
            fmt::print(os, "{},{},,,,,,,,,{}\n", c.index + 1, c.kernels.size(), status);
        }
    }
    auto summary = [&](const char* label, const std::optional<SummaryRow>& r) {
        if (!r) return;
        fmt::print(os, "{},,,,{},{},{},{},,,\n", label, num(r->avg_error.x), num(r->avg_error.y),
                   pct(r->relative_error_x), pct(r->relative_error_y));
    };
    summary("Average", report.average());
    summary("Max", report.max());
    summary("Min", report.min());
}

void write_provenance_json(std::ostream& os, const ExperimentReport& report) {
    nlohmann::json j;
    j["config_hash"] = fmt::format("{:016x}", report.config_hash);
    j["wall_seconds"] = report.wall_seconds;
    j["cases"] = nlohmann::json::array();
    for (const auto& c : report.cases) {
        nlohmann::json cj;
        cj["case"] = c.index + 1;
        cj["seed"] = c.seed;
        cj["n_kernels"] = c.kernels.size();
        cj["stage2_iterations"] = c.stage2_iterations;
        cj["stage2_l1"] = c.stage2_l1;
        cj["stage2_status"] = to_string(c.stage2_status);
        cj["stage3_iterations"] = c.stage3_iterations;
        cj["stage3_status"] = to_string(c.stage3_status);
        cj["final_total_loss"] = c.final_loss.total;
        cj["wall_seconds"] = c.wall_seconds;
        if (!c.failure.empty()) cj["failure"] = c.failure;
        j["cases"].push_back(std::move(cj));
    }
    os << j.dump(2) << '\n';
}

void write_trace_csv(std::ostream& os, std::span<const TraceRow> trace) {
    os << "iteration,l1_frame1,l1_frame2,l_diff,l_smooth,total\n";
    for (const auto& r : trace) {
        fmt::print(os, "{},{},{},{},{},{}\n", r.iteration, num(r.loss.l1_frame1), num(r.loss.l1_frame2),
                   num(r.loss.l_diff), num(r.loss.l_smooth), num(r.loss.total));
    }
}

void write_flow_csv(std::ostream& os, const FlowField& flow) {
    os << "x,y,u,v,valid\n";
    for (int y = 0; y < flow.height(); ++y) {
        for (int x = 0; x < flow.width(); ++x) {
            fmt::print(os, "{},{},{},{},{}\n", x, y, num(flow.u(x, y)), num(flow.v(x, y)), flow.valid(x, y) ? 1 : 0);
        }
    }
}

void write_motion_svg(std::ostream& os, int width, int height, std::span<const Kernel2D> kernels,
                      const MotionField& motions, const QuiverOptions& opt) {
    if (kernels.size() != motions.size()) throw ContractError("write_motion_svg: kernel / motion count mismatch");
    const double s = opt.pixel_size;
    svg_open(os, width * s, height * s);
    fmt::print(os, "<!-- arrow_scale {} -->\n", opt.arrow_scale);
    for (const auto& k : kernels) {
        const double vx = k.sigma_x * k.sigma_x, vy = k.sigma_y * k.sigma_y, cov = k.rho * k.sigma_x * k.sigma_y;
        const double mid = 0.5 * (vx + vy), half = std::sqrt(0.25 * (vx - vy) * (vx - vy) + cov * cov);
        const double angle = 0.5 * std::atan2(2.0 * cov, vx - vy) * 180.0 / std::numbers::pi;
        fmt::print(os,
                   "<ellipse class=\"kernel\" cx=\"{}\" cy=\"{}\" rx=\"{}\" ry=\"{}\" transform=\"rotate({} {} {})\" "
                   "fill=\"none\" stroke=\"#2c3e50\" stroke-opacity=\"0.4\"/>\n",
                   coord((k.mu.x + 0.5) * s), coord((k.mu.y + 0.5) * s), coord(std::sqrt(mid + half) * s),
                   coord(std::sqrt(std::max(mid - half, 0.0)) * s), coord(angle), coord((k.mu.x + 0.5) * s),
                   coord((k.mu.y + 0.5) * s));
    }
    for (std::size_t i = 0; i < kernels.size(); ++i) {
        const Point a{(kernels[i].mu.x + 0.5) * s, (kernels[i].mu.y + 0.5) * s};
        const Point d = (opt.arrow_scale * s) * motions.displacements[i];
        svg_arrow(os, a.x, a.y, a.x + d.x, a.y + d.y);
    }
    os << "</svg>\n";
}

void write_flow_svg(std::ostream& os, const FlowField& flow, int stride, const QuiverOptions& opt) {
    if (stride < 1) throw ContractError("write_flow_svg: stride must be >= 1");
    const double s = opt.pixel_size;
    svg_open(os, flow.width() * s, flow.height() * s);
    fmt::print(os, "<!-- arrow_scale {} stride {} -->\n", opt.arrow_scale, stride);
    for (int y = 0; y < flow.height(); y += stride) {
        for (int x = 0; x < flow.width(); x += stride) {
            if (!flow.valid(x, y)) continue;
            const double x0 = (x + 0.5) * s, y0 = (y + 0.5) * s;
            svg_arrow(os, x0, y0, x0 + opt.arrow_scale * s * flow.u(x, y), y0 + opt.arrow_scale * s * flow.v(x, y));
        }
    }
    os << "</svg>\n";
}

FlowSummary summarize_flow(const FlowField& flow, std::optional<Point> truth) {
    FlowSummary out;
    out.truth = truth;
    std::vector<double> us, vs, errs;
    for (int y = 0; y < flow.height(); ++y) {
        for (int x = 0; x < flow.width(); ++x) {
            if (!flow.valid(x, y)) continue;
            us.push_back(flow.u(x, y));
            vs.push_back(flow.v(x, y));
            if (truth) errs.push_back(std::hypot(flow.u(x, y) - truth->x, flow.v(x, y) - truth->y));
        }
    }
    out.valid = us.size();
    if (us.empty()) return out;
    const double n = static_cast<double>(us.size());
    for (std::size_t i = 0; i < us.size(); ++i) out.mean = out.mean + Point{us[i], vs[i]};
    out.mean = (1.0 / n) * out.mean;
    out.median = {median_of(us), median_of(vs)};
    if (truth) {
        double sum = 0.0;
        for (double e : errs) sum += e;
        out.mean_error = sum / n;
        out.median_error = median_of(errs);
    }
    return out;
}

void write_flow_summary_csv(std::ostream& os, const std::string& method, const FlowSummary& s) {
    os << "method,valid,median_u,median_v,mean_u,mean_v,truth_u,truth_v,median_error,mean_error\n";
    auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
    fmt::print(os, "{},{},{},{},{},{},{},{},{},{}\n", method, s.valid, num(s.median.x), num(s.median.y),
               num(s.mean.x), num(s.mean.y), s.truth ? num(s.truth->x) : "", s.truth ? num(s.truth->y) : "",
               opt(s.median_error), opt(s.mean_error));
}

}  // namespace gsmotion

#include "gsmotion/baselines.hpp"
#include "gsmotion/errors.hpp"
#include "gsmotion/report.hpp"
#include "gsmotion/synthetic.hpp"
#include "support/generators.hpp"

#include <doctest.h>

#include <algorithm>
#include <numbers>

using namespace gsmotion;

namespace {

FramePair blob(Point shift) { return make_pair(SceneSpec{64, 64, {{{31.5, 31.5}, 6.0, 6.0, 0.0, 1.0}}, shift}); }

// Median Euclidean error over valid pixels whose gradient magnitude is at
// least 1% of the image maximum.
double textured_median_error(const FramePair& p, const FlowField& f) {
    const auto d = image_derivatives(p.frame1, p.frame2);
    double gmax = 0;
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x) gmax = std::max(gmax, std::hypot(d.ix.at(x, y), d.iy.at(x, y)));
    std::vector<double> e;
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x) {
            if (!f.valid(x, y) || std::hypot(d.ix.at(x, y), d.iy.at(x, y)) < 0.01 * gmax) continue;
            e.push_back(std::hypot(f.u(x, y) - p.ground_truth.x, f.v(x, y) - p.ground_truth.y));
        }
    REQUIRE(e.size() > 100);
    std::nth_element(e.begin(), e.begin() + e.size() / 2, e.end());
    return e[e.size() / 2];
}

double max_abs_valid(const FlowField& f) {
    double m = 0;
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x)
            if (f.valid(x, y)) m = std::max({m, std::abs(f.u(x, y)), std::abs(f.v(x, y))});
    return m;
}

}  // namespace

TEST_CASE("identical frames give zero flow") {
    gen::Rng r(71);
    SceneSpec spec{48, 40, gen::kernel_set(r, 48, 40, 3, 6), {}};
    const auto f = make_frame(spec, false);
    const auto gabor = default_gabor_pair();
    for (const auto& flow : {lucas_kanade(f, f), horn_schunck(f, f), phase_flow(f, f, gabor)}) {
        CHECK(flow.valid_count() > 0);
        CHECK(max_abs_valid(flow) <= 1e-10);
    }
}

TEST_CASE("shifted blob is recovered by every estimator") {
    const auto gabor = default_gabor_pair();
    for (double s : {0.05, 0.1, 0.25, 0.5}) {
        for (Point shift : {Point{s, 0}, Point{0, -s}, Point{s, s}}) {
            CAPTURE(shift.x);
            CAPTURE(shift.y);
            const auto p = blob(shift);
            CHECK(textured_median_error(p, lucas_kanade(p.frame1, p.frame2)) <= 0.05);
            CHECK(textured_median_error(p, horn_schunck(p.frame1, p.frame2)) <= 0.05);
            CHECK(textured_median_error(p, phase_flow(p.frame1, p.frame2, gabor)) <= 0.05);
        }
    }
}

TEST_CASE("lucas-kanade masks borders and the aperture problem") {
    const auto p = blob({0.1, 0});
    const auto flow = lucas_kanade(p.frame1, p.frame2, {7, 1e-6, 1e3});
    for (int x = 0; x < 64; ++x) {
        CHECK_FALSE(flow.valid(x, 0));
        CHECK_FALSE(flow.valid(x, 2));
        CHECK_FALSE(flow.valid(x, 63));
    }

    GrayImage16 a(32, 32), b(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            a.at(x, y) = static_cast<std::uint16_t>(1000 * x + 500);
            b.at(x, y) = static_cast<std::uint16_t>(1000 * x + 400);
        }
    CHECK(lucas_kanade(a, b).valid_count() == 0);

    CHECK_THROWS_AS(lucas_kanade(a, b, {4, 1e-6, 1e3}), ConfigError);
    CHECK_THROWS_AS(lucas_kanade(a, b, {1, 1e-6, 1e3}), ConfigError);
    CHECK_THROWS_AS(lucas_kanade(a, GrayImage16(31, 32)), ContractError);
}

TEST_CASE("horn-schunck energy never increases") {
    gen::Rng r(72);
    for (int trial = 0; trial < 5; ++trial) {
        SceneSpec spec{40, 40, gen::kernel_set(r, 40, 40, 2, 5), gen::displacement(r, 0.5)};
        const auto p = make_pair(spec);
        std::vector<double> trace;
        const auto flow = horn_schunck(p.frame1, p.frame2, {r.uniform(1e-4, 1e-1), 300}, &trace);
        REQUIRE(trace.size() == 301);
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] * (1 + 1e-12) + 1e-300);
        CHECK(flow.valid_count() == flow.size());
    }
}

TEST_CASE("horn-schunck with a huge weight is nearly constant") {
    const auto p = blob({0.2, -0.1});
    const auto flow = horn_schunck(p.frame1, p.frame2, {1e6, 2000});
    const auto s = summarize_flow(flow, std::nullopt);
    double var_u = 0, var_v = 0;
    for (std::size_t i = 0; i < flow.size(); ++i) {
        var_u += (flow.u_data()[i] - s.mean.x) * (flow.u_data()[i] - s.mean.x);
        var_v += (flow.v_data()[i] - s.mean.y) * (flow.v_data()[i] - s.mean.y);
    }
    CHECK(std::sqrt(var_u / flow.size()) < 1e-3);
    CHECK(std::sqrt(var_v / flow.size()) < 1e-3);
    CHECK_THROWS_AS(horn_schunck(p.frame1, p.frame2, {0.0, 10}), ConfigError);
    CHECK_THROWS_AS(horn_schunck(p.frame1, p.frame2, {1e-3, 0}), ConfigError);
}

TEST_CASE("phase flow needs two distinct orientations") {
    GrayImage16 a(48, 48);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
            a.at(x, y) = quantize_value(0.5 + 0.4 * std::sin(2 * std::numbers::pi * 0.05 * x));
    const std::vector<GaborFilter> one{{0.0}};
    CHECK_THROWS_AS(phase_flow(a, a, one), ConfigError);
    const std::vector<GaborFilter> parallel{{0.0}, {std::numbers::pi}};
    CHECK_THROWS_AS(phase_flow(a, a, parallel), ConfigError);
    const std::vector<GaborFilter> bad{{0.0, -0.1}, {1.0}};
    CHECK_THROWS_AS(phase_flow(a, a, bad), ParameterDomainError);
}

TEST_CASE("phase flow with three filters") {
    const auto p = blob({0.3, 0.1});
    const std::vector<GaborFilter> three{{0.0}, {std::numbers::pi / 3}, {2 * std::numbers::pi / 3}};
    CHECK(textured_median_error(p, phase_flow(p.frame1, p.frame2, three)) <= 0.05);
}

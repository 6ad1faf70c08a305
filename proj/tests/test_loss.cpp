#include "gsmotion/errors.hpp"
#include "gsmotion/optimizer.hpp"
#include "gsmotion/synthetic.hpp"
#include "support/generators.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <omp.h>

using namespace gsmotion;


TEST_CASE("loss breakdown recomposes and matches the oracle") {
    gen::Rng r(41);
    OptimConfig cfg;
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = gen::gradient_state(r);
        const auto loss = compute_loss(s.kernels, s.motions, s.frame1, s.frame2, cfg);
        CHECK(std::abs(loss.l_diff - std::abs(loss.l1_frame1 - loss.l1_frame2)) <= 1e-12);
        CHECK(std::abs(loss.total - (cfg.lambda1 * combined_l1(loss, cfg.l1_mode) + cfg.lambda2 * loss.l_diff +
                                     cfg.lambda3 * loss.l_smooth)) <= 1e-12);
        CHECK(std::abs(loss.total - oracle::total_loss(s.kernels, s.motions.displacements, s.frame1, s.frame2)) <=
              1e-12);
        CHECK(std::abs(loss.l1_frame1 - oracle::l1(s.kernels, s.frame1)) <= 1e-12);
    }
}

TEST_CASE("uniform motion has zero smoothness loss and zero subgradient") {
    gen::Rng r(42);
    for (int trial = 0; trial < 20; ++trial) {
        const auto n = static_cast<std::size_t>(r.integer(1, 30));
        const Point d = trial == 0 ? Point{} : gen::displacement(r, 0.5);
        const auto m = gen::uniform_motion(n, d);
        CHECK(smoothness_loss(m.displacements, 1e-12) <= 1e-12);
        for (const auto& g : smoothness_gradient(m.displacements, 1e-12)) {
            CHECK(g.x == 0.0);
            CHECK(g.y == 0.0);
        }
    }
}

TEST_CASE("smoothness of two displacements along x") {
    const std::vector<Point> d{{0.01, 0.0}, {0.03, 0.0}};
    // mean (0.02, 0); per-axis population variances (1e-4, 0); sqrt of their sum 0.01
    const double want = 0.01 / (0.02 + 1e-12);
    CHECK(smoothness_loss(d, 1e-12) == doctest::Approx(want).epsilon(1e-13));
    CHECK(smoothness_loss(d, 1e-12) == doctest::Approx(oracle::smoothness(d, 1e-12)).epsilon(1e-13));
    CHECK(smoothness_loss(d, 1e-12) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("smoothness gradient matches central differences") {
    gen::Rng r(43);
    for (int trial = 0; trial < 20; ++trial) {
        auto d = gen::motion_field(r, static_cast<std::size_t>(r.integer(2, 8)), 0.2).displacements;
        const auto g = smoothness_gradient(d, 1e-12);
        for (std::size_t i = 0; i < d.size(); ++i) {
            for (int axis = 0; axis < 2; ++axis) {
                double& slot = axis == 0 ? d[i].x : d[i].y;
                const double x0 = slot;
                const double fd = oracle::central_difference(
                    [&](double v) {
                        slot = v;
                        return oracle::smoothness(d, 1e-12);
                    },
                    x0, 1e-7);
                slot = x0;
                CHECK(oracle::gradient_close(axis == 0 ? g[i].x : g[i].y, fd, 1e-5, 1e-7));
            }
        }
    }
}

TEST_CASE("perfect fit with uniform motion leaves only quantization error") {
    SceneSpec spec{40, 40, {{{19.5, 20}, 4, 3, 0.2, 0.8}, {{10, 12}, 2, 2, 0, 0.5}}, {0.2, -0.1}};
    const auto pair = make_pair(spec);
    const auto m = gen::uniform_motion(2, spec.applied_motion);
    const auto loss = compute_loss(spec.kernels, m, pair.frame1, pair.frame2, OptimConfig{});
    const double q = 0.5 / 65535.0;
    CHECK(loss.l1_frame1 <= q);
    CHECK(loss.l1_frame2 <= q);
    CHECK(loss.l_diff <= q);
    CHECK(loss.l_smooth <= 1e-12);
    CHECK(loss.total <= q);
}

TEST_CASE("analytic gradients match central differences") {
    gen::Rng r(44);
    for (int trial = 0; trial < 10; ++trial) {
        CHECK(gradcheck::count_mismatches(gen::gradient_state(r), OptimConfig{}) == 0);
    }
}

TEST_CASE("gradients for each L1 mode") {
    gen::Rng r(45);
    for (auto mode : {L1Mode::Frame1, L1Mode::Frame2}) {
        OptimConfig cfg;
        cfg.l1_mode = mode;
        CHECK(gradcheck::count_mismatches(gen::gradient_state(r), cfg) == 0);
    }
}

TEST_CASE("with only the L1 weight the gradient is the L1 gradient") {
    gen::Rng r(46);
    auto s = gen::gradient_state(r);
    OptimConfig cfg;
    cfg.lambda1 = 1.0;
    cfg.lambda2 = 0.0;
    cfg.lambda3 = 0.0;
    const auto g = loss_gradients(s.kernels, s.motions, s.frame1, s.frame2, cfg);
    for (std::size_t i = 0; i < s.kernels.size(); ++i) {
        auto l1_only = [&](double v, bool x) {
            auto m = s.motions;
            (x ? m.displacements[i].x : m.displacements[i].y) = v;
            const auto moved = [&] {
                KernelSet out = s.kernels;
                for (std::size_t j = 0; j < out.size(); ++j) out[j].mu = out[j].mu + m.displacements[j];
                return out;
            }();
            return 0.5 * (oracle::l1(s.kernels, s.frame1) + oracle::l1(moved, s.frame2));
        };
        const Point d = s.motions.displacements[i];
        CHECK(oracle::gradient_close(g.motions[i].x,
                                     oracle::central_difference([&](double v) { return l1_only(v, true); }, d.x, 1e-5)));
        CHECK(oracle::gradient_close(g.motions[i].y,
                                     oracle::central_difference([&](double v) { return l1_only(v, false); }, d.y, 1e-5)));
    }
}

TEST_CASE("parallel gradients agree with the serial reference") {
    gen::Rng r(47);
    OptimConfig cfg;
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = gen::gradient_state(r, 40);
        const auto a = loss_gradients(s.kernels, s.motions, s.frame1, s.frame2, cfg);
        const auto b = loss_gradients_reference(s.kernels, s.motions, s.frame1, s.frame2, cfg);
        for (std::size_t i = 0; i < s.kernels.size(); ++i) {
            CHECK(a.kernels[i].mu_x == doctest::Approx(b.kernels[i].mu_x).epsilon(1e-9));
            CHECK(a.kernels[i].sigma_y == doctest::Approx(b.kernels[i].sigma_y).epsilon(1e-9));
            CHECK(a.kernels[i].rho == doctest::Approx(b.kernels[i].rho).epsilon(1e-9));
            CHECK(a.kernels[i].c == doctest::Approx(b.kernels[i].c).epsilon(1e-9));
            CHECK(a.motions[i].x == doctest::Approx(b.motions[i].x).epsilon(1e-9));
            CHECK(a.motions[i].y == doctest::Approx(b.motions[i].y).epsilon(1e-9));
        }
    }
}

TEST_CASE("gradients are bitwise identical across thread counts") {
    gen::Rng r(48);
    const auto s = gen::gradient_state(r, 48);
    OptimConfig cfg;
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto a = loss_gradients(s.kernels, s.motions, s.frame1, s.frame2, cfg);
    omp_set_num_threads(3);
    const auto b = loss_gradients(s.kernels, s.motions, s.frame1, s.frame2, cfg);
    omp_set_num_threads(saved);
    for (std::size_t i = 0; i < s.kernels.size(); ++i) {
        CHECK(a.kernels[i].mu_x == b.kernels[i].mu_x);
        CHECK(a.kernels[i].rho == b.kernels[i].rho);
        CHECK(a.motions[i].x == b.motions[i].x);
    }
}

TEST_CASE("loss contracts") {
    const KernelSet ks{Kernel2D{{3, 3}, 1, 1, 0, 1}};
    GrayImage16 a(8, 8), b(8, 9);
    MotionField m{{{0, 0}}};
    CHECK_THROWS_AS(compute_loss(ks, m, a, b, OptimConfig{}), ContractError);
    MotionField wrong{{{0, 0}, {1, 1}}};
    CHECK_THROWS_AS(compute_loss(ks, wrong, a, a, OptimConfig{}), ContractError);
    CHECK_THROWS_AS(loss_gradients(ks, wrong, a, a, OptimConfig{}), ContractError);
}

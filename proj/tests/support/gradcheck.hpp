#pragma once

#include "gsmotion/optimizer.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

#include <cstdio>
#include <utility>
#include <vector>

namespace gradcheck {

struct Flat {
    std::vector<double*> slots;
    std::vector<double> analytic;
};

// Every scalar the total loss depends on, paired with its analytic partial.
inline Flat flatten(gsmotion::KernelSet& ks, gsmotion::MotionField& m, const gsmotion::LossGradients& g) {
    Flat f;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        auto& k = ks[i];
        const auto& p = g.kernels[i];
        for (auto [slot, val] : {std::pair{&k.mu.x, p.mu_x}, {&k.mu.y, p.mu_y}, {&k.sigma_x, p.sigma_x},
                                 {&k.sigma_y, p.sigma_y}, {&k.rho, p.rho}, {&k.c, p.c},
                                 {&m.displacements[i].x, g.motions[i].x}, {&m.displacements[i].y, g.motions[i].y}}) {
            f.slots.push_back(slot);
            f.analytic.push_back(val);
        }
    }
    return f;
}

inline int count_mismatches(gen::GradientState s, const gsmotion::OptimConfig& cfg, bool verbose = true) {
    const auto g = gsmotion::loss_gradients(s.kernels, s.motions, s.frame1, s.frame2, cfg);
    auto flat = flatten(s.kernels, s.motions, g);
    int bad = 0;
    for (std::size_t j = 0; j < flat.slots.size(); ++j) {
        double* slot = flat.slots[j];
        const double x0 = *slot;
        const double fd = oracle::central_difference(
            [&](double v) {
                *slot = v;
                return gsmotion::compute_loss(s.kernels, s.motions, s.frame1, s.frame2, cfg).total;
            },
            x0, 1e-5);
        *slot = x0;
        if (!oracle::gradient_close(flat.analytic[j], fd)) {
            ++bad;
            if (verbose) std::fprintf(stderr, "component %zu analytic %.12e fd %.12e\n", j, flat.analytic[j], fd);
        }
    }
    return bad;
}

}  // namespace gradcheck

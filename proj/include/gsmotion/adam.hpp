#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace gsmotion {

struct AdamParameters {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;
};

/// Adam with bias-corrected moments and a per-coordinate step size.
class Adam {
public:
    Adam(std::size_t n, AdamParameters params) : params_(params), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> x, std::span<const double> grad, std::span<const double> lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(params_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(params_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (lr[i] == 0.0) continue;
            m_[i] = params_.beta1 * m_[i] + (1.0 - params_.beta1) * grad[i];
            v_[i] = params_.beta2 * v_[i] + (1.0 - params_.beta2) * grad[i] * grad[i];
            x[i] -= lr[i] * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + params_.epsilon);
        }
    }

    std::size_t steps() const noexcept { return t_; }

private:
    AdamParameters params_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t t_ = 0;
};

}  // namespace gsmotion

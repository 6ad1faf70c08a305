#pragma once

#include "gsmotion/image.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace gsmotion {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend Point operator+(Point a, Point b) noexcept { return {a.x + b.x, a.y + b.y}; }
    friend Point operator-(Point a, Point b) noexcept { return {a.x - b.x, a.y - b.y}; }
    friend Point operator*(double s, Point p) noexcept { return {s * p.x, s * p.y}; }
    bool operator==(const Point&) const = default;
};

/// One anisotropic 2D Gaussian in pixel units:
///   c * exp(-1/2 (p - mu)^T Sigma^-1 (p - mu)),
///   Sigma = [[sx^2, rho sx sy], [rho sx sy, sy^2]].
struct Kernel2D {
    Point mu;
    double sigma_x = 1.0;
    double sigma_y = 1.0;
    double rho = 0.0;
    double c = 1.0;

    bool operator==(const Kernel2D&) const = default;
};

using KernelSet = std::vector<Kernel2D>;

/// Partial derivatives of a rendered value with respect to one kernel's parameters.
struct KernelPartials {
    double mu_x = 0.0;
    double mu_y = 0.0;
    double sigma_x = 0.0;
    double sigma_y = 0.0;
    double rho = 0.0;
    double c = 0.0;

    KernelPartials& operator+=(const KernelPartials& o) noexcept {
        mu_x += o.mu_x;
        mu_y += o.mu_y;
        sigma_x += o.sigma_x;
        sigma_y += o.sigma_y;
        rho += o.rho;
        c += o.c;
        return *this;
    }
};

/// Throws ParameterDomainError unless sigma > 0, |rho| < 1, c >= 0 and all finite.
void validate(const Kernel2D& k);
void validate(std::span<const Kernel2D> ks);

double eval_kernel(const Kernel2D& k, Point p);
KernelPartials kernel_partials(const Kernel2D& k, Point p);

/// Sum of all kernels sampled at integer pixel centers. Parallel over rows;
/// each pixel sums kernels in index order, so the result does not depend on
/// the thread count.
ContinuousImage render(std::span<const Kernel2D> ks, int width, int height);

/// Serial reference: one eval_kernel call per (kernel, pixel).
ContinuousImage render_reference(std::span<const Kernel2D> ks, int width, int height);

/// Per-kernel partial derivatives of every pixel, laid out [kernel][y][x].
class RenderGradients {
public:
    RenderGradients(std::size_t kernels, int width, int height);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t kernel_count() const noexcept { return kernels_; }

    const KernelPartials& at(std::size_t k, int x, int y) const { return data_[offset(k, x, y)]; }
    KernelPartials& at(std::size_t k, int x, int y) { return data_[offset(k, x, y)]; }

private:
    std::size_t offset(std::size_t k, int x, int y) const noexcept {
        return (k * static_cast<std::size_t>(height_) + static_cast<std::size_t>(y)) *
                   static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    std::size_t kernels_;
    int width_;
    int height_;
    std::vector<KernelPartials> data_;
};

RenderGradients render_gradients(std::span<const Kernel2D> ks, int width, int height);

/// Shifts every kernel center by `d`.
KernelSet translated(std::span<const Kernel2D> ks, Point d);

namespace detail {

/// Kernel with the inverse covariance factored out, for tight pixel loops.
struct PreparedKernel {
    double mx, my;
    double inv_sx, inv_sy;
    double rho;
    double inv_omr2;  // 1 / (1 - rho^2)
    double c;

    explicit PreparedKernel(const Kernel2D& k) noexcept
        : mx(k.mu.x),
          my(k.mu.y),
          inv_sx(1.0 / k.sigma_x),
          inv_sy(1.0 / k.sigma_y),
          rho(k.rho),
          inv_omr2(1.0 / (1.0 - k.rho * k.rho)),
          c(k.c) {}
};

/// Evaluates the kernel and, if `out` is non-null, its partials at (x, y).
inline double eval_prepared(const PreparedKernel& k, double x, double y,
                            KernelPartials* out) noexcept {
    const double a = (x - k.mx) * k.inv_sx;
    const double b = (y - k.my) * k.inv_sy;
    const double q = (a * a - 2.0 * k.rho * a * b + b * b) * k.inv_omr2;
    const double e = std::exp(-0.5 * q);
    const double g = k.c * e;
    if (out != nullptr) {
        const double ta = (a - k.rho * b) * k.inv_omr2;
        const double tb = (b - k.rho * a) * k.inv_omr2;
        out->mu_x = g * ta * k.inv_sx;
        out->mu_y = g * tb * k.inv_sy;
        out->sigma_x = g * a * ta * k.inv_sx;
        out->sigma_y = g * b * tb * k.inv_sy;
        out->rho = g * (a * b - k.rho * q) * k.inv_omr2;
        out->c = e;
    }
    return g;
}

/// Writes exp(-q/2) of kernel `k` for pixels x = 0..width-1 on row y.
/// Uses a multiplicative recurrence outward from the row maximum, re-anchored
/// with an exact exp every few pixels to bound the accumulated rounding.
void gaussian_row(const PreparedKernel& k, int y, int width, double* out) noexcept;

}  // namespace detail

}  // namespace gsmotion

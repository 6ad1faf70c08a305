#include "gsmotion/kernel.hpp"

#include "gsmotion/errors.hpp"

#include <algorithm>
#include <string>

namespace gsmotion {

void validate(const Kernel2D& k) {
    auto fail = [](const std::string& what) { throw ParameterDomainError("invalid kernel: " + what); };
    if (!std::isfinite(k.mu.x) || !std::isfinite(k.mu.y)) fail("non-finite center");
    if (!(k.sigma_x > 0.0) || !std::isfinite(k.sigma_x)) fail("sigma_x must be positive");
    if (!(k.sigma_y > 0.0) || !std::isfinite(k.sigma_y)) fail("sigma_y must be positive");
    if (!(std::abs(k.rho) < 1.0)) fail("|rho| must be below 1");
    if (!(k.c >= 0.0) || !std::isfinite(k.c)) fail("color coefficient must be finite and >= 0");
}

void validate(std::span<const Kernel2D> ks) {
    for (const auto& k : ks) validate(k);
}

double eval_kernel(const Kernel2D& k, Point p) {
    validate(k);
    // Explicit Sigma^-1 rather than the factored form used by the render loops.
    const double sxx = k.sigma_x * k.sigma_x;
    const double syy = k.sigma_y * k.sigma_y;
    const double sxy = k.rho * k.sigma_x * k.sigma_y;
    const double det = sxx * syy - sxy * sxy;
    const double dx = p.x - k.mu.x;
    const double dy = p.y - k.mu.y;
    const double mahal = (syy * dx * dx - 2.0 * sxy * dx * dy + sxx * dy * dy) / det;
    return k.c * std::exp(-0.5 * mahal);
}

KernelPartials kernel_partials(const Kernel2D& k, Point p) {
    validate(k);
    KernelPartials out;
    detail::eval_prepared(detail::PreparedKernel(k), p.x, p.y, &out);
    return out;
}

ContinuousImage render(std::span<const Kernel2D> ks, int width, int height) {
    if (ks.empty()) throw ContractError("render: kernel set is empty");
    validate(ks);
    ContinuousImage out(width, height);
    std::vector<detail::PreparedKernel> prepared(ks.begin(), ks.end());

#pragma omp parallel
    {
        std::vector<double> e(static_cast<std::size_t>(width));
#pragma omp for schedule(static)
        for (int y = 0; y < height; ++y) {
            double* row = out.row(y);
            for (const auto& k : prepared) {
                detail::gaussian_row(k, y, width, e.data());
                for (int x = 0; x < width; ++x) row[x] += k.c * e[static_cast<std::size_t>(x)];
            }
        }
    }
    return out;
}

ContinuousImage render_reference(std::span<const Kernel2D> ks, int width, int height) {
    if (ks.empty()) throw ContractError("render: kernel set is empty");
    ContinuousImage out(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double sum = 0.0;
            for (const auto& k : ks) sum += eval_kernel(k, {static_cast<double>(x), static_cast<double>(y)});
            out.at(x, y) = sum;
        }
    }
    return out;
}

RenderGradients::RenderGradients(std::size_t kernels, int width, int height)
    : kernels_(kernels), width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw ContractError("gradient raster dimensions must be positive");
    data_.resize(kernels * static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
}

RenderGradients render_gradients(std::span<const Kernel2D> ks, int width, int height) {
    if (ks.empty()) throw ContractError("render_gradients: kernel set is empty");
    validate(ks);
    RenderGradients out(ks.size(), width, height);
    std::vector<detail::PreparedKernel> prepared(ks.begin(), ks.end());

#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y) {
        for (std::size_t k = 0; k < prepared.size(); ++k) {
            for (int x = 0; x < width; ++x) {
                detail::eval_prepared(prepared[k], x, y, &out.at(k, x, y));
            }
        }
    }
    return out;
}

namespace detail {

void gaussian_row(const PreparedKernel& k, int y, int width, double* out) noexcept {
    constexpr int kAnchorEvery = 16;
    constexpr double kNegligible = 1e-200;
    const double b = (y - k.my) * k.inv_sy;
    const double h = k.inv_sx;
    // f(x) = -q/2 along the row; f is a concave quadratic in x.
    auto f = [&](double x) {
        const double a = (x - k.mx) * h;
        return -0.5 * (a * a - 2.0 * k.rho * a * b + b * b) * k.inv_omr2;
    };
    // f(x + s) - f(x) for s = +1 or -1.
    auto delta = [&](double x, double s) {
        const double a = (x - k.mx) * h;
        return -0.5 * k.inv_omr2 * s * h * (2.0 * a + s * h - 2.0 * k.rho * b);
    };
    const double curvature = std::exp(-k.inv_omr2 * h * h);
    const double peak = std::clamp(k.mx + k.rho * b / h, 0.0, static_cast<double>(width - 1));
    const int x0 = static_cast<int>(std::lround(peak));

    double e = 0.0;
    double ratio = 0.0;
    int x = x0;
    for (int m = 0; x < width; ++x, ++m) {
        if (m % kAnchorEvery == 0) {
            e = std::exp(f(x));
            ratio = std::exp(delta(x, 1.0));
        }
        if (m > 0 && e < kNegligible) break;
        out[x] = e;
        e *= ratio;
        ratio *= curvature;
    }
    for (; x < width; ++x) out[x] = 0.0;

    x = x0 - 1;
    for (int m = 0; x >= 0; --x, ++m) {
        if (m % kAnchorEvery == 0) {
            e = std::exp(f(x));
            ratio = std::exp(delta(x, -1.0));
        }
        if (e < kNegligible) break;
        out[x] = e;
        e *= ratio;
        ratio *= curvature;
    }
    for (; x >= 0; --x) out[x] = 0.0;
}

}  // namespace detail

KernelSet translated(std::span<const Kernel2D> ks, Point d) {
    KernelSet out(ks.begin(), ks.end());
    for (auto& k : out) k.mu = k.mu + d;
    return out;
}

}  // namespace gsmotion

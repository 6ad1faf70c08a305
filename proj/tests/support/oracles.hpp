#pragma once

// Independent reference computations. Nothing here calls into the library's
// numeric code; only plain data types are shared.

#include "gsmotion/image.hpp"
#include "gsmotion/kernel.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace oracle {

using gsmotion::Kernel2D;
using gsmotion::Point;

// c * exp(-1/2 d^T S^-1 d) with S built and inverted explicitly.
inline double gaussian(const Kernel2D& k, double x, double y) {
    const double s11 = k.sigma_x * k.sigma_x;
    const double s22 = k.sigma_y * k.sigma_y;
    const double s12 = k.rho * k.sigma_x * k.sigma_y;
    const double det = s11 * s22 - s12 * s12;
    const double i11 = s22 / det, i22 = s11 / det, i12 = -s12 / det;
    const double dx = x - k.mu.x, dy = y - k.mu.y;
    const double q = dx * (i11 * dx + i12 * dy) + dy * (i12 * dx + i22 * dy);
    return k.c * std::exp(-0.5 * q);
}

inline std::vector<double> render(std::span<const Kernel2D> ks, int w, int h) {
    std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (const auto& k : ks) s += gaussian(k, x, y);
            out[static_cast<std::size_t>(y) * w + x] = s;
        }
    return out;
}

inline std::uint16_t quantize(double v) {
    if (!(v > 0.0)) return 0;
    if (v >= 1.0) return 65535;
    return static_cast<std::uint16_t>(std::floor(v * 65535.0 + 0.5));
}

inline double l1(std::span<const Kernel2D> ks, const gsmotion::GrayImage16& frame) {
    const auto r = oracle::render(ks, frame.width(), frame.height());
    double s = 0.0;
    for (int y = 0; y < frame.height(); ++y)
        for (int x = 0; x < frame.width(); ++x)
            s += std::abs(r[static_cast<std::size_t>(y) * frame.width() + x] - frame.at(x, y) / 65535.0);
    return s / (static_cast<double>(frame.width()) * frame.height());
}

inline double smoothness(std::span<const Point> d, double eps) {
    const double n = static_cast<double>(d.size());
    double mx = 0, my = 0;
    for (auto p : d) mx += p.x, my += p.y;
    mx /= n, my /= n;
    double v = 0;
    for (auto p : d) v += (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
    return std::sqrt(v / n) / (std::hypot(mx, my) + eps);
}

struct Weights {
    double l1 = 0.25, diff = 0.25, smooth = 0.5, eps = 1e-12;
};

inline double total_loss(std::span<const Kernel2D> ks, std::span<const Point> d, const gsmotion::GrayImage16& f1,
                         const gsmotion::GrayImage16& f2, Weights w = {}) {
    std::vector<Kernel2D> moved(ks.begin(), ks.end());
    for (std::size_t i = 0; i < moved.size(); ++i) {
        moved[i].mu.x += d[i].x;
        moved[i].mu.y += d[i].y;
    }
    const double a = l1(ks, f1), b = l1(moved, f2);
    return w.l1 * 0.5 * (a + b) + w.diff * std::abs(a - b) + w.smooth * smoothness(d, w.eps);
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Accepts relative error below `rel` or absolute error below `abs_floor`.
inline bool gradient_close(double analytic, double numeric, double rel = 1e-5, double abs_floor = 1e-8) {
    const double err = std::abs(analytic - numeric);
    if (err < abs_floor) return true;
    return err / std::max(std::abs(analytic), std::abs(numeric)) < rel;
}

}  // namespace oracle

#include "gsmotion/baselines.hpp"

#include "gsmotion/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

namespace gsmotion {

namespace {

void check_pair(const GrayImage16& frame1, const GrayImage16& frame2) {
    if (frame1.width() != frame2.width() || frame1.height() != frame2.height()) {
        throw ContractError("frame dimensions differ");
    }
}

using Complex = std::complex<double>;

class ComplexImage {
public:
    ComplexImage(int width, int height)
        : width_(width), data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {}

    Complex at(int x, int y) const { return data_[index(x, y)]; }
    Complex& at(int x, int y) { return data_[index(x, y)]; }

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_;
    std::vector<Complex> data_;
};

struct SampledGabor {
    int radius = 0;
    std::vector<Complex> taps;  // (2r+1)^2, row-major from (-r, -r)
};

SampledGabor sample(const GaborFilter& f) {
    SampledGabor out;
    out.radius = static_cast<int>(std::ceil(3.0 * std::max(f.sigma_along, f.sigma_across)));
    const int r = out.radius;
    const double c = std::cos(f.orientation);
    const double s = std::sin(f.orientation);
    out.taps.reserve(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            const double along = c * dx + s * dy;
            const double across = -s * dx + c * dy;
            const double env = std::exp(-0.5 * (along * along / (f.sigma_along * f.sigma_along) +
                                                across * across / (f.sigma_across * f.sigma_across)));
            out.taps.push_back(env * std::polar(1.0, 2.0 * std::numbers::pi * f.frequency * along));
        }
    }
    return out;
}

// Filter response on pixels at least `radius` from the border; zero elsewhere.
ComplexImage respond(const ContinuousImage& img, const SampledGabor& g) {
    const int w = img.width();
    const int h = img.height();
    const int r = g.radius;
    ComplexImage out(w, h);
#pragma omp parallel for schedule(static)
    for (int y = r; y < h - r; ++y) {
        for (int x = r; x < w - r; ++x) {
            Complex acc = 0.0;
            std::size_t t = 0;
            for (int dy = -r; dy <= r; ++dy) {
                const double* row = img.row(y + dy);
                for (int dx = -r; dx <= r; ++dx, ++t) acc += row[x + dx] * g.taps[t];
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

bool same_orientation(double a, double b) {
    // Orientations are equivalent modulo pi for the purpose of constraining flow.
    const double d = std::remainder(a - b, std::numbers::pi);
    return std::abs(d) < 1e-9;
}

}  // namespace

FlowField::FlowField(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw ContractError("flow field dimensions must be positive");
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    u_.assign(n, 0.0);
    v_.assign(n, 0.0);
    valid_.assign(n, 0);
}

std::size_t FlowField::valid_count() const noexcept {
    return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
}

ImageDerivatives image_derivatives(const GrayImage16& frame1, const GrayImage16& frame2) {
    check_pair(frame1, frame2);
    const auto a = normalize(frame1);
    const auto b = normalize(frame2);
    const int w = a.width();
    const int h = a.height();
    ImageDerivatives d{ContinuousImage(w, h), ContinuousImage(w, h), ContinuousImage(w, h)};
    auto mean = [&](int x, int y) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return 0.5 * (a.at(x, y) + b.at(x, y));
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            d.ix.at(x, y) = 0.5 * (mean(x + 1, y) - mean(x - 1, y));
            d.iy.at(x, y) = 0.5 * (mean(x, y + 1) - mean(x, y - 1));
            d.it.at(x, y) = b.at(x, y) - a.at(x, y);
        }
    }
    return d;
}

FlowField lucas_kanade(const GrayImage16& frame1, const GrayImage16& frame2, const LucasKanadeParams& params) {
    check_pair(frame1, frame2);
    if (params.window < 3 || params.window % 2 == 0) {
        throw ConfigError("window", "must be odd and >= 3, got " + std::to_string(params.window));
    }
    const auto d = image_derivatives(frame1, frame2);
    const int w = frame1.width();
    const int h = frame1.height();
    const int r = params.window / 2;
    FlowField flow(w, h);

#pragma omp parallel for schedule(static)
    for (int y = r; y < h - r; ++y) {
        for (int x = r; x < w - r; ++x) {
            double sxx = 0.0, sxy = 0.0, syy = 0.0, sxt = 0.0, syt = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const double gx = d.ix.at(x + dx, y + dy);
                    const double gy = d.iy.at(x + dx, y + dy);
                    const double gt = d.it.at(x + dx, y + dy);
                    sxx += gx * gx;
                    sxy += gx * gy;
                    syy += gy * gy;
                    sxt += gx * gt;
                    syt += gy * gt;
                }
            }
            const double tr = sxx + syy;
            const double det = sxx * syy - sxy * sxy;
            const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
            const double lmax = 0.5 * tr + disc;
            const double lmin = 0.5 * tr - disc;
            if (!(lmin >= params.min_eigenvalue) || lmax > params.max_condition * lmin) continue;
            // [sxx sxy; sxy syy] [u v]^T = -[sxt syt]^T
            const double u = (-sxt * syy + syt * sxy) / det;
            const double v = (-syt * sxx + sxt * sxy) / det;
            flow.set(x, y, u, v, true);
        }
    }
    return flow;
}

double horn_schunck_energy(const ImageDerivatives& d, const FlowField& flow, double lambda) {
    const int w = flow.width();
    const int h = flow.height();
    double data = 0.0;
    double smooth = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double r = d.ix.at(x, y) * flow.u(x, y) + d.iy.at(x, y) * flow.v(x, y) + d.it.at(x, y);
            data += r * r;
            if (x + 1 < w) {
                const double du = flow.u(x + 1, y) - flow.u(x, y);
                const double dv = flow.v(x + 1, y) - flow.v(x, y);
                smooth += du * du + dv * dv;
            }
            if (y + 1 < h) {
                const double du = flow.u(x, y + 1) - flow.u(x, y);
                const double dv = flow.v(x, y + 1) - flow.v(x, y);
                smooth += du * du + dv * dv;
            }
        }
    }
    return data + lambda * smooth;
}

FlowField horn_schunck(const GrayImage16& frame1, const GrayImage16& frame2, const HornSchunckParams& params,
                       std::vector<double>* energy_trace) {
    check_pair(frame1, frame2);
    if (!(params.lambda > 0.0)) throw ConfigError("lambda", "smoothness weight must be positive");
    if (params.iterations <= 0) throw ConfigError("iterations", "must be positive");
    const auto d = image_derivatives(frame1, frame2);
    const int w = frame1.width();
    const int h = frame1.height();
    FlowField flow(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) flow.set(x, y, 0.0, 0.0, true);
    }
    if (energy_trace != nullptr) {
        energy_trace->clear();
        energy_trace->push_back(horn_schunck_energy(d, flow, params.lambda));
    }

    for (int it = 0; it < params.iterations; ++it) {
        for (int parity = 0; parity < 2; ++parity) {
#pragma omp parallel for schedule(static)
            for (int y = 0; y < h; ++y) {
                for (int x = (y + parity) % 2; x < w; x += 2) {
                    double su = 0.0, sv = 0.0;
                    int n = 0;
                    auto take = [&](int qx, int qy) {
                        if (qx < 0 || qy < 0 || qx >= w || qy >= h) return;
                        su += flow.u(qx, qy);
                        sv += flow.v(qx, qy);
                        ++n;
                    };
                    take(x - 1, y);
                    take(x + 1, y);
                    take(x, y - 1);
                    take(x, y + 1);
                    if (n == 0) continue;  // 1x1 image
                    const double ub = su / n;
                    const double vb = sv / n;
                    const double gx = d.ix.at(x, y);
                    const double gy = d.iy.at(x, y);
                    const double t = (gx * ub + gy * vb + d.it.at(x, y)) / (params.lambda * n + gx * gx + gy * gy);
                    flow.set(x, y, ub - gx * t, vb - gy * t, true);
                }
            }
        }
        if (energy_trace != nullptr) energy_trace->push_back(horn_schunck_energy(d, flow, params.lambda));
    }
    return flow;
}

std::vector<GaborFilter> default_gabor_pair() {
    GaborFilter x;
    x.orientation = 0.0;
    GaborFilter y = x;
    y.orientation = 0.5 * std::numbers::pi;
    return {x, y};
}

FlowField phase_flow(const GrayImage16& frame1, const GrayImage16& frame2, std::span<const GaborFilter> filters,
                     const PhaseFlowParams& params) {
    check_pair(frame1, frame2);
    for (const auto& f : filters) {
        if (!(f.frequency > 0.0)) throw ParameterDomainError("Gabor frequency must be positive");
        if (!(f.sigma_along > 0.0) || !(f.sigma_across > 0.0)) {
            throw ParameterDomainError("Gabor standard deviations must be positive");
        }
    }
    bool distinct = false;
    for (std::size_t i = 1; i < filters.size() && !distinct; ++i) {
        distinct = !same_orientation(filters[i].orientation, filters[0].orientation);
    }
    if (!distinct) {
        throw ConfigError("filters", "phase flow needs at least two filters with distinct orientations");
    }

    const auto a = normalize(frame1);
    const auto b = normalize(frame2);
    const int w = a.width();
    const int h = a.height();

    struct Responses {
        int margin;
        ComplexImage r1, r2;
        double floor;
    };
    std::vector<Responses> resp;
    int margin = 0;
    for (const auto& f : filters) {
        const auto g = sample(f);
        Responses r{g.radius + 1, respond(a, g), respond(b, g), 0.0};
        double peak = 0.0;
        for (int y = g.radius; y < h - g.radius; ++y) {
            for (int x = g.radius; x < w - g.radius; ++x) peak = std::max(peak, std::abs(r.r1.at(x, y)));
        }
        r.floor = params.min_amplitude_fraction * peak;
        margin = std::max(margin, r.margin);
        resp.push_back(std::move(r));
    }

    FlowField flow(w, h);
#pragma omp parallel for schedule(static)
    for (int y = margin; y < h - margin; ++y) {
        for (int x = margin; x < w - margin; ++x) {
            double sxx = 0.0, sxy = 0.0, syy = 0.0, sxt = 0.0, syt = 0.0;
            bool ok = true;
            for (const auto& r : resp) {
                const Complex c1 = r.r1.at(x, y);
                const Complex c2 = r.r2.at(x, y);
                if (!(std::abs(c1) >= r.floor) || !(std::abs(c2) >= r.floor) || r.floor <= 0.0) {
                    ok = false;
                    break;
                }
                // Phase differences via conjugate products avoid unwrapping;
                // spatial gradients average both frames.
                const Complex px = r.r1.at(x + 1, y) * std::conj(r.r1.at(x - 1, y)) *
                                   r.r2.at(x + 1, y) * std::conj(r.r2.at(x - 1, y));
                const Complex py = r.r1.at(x, y + 1) * std::conj(r.r1.at(x, y - 1)) *
                                   r.r2.at(x, y + 1) * std::conj(r.r2.at(x, y - 1));
                const double phx = std::arg(px) / 4.0;
                const double phy = std::arg(py) / 4.0;
                const double pht = std::arg(c2 * std::conj(c1));
                sxx += phx * phx;
                sxy += phx * phy;
                syy += phy * phy;
                sxt += phx * pht;
                syt += phy * pht;
            }
            if (!ok) continue;
            const double det = sxx * syy - sxy * sxy;
            if (!(det > 1e-12 * (sxx + syy) * (sxx + syy))) continue;
            const double u = (-sxt * syy + syt * sxy) / det;
            const double v = (-syt * sxx + sxt * sxy) / det;
            flow.set(x, y, u, v, true);
        }
    }
    return flow;
}

}  // namespace gsmotion

#pragma once

#include "gsmotion/image.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gsmotion {

/// Dense per-pixel flow, frame 1 -> frame 2, in pixels per frame.
class FlowField {
public:
    FlowField(int width, int height);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return u_.size(); }

    double u(int x, int y) const { return u_[index(x, y)]; }
    double v(int x, int y) const { return v_[index(x, y)]; }
    bool valid(int x, int y) const { return valid_[index(x, y)] != 0; }

    void set(int x, int y, double u, double v, bool valid) {
        const auto i = index(x, y);
        u_[i] = u;
        v_[i] = v;
        valid_[i] = valid ? 1 : 0;
    }

    std::span<const double> u_data() const noexcept { return u_; }
    std::span<const double> v_data() const noexcept { return v_; }
    std::span<const std::uint8_t> valid_data() const noexcept { return valid_; }
    std::size_t valid_count() const noexcept;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_;
    int height_;
    std::vector<double> u_;
    std::vector<double> v_;
    std::vector<std::uint8_t> valid_;
};

/// Spatial derivatives (central differences, replicate boundary) of the mean
/// of both frames and the temporal frame difference, in normalized intensity.
struct ImageDerivatives {
    ContinuousImage ix;
    ContinuousImage iy;
    ContinuousImage it;
};

ImageDerivatives image_derivatives(const GrayImage16& frame1, const GrayImage16& frame2);

struct LucasKanadeParams {
    int window = 5;                // odd, >= 3
    double min_eigenvalue = 1e-6;  // smallest structure-tensor eigenvalue
    double max_condition = 1e3;    // largest / smallest eigenvalue
};

/// Per-pixel least-squares solve of the brightness-constancy constraint
/// stacked over a square window. Ill-conditioned pixels and the half-window
/// border are marked invalid.
FlowField lucas_kanade(const GrayImage16& frame1, const GrayImage16& frame2,
                       const LucasKanadeParams& params = {});

struct HornSchunckParams {
    double lambda = 1e-3;  // smoothness weight
    int iterations = 2000;
};

/// Discrete energy: sum of squared linearized data residuals plus lambda
/// times the squared flow differences over every 4-neighbor edge.
double horn_schunck_energy(const ImageDerivatives& d, const FlowField& flow, double lambda);

/// Minimizes the discrete energy by red-black Gauss-Seidel sweeps of the
/// Euler-Lagrange fixed point. Each half-sweep updates pixels whose
/// neighbors are all held fixed, so every update is an exact local
/// minimization and the energy never increases. If `energy_trace` is given
/// it receives the energy before the first and after every iteration.
FlowField horn_schunck(const GrayImage16& frame1, const GrayImage16& frame2,
                       const HornSchunckParams& params = {},
                       std::vector<double>* energy_trace = nullptr);

/// Complex spatial Gabor filter. sigma_along is the envelope width along the
/// carrier direction, sigma_across perpendicular to it.
struct GaborFilter {
    double orientation = 0.0;  // radians, carrier direction
    double frequency = 0.05;   // cycles / pixel
    double sigma_along = 5.0;
    double sigma_across = 5.0;
};

struct PhaseFlowParams {
    // Pixels whose response magnitude falls below this fraction of the
    // filter's image-wide maximum are marked invalid.
    double min_amplitude_fraction = 0.05;
};

/// Two orthogonal filters (0 and pi/2) with the default parameters.
std::vector<GaborFilter> default_gabor_pair();

/// Phase-constancy flow: per pixel, one linear constraint per filter from the
/// spatial phase gradient and the two-frame phase difference, solved in the
/// least-squares sense. Throws ConfigError with fewer than two distinct
/// orientations.
FlowField phase_flow(const GrayImage16& frame1, const GrayImage16& frame2,
                     std::span<const GaborFilter> filters, const PhaseFlowParams& params = {});

}  // namespace gsmotion

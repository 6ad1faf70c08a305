#include "gsmotion/optimizer.hpp"

#include "gsmotion/adam.hpp"
#include "gsmotion/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace gsmotion {

namespace {

constexpr std::size_t kParamsPerKernel = 6;
// Correlation is optimized as rho = kRhoBound * tanh(t).
constexpr double kRhoBound = 0.99;
constexpr double kTinyColor = 1e-300;

void axpy(KernelPartials& acc, double s, const KernelPartials& p) noexcept {
    acc.mu_x += s * p.mu_x;
    acc.mu_y += s * p.mu_y;
    acc.sigma_x += s * p.sigma_x;
    acc.sigma_y += s * p.sigma_y;
    acc.rho += s * p.rho;
    acc.c += s * p.c;
}

KernelPartials scaled(const KernelPartials& p, double s) noexcept {
    KernelPartials out;
    axpy(out, s, p);
    return out;
}

void check_frames(const GrayImage16& frame1, const GrayImage16& frame2) {
    if (frame1.width() != frame2.width() || frame1.height() != frame2.height()) {
        throw ContractError("frame dimensions differ");
    }
}

void check_motions(std::span<const Kernel2D> ks, const MotionField& motions) {
    if (ks.empty()) throw ContractError("kernel set is empty");
    if (motions.size() != ks.size()) {
        throw ContractError("motion field has " + std::to_string(motions.size()) +
                            " entries for " + std::to_string(ks.size()) + " kernels");
    }
    for (const auto& d : motions.displacements) {
        if (!std::isfinite(d.x) || !std::isfinite(d.y)) throw ContractError("non-finite displacement");
    }
}

std::vector<detail::PreparedKernel> prepare(std::span<const Kernel2D> ks) {
    return {ks.begin(), ks.end()};
}

std::vector<detail::PreparedKernel> prepare_displaced(std::span<const Kernel2D> ks,
                                                      std::span<const Point> d) {
    std::vector<detail::PreparedKernel> out;
    out.reserve(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) {
        Kernel2D k = ks[i];
        k.mu = k.mu + d[i];
        out.emplace_back(k);
    }
    return out;
}

struct FrameTerm {
    double l1 = 0.0;
    std::vector<KernelPartials> grad;  // d l1 / d kernel params
};

// Mean absolute residual of one frame and, optionally, its subgradient.
// Rows are independent work items; row partial sums are reduced serially in
// row order so the result is identical for any thread count.
FrameTerm frame_term(std::span<const detail::PreparedKernel> ks, const ContinuousImage& target,
                     bool want_grad) {
    const int width = target.width();
    const int height = target.height();
    const auto w = static_cast<std::size_t>(width);
    const std::size_t n = ks.size();
    std::vector<double> row_l1(static_cast<std::size_t>(height), 0.0);
    std::vector<KernelPartials> row_grad(want_grad ? static_cast<std::size_t>(height) * n : 0);

#pragma omp parallel
    {
        std::vector<double> e(n * w);
        std::vector<double> model(w);
        std::vector<double> sign(w);
#pragma omp for schedule(static)
        for (int y = 0; y < height; ++y) {
            std::fill(model.begin(), model.end(), 0.0);
            for (std::size_t k = 0; k < n; ++k) {
                double* ek = e.data() + k * w;
                detail::gaussian_row(ks[k], y, width, ek);
                const double c = ks[k].c;
                for (std::size_t x = 0; x < w; ++x) model[x] += c * ek[x];
            }
            const double* obs = target.row(y);
            double l1 = 0.0;
            for (std::size_t x = 0; x < w; ++x) {
                const double r = model[x] - obs[x];
                l1 += std::abs(r);
                sign[x] = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
            }
            row_l1[static_cast<std::size_t>(y)] = l1;
            if (!want_grad) continue;

            KernelPartials* acc = row_grad.data() + static_cast<std::size_t>(y) * n;
            for (std::size_t k = 0; k < n; ++k) {
                const auto& kk = ks[k];
                const double* ek = e.data() + k * w;
                const double b = (y - kk.my) * kk.inv_sy;
                // Every partial is a quadratic in a = (x - mx) / sx times the
                // signed kernel value, so three moments per row suffice.
                double m0 = 0.0, m1 = 0.0, m2 = 0.0;
                for (std::size_t x = 0; x < w; ++x) {
                    const double se = sign[x] * ek[x];
                    const double a = (static_cast<double>(x) - kk.mx) * kk.inv_sx;
                    m0 += se;
                    m1 += se * a;
                    m2 += se * a * a;
                }
                const double rb = kk.rho * b;
                const double i = kk.inv_omr2;
                const double s_q = i * (m2 - 2.0 * rb * m1 + b * b * m0);
                const double c = kk.c;
                acc[k].mu_x = c * kk.inv_sx * i * (m1 - rb * m0);
                acc[k].mu_y = c * kk.inv_sy * i * (b * m0 - kk.rho * m1);
                acc[k].sigma_x = c * kk.inv_sx * i * (m2 - rb * m1);
                acc[k].sigma_y = c * kk.inv_sy * i * (b * b * m0 - rb * m1);
                acc[k].rho = c * i * (b * m1 - kk.rho * s_q);
                acc[k].c = m0;
            }
        }
    }

    const double inv_count = 1.0 / static_cast<double>(target.size());
    FrameTerm out;
    double l1 = 0.0;
    for (double v : row_l1) l1 += v;
    out.l1 = l1 * inv_count;
    if (want_grad) {
        out.grad.assign(n, KernelPartials{});
        for (int y = 0; y < height; ++y) {
            for (std::size_t k = 0; k < n; ++k) out.grad[k] += row_grad[static_cast<std::size_t>(y) * n + k];
        }
        for (auto& g : out.grad) g = scaled(g, inv_count);
    }
    return out;
}

struct LossTerms {
    LossBreakdown loss;
    LossGradients grad;
};

double l1_combination(double a, double b, L1Mode mode) noexcept {
    switch (mode) {
        case L1Mode::Frame1: return a;
        case L1Mode::Frame2: return b;
        case L1Mode::Mean: break;
    }
    return 0.5 * (a + b);
}

LossBreakdown assemble_loss(double l1a, double l1b, double smooth, const OptimConfig& cfg) {
    LossBreakdown out;
    out.l1_frame1 = l1a;
    out.l1_frame2 = l1b;
    out.l_diff = std::abs(l1a - l1b);
    out.l_smooth = smooth;
    out.total = cfg.lambda1 * l1_combination(l1a, l1b, cfg.l1_mode) + cfg.lambda2 * out.l_diff +
                cfg.lambda3 * out.l_smooth;
    return out;
}

// Chain rule of the composite loss over the per-frame L1 subgradients.
// `grad_b` is taken with respect to the displaced (frame 2) kernels, so its
// position part is also the derivative with respect to the displacement.
LossGradients assemble_gradients(const LossBreakdown& loss, std::span<const KernelPartials> grad_a,
                                 std::span<const KernelPartials> grad_b, std::span<const Point> d,
                                 const OptimConfig& cfg) {
    double wa = 0.0;
    double wb = 0.0;
    switch (cfg.l1_mode) {
        case L1Mode::Mean: wa = wb = 0.5 * cfg.lambda1; break;
        case L1Mode::Frame1: wa = cfg.lambda1; break;
        case L1Mode::Frame2: wb = cfg.lambda1; break;
    }
    const double diff = loss.l1_frame1 - loss.l1_frame2;
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    wa += cfg.lambda2 * sign;
    wb -= cfg.lambda2 * sign;

    LossGradients out;
    out.kernels.resize(grad_a.size());
    out.motions.resize(grad_a.size());
    const auto smooth = smoothness_gradient(d, cfg.smooth_eps);
    for (std::size_t i = 0; i < grad_a.size(); ++i) {
        axpy(out.kernels[i], wa, grad_a[i]);
        axpy(out.kernels[i], wb, grad_b[i]);
        out.motions[i] = {wb * grad_b[i].mu_x + cfg.lambda3 * smooth[i].x,
                          wb * grad_b[i].mu_y + cfg.lambda3 * smooth[i].y};
    }
    return out;
}

LossTerms evaluate(std::span<const Kernel2D> ks, std::span<const Point> d, const ContinuousImage& f1,
                   const ContinuousImage& f2, const OptimConfig& cfg, bool want_grad) {
    const auto a = frame_term(prepare(ks), f1, want_grad);
    const auto b = frame_term(prepare_displaced(ks, d), f2, want_grad);
    LossTerms out;
    out.loss = assemble_loss(a.l1, b.l1, smoothness_loss(d, cfg.smooth_eps), cfg);
    if (want_grad) out.grad = assemble_gradients(out.loss, a.grad, b.grad, d, cfg);
    return out;
}

// --- parameter packing ----------------------------------------------------

void pack(const Kernel2D& k, double* p) {
    const double r = std::clamp(k.rho / kRhoBound, -1.0 + 1e-12, 1.0 - 1e-12);
    p[0] = k.mu.x;
    p[1] = k.mu.y;
    p[2] = std::log(k.sigma_x);
    p[3] = std::log(k.sigma_y);
    p[4] = std::atanh(r);
    p[5] = std::log(std::max(k.c, kTinyColor));
}

Kernel2D unpack(const double* p) {
    Kernel2D k;
    k.mu = {p[0], p[1]};
    k.sigma_x = std::exp(p[2]);
    k.sigma_y = std::exp(p[3]);
    k.rho = kRhoBound * std::tanh(p[4]);
    k.c = std::exp(p[5]);
    return k;
}

// d loss / d packed params, given d loss / d natural params.
void chain(const Kernel2D& k, const KernelPartials& g, double* out) {
    const double r = k.rho / kRhoBound;
    out[0] = g.mu_x;
    out[1] = g.mu_y;
    out[2] = g.sigma_x * k.sigma_x;
    out[3] = g.sigma_y * k.sigma_y;
    out[4] = g.rho * kRhoBound * (1.0 - r * r);
    out[5] = g.c * k.c;
}

void fill_kernel_rates(std::span<double> lr, std::size_t n, const StepSizes& steps) {
    for (std::size_t i = 0; i < n; ++i) {
        double* p = lr.data() + i * kParamsPerKernel;
        p[0] = p[1] = steps.position;
        p[2] = p[3] = p[4] = steps.shape;
        p[5] = steps.color;
    }
}

double schedule(double final_scale, int it, int max_it) {
    if (max_it <= 0) return 1.0;
    return std::pow(final_scale, static_cast<double>(it) / static_cast<double>(max_it));
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

AdamParameters adam_params(const OptimConfig& cfg) { return {cfg.beta1, cfg.beta2, cfg.adam_eps}; }

}  // namespace

void validate(const OptimConfig& cfg) {
    auto require = [](bool ok, const char* key, const std::string& what) {
        if (!ok) throw ConfigError(key, what);
    };
    require(cfg.initial_kernel_count > 0, "initial_kernel_count", "must be positive");
    require(cfg.prune_threshold >= 0.0, "prune_threshold", "must be >= 0");
    require(cfg.sigma_min > 0.0, "sigma_min", "must be positive");
    require(cfg.sigma_max >= cfg.sigma_min, "sigma_max", "must be >= sigma_min");
    require(cfg.stage2_target_l1 > 0.0, "stage2_target_l1", "must be positive");
    require(cfg.stage2_max_iterations >= 0, "stage2_max_iterations", "must be >= 0");
    require(cfg.stage3_max_iterations >= 0, "stage3_max_iterations", "must be >= 0");
    require(cfg.lambda1 >= 0.0, "lambda1", "must be >= 0");
    require(cfg.lambda2 >= 0.0, "lambda2", "must be >= 0");
    require(cfg.lambda3 >= 0.0, "lambda3", "must be >= 0");
    require(std::abs(cfg.lambda1 + cfg.lambda2 + cfg.lambda3 - 1.0) <= 1e-12, "lambda1",
            "loss weights must sum to 1");
    require(cfg.smooth_eps > 0.0, "smooth_eps", "must be positive");
    require(cfg.plateau_window > 0, "plateau_window", "must be positive");
    require(cfg.plateau_rel_tol >= 0.0, "plateau_rel_tol", "must be >= 0");
    require(cfg.stage2_final_lr_scale > 0.0, "stage2_final_lr_scale", "must be positive");
    require(cfg.stage3_final_lr_scale > 0.0, "stage3_final_lr_scale", "must be positive");
    require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0, "adam_beta1", "must be in [0, 1)");
    require(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0, "adam_beta2", "must be in [0, 1)");
    require(cfg.adam_eps > 0.0, "adam_eps", "must be positive");
    for (const auto& [prefix, steps] : {std::pair{"stage2_lr_", &cfg.stage2_steps}, {"stage3_lr_", &cfg.stage3_steps}}) {
        for (const auto& [name, v] : {std::pair{"position", steps->position}, {"shape", steps->shape},
                                      {"color", steps->color}, {"motion", steps->motion},
                                      {"deviation", steps->deviation}}) {
            if (!(v >= 0.0)) throw ConfigError(std::string(prefix) + name, "must be >= 0");
        }
    }
}

double combined_l1(const LossBreakdown& loss, L1Mode mode) noexcept {
    return l1_combination(loss.l1_frame1, loss.l1_frame2, mode);
}

const char* to_string(FitStatus s) noexcept {
    switch (s) {
        case FitStatus::Converged: return "converged";
        case FitStatus::MaxIterations: return "max_iterations";
        case FitStatus::NotConverged: return "not_converged";
        case FitStatus::Diverged: return "diverged";
    }
    return "unknown";
}

double l1_loss(std::span<const Kernel2D> ks, const ContinuousImage& target) {
    if (ks.empty()) throw ContractError("kernel set is empty");
    validate(ks);
    return frame_term(prepare(ks), target, false).l1;
}

namespace {

struct Spread {
    Point mean;
    double spread = 0.0;
};

// Identical displacements have zero spread exactly; the rounded mean would
// otherwise leave a residue of order 1e-18 sitting on the cone.
Spread spread_of(std::span<const Point> d) {
    Spread out;
    const double n = static_cast<double>(d.size());
    for (const auto& p : d) out.mean = out.mean + p;
    out.mean = (1.0 / n) * out.mean;
    const bool uniform = std::all_of(d.begin(), d.end(), [&](const Point& p) { return p == d.front(); });
    if (uniform) {
        out.mean = d.front();
        return out;
    }
    double var = 0.0;
    for (const auto& p : d) {
        const Point r = p - out.mean;
        var += r.x * r.x + r.y * r.y;
    }
    out.spread = std::sqrt(var / n);
    return out;
}

}  // namespace

double smoothness_loss(std::span<const Point> d, double eps) {
    if (d.empty()) return 0.0;
    const auto s = spread_of(d);
    return s.spread / (std::hypot(s.mean.x, s.mean.y) + eps);
}

std::vector<Point> smoothness_gradient(std::span<const Point> d, double eps) {
    std::vector<Point> out(d.size());
    if (d.empty()) return out;
    const double n = static_cast<double>(d.size());
    const auto [mean, spread] = spread_of(d);
    const double norm = std::hypot(mean.x, mean.y);
    const double denom = norm + eps;
    // Both the spread and the norm are cones at zero; the zero subgradient is
    // used there.
    const double spread_coef = spread > 0.0 ? 1.0 / (n * spread * denom) : 0.0;
    const Point norm_term = norm > 0.0 ? (spread / (denom * denom * n * norm)) * mean : Point{};
    for (std::size_t i = 0; i < d.size(); ++i) {
        out[i] = spread_coef * (d[i] - mean) - norm_term;
    }
    return out;
}

LossBreakdown compute_loss(std::span<const Kernel2D> ks, const MotionField& motions,
                           const GrayImage16& frame1, const GrayImage16& frame2,
                           const OptimConfig& cfg) {
    check_frames(frame1, frame2);
    check_motions(ks, motions);
    validate(ks);
    return evaluate(ks, motions.displacements, normalize(frame1), normalize(frame2), cfg, false).loss;
}

LossGradients loss_gradients(std::span<const Kernel2D> ks, const MotionField& motions,
                             const GrayImage16& frame1, const GrayImage16& frame2,
                             const OptimConfig& cfg) {
    check_frames(frame1, frame2);
    check_motions(ks, motions);
    validate(ks);
    return evaluate(ks, motions.displacements, normalize(frame1), normalize(frame2), cfg, true).grad;
}

LossGradients loss_gradients_reference(std::span<const Kernel2D> ks, const MotionField& motions,
                                       const GrayImage16& frame1, const GrayImage16& frame2,
                                       const OptimConfig& cfg) {
    check_frames(frame1, frame2);
    check_motions(ks, motions);
    const int width = frame1.width();
    const int height = frame1.height();
    const double count = static_cast<double>(frame1.size());
    const auto moved = [&] {
        KernelSet out(ks.begin(), ks.end());
        for (std::size_t i = 0; i < out.size(); ++i) out[i].mu = out[i].mu + motions.displacements[i];
        return out;
    }();

    auto term = [&](std::span<const Kernel2D> kernels, const GrayImage16& frame) {
        const auto img = render_reference(kernels, width, height);
        FrameTerm t;
        t.grad.assign(kernels.size(), KernelPartials{});
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double r = img.at(x, y) - frame.at(x, y) / kFullScale;
                t.l1 += std::abs(r);
                if (r == 0.0) continue;
                const double s = r > 0.0 ? 1.0 : -1.0;
                for (std::size_t k = 0; k < kernels.size(); ++k) {
                    axpy(t.grad[k], s / count,
                         kernel_partials(kernels[k], {static_cast<double>(x), static_cast<double>(y)}));
                }
            }
        }
        t.l1 /= count;
        return t;
    };

    const auto a = term(ks, frame1);
    const auto b = term(moved, frame2);
    const auto loss = assemble_loss(a.l1, b.l1, smoothness_loss(motions.displacements, cfg.smooth_eps), cfg);
    return assemble_gradients(loss, a.grad, b.grad, motions.displacements, cfg);
}

KernelSet init_kernels(const OptimConfig& cfg, const GrayImage16& frame1) {
    validate(cfg);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> pos_x(-0.5, frame1.width() - 0.5);
    std::uniform_real_distribution<double> pos_y(-0.5, frame1.height() - 0.5);
    std::uniform_real_distribution<double> sigma(cfg.sigma_min, cfg.sigma_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    KernelSet out;
    for (int i = 0; i < cfg.initial_kernel_count; ++i) {
        Kernel2D k;
        k.mu = {pos_x(rng), pos_y(rng)};
        k.sigma_x = sigma(rng);
        k.sigma_y = sigma(rng);
        k.rho = 0.0;
        k.c = 1.0 - unit(rng);  // (0, 1]
        const int px = std::clamp(static_cast<int>(std::lround(k.mu.x)), 0, frame1.width() - 1);
        const int py = std::clamp(static_cast<int>(std::lround(k.mu.y)), 0, frame1.height() - 1);
        const double brightness = frame1.at(px, py) / kFullScale;
        if (brightness < cfg.prune_threshold) continue;
        out.push_back(k);
    }
    spdlog::info("init: {} of {} kernels kept (seed {})", out.size(), cfg.initial_kernel_count, cfg.seed);
    if (out.empty()) {
        throw InitializationFailure("all " + std::to_string(cfg.initial_kernel_count) +
                                    " initial kernels fell on pixels darker than the prune threshold");
    }
    return out;
}

SingleFrameFit fit_single_frame(std::span<const Kernel2D> ks, const GrayImage16& frame1,
                                const OptimConfig& cfg) {
    validate(cfg);
    if (ks.empty()) throw ContractError("kernel set is empty");
    validate(ks);
    const auto target = normalize(frame1);
    const std::size_t n = ks.size();

    std::vector<double> params(n * kParamsPerKernel);
    std::vector<double> grad(params.size());
    std::vector<double> base_lr(params.size());
    std::vector<double> lr(params.size());
    for (std::size_t i = 0; i < n; ++i) pack(ks[i], params.data() + i * kParamsPerKernel);
    fill_kernel_rates(base_lr, n, cfg.stage2_steps);
    Adam adam(params.size(), adam_params(cfg));

    KernelSet current(ks.begin(), ks.end());
    SingleFrameFit result;
    result.kernels = current;
    result.l1 = std::numeric_limits<double>::infinity();

    int it = 0;
    for (;; ++it) {
        const auto term = frame_term(prepare(current), target, true);
        if (!std::isfinite(term.l1)) {
            result.status = FitStatus::Diverged;
            break;
        }
        result.trace.push_back({it, {term.l1, 0.0, 0.0, 0.0, term.l1}});
        if (term.l1 < result.l1) {
            result.l1 = term.l1;
            result.kernels = current;
        }
        if (term.l1 <= cfg.stage2_target_l1) {
            result.status = FitStatus::Converged;
            break;
        }
        if (it >= cfg.stage2_max_iterations) {
            result.status = FitStatus::NotConverged;
            break;
        }
        for (std::size_t i = 0; i < n; ++i) chain(current[i], term.grad[i], grad.data() + i * kParamsPerKernel);
        const double scale = schedule(cfg.stage2_final_lr_scale, it, cfg.stage2_max_iterations);
        for (std::size_t j = 0; j < lr.size(); ++j) lr[j] = base_lr[j] * scale;
        adam.step(params, grad, lr);
        if (!all_finite(params)) {
            result.status = FitStatus::Diverged;
            break;
        }
        for (std::size_t i = 0; i < n; ++i) current[i] = unpack(params.data() + i * kParamsPerKernel);
        if (it % 500 == 0) spdlog::debug("stage2 it {} l1 {:.6e} best {:.6e}", it, term.l1, result.l1);
    }
    result.iterations = it;
    spdlog::info("stage2: {} after {} iterations, best L1 {:.6e} ({} kernels)", to_string(result.status),
                 result.iterations, result.l1, n);
    return result;
}

PairFit fit_pair(std::span<const Kernel2D> ks, const GrayImage16& frame1, const GrayImage16& frame2,
                 const OptimConfig& cfg) {
    validate(cfg);
    check_frames(frame1, frame2);
    if (ks.empty()) throw ContractError("kernel set is empty");
    validate(ks);
    const auto f1 = normalize(frame1);
    const auto f2 = normalize(frame2);
    const std::size_t n = ks.size();

    // Layout: [kernel params (6n)] [shared translation (2)] [per-kernel deviation (2n)].
    // Each displacement is translation + deviation; the split keeps the
    // spread-penalty oscillation of individual kernels out of the shared part.
    const std::size_t motion_at = n * kParamsPerKernel;
    const std::size_t dev_at = motion_at + 2;
    std::vector<double> params(dev_at + 2 * n, 0.0);
    std::vector<double> grad(params.size(), 0.0);
    std::vector<double> base_lr(params.size(), 0.0);
    std::vector<double> lr(params.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) pack(ks[i], params.data() + i * kParamsPerKernel);
    if (!cfg.freeze_kernels) fill_kernel_rates(base_lr, n, cfg.stage3_steps);
    base_lr[motion_at] = base_lr[motion_at + 1] = cfg.stage3_steps.motion;
    std::fill(base_lr.begin() + static_cast<std::ptrdiff_t>(dev_at), base_lr.end(), cfg.stage3_steps.deviation);
    Adam adam(params.size(), adam_params(cfg));

    KernelSet current(ks.begin(), ks.end());
    std::vector<Point> d(n);

    PairFit result;
    result.kernels = current;
    result.motions.displacements = d;

    double best_total = std::numeric_limits<double>::infinity();
    double window_start_best = best_total;
    int it = 0;
    for (;; ++it) {
        const auto terms = evaluate(current, d, f1, f2, cfg, true);
        if (!std::isfinite(terms.loss.total)) {
            result.status = FitStatus::Diverged;
            break;
        }
        result.kernels = current;
        result.motions.displacements = d;
        result.loss = terms.loss;
        result.trace.push_back({it, terms.loss});
        best_total = std::min(best_total, terms.loss.total);

        if (it > 0 && it % cfg.plateau_window == 0) {
            if (window_start_best - best_total <= cfg.plateau_rel_tol * window_start_best) {
                result.status = FitStatus::Converged;
                break;
            }
            window_start_best = best_total;
        }
        if (it == 0) window_start_best = best_total;
        if (it >= cfg.stage3_max_iterations) {
            result.status = FitStatus::MaxIterations;
            break;
        }

        for (std::size_t i = 0; i < n; ++i) {
            chain(current[i], terms.grad.kernels[i], grad.data() + i * kParamsPerKernel);
        }
        // The spread penalty is scale-free: its only pull on the shared
        // translation comes through the |mean| denominator and rewards
        // inflating the motion, so the translation sees the fit terms alone.
        const auto smooth = smoothness_gradient(d, cfg.smooth_eps);
        Point shared;
        for (std::size_t i = 0; i < n; ++i) {
            shared = shared + terms.grad.motions[i] - cfg.lambda3 * smooth[i];
            grad[dev_at + 2 * i] = terms.grad.motions[i].x;
            grad[dev_at + 2 * i + 1] = terms.grad.motions[i].y;
        }
        grad[motion_at] = shared.x;
        grad[motion_at + 1] = shared.y;

        const double scale = schedule(cfg.stage3_final_lr_scale, it, cfg.stage3_max_iterations);
        for (std::size_t j = 0; j < lr.size(); ++j) lr[j] = base_lr[j] * scale;
        adam.step(params, grad, lr);
        if (!all_finite(params)) {
            result.status = FitStatus::Diverged;
            break;
        }
        for (std::size_t i = 0; i < n; ++i) current[i] = unpack(params.data() + i * kParamsPerKernel);
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = {params[motion_at] + params[dev_at + 2 * i], params[motion_at + 1] + params[dev_at + 2 * i + 1]};
        }
        if (it % 500 == 0) {
            spdlog::debug("stage3 it {} total {:.6e} l1 {:.3e}/{:.3e} smooth {:.3e} shift ({:.6e}, {:.6e})", it,
                          terms.loss.total, terms.loss.l1_frame1, terms.loss.l1_frame2, terms.loss.l_smooth,
                          params[motion_at], params[motion_at + 1]);
        }
    }
    result.iterations = it;
    spdlog::info("stage3: {} after {} iterations, total {:.6e}", to_string(result.status), result.iterations,
                 result.loss.total);
    return result;
}

}  // namespace gsmotion

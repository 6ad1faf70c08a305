#include "gsmotion/synthetic.hpp"

#include "gsmotion/errors.hpp"

namespace gsmotion {

Point normalized_to_pixel(Point normalized, int width, int height) noexcept {
    return {(normalized.x + 1.0) * 0.5 * (width - 1), (normalized.y + 1.0) * 0.5 * (height - 1)};
}

Point pixel_to_normalized(Point pixel, int width, int height) noexcept {
    return {2.0 * pixel.x / (width - 1) - 1.0, 2.0 * pixel.y / (height - 1) - 1.0};
}

SceneSpec reference_scene() {
    SceneSpec spec;
    spec.width = 121;
    spec.height = 121;
    Kernel2D k;
    k.mu = normalized_to_pixel({0.0, 0.0}, spec.width, spec.height);
    k.sigma_x = 4.8;
    k.sigma_y = 4.8;
    k.rho = 0.0;
    k.c = 1.0;
    spec.kernels = {k};
    spec.applied_motion = {-0.01, -0.01};
    return spec;
}

void validate(const SceneSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0) throw ContractError("scene dimensions must be positive");
    if (spec.kernels.empty()) throw ContractError("scene has no kernels");
    if (!std::isfinite(spec.applied_motion.x) || !std::isfinite(spec.applied_motion.y)) {
        throw ContractError("applied motion must be finite");
    }
    validate(std::span<const Kernel2D>(spec.kernels));
}

ContinuousImage render_scene(const SceneSpec& spec, bool apply_motion) {
    validate(spec);
    if (!apply_motion) return render(spec.kernels, spec.width, spec.height);
    return render(translated(spec.kernels, spec.applied_motion), spec.width, spec.height);
}

GrayImage16 make_frame(const SceneSpec& spec, bool apply_motion) {
    return quantize(render_scene(spec, apply_motion));
}

FramePair make_pair(const SceneSpec& spec) {
    return {make_frame(spec, false), make_frame(spec, true), spec.applied_motion};
}

}  // namespace gsmotion

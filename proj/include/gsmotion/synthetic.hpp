#pragma once

#include "gsmotion/image.hpp"
#include "gsmotion/kernel.hpp"

namespace gsmotion {

/// Ground-truth scene: kernels in pixel units plus a rigid displacement
/// applied to every kernel for the second frame (+x right, +y down).
struct SceneSpec {
    int width = 0;
    int height = 0;
    KernelSet kernels;
    Point applied_motion;
};

/// Normalized coordinates span [-1, 1] over the pixel-center extent, so
/// (0, 0) lands on ((W-1)/2, (H-1)/2).
Point normalized_to_pixel(Point normalized, int width, int height) noexcept;
Point pixel_to_normalized(Point pixel, int width, int height) noexcept;

/// The single-patch validation scene: 121x121, one isotropic kernel with
/// sigma 4.8 px and c = 1 at the image center, moved 0.01 px left and up.
SceneSpec reference_scene();

void validate(const SceneSpec& spec);

/// Continuous render of the scene, optionally with the motion applied.
ContinuousImage render_scene(const SceneSpec& spec, bool apply_motion);

GrayImage16 make_frame(const SceneSpec& spec, bool apply_motion);

struct FramePair {
    GrayImage16 frame1;
    GrayImage16 frame2;
    Point ground_truth;
};

FramePair make_pair(const SceneSpec& spec);

}  // namespace gsmotion

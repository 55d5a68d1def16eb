// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pagas/camera.hpp"
#include "pagas/grid.hpp"

namespace pagas {

/// Procedural texture over world positions. All variants are deterministic
/// in their seed and band-limited enough to survive a 2x downsampling.
struct Texture {
    enum class Kind { Checker, ValueNoise, Sinusoid };
    Kind kind = Kind::Checker;
    double period = 0.05;  // world units
    Vec3 color_a{0.9, 0.9, 0.9};
    Vec3 color_b{0.1, 0.1, 0.1};
    uint64_t seed = 0;

    Vec3 sample(const Vec3& p) const;
};

struct PlaneSurface {
    Vec3 point;   // any point on the plane
    Vec3 normal;  // unit
    // Optional rectangular bounds in the plane's own (u, v) axes; a
    // half-extent <= 0 means unbounded in that axis.
    Vec3 u_axis, v_axis;
    double half_u = 0.0, half_v = 0.0;
};

struct SphereSurface {
    Vec3 center;
    double radius = 1.0;
};

struct BoxSurface {
    Vec3 min, max;  // axis-aligned
};

struct Surface {
    enum class Shape { Plane, Sphere, Box };
    Shape shape = Shape::Plane;
    PlaneSurface plane;
    SphereSurface sphere;
    BoxSurface box;
    Texture texture;
};

struct SyntheticScene {
    std::vector<Surface> surfaces;
    Vec3 background{0.0, 0.0, 0.0};
};

struct Hit {
    bool valid = false;
    double t = 0.0;  // ray parameter (= distance for unit directions)
    Vec3 point;
    int surface_id = -1;
};

/// Nearest intersection of the ray origin + t * dir, t > t_min.
Hit trace(const SyntheticScene& scene, const Vec3& origin, const Vec3& dir,
          double t_min = 1e-9);

struct RaycastResult {
    ColorImage color;
    DepthMap ray_depth;      // ray lengths, the optimizer's parameterization
    Grid<double> z_depth;    // camera-frame z, 0 where invalid
    Grid<int> surface_ids;   // -1 where the ray misses
};

/// Exact nearest-hit render through pixel centers.
RaycastResult raycast(const SyntheticScene& scene, const CameraIntrinsics& intr,
                      const CameraPose& pose);

/// True if `point` is the first thing this camera sees along its ray (within
/// tolerance) and it projects inside the image.
bool point_visible(const SyntheticScene& scene, const CameraIntrinsics& intr,
                   const CameraPose& pose, const Vec3& point, double tol = 1e-6);

enum class PerturbMode { GaussianRelative, LowFrequencyBias };

/// Deterministic depth corruption used to fabricate "coarse" initializations.
DepthMap perturb_depth(const DepthMap& depth, PerturbMode mode, double magnitude,
                       uint64_t seed);

/// Scene presets: "plane-checker", "sphere-noise", "step-occluder".
/// Throws std::invalid_argument on unknown names.
SyntheticScene make_scene(std::string_view preset);

/// Point the preset cameras orbit and look at.
Vec3 scene_target_point(std::string_view preset);

/// Camera ring for a preset scene: `count` poses on an arc around the scene
/// axis, all aimed at the scene target point. Index 0 is the head-on view.
/// `seed` jitters the ring start angle deterministically.
std::vector<CameraPose> make_ring_poses(std::string_view preset, int count,
                                        uint64_t seed = 0);

/// Intrinsics matched to the preset scenes at a given resolution.
CameraIntrinsics make_ring_intrinsics(int width, int height);

}  // namespace pagas

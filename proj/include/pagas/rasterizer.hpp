// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "pagas/camera.hpp"
#include "pagas/cloud.hpp"
#include "pagas/grid.hpp"

namespace pagas {

struct RasterSettings {
    /// Hard pixel-space gate: a Gaussian joins a pixel's blend only if its
    /// 2D mean lies within this distance of the pixel center.
    double radius_threshold = 1.42;
    /// World-space gate: among radius-passing Gaussians, anything deeper
    /// than the first one by more than this is ignored.
    double depth_threshold = 0.05;
    Vec3 background{0.0, 0.0, 0.0};
    /// Upper bound on per-Gaussian alpha; keeps transmittance (and the
    /// backward pass) away from exact zero with opacity fixed to 1.
    double alpha_cap = 0.99;
    /// false evaluates G = exp(-d^T S^-1 d); true the conventional
    /// exp(-d^T S^-1 d / 2) for cross-checks against standard splatting.
    bool half_exponent = false;
    double z_near = 1e-4;
    int tile_size = 16;
};

/// Screen-space footprint of every cloud Gaussian in one view. Entries for
/// out-of-frustum Gaussians keep their index slot with in_frustum = false.
struct SplatProjection {
    std::vector<Vec2> mean2d;
    std::vector<Sym2> cov2d;        // regularized, positive definite
    std::vector<double> z;          // camera-frame depth
    std::vector<double> extent_px;  // 3 sigma of the largest eigenvalue
    std::vector<uint8_t> in_frustum;
    /// In-frustum indices sorted by (z ascending, index ascending); the
    /// global blend order.
    std::vector<int> order;

    // Cached per-(Gaussian, view) quantities consumed by the backward pass.
    std::vector<Vec3> p_cam;        // camera-frame position
    std::vector<Vec3> ray_cam;      // unit target ray in this camera's frame
    std::vector<double> scale;

    size_t size() const { return mean2d.size(); }
};

struct Contributor {
    int gaussian = 0;
    double weight = 0.0;         // blend weight T_before * alpha
    double transmittance = 0.0;  // transmittance before this contribution
};

struct RenderBuffers {
    ColorImage color;
    Grid<double> alpha;  // accumulated opacity
    Grid<double> depth;  // alpha-blended z-depth (normalized where alpha > 1e-6)
    /// Per-pixel contributor records in blend order, flattened; pixel p owns
    /// contribs[contrib_offset(p) .. contrib_offset(p) + contrib_count(p)).
    std::vector<Contributor> contribs;
    Grid<int> contrib_offset;
    Grid<int> contrib_count;
    // Diagnostics.
    long depth_gate_skips = 0;
    long singular_skips = 0;
};

/// EWA projection of the cloud's spherical Gaussians into a view:
/// cov2d = s^2 J J^T + lambda_reg I with the standard perspective Jacobian.
SplatProjection project_gaussians(const PixelGaussianCloud& cloud,
                                  const CameraIntrinsics& intr,
                                  const CameraPose& pose,
                                  const RasterSettings& settings);

/// Low-pass regularizer added to both cov2d diagonals, in px^2.
inline constexpr double kCovRegularizer = 0.3;

/// Transmittance below which a pixel's blend stops early.
inline constexpr double kTransmittanceFloor = 1e-4;

/// Tile-parallel forward splat with the radius/depth occlusion gates.
/// Deterministic regardless of thread count.
RenderBuffers rasterize(const SplatProjection& proj, std::span<const Vec3> colors,
                        const RasterSettings& settings, int width, int height);

/// Serial reference: per pixel, walks ALL Gaussians in global blend order
/// with the same gates. O(K * W * H); kept for tests and benchmarks.
RenderBuffers rasterize_reference(const SplatProjection& proj,
                                  std::span<const Vec3> colors,
                                  const RasterSettings& settings, int width,
                                  int height);

}  // namespace pagas

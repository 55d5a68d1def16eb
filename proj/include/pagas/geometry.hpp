// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "pagas/camera.hpp"
#include "pagas/grid.hpp"

namespace pagas {

/// Unit direction of the ray through continuous pixel coordinates (u, v),
/// camera frame. z component is always positive.
Vec3 ray_direction(double u, double v, const CameraIntrinsics& intr);

/// Conversion factor from ray-length depth to camera z-depth at pixel
/// (u, v): the z component of the unit pixel ray,
///   (((u-cx)/fx)^2 + ((v-cy)/fy)^2 + 1)^(-1/2).
double ray_to_z_factor(double u, double v, const CameraIntrinsics& intr);

/// z-depth of a point at ray-length depth d along the pixel (u, v) ray.
double ray_depth_to_z(double d, double u, double v, const CameraIntrinsics& intr);

/// Scale of a pixel-aligned spherical Gaussian at z-depth d_e: half the side
/// of the pixel's back-projection, d_e / (2 sqrt(fx fy)).
double gaussian_scale(double d_e, const CameraIntrinsics& intr);

/// Back-projects a ray-length depth map to world-frame vertex positions
/// through pixel centers. Invalid pixels propagate invalid.
VertexMap backproject(const DepthMap& depth, const CameraIntrinsics& intr,
                      const CameraPose& pose);

struct Projected {
    double u = 0.0, v = 0.0;  // continuous pixel coordinates
    double z = 0.0;           // camera-frame depth
    bool behind = false;      // camera-frame z <= z_near
};

/// Pinhole projection of a world point. Sets `behind` instead of throwing
/// when the point is at or behind the near plane.
Projected project(const Vec3& point, const CameraIntrinsics& intr,
                  const CameraPose& pose, double z_near = 1e-4);

/// Central-difference normals from a vertex map, oriented to face the
/// camera at `camera_center` (same frame as the map; pass the origin for
/// camera-frame maps). Border pixels, pixels with invalid neighbors and
/// degenerate cross products are marked invalid.
NormalMap normals_from_depth(const VertexMap& vmap, const Vec3& camera_center = {});

/// Indices of the n candidates whose optical axes align best with the
/// target's (largest dot product first, ties broken by lower index).
/// Candidates whose horizontal FOV differs from the target's by more than
/// max_fov_ratio are excluded first; fewer than n survivors means the
/// returned list is short.
std::vector<int> select_context_views(const CameraIntrinsics& target_intr,
                                      const CameraPose& target_pose,
                                      std::span<const CameraIntrinsics> cand_intr,
                                      std::span<const CameraPose> cand_poses,
                                      int n, double max_fov_ratio = 1.5);

}  // namespace pagas

// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "pagas/grid.hpp"
#include "pagas/vecmath.hpp"

namespace pagas {

/// Pinhole intrinsics. fx, fy, cx, cy in pixels; cx, cy in continuous pixel
/// coordinates (a pixel index c covers [c, c+1), its center is c + 0.5).
struct CameraIntrinsics {
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;

    bool valid() const { return fx > 0 && fy > 0 && width > 0 && height > 0; }
    double horizontal_fov() const { return 2.0 * std::atan2(0.5 * width, fx); }

    /// Intrinsics of the image downsampled by an integer factor.
    CameraIntrinsics downscaled(int factor, int new_w, int new_h) const {
        CameraIntrinsics s = *this;
        s.fx = fx / factor;
        s.fy = fy / factor;
        s.cx = cx / factor;
        s.cy = cy / factor;
        s.width = new_w;
        s.height = new_h;
        return s;
    }
};

/// World-from-camera pose: rotation columns are the camera axes in world
/// coordinates (x right, y down, z forward); translation is the camera
/// center in world coordinates.
struct CameraPose {
    Mat3 rotation = Mat3::identity();
    Vec3 translation;

    Vec3 optical_axis() const { return rotation.col(2); }
    Vec3 center() const { return translation; }
    Vec3 world_to_camera(const Vec3& p_world) const {
        return rotation.transposed_mul(p_world - translation);
    }
    Vec3 camera_to_world(const Vec3& p_cam) const {
        return rotation * p_cam + translation;
    }
};

/// One calibrated input view: camera, color image, optional foreground mask
/// (empty mask means "no mask").
struct CameraView {
    CameraIntrinsics intr;
    CameraPose pose;
    ColorImage image;
    Mask mask;

    bool has_mask() const { return !mask.empty(); }
};

/// Continuous coordinate of a pixel's sample point. The default 0.5 offset
/// is the pixel-center convention (COLMAP-compatible).
inline double pixel_coord(int index, double offset = 0.5) { return index + offset; }

}  // namespace pagas

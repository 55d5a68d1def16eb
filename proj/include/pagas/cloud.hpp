// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "pagas/camera.hpp"
#include "pagas/grid.hpp"

namespace pagas {

struct PixelId {
    int row = 0;
    int col = 0;
};

/// Per-pixel 1DoF Gaussian cloud of a target view. One spherical Gaussian
/// per valid pixel; `depths` (ray lengths) is the only mutable array. Color
/// is fixed to the pixel's color, opacity is implicitly 1 and rotation is
/// implicitly identity, so neither is stored. Position and scale are derived
/// from depth on demand.
class PixelGaussianCloud {
public:
    PixelGaussianCloud() = default;

    size_t size() const { return depths_.size(); }
    const Vec3& origin() const { return origin_; }
    const CameraIntrinsics& intrinsics() const { return intr_; }
    const CameraPose& pose() const { return pose_; }

    const std::vector<Vec3>& ray_dirs() const { return ray_dirs_; }
    const std::vector<Vec3>& colors() const { return colors_; }
    const std::vector<PixelId>& pixel_ids() const { return pixel_ids_; }
    const std::vector<double>& init_depths() const { return init_depths_; }
    /// z component of the camera-frame unit ray per Gaussian; converts
    /// ray-length depth to z-depth by multiplication.
    const std::vector<double>& z_factors() const { return z_factors_; }

    const std::vector<double>& depths() const { return depths_; }
    /// The single optimizable array.
    std::vector<double>& mutable_depths() { return depths_; }

    /// Gaussian index at grid pixel (row, col), or -1.
    int index_at(int row, int col) const {
        return grid_index_.at(row, col);
    }
    int grid_width() const { return grid_index_.width; }
    int grid_height() const { return grid_index_.height; }

    /// d(scale)/d(depth) for Gaussian k: z_factor / (2 sqrt(fx fy)).
    /// Constant per pixel.
    double scale_depth_slope(size_t k) const {
        return z_factors_[k] * inv_scale_denom_;
    }

    /// mu_k = origin + d_k * ray_dir_k.
    std::vector<Vec3> positions() const;
    /// s_k from the current depths via the z-depth and pixel-footprint maps.
    std::vector<double> scales() const;

    /// Clamps every depth to [init * (1 - delta), init * (1 + delta)] and to
    /// the absolute floor. delta = infinity disables the relative clamp.
    void clamp_depths(double delta, double floor = 1e-6);

    /// Current depths written back onto the pixel grid.
    DepthMap to_depth_map() const;

    friend PixelGaussianCloud init_from_depth(const ColorImage& image,
                                              const DepthMap& depth,
                                              const CameraIntrinsics& intr,
                                              const CameraPose& pose,
                                              const Mask* mask);

private:
    Vec3 origin_;
    CameraIntrinsics intr_;
    CameraPose pose_;
    std::vector<Vec3> ray_dirs_;
    std::vector<double> depths_;
    std::vector<double> init_depths_;
    std::vector<Vec3> colors_;
    std::vector<PixelId> pixel_ids_;
    std::vector<double> z_factors_;
    Grid<int> grid_index_;
    double inv_scale_denom_ = 0.0;  // 1 / (2 sqrt(fx fy))
};

/// Builds the cloud: one Gaussian per pixel that is valid in the depth map
/// and (if given) in the mask, with a finite positive depth. Colors are
/// sampled from the image at the pixel. Throws std::invalid_argument on
/// shape mismatch or when no pixel survives.
PixelGaussianCloud init_from_depth(const ColorImage& image, const DepthMap& depth,
                                   const CameraIntrinsics& intr,
                                   const CameraPose& pose,
                                   const Mask* mask = nullptr);

}  // namespace pagas

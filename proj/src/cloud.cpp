// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#include "pagas/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pagas/geometry.hpp"

namespace pagas {

PixelGaussianCloud init_from_depth(const ColorImage& image, const DepthMap& depth,
                                   const CameraIntrinsics& intr,
                                   const CameraPose& pose, const Mask* mask) {
    if (!image.same_size(depth.width(), depth.height()))
        throw std::invalid_argument("init_from_depth: image/depth resolution mismatch");
    if (mask && !mask->same_size(depth.width(), depth.height()))
        throw std::invalid_argument("init_from_depth: mask resolution mismatch");

    PixelGaussianCloud cloud;
    cloud.origin_ = pose.translation;
    cloud.intr_ = intr;
    cloud.pose_ = pose;
    cloud.inv_scale_denom_ = 1.0 / (2.0 * std::sqrt(intr.fx * intr.fy));
    cloud.grid_index_ = Grid<int>(depth.width(), depth.height(), -1);

    for (int r = 0; r < depth.height(); ++r) {
        for (int c = 0; c < depth.width(); ++c) {
            if (!depth.valid_at(r, c)) continue;
            if (mask && mask->at(r, c) == 0) continue;
            const double d = depth.values.at(r, c);
            if (!std::isfinite(d) || d <= 0.0) continue;
            const double u = pixel_coord(c);
            const double v = pixel_coord(r);
            cloud.grid_index_.at(r, c) = int(cloud.depths_.size());
            cloud.ray_dirs_.push_back(pose.rotation * ray_direction(u, v, intr));
            cloud.depths_.push_back(d);
            cloud.init_depths_.push_back(d);
            cloud.colors_.push_back(image.at(r, c));
            cloud.pixel_ids_.push_back({r, c});
            cloud.z_factors_.push_back(ray_to_z_factor(u, v, intr));
        }
    }
    if (cloud.depths_.empty())
        throw std::invalid_argument("init_from_depth: no valid pixel to seed a Gaussian");
    return cloud;
}

std::vector<Vec3> PixelGaussianCloud::positions() const {
    std::vector<Vec3> pos(depths_.size());
    for (size_t k = 0; k < depths_.size(); ++k)
        pos[k] = origin_ + depths_[k] * ray_dirs_[k];
    return pos;
}

std::vector<double> PixelGaussianCloud::scales() const {
    std::vector<double> s(depths_.size());
    for (size_t k = 0; k < depths_.size(); ++k)
        s[k] = depths_[k] * z_factors_[k] * inv_scale_denom_;
    return s;
}

void PixelGaussianCloud::clamp_depths(double delta, double floor) {
    const bool relative = std::isfinite(delta);
    for (size_t k = 0; k < depths_.size(); ++k) {
        double d = depths_[k];
        if (relative) {
            const double lo = init_depths_[k] * (1.0 - delta);
            const double hi = init_depths_[k] * (1.0 + delta);
            d = std::clamp(d, lo, hi);
        }
        depths_[k] = std::max(d, floor);
    }
}

DepthMap PixelGaussianCloud::to_depth_map() const {
    DepthMap out(grid_index_.width, grid_index_.height);
    for (size_t k = 0; k < depths_.size(); ++k)
        out.set(pixel_ids_[k].row, pixel_ids_[k].col, depths_[k]);
    return out;
}

}  // namespace pagas

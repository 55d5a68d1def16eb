// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "pagas/camera.hpp"
#include "pagas/cloud.hpp"
#include "pagas/grid.hpp"

namespace pagas {

struct LossWeights {
    double lambda_c = 0.2;   // SSIM mix weight
    double lambda_s = 0.2;   // normal smoothness weight
    double grad_min = 0.02;  // gradient-weight normalization bounds
    double grad_max = 0.1;
};

/// Per-pixel color-gradient weight w in [0, 1]: the mean absolute
/// channel difference to the 4-neighborhood, normalized to
/// [grad_min, grad_max] and clamped.
Grid<double> gradient_weight(const ColorImage& image, double grad_min,
                             double grad_max);

struct PhotometricResult {
    double value = 0.0;
    Grid<Vec3> grad;  // d(value)/d(rendered)
    bool empty_mask = false;
};

/// L_c = (1 - lambda_c) * L1 + lambda_c * (1 - SSIM), with the gradient
/// weight applied to the L1 term only. SSIM uses the standard 11x11
/// Gaussian window (sigma 1.5, C1 = 0.01^2, C2 = 0.03^2 on [0,1] range),
/// computed over the full image and averaged over valid pixels.
PhotometricResult photometric_loss(const ColorImage& rendered,
                                   const ColorImage& reference, const Mask& valid,
                                   const Grid<double>& w_grad, double lambda_c);

/// Forward-warps valid target pixels into the context view using the given
/// depths; a context pixel is kept iff at least one warped pixel lands
/// within warp_radius (px) of its center.
Mask disocclusion_mask(const DepthMap& target_depth,
                       const CameraIntrinsics& target_intr,
                       const CameraPose& target_pose,
                       const CameraIntrinsics& context_intr,
                       const CameraPose& context_pose, double warp_radius = 1.0);

struct SmoothnessResult {
    double value = 0.0;
    std::vector<double> grad;  // d(value)/d(depth) per Gaussian
};

/// Normal smoothness over the cloud's pixel grid: per interior pixel,
/// (lambda_s / 2) * (1 - mean of the dot products with the right/down
/// neighbor normals) * (1 - w_grad), where normals come from the current
/// depths via back-projection and central differences. Analytic gradient
/// back to the depths; the camera-facing flip is a frozen sign.
SmoothnessResult smoothness_loss(const PixelGaussianCloud& cloud,
                                 const Grid<double>& w_grad, double lambda_s);

/// Per-channel affine color map fitted per context view.
struct ExposureModel {
    Vec3 gain{1.0, 1.0, 1.0};
    Vec3 bias{0.0, 0.0, 0.0};
};

/// Per-channel least squares of gain * rendered + bias = reference over the
/// valid mask. A degenerate (constant) channel falls back to gain 1 and
/// bias = mean difference; so does a mask of fewer than 100 pixels.
ExposureModel fit_exposure(const ColorImage& rendered, const ColorImage& reference,
                           const Mask& valid);

ColorImage apply_exposure(const ColorImage& rendered, const ExposureModel& model);

}  // namespace pagas

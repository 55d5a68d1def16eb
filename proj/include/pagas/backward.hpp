// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pagas/rasterizer.hpp"

namespace pagas {

struct DepthGradients {
    std::vector<double> grad;     // dL/dd per Gaussian
    std::vector<uint8_t> touched; // Gaussian contributed to >= 1 pixel
};

struct BackwardOptions {
    /// Ablation: drop the scale-from-depth term of the chain, keeping only
    /// position motion along the ray.
    bool freeze_scale_grad = false;
};

/// Analytic dL/dd for a scalar loss with gradients `grad_color` on the
/// rendered colors (and optionally `grad_depthbuf` on the blended depth
/// buffer). Replays the contributor records saved during rasterize; the
/// radius/depth gates and the z-sort are fixed discrete decisions, so no
/// gradient flows through them. Tile-parallel, deterministic regardless of
/// thread count.
DepthGradients backward(const RenderBuffers& buffers, const Grid<Vec3>& grad_color,
                        const Grid<double>* grad_depthbuf,
                        const SplatProjection& proj, const PixelGaussianCloud& cloud,
                        const CameraIntrinsics& view_intr,
                        const RasterSettings& settings,
                        const BackwardOptions& options = {});

/// Serial reference: identical per-pixel math, plain row-major accumulation.
DepthGradients backward_reference(const RenderBuffers& buffers,
                                  const Grid<Vec3>& grad_color,
                                  const Grid<double>* grad_depthbuf,
                                  const SplatProjection& proj,
                                  const PixelGaussianCloud& cloud,
                                  const CameraIntrinsics& view_intr,
                                  const RasterSettings& settings,
                                  const BackwardOptions& options = {});

}  // namespace pagas

// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>
#include <string>
#include <vector>

#include "pagas/camera.hpp"
#include "pagas/cloud.hpp"
#include "pagas/grid.hpp"
#include "pagas/losses.hpp"

namespace pagas {

struct RefineConfig {
    int n_context = 10;
    std::vector<int> pyramid_iters{200, 100};
    std::vector<int> pyramid_factors{2, 1};
    double lr_init = 1e-5;
    double lr_stop = 1e-7;
    double lr_factor = 0.1;
    int patience = 10;
    double radius_threshold = 1.42;
    int depth_slices = 20;
    LossWeights weights;
    double alpha_cap = 0.99;
    bool half_exponent = false;
    bool exposure = false;
    bool consistency_check = false;
    double consistency_tau = 0.01;
    int consistency_min_views = 2;
    double clamp_delta = 0.5;
    double depth_floor = 1e-6;
    double fov_ratio = 1.5;
    double warp_radius = 1.0;
    bool freeze_scale_grad = false;
    double z_near = 1e-4;
    int tile_size = 16;

    /// Named presets: "dtu", "tnt", "generic".
    static RefineConfig preset(const std::string& name);
};

struct AdamState {
    std::vector<double> m, v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void init(size_t count) {
        m.assign(count, 0.0);
        v.assign(count, 0.0);
        t = 0;
    }
};

/// One Adam update with bias correction. Non-finite gradient components are
/// skipped (parameter and moments untouched); returns how many.
int adam_step(std::vector<double>& params, const std::vector<double>& grads,
              AdamState& state, double lr);

/// Reduce-on-plateau: lr shrinks by `factor` when the loss has not reached a
/// new minimum for `patience` iterations; signals stop once lr < stop_lr.
class PlateauScheduler {
public:
    PlateauScheduler(double lr_init, double factor, int patience, double stop_lr)
        : lr_(lr_init), factor_(factor), patience_(patience), stop_lr_(stop_lr) {}

    /// Feed the iteration's loss; returns true when optimization should stop.
    bool step(double loss) {
        if (loss < best_) {
            best_ = loss;
            bad_ = 0;
            return false;
        }
        if (++bad_ >= patience_) {
            lr_ *= factor_;
            bad_ = 0;
        }
        return lr_ < stop_lr_;
    }
    double lr() const { return lr_; }

private:
    double lr_;
    double factor_;
    int patience_;
    double stop_lr_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_ = 0;
};

/// Occlusion depth gate from the initialization depth: z-depth range divided
/// by the slice count, floored at 1e-4 * mean z-depth for degenerate ranges.
/// Throws std::invalid_argument when no pixel is valid.
double depth_threshold_from_init(const DepthMap& init_depth,
                                 const CameraIntrinsics& intr, int slices);

struct IterationRecord {
    int level = 0;
    int iter = 0;
    double loss_c = 0.0;
    double loss_s = 0.0;
    double lr = 0.0;
    long gate_skips = 0;
};

struct RefineDiagnostics {
    std::vector<IterationRecord> log;
    long grad_skipped = 0;
    long singular_skips = 0;
    double wall_seconds = 0.0;
    std::string warning;
};

/// Refines one view's depth map against its context views through the
/// coarse-to-fine pyramid. Returns the refined map at the input resolution;
/// pixels invalid in the input stay invalid.
DepthMap refine_view(const CameraView& target, const DepthMap& init_depth,
                     const std::vector<CameraView>& contexts,
                     const RefineConfig& cfg, RefineDiagnostics* diag = nullptr);

/// Cross-view agreement masks: a pixel survives iff its 3D point agrees with
/// the refined depth of at least `min_views` other views within relative
/// tolerance tau.
std::vector<Mask> consistency_filter(const std::vector<DepthMap>& refined,
                                     const std::vector<CameraIntrinsics>& intr,
                                     const std::vector<CameraPose>& poses,
                                     double tau, int min_views);

/// Refines every view independently and sequentially, choosing contexts by
/// optical-axis alignment. Per-view failures are recorded in diagnostics and
/// leave that view's input depth unchanged.
std::vector<DepthMap> refine_dataset(const std::vector<CameraView>& views,
                                     const std::vector<DepthMap>& init_depths,
                                     const RefineConfig& cfg,
                                     std::vector<RefineDiagnostics>* diags = nullptr);

// Resolution helpers shared by the pipeline and the CLI.
ColorImage downsample_image(const ColorImage& image, int factor);
Mask downsample_mask(const Mask& mask, int factor);
DepthMap downsample_depth(const DepthMap& depth, int factor);
/// Valid-aware bilinear upsample of `coarse` onto the full-resolution
/// validity of `reference`; uncovered valid pixels keep `reference` values.
DepthMap upsample_depth_into(const DepthMap& coarse, const DepthMap& reference,
                             int factor);
DepthMap resample_depth_bilinear(const DepthMap& depth, int width, int height);

}  // namespace pagas

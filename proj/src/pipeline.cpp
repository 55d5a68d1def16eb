// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#include "pagas/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "pagas/backward.hpp"
#include "pagas/geometry.hpp"
#include "pagas/rasterizer.hpp"

namespace pagas {

RefineConfig RefineConfig::preset(const std::string& name) {
    RefineConfig cfg;
    if (name == "dtu") {
        cfg.pyramid_iters = {100, 100};
        cfg.radius_threshold = 1.42;
    } else if (name == "tnt") {
        cfg.pyramid_iters = {200, 100};
        cfg.radius_threshold = 1.42;
        cfg.exposure = true;
        cfg.consistency_check = true;
    } else if (name == "generic") {
        cfg.pyramid_iters = {200, 100};
        cfg.radius_threshold = 2.0;
    } else {
        throw std::invalid_argument("unknown preset: " + name);
    }
    return cfg;
}

int adam_step(std::vector<double>& params, const std::vector<double>& grads,
              AdamState& state, double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.t));
    int skipped = 0;
#pragma omp parallel for schedule(static) reduction(+ : skipped)
    for (long k = 0; k < long(params.size()); ++k) {
        const double g = grads[k];
        if (!std::isfinite(g)) {
            ++skipped;
            continue;
        }
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[k] / bc1;
        const double v_hat = state.v[k] / bc2;
        params[k] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    return skipped;
}

double depth_threshold_from_init(const DepthMap& init_depth,
                                 const CameraIntrinsics& intr, int slices) {
    double z_min = 1e300, z_max = -1e300, z_sum = 0.0;
    long n = 0;
    for (int r = 0; r < init_depth.height(); ++r)
        for (int c = 0; c < init_depth.width(); ++c) {
            if (!init_depth.valid_at(r, c)) continue;
            const double z = init_depth.values.at(r, c) *
                             ray_to_z_factor(pixel_coord(c), pixel_coord(r), intr);
            z_min = std::min(z_min, z);
            z_max = std::max(z_max, z);
            z_sum += z;
            ++n;
        }
    if (n == 0)
        throw std::invalid_argument("depth_threshold_from_init: all-invalid depth");
    const double range = (z_max - z_min) / double(slices);
    const double floor = 1e-4 * (z_sum / double(n));
    return std::max(range, floor);
}

// ---------------------------------------------------------------------------
// Resolution helpers.

ColorImage downsample_image(const ColorImage& image, int factor) {
    if (factor <= 1) return image;
    const int w = (image.width + factor - 1) / factor;
    const int h = (image.height + factor - 1) / factor;
    ColorImage out(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            Vec3 acc{};
            int n = 0;
            for (int rr = r * factor; rr < std::min(image.height, (r + 1) * factor); ++rr)
                for (int cc = c * factor; cc < std::min(image.width, (c + 1) * factor); ++cc) {
                    acc += image.at(rr, cc);
                    ++n;
                }
            out.at(r, c) = acc * (1.0 / n);
        }
    return out;
}

Mask downsample_mask(const Mask& mask, int factor) {
    if (factor <= 1) return mask;
    const int w = (mask.width + factor - 1) / factor;
    const int h = (mask.height + factor - 1) / factor;
    Mask out(w, h, 0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            int on = 0, n = 0;
            for (int rr = r * factor; rr < std::min(mask.height, (r + 1) * factor); ++rr)
                for (int cc = c * factor; cc < std::min(mask.width, (c + 1) * factor); ++cc) {
                    on += mask.at(rr, cc) != 0;
                    ++n;
                }
            out.at(r, c) = 2 * on > n;
        }
    return out;
}

DepthMap downsample_depth(const DepthMap& depth, int factor) {
    if (factor <= 1) return depth;
    const int w = (depth.width() + factor - 1) / factor;
    const int h = (depth.height() + factor - 1) / factor;
    DepthMap out(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            int n = 0;
            for (int rr = r * factor; rr < std::min(depth.height(), (r + 1) * factor); ++rr)
                for (int cc = c * factor; cc < std::min(depth.width(), (c + 1) * factor); ++cc) {
                    if (!depth.valid_at(rr, cc)) continue;
                    acc += depth.values.at(rr, cc);
                    ++n;
                }
            if (n > 0) out.set(r, c, acc / n);
        }
    return out;
}

namespace {

// Valid-aware bilinear sample of a depth map at continuous coordinates.
bool bilinear_depth(const DepthMap& depth, double u, double v, double& out) {
    const double x = u - 0.5, y = v - 0.5;
    const int ix = int(std::floor(x)), iy = int(std::floor(y));
    const double fx = x - ix, fy = y - iy;
    const double wts[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int cols[4] = {ix, ix + 1, ix, ix + 1};
    const int rows[4] = {iy, iy, iy + 1, iy + 1};
    double acc = 0.0, wsum = 0.0;
    for (int i = 0; i < 4; ++i) {
        const int r = std::clamp(rows[i], 0, depth.height() - 1);
        const int c = std::clamp(cols[i], 0, depth.width() - 1);
        if (!depth.valid_at(r, c) || wts[i] <= 0.0) continue;
        acc += wts[i] * depth.values.at(r, c);
        wsum += wts[i];
    }
    if (wsum <= 0.0) return false;
    out = acc / wsum;
    return true;
}

}  // namespace

DepthMap upsample_depth_into(const DepthMap& coarse, const DepthMap& reference,
                             int factor) {
    DepthMap out = reference;
    for (int r = 0; r < reference.height(); ++r)
        for (int c = 0; c < reference.width(); ++c) {
            if (!reference.valid_at(r, c)) continue;
            double d = 0.0;
            if (bilinear_depth(coarse, pixel_coord(c) / factor, pixel_coord(r) / factor, d))
                out.values.at(r, c) = d;
        }
    return out;
}

DepthMap resample_depth_bilinear(const DepthMap& depth, int width, int height) {
    DepthMap out(width, height);
    const double su = double(depth.width()) / width;
    const double sv = double(depth.height()) / height;
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            double d = 0.0;
            if (bilinear_depth(depth, pixel_coord(c) * su, pixel_coord(r) * sv, d))
                out.set(r, c, d);
        }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct LevelView {
    ColorImage image;
    CameraIntrinsics intr;
    CameraPose pose;
    Mask valid;           // photometric supervision mask
    Grid<double> w_grad;
    bool use_exposure = false;
    ExposureModel exposure;
};

}  // namespace

DepthMap refine_view(const CameraView& target, const DepthMap& init_depth,
                     const std::vector<CameraView>& contexts,
                     const RefineConfig& cfg, RefineDiagnostics* diag) {
    const auto t_start = std::chrono::steady_clock::now();
    RefineDiagnostics local;
    RefineDiagnostics& dg = diag ? *diag : local;
    auto finish = [&](DepthMap result) {
        dg.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                .count();
        return result;
    };

    if (cfg.pyramid_iters.size() != cfg.pyramid_factors.size())
        throw std::invalid_argument("refine_view: pyramid_iters/factors length mismatch");
    if (contexts.empty()) {
        dg.warning = "no context views; depth passed through";
        return finish(init_depth);
    }

    DepthMap work = init_depth;
    if (!init_depth.values.same_size(target.intr.width, target.intr.height))
        work = resample_depth_bilinear(init_depth, target.intr.width, target.intr.height);

    const int n_views = 1 + int(contexts.size());
    const double inv_views = 1.0 / n_views;

    for (size_t li = 0; li < cfg.pyramid_iters.size(); ++li) {
        const int factor = cfg.pyramid_factors[li];
        const int iters = cfg.pyramid_iters[li];
        if (iters <= 0) continue;

        // Level-resolution target data and cloud.
        std::vector<LevelView> views;
        LevelView tv;
        tv.image = downsample_image(target.image, factor);
        tv.intr = target.intr.downscaled(factor, tv.image.width, tv.image.height);
        tv.pose = target.pose;
        const Mask tmask = target.has_mask() ? downsample_mask(target.mask, factor) : Mask{};
        const DepthMap level_init = downsample_depth(work, factor);

        PixelGaussianCloud cloud;
        try {
            cloud = init_from_depth(tv.image, level_init, tv.intr, target.pose,
                                    tmask.empty() ? nullptr : &tmask);
        } catch (const std::invalid_argument&) {
            dg.warning = "no valid pixels; depth passed through";
            return finish(work);
        }
        tv.valid = cloud.to_depth_map().validity;
        tv.w_grad = gradient_weight(tv.image, cfg.weights.grad_min, cfg.weights.grad_max);
        views.push_back(std::move(tv));

        size_t context_pixels = 0;
        for (const CameraView& ctx : contexts) {
            LevelView cv;
            cv.image = downsample_image(ctx.image, factor);
            cv.intr = ctx.intr.downscaled(factor, cv.image.width, cv.image.height);
            cv.pose = ctx.pose;
            cv.valid = disocclusion_mask(level_init, views[0].intr, target.pose,
                                         cv.intr, ctx.pose, cfg.warp_radius);
            for (uint8_t m : cv.valid.data) context_pixels += m != 0;
            cv.w_grad = gradient_weight(cv.image, cfg.weights.grad_min, cfg.weights.grad_max);
            views.push_back(std::move(cv));
        }
        if (context_pixels == 0) {
            dg.warning = "no context overlap; depth passed through";
            return finish(work);
        }

        RasterSettings settings;
        settings.radius_threshold = cfg.radius_threshold;
        settings.depth_threshold =
            depth_threshold_from_init(level_init, views[0].intr, cfg.depth_slices);
        settings.alpha_cap = cfg.alpha_cap;
        settings.half_exponent = cfg.half_exponent;
        settings.z_near = cfg.z_near;
        settings.tile_size = cfg.tile_size;
        const BackwardOptions bwd_options{cfg.freeze_scale_grad};

        if (cfg.exposure) {
            for (size_t vi = 1; vi < views.size(); ++vi) {
                LevelView& cv = views[vi];
                const SplatProjection proj =
                    project_gaussians(cloud, cv.intr, cv.pose, settings);
                const RenderBuffers buf = rasterize(proj, cloud.colors(), settings,
                                                    cv.intr.width, cv.intr.height);
                cv.exposure = fit_exposure(buf.color, cv.image, cv.valid);
                cv.use_exposure = true;
            }
        }

        AdamState adam;
        adam.init(cloud.size());
        PlateauScheduler sched(cfg.lr_init, cfg.lr_factor, cfg.patience, cfg.lr_stop);

        std::vector<double> grads(cloud.size());
        for (int iter = 1; iter <= iters; ++iter) {
            std::fill(grads.begin(), grads.end(), 0.0);
            double loss_c = 0.0;
            long gate_skips = 0;

            for (const LevelView& view : views) {
                const SplatProjection proj =
                    project_gaussians(cloud, view.intr, view.pose, settings);
                RenderBuffers buf = rasterize(proj, cloud.colors(), settings,
                                              view.intr.width, view.intr.height);
                gate_skips += buf.depth_gate_skips;
                dg.singular_skips += buf.singular_skips;

                const ColorImage* rendered = &buf.color;
                ColorImage exposed;
                if (view.use_exposure) {
                    exposed = apply_exposure(buf.color, view.exposure);
                    rendered = &exposed;
                }
                PhotometricResult photo = photometric_loss(
                    *rendered, view.image, view.valid, view.w_grad, cfg.weights.lambda_c);
                loss_c += photo.value * inv_views;

                const Vec3 chain = view.use_exposure ? view.exposure.gain
                                                     : Vec3{1.0, 1.0, 1.0};
                for (Vec3& g : photo.grad.data) g = g.cwise_mul(chain) * inv_views;

                const DepthGradients dgrad =
                    backward(buf, photo.grad, nullptr, proj, cloud, view.intr,
                             settings, bwd_options);
                for (size_t k = 0; k < grads.size(); ++k) grads[k] += dgrad.grad[k];
            }

            const SmoothnessResult smooth =
                smoothness_loss(cloud, views[0].w_grad, cfg.weights.lambda_s);
            for (size_t k = 0; k < grads.size(); ++k) grads[k] += smooth.grad[k];

            dg.grad_skipped += adam_step(cloud.mutable_depths(), grads, adam, sched.lr());
            cloud.clamp_depths(cfg.clamp_delta, cfg.depth_floor);

            dg.log.push_back({int(li), iter, loss_c, smooth.value, sched.lr(), gate_skips});
            if (sched.step(loss_c + smooth.value)) break;
        }

        const DepthMap refined = cloud.to_depth_map();
        if (factor == 1) {
            for (int r = 0; r < refined.height(); ++r)
                for (int c = 0; c < refined.width(); ++c)
                    if (refined.valid_at(r, c) && work.valid_at(r, c))
                        work.values.at(r, c) = refined.values.at(r, c);
        } else {
            work = upsample_depth_into(refined, work, factor);
        }
    }
    return finish(work);
}

std::vector<Mask> consistency_filter(const std::vector<DepthMap>& refined,
                                     const std::vector<CameraIntrinsics>& intr,
                                     const std::vector<CameraPose>& poses,
                                     double tau, int min_views) {
    const size_t n = refined.size();
    if (n < 2 || intr.size() != n || poses.size() != n)
        throw std::invalid_argument("consistency_filter: needs >= 2 matching views");

    std::vector<Mask> masks(n);
    for (size_t i = 0; i < n; ++i) {
        const DepthMap& depth = refined[i];
        Mask& mask = masks[i];
        mask = Mask(depth.width(), depth.height(), 0);
#pragma omp parallel for schedule(static)
        for (int r = 0; r < depth.height(); ++r) {
            for (int c = 0; c < depth.width(); ++c) {
                if (!depth.valid_at(r, c)) continue;
                const Vec3 dir =
                    ray_direction(pixel_coord(c), pixel_coord(r), intr[i]);
                const Vec3 point = poses[i].translation +
                                   depth.values.at(r, c) * (poses[i].rotation * dir);
                int agree = 0;
                for (size_t j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const Projected prj = project(point, intr[j], poses[j]);
                    if (prj.behind) continue;
                    const int pc = int(std::floor(prj.u));
                    const int pr = int(std::floor(prj.v));
                    if (!refined[j].values.in_bounds(pr, pc) ||
                        !refined[j].valid_at(pr, pc))
                        continue;
                    const double other_z = ray_depth_to_z(
                        refined[j].values.at(pr, pc), pixel_coord(pc), pixel_coord(pr),
                        intr[j]);
                    if (std::abs(prj.z - other_z) / other_z <= tau) ++agree;
                }
                if (agree >= min_views) mask.at(r, c) = 1;
            }
        }
    }
    return masks;
}

std::vector<DepthMap> refine_dataset(const std::vector<CameraView>& views,
                                     const std::vector<DepthMap>& init_depths,
                                     const RefineConfig& cfg,
                                     std::vector<RefineDiagnostics>* diags) {
    if (views.size() != init_depths.size())
        throw std::invalid_argument("refine_dataset: views/depths count mismatch");
    const size_t n = views.size();
    std::vector<DepthMap> refined(n);
    if (diags) diags->assign(n, {});

    std::vector<CameraIntrinsics> all_intr(n);
    std::vector<CameraPose> all_poses(n);
    for (size_t i = 0; i < n; ++i) {
        all_intr[i] = views[i].intr;
        all_poses[i] = views[i].pose;
    }

    for (size_t i = 0; i < n; ++i) {
        RefineDiagnostics local;
        RefineDiagnostics& dg = diags ? (*diags)[i] : local;

        std::vector<CameraIntrinsics> cand_intr;
        std::vector<CameraPose> cand_poses;
        std::vector<size_t> cand_ids;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            cand_intr.push_back(all_intr[j]);
            cand_poses.push_back(all_poses[j]);
            cand_ids.push_back(j);
        }
        const std::vector<int> picks = select_context_views(
            views[i].intr, views[i].pose, cand_intr, cand_poses, cfg.n_context,
            cfg.fov_ratio);
        std::vector<CameraView> contexts;
        for (int p : picks) contexts.push_back(views[cand_ids[p]]);

        try {
            refined[i] = refine_view(views[i], init_depths[i], contexts, cfg, &dg);
        } catch (const std::exception& e) {
            dg.warning = std::string("refine failed: ") + e.what();
            refined[i] = init_depths[i];
        }
    }

    if (cfg.consistency_check && n >= 2) {
        const std::vector<Mask> keep = consistency_filter(
            refined, all_intr, all_poses, cfg.consistency_tau, cfg.consistency_min_views);
        for (size_t i = 0; i < n; ++i)
            for (int r = 0; r < refined[i].height(); ++r)
                for (int c = 0; c < refined[i].width(); ++c)
                    if (refined[i].valid_at(r, c) && !keep[i].at(r, c))
                        refined[i].invalidate(r, c);
    }
    return refined;
}

}  // namespace pagas

// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#include "pagas/backward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace pagas {

namespace {

constexpr double kAlphaFloor = 1e-6;

// Per-(Gaussian, view) derivatives of the screen-space quantities with
// respect to the ray depth d. All constant over pixels.
struct GaussDerivs {
    Vec2 dmean_dd;
    double dz_dd = 0.0;
    double dcov_dd[3] = {0.0, 0.0, 0.0};  // d(a, b, c)/dd
};

std::vector<GaussDerivs> derivative_contexts(const SplatProjection& proj,
                                             const PixelGaussianCloud& cloud,
                                             const CameraIntrinsics& intr,
                                             const BackwardOptions& options) {
    std::vector<GaussDerivs> ctx(proj.size());
#pragma omp parallel for schedule(static)
    for (long k = 0; k < long(proj.size()); ++k) {
        if (!proj.in_frustum[k]) continue;
        const Vec3& p = proj.p_cam[k];
        const Vec3& ray = proj.ray_cam[k];
        const double s = proj.scale[k];
        const double inv_z = 1.0 / p.z;
        const double inv_z2 = inv_z * inv_z;

        const double j00 = intr.fx * inv_z;
        const double j02 = -intr.fx * p.x * inv_z2;
        const double j11 = intr.fy * inv_z;
        const double j12 = -intr.fy * p.y * inv_z2;

        GaussDerivs& g = ctx[k];
        // mean2d = (fx x/z + cx, fy y/z + cy); d(mean)/dd = J * dp/dd, and
        // dp/dd is the unit ray in this camera's frame.
        g.dmean_dd = {j00 * ray.x + j02 * ray.z, j11 * ray.y + j12 * ray.z};
        g.dz_dd = ray.z;

        // cov = s^2 M + reg, M = J J^T. Chain through both p (Jacobian
        // drift) and s (depth-linear scale).
        const double fx2 = intr.fx * intr.fx;
        const double fy2 = intr.fy * intr.fy;
        const double fxfy = intr.fx * intr.fy;
        const double inv_z3 = inv_z2 * inv_z;
        const double inv_z4 = inv_z2 * inv_z2;
        const double inv_z5 = inv_z4 * inv_z;

        const double m00 = j00 * j00 + j02 * j02;
        const double m01 = j02 * j12;
        const double m11 = j11 * j11 + j12 * j12;

        const double dm00 = 2 * fx2 * p.x * inv_z4 * ray.x +
                            (-2 * fx2 * inv_z3 - 4 * fx2 * p.x * p.x * inv_z5) * ray.z;
        const double dm01 = fxfy * p.y * inv_z4 * ray.x + fxfy * p.x * inv_z4 * ray.y -
                            4 * fxfy * p.x * p.y * inv_z5 * ray.z;
        const double dm11 = 2 * fy2 * p.y * inv_z4 * ray.y +
                            (-2 * fy2 * inv_z3 - 4 * fy2 * p.y * p.y * inv_z5) * ray.z;

        const double s_sq = s * s;
        g.dcov_dd[0] = s_sq * dm00;
        g.dcov_dd[1] = s_sq * dm01;
        g.dcov_dd[2] = s_sq * dm11;
        if (!options.freeze_scale_grad) {
            const double ds_dd = cloud.scale_depth_slope(k);
            const double two_s_ds = 2.0 * s * ds_dd;
            g.dcov_dd[0] += two_s_ds * m00;
            g.dcov_dd[1] += two_s_ds * m01;
            g.dcov_dd[2] += two_s_ds * m11;
        }
    }
    return ctx;
}

// Per-contributor dL/dd terms of one pixel, appended to `sink`.
template <typename Sink>
inline void pixel_backward(int row, int col, const RenderBuffers& buf,
                           const Grid<Vec3>& grad_color,
                           const Grid<double>* grad_depthbuf,
                           const SplatProjection& proj, std::span<const Vec3> colors,
                           std::span<const GaussDerivs> ctx,
                           const RasterSettings& st, Sink&& sink) {
    const int count = buf.contrib_count.at(row, col);
    if (count == 0) return;
    const int offset = buf.contrib_offset.at(row, col);
    const Vec3 gc = grad_color.at(row, col);
    const double gd = grad_depthbuf ? grad_depthbuf->at(row, col) : 0.0;
    if (gc.x == 0 && gc.y == 0 && gc.z == 0 && gd == 0) return;

    const Vec2 q{pixel_coord(col), pixel_coord(row)};
    const double kappa = st.half_exponent ? 0.5 : 1.0;

    // Forward sweep: blend totals and the final transmittance.
    double weight_total = 0.0;
    double wz_total = 0.0;
    for (int i = 0; i < count; ++i) {
        const Contributor& cb = buf.contribs[offset + i];
        weight_total += cb.weight;
        wz_total += cb.weight * proj.z[cb.gaussian];
    }
    const Contributor& last = buf.contribs[offset + count - 1];
    const double t_end = last.transmittance - last.weight;

    const bool depth_path = grad_depthbuf && weight_total > kAlphaFloor && gd != 0.0;
    const double inv_wt = depth_path ? 1.0 / weight_total : 0.0;
    const double depth_mean = depth_path ? wz_total * inv_wt : 0.0;

    // Back-to-front sweep with suffix accumulators.
    Vec3 suffix_c{};
    double suffix_w = 0.0;
    double suffix_wz = 0.0;
    for (int i = count - 1; i >= 0; --i) {
        const Contributor& cb = buf.contribs[offset + i];
        const int k = cb.gaussian;
        const double z = proj.z[k];

        const Vec2 delta = q - proj.mean2d[k];
        const Vec2 v = proj.cov2d[k].solve(delta);
        const double g_val = std::exp(-kappa * delta.dot(v));
        const double alpha = std::min(g_val, st.alpha_cap);
        const double one_m_alpha = 1.0 - alpha;
        const double inv_1ma = one_m_alpha > 1e-12 ? 1.0 / one_m_alpha : 0.0;

        const Vec3 dc_dalpha =
            cb.transmittance * colors[k] - (suffix_c + t_end * st.background) * inv_1ma;
        double g_alpha = gc.dot(dc_dalpha);

        double dd = 0.0;
        if (depth_path) {
            const double da_dalpha = cb.transmittance - suffix_w * inv_1ma;
            const double dwz_dalpha = cb.transmittance * z - suffix_wz * inv_1ma;
            g_alpha += gd * (dwz_dalpha - depth_mean * da_dalpha) * inv_wt;
            // z enters the blend numerator directly.
            dd += gd * cb.weight * inv_wt * ctx[k].dz_dd;
        }

        if (g_val < st.alpha_cap) {  // capped alpha has zero slope in G
            const double common = g_alpha * kappa * g_val;
            dd += 2.0 * common * (v.x * ctx[k].dmean_dd.x + v.y * ctx[k].dmean_dd.y);
            dd += common * (v.x * v.x * ctx[k].dcov_dd[0] +
                            2.0 * v.x * v.y * ctx[k].dcov_dd[1] +
                            v.y * v.y * ctx[k].dcov_dd[2]);
        }
        sink(k, dd);

        suffix_c += cb.weight * colors[k];
        suffix_w += cb.weight;
        suffix_wz += cb.weight * z;
    }
}

void check_shapes(const RenderBuffers& buf, const Grid<Vec3>& grad_color,
                  const Grid<double>* grad_depthbuf, const SplatProjection& proj,
                  const PixelGaussianCloud& cloud) {
    if (proj.size() != cloud.size())
        throw std::invalid_argument("backward: projection/cloud size mismatch");
    if (!grad_color.same_size(buf.color.width, buf.color.height))
        throw std::invalid_argument("backward: grad_color shape mismatch");
    if (grad_depthbuf && !grad_depthbuf->same_size(buf.color.width, buf.color.height))
        throw std::invalid_argument("backward: grad_depthbuf shape mismatch");
}

}  // namespace

DepthGradients backward_reference(const RenderBuffers& buf,
                                  const Grid<Vec3>& grad_color,
                                  const Grid<double>* grad_depthbuf,
                                  const SplatProjection& proj,
                                  const PixelGaussianCloud& cloud,
                                  const CameraIntrinsics& view_intr,
                                  const RasterSettings& settings,
                                  const BackwardOptions& options) {
    check_shapes(buf, grad_color, grad_depthbuf, proj, cloud);
    const std::vector<GaussDerivs> ctx =
        derivative_contexts(proj, cloud, view_intr, options);

    DepthGradients out;
    out.grad.assign(cloud.size(), 0.0);
    out.touched.assign(cloud.size(), 0);
    for (int r = 0; r < buf.color.height; ++r)
        for (int c = 0; c < buf.color.width; ++c)
            pixel_backward(r, c, buf, grad_color, grad_depthbuf, proj,
                           cloud.colors(), ctx, settings, [&](int k, double dd) {
                               out.grad[k] += dd;
                               out.touched[k] = 1;
                           });
    return out;
}

DepthGradients backward(const RenderBuffers& buf, const Grid<Vec3>& grad_color,
                        const Grid<double>* grad_depthbuf,
                        const SplatProjection& proj, const PixelGaussianCloud& cloud,
                        const CameraIntrinsics& view_intr,
                        const RasterSettings& settings,
                        const BackwardOptions& options) {
    check_shapes(buf, grad_color, grad_depthbuf, proj, cloud);
    const std::vector<GaussDerivs> ctx =
        derivative_contexts(proj, cloud, view_intr, options);

    const int width = buf.color.width;
    const int height = buf.color.height;
    const int tile = std::max(1, settings.tile_size);
    const int tiles_x = (width + tile - 1) / tile;
    const int tiles_y = (height + tile - 1) / tile;
    const int n_tiles = tiles_x * tiles_y;

    std::vector<std::vector<std::pair<int, double>>> partials(n_tiles);

#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < n_tiles; ++t) {
        const int tc = t % tiles_x;
        const int tr = t / tiles_x;
        const int c_begin = tc * tile, c_end = std::min(width, c_begin + tile);
        const int r_begin = tr * tile, r_end = std::min(height, r_begin + tile);
        auto& local = partials[t];
        for (int r = r_begin; r < r_end; ++r)
            for (int c = c_begin; c < c_end; ++c)
                pixel_backward(r, c, buf, grad_color, grad_depthbuf, proj,
                               cloud.colors(), ctx, settings, [&](int k, double dd) {
                                   local.emplace_back(k, dd);
                               });
    }

    // Deterministic reduction: tiles merged in index order.
    DepthGradients out;
    out.grad.assign(cloud.size(), 0.0);
    out.touched.assign(cloud.size(), 0);
    for (const auto& local : partials) {
        for (const auto& [k, dd] : local) {
            out.grad[k] += dd;
            out.touched[k] = 1;
        }
    }
    return out;
}

}  // namespace pagas

// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#include "pagas/rasterizer.hpp"

#include <algorithm>
#include <cmath>

namespace pagas {

namespace {

constexpr double kMinCovDet = 1e-12;
constexpr double kAlphaFloor = 1e-6;  // depth-buffer normalization threshold

struct PixelTallies {
    long depth_gate_skips = 0;
    long singular_skips = 0;
};

// Blends one pixel. `candidates` must be in global blend order (z ascending,
// ties by index). Contributor records are appended to `out`.
inline void blend_pixel(const Vec2& q, std::span<const int> candidates,
                        const SplatProjection& proj, std::span<const Vec3> colors,
                        const RasterSettings& st, std::vector<Contributor>& out,
                        int& out_count, Vec3& out_color, double& out_alpha,
                        double& out_depth, PixelTallies& tallies) {
    const double radius_sq = st.radius_threshold * st.radius_threshold;
    const double kappa = st.half_exponent ? 0.5 : 1.0;

    double transmittance = 1.0;
    Vec3 color_acc{};
    double weight_acc = 0.0;
    double z_acc = 0.0;
    double z_front = 0.0;
    bool have_front = false;
    out_count = 0;

    for (int idx : candidates) {
        const Vec2 delta = q - proj.mean2d[idx];
        if (delta.squared_norm() > radius_sq) continue;
        if (!have_front) {
            z_front = proj.z[idx];
            have_front = true;
        } else if (proj.z[idx] > z_front + st.depth_threshold) {
            ++tallies.depth_gate_skips;
            continue;
        }
        const Sym2& cov = proj.cov2d[idx];
        if (cov.det() <= kMinCovDet) {
            ++tallies.singular_skips;
            continue;
        }
        const Vec2 v = cov.solve(delta);
        const double g = std::exp(-kappa * delta.dot(v));
        const double alpha = std::min(g, st.alpha_cap);
        const double weight = transmittance * alpha;
        out.push_back({idx, weight, transmittance});
        ++out_count;
        color_acc += weight * colors[idx];
        z_acc += weight * proj.z[idx];
        weight_acc += weight;
        transmittance *= 1.0 - alpha;
        if (transmittance < kTransmittanceFloor) break;
    }

    out_color = color_acc + transmittance * st.background;
    out_alpha = weight_acc;
    out_depth = weight_acc > kAlphaFloor ? z_acc / weight_acc : 0.0;
}

std::vector<int> blend_order(const SplatProjection& proj) {
    std::vector<int> order;
    order.reserve(proj.size());
    for (size_t k = 0; k < proj.size(); ++k)
        if (proj.in_frustum[k]) order.push_back(int(k));
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (proj.z[a] != proj.z[b]) return proj.z[a] < proj.z[b];
        return a < b;
    });
    return order;
}

}  // namespace

SplatProjection project_gaussians(const PixelGaussianCloud& cloud,
                                  const CameraIntrinsics& intr,
                                  const CameraPose& pose,
                                  const RasterSettings& settings) {
    const size_t count = cloud.size();
    SplatProjection proj;
    proj.mean2d.resize(count);
    proj.cov2d.resize(count);
    proj.z.resize(count);
    proj.extent_px.resize(count);
    proj.in_frustum.assign(count, 0);
    proj.p_cam.resize(count);
    proj.ray_cam.resize(count);
    proj.scale.resize(count);

    const std::vector<double>& depths = cloud.depths();
    const std::vector<Vec3>& dirs = cloud.ray_dirs();
    const Vec3 origin = cloud.origin();

#pragma omp parallel for schedule(static)
    for (long k = 0; k < long(count); ++k) {
        const Vec3 mu = origin + depths[k] * dirs[k];
        const Vec3 p = pose.world_to_camera(mu);
        proj.p_cam[k] = p;
        proj.ray_cam[k] = pose.rotation.transposed_mul(dirs[k]);
        proj.scale[k] = depths[k] * cloud.scale_depth_slope(k);
        proj.z[k] = p.z;
        if (p.z <= settings.z_near) continue;

        const double inv_z = 1.0 / p.z;
        const double u = intr.fx * p.x * inv_z + intr.cx;
        const double v = intr.fy * p.y * inv_z + intr.cy;
        const double j00 = intr.fx * inv_z;
        const double j02 = -intr.fx * p.x * inv_z * inv_z;
        const double j11 = intr.fy * inv_z;
        const double j12 = -intr.fy * p.y * inv_z * inv_z;

        const double s_sq = proj.scale[k] * proj.scale[k];
        const Sym2 cov{s_sq * (j00 * j00 + j02 * j02) + kCovRegularizer,
                       s_sq * (j02 * j12),
                       s_sq * (j11 * j11 + j12 * j12) + kCovRegularizer};
        const double extent = 3.0 * std::sqrt(cov.max_eigenvalue());

        proj.mean2d[k] = {u, v};
        proj.cov2d[k] = cov;
        proj.extent_px[k] = extent;
        proj.in_frustum[k] = u + extent >= 0.0 && u - extent <= intr.width &&
                             v + extent >= 0.0 && v - extent <= intr.height;
    }

    proj.order = blend_order(proj);
    return proj;
}

RenderBuffers rasterize_reference(const SplatProjection& proj,
                                  std::span<const Vec3> colors,
                                  const RasterSettings& settings, int width,
                                  int height) {
    RenderBuffers buf;
    buf.color = ColorImage(width, height);
    buf.alpha = Grid<double>(width, height, 0.0);
    buf.depth = Grid<double>(width, height, 0.0);
    buf.contrib_offset = Grid<int>(width, height, 0);
    buf.contrib_count = Grid<int>(width, height, 0);

    PixelTallies tallies;
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const Vec2 q{pixel_coord(c), pixel_coord(r)};
            buf.contrib_offset.at(r, c) = int(buf.contribs.size());
            blend_pixel(q, proj.order, proj, colors, settings, buf.contribs,
                        buf.contrib_count.at(r, c), buf.color.at(r, c),
                        buf.alpha.at(r, c), buf.depth.at(r, c), tallies);
        }
    }
    buf.depth_gate_skips = tallies.depth_gate_skips;
    buf.singular_skips = tallies.singular_skips;
    return buf;
}

RenderBuffers rasterize(const SplatProjection& proj, std::span<const Vec3> colors,
                        const RasterSettings& settings, int width, int height) {
    RenderBuffers buf;
    buf.color = ColorImage(width, height);
    buf.alpha = Grid<double>(width, height, 0.0);
    buf.depth = Grid<double>(width, height, 0.0);
    buf.contrib_offset = Grid<int>(width, height, 0);
    buf.contrib_count = Grid<int>(width, height, 0);

    const int tile = std::max(1, settings.tile_size);
    const int tiles_x = (width + tile - 1) / tile;
    const int tiles_y = (height + tile - 1) / tile;
    const int n_tiles = tiles_x * tiles_y;

    // Bin Gaussians to tiles in global blend order; each tile list stays
    // sorted because the walk is ordered.
    std::vector<std::vector<int>> tile_lists(n_tiles);
    const double rad = settings.radius_threshold;
    for (int idx : proj.order) {
        const Vec2& m = proj.mean2d[idx];
        // Pixel centers live at integer + 0.5; the gate reaches centers in
        // [m - rad, m + rad].
        const int c0 = std::max(0, int(std::ceil(m.x - rad - 0.5)));
        const int c1 = std::min(width - 1, int(std::floor(m.x + rad - 0.5)));
        const int r0 = std::max(0, int(std::ceil(m.y - rad - 0.5)));
        const int r1 = std::min(height - 1, int(std::floor(m.y + rad - 0.5)));
        if (c0 > c1 || r0 > r1) continue;
        for (int tr = r0 / tile; tr <= r1 / tile; ++tr)
            for (int tc = c0 / tile; tc <= c1 / tile; ++tc)
                tile_lists[tr * tiles_x + tc].push_back(idx);
    }

    struct TileResult {
        std::vector<Contributor> contribs;
        PixelTallies tallies;
    };
    std::vector<TileResult> results(n_tiles);

#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < n_tiles; ++t) {
        const int tc = t % tiles_x;
        const int tr = t / tiles_x;
        const int c_begin = tc * tile, c_end = std::min(width, c_begin + tile);
        const int r_begin = tr * tile, r_end = std::min(height, r_begin + tile);
        TileResult& res = results[t];
        res.contribs.reserve(size_t(c_end - c_begin) * (r_end - r_begin) * 4);
        for (int r = r_begin; r < r_end; ++r) {
            for (int c = c_begin; c < c_end; ++c) {
                const Vec2 q{pixel_coord(c), pixel_coord(r)};
                blend_pixel(q, tile_lists[t], proj, colors, settings, res.contribs,
                            buf.contrib_count.at(r, c), buf.color.at(r, c),
                            buf.alpha.at(r, c), buf.depth.at(r, c), res.tallies);
            }
        }
    }

    // Concatenate per-tile records in tile order and assign per-pixel
    // offsets; identical regardless of thread count.
    size_t total = 0;
    for (const TileResult& res : results) total += res.contribs.size();
    buf.contribs.reserve(total);
    for (int t = 0; t < n_tiles; ++t) {
        const int tc = t % tiles_x;
        const int tr = t / tiles_x;
        const int c_begin = tc * tile, c_end = std::min(width, c_begin + tile);
        const int r_begin = tr * tile, r_end = std::min(height, r_begin + tile);
        size_t cursor = buf.contribs.size();
        buf.contribs.insert(buf.contribs.end(), results[t].contribs.begin(),
                            results[t].contribs.end());
        for (int r = r_begin; r < r_end; ++r) {
            for (int c = c_begin; c < c_end; ++c) {
                buf.contrib_offset.at(r, c) = int(cursor);
                cursor += buf.contrib_count.at(r, c);
            }
        }
        buf.depth_gate_skips += results[t].tallies.depth_gate_skips;
        buf.singular_skips += results[t].tallies.singular_skips;
    }
    return buf;
}

}  // namespace pagas

// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#include "pagas/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "pagas/geometry.hpp"

namespace pagas {

namespace {

// Per-row partials summed in fixed order; result is independent of the
// thread count.
double deterministic_sum(const Grid<double>& field) {
    std::vector<double> row_sums(field.height, 0.0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < field.height; ++r) {
        double s = 0.0;
        for (int c = 0; c < field.width; ++c) s += field.at(r, c);
        row_sums[r] = s;
    }
    double total = 0.0;
    for (double s : row_sums) total += s;
    return total;
}

}  // namespace

Grid<double> gradient_weight(const ColorImage& image, double grad_min,
                             double grad_max) {
    Grid<double> w(image.width, image.height, 0.0);
    const double inv_range = 1.0 / (grad_max - grad_min);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < image.height; ++r) {
        for (int c = 0; c < image.width; ++c) {
            const Vec3& center = image.at(r, c);
            double acc = 0.0;
            int n = 0;
            const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            for (const auto& [nr, nc] : nbr) {
                if (!image.in_bounds(nr, nc)) continue;
                const Vec3 d = center - image.at(nr, nc);
                acc += (std::abs(d.x) + std::abs(d.y) + std::abs(d.z)) / 3.0;
                ++n;
            }
            const double g = n > 0 ? acc / n : 0.0;
            w.at(r, c) = std::clamp((g - grad_min) * inv_range, 0.0, 1.0);
        }
    }
    return w;
}

// ---------------------------------------------------------------------------
// SSIM with analytic gradient.

namespace {

constexpr int kSsimRadius = 5;  // 11-tap window
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, 2 * kSsimRadius + 1> ssim_kernel() {
    std::array<double, 2 * kSsimRadius + 1> k{};
    double sum = 0.0;
    for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
        k[i + kSsimRadius] = std::exp(-0.5 * i * i / (kSsimSigma * kSsimSigma));
        sum += k[i + kSsimRadius];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable zero-padded convolution with the symmetric SSIM kernel.
Grid<double> conv_zero(const Grid<double>& f) {
    static const auto kernel = ssim_kernel();
    const int w = f.width, h = f.height;
    Grid<double> tmp(w, h, 0.0), out(w, h, 0.0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            const int lo = std::max(-kSsimRadius, -c);
            const int hi = std::min(kSsimRadius, w - 1 - c);
            for (int i = lo; i <= hi; ++i)
                acc += kernel[i + kSsimRadius] * f.at(r, c + i);
            tmp.at(r, c) = acc;
        }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            const int lo = std::max(-kSsimRadius, -r);
            const int hi = std::min(kSsimRadius, h - 1 - r);
            for (int i = lo; i <= hi; ++i)
                acc += kernel[i + kSsimRadius] * tmp.at(r + i, c);
            out.at(r, c) = acc;
        }
    return out;
}

// Border renormalization mass: conv_zero applied to constant one.
Grid<double> conv_mass(int w, int h) {
    static const auto kernel = ssim_kernel();
    std::vector<double> zx(w, 0.0), zy(h, 0.0);
    for (int c = 0; c < w; ++c)
        for (int i = std::max(-kSsimRadius, -c); i <= std::min(kSsimRadius, w - 1 - c); ++i)
            zx[c] += kernel[i + kSsimRadius];
    for (int r = 0; r < h; ++r)
        for (int i = std::max(-kSsimRadius, -r); i <= std::min(kSsimRadius, h - 1 - r); ++i)
            zy[r] += kernel[i + kSsimRadius];
    Grid<double> z(w, h, 0.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) z.at(r, c) = zx[c] * zy[r];
    return z;
}

}  // namespace

PhotometricResult photometric_loss(const ColorImage& rendered,
                                   const ColorImage& reference, const Mask& valid,
                                   const Grid<double>& w_grad, double lambda_c) {
    const int w = rendered.width, h = rendered.height;
    PhotometricResult res;
    res.grad = Grid<Vec3>(w, h);

    size_t n_valid = 0;
    for (uint8_t m : valid.data) n_valid += m != 0;
    if (n_valid == 0) {
        res.empty_mask = true;
        return res;
    }
    const double inv_n3 = 1.0 / (3.0 * double(n_valid));

    // L1 term, gradient-weighted.
    Grid<double> l1_map(w, h, 0.0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (!valid.at(r, c)) continue;
            const Vec3 d = rendered.at(r, c) - reference.at(r, c);
            const double wg = w_grad.at(r, c);
            l1_map.at(r, c) = wg * (std::abs(d.x) + std::abs(d.y) + std::abs(d.z));
            const double s = (1.0 - lambda_c) * wg * inv_n3;
            auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
            res.grad.at(r, c) = {s * sgn(d.x), s * sgn(d.y), s * sgn(d.z)};
        }
    const double l1 = deterministic_sum(l1_map) * inv_n3;
    res.value = (1.0 - lambda_c) * l1;
    if (lambda_c == 0.0) return res;

    // D-SSIM term per channel.
    const Grid<double> mass = conv_mass(w, h);
    auto normalized = [&](const Grid<double>& f) {
        Grid<double> out = conv_zero(f);
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] /= mass.data[i];
        return out;
    };
    auto adjoint = [&](Grid<double> g) {
        for (size_t i = 0; i < g.data.size(); ++i) g.data[i] /= mass.data[i];
        return conv_zero(g);
    };

    double ssim_total = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        auto chan = [&](const ColorImage& img, int r, int c) {
            const Vec3& v = img.at(r, c);
            return ch == 0 ? v.x : (ch == 1 ? v.y : v.z);
        };
        Grid<double> x(w, h), y(w, h), xx(w, h), yy(w, h), xy(w, h);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double xv = chan(rendered, r, c);
                const double yv = chan(reference, r, c);
                x.at(r, c) = xv;
                y.at(r, c) = yv;
                xx.at(r, c) = xv * xv;
                yy.at(r, c) = yv * yv;
                xy.at(r, c) = xv * yv;
            }
        const Grid<double> mu_x = normalized(x);
        const Grid<double> mu_y = normalized(y);
        const Grid<double> m_xx = normalized(xx);
        const Grid<double> m_yy = normalized(yy);
        const Grid<double> m_xy = normalized(xy);

        Grid<double> ssim_map(w, h, 0.0);
        Grid<double> g_mu(w, h, 0.0), g_xx(w, h, 0.0), g_xy(w, h, 0.0);
#pragma omp parallel for schedule(static)
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double u = mu_x.at(r, c), v = mu_y.at(r, c);
                const double sxx = m_xx.at(r, c) - u * u;
                const double syy = m_yy.at(r, c) - v * v;
                const double sxy = m_xy.at(r, c) - u * v;
                const double a1 = 2.0 * u * v + kC1;
                const double a2 = 2.0 * sxy + kC2;
                const double b1 = u * u + v * v + kC1;
                const double b2 = sxx + syy + kC2;
                const double s = (a1 * a2) / (b1 * b2);
                if (valid.at(r, c)) ssim_map.at(r, c) = s;

                // d(loss)/d(ssim map): loss carries -lambda_c / (3N) per
                // valid pixel.
                const double t = valid.at(r, c) ? -lambda_c * inv_n3 : 0.0;
                if (t == 0.0) continue;
                const double inv_b1b2 = 1.0 / (b1 * b2);
                g_mu.at(r, c) = t * ((2.0 * v * a2 - 2.0 * v * a1) * inv_b1b2 -
                                     s * (2.0 * u / b1 - 2.0 * u / b2));
                g_xx.at(r, c) = t * (-s / b2);
                g_xy.at(r, c) = t * (2.0 * a1 * inv_b1b2);
            }
        ssim_total += deterministic_sum(ssim_map) * inv_n3;

        const Grid<double> back_mu = adjoint(std::move(g_mu));
        const Grid<double> back_xx = adjoint(std::move(g_xx));
        const Grid<double> back_xy = adjoint(std::move(g_xy));
#pragma omp parallel for schedule(static)
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double gx = back_mu.at(r, c) +
                                  2.0 * x.at(r, c) * back_xx.at(r, c) +
                                  y.at(r, c) * back_xy.at(r, c);
                Vec3& gv = res.grad.at(r, c);
                if (ch == 0) gv.x += gx;
                else if (ch == 1) gv.y += gx;
                else gv.z += gx;
            }
    }
    res.value += lambda_c * (1.0 - ssim_total);
    return res;
}

// ---------------------------------------------------------------------------

Mask disocclusion_mask(const DepthMap& target_depth,
                       const CameraIntrinsics& target_intr,
                       const CameraPose& target_pose,
                       const CameraIntrinsics& context_intr,
                       const CameraPose& context_pose, double warp_radius) {
    Mask mask(context_intr.width, context_intr.height, 0);
    const double rw_sq = warp_radius * warp_radius;
    for (int r = 0; r < target_depth.height(); ++r) {
        for (int c = 0; c < target_depth.width(); ++c) {
            if (!target_depth.valid_at(r, c)) continue;
            const Vec3 dir =
                ray_direction(pixel_coord(c), pixel_coord(r), target_intr);
            const Vec3 point = target_pose.translation +
                               target_depth.values.at(r, c) * (target_pose.rotation * dir);
            const Projected prj = project(point, context_intr, context_pose);
            if (prj.behind) continue;
            const int c0 = std::max(0, int(std::ceil(prj.u - warp_radius - 0.5)));
            const int c1 = std::min(context_intr.width - 1,
                                    int(std::floor(prj.u + warp_radius - 0.5)));
            const int r0 = std::max(0, int(std::ceil(prj.v - warp_radius - 0.5)));
            const int r1 = std::min(context_intr.height - 1,
                                    int(std::floor(prj.v + warp_radius - 0.5)));
            for (int mr = r0; mr <= r1; ++mr)
                for (int mc = c0; mc <= c1; ++mc) {
                    const double du = pixel_coord(mc) - prj.u;
                    const double dv = pixel_coord(mr) - prj.v;
                    if (du * du + dv * dv <= rw_sq) mask.at(mr, mc) = 1;
                }
        }
    }
    return mask;
}

// ---------------------------------------------------------------------------

SmoothnessResult smoothness_loss(const PixelGaussianCloud& cloud,
                                 const Grid<double>& w_grad, double lambda_s) {
    const int w = cloud.grid_width();
    const int h = cloud.grid_height();
    SmoothnessResult res;
    res.grad.assign(cloud.size(), 0.0);
    if (w < 3 || h < 3) return res;

    // Vertex map from the current depths.
    Grid<Vec3> vertex(w, h);
    Mask vvalid(w, h, 0);
    const std::vector<double>& depths = cloud.depths();
    const std::vector<Vec3>& dirs = cloud.ray_dirs();
    for (size_t k = 0; k < cloud.size(); ++k) {
        const PixelId id = cloud.pixel_ids()[k];
        vertex.at(id.row, id.col) = cloud.origin() + depths[k] * dirs[k];
        vvalid.at(id.row, id.col) = 1;
    }

    // Central-difference normals; the camera-facing sign is recorded and
    // treated as a constant by the gradient.
    Grid<Vec3> normal(w, h);
    Grid<double> inv_len(w, h, 0.0);
    Grid<double> flip(w, h, 1.0);
    Mask nvalid(w, h, 0);
#pragma omp parallel for schedule(static)
    for (int r = 1; r < h - 1; ++r)
        for (int c = 1; c < w - 1; ++c) {
            if (!vvalid.at(r, c) || !vvalid.at(r, c - 1) || !vvalid.at(r, c + 1) ||
                !vvalid.at(r - 1, c) || !vvalid.at(r + 1, c))
                continue;
            const Vec3 a = vertex.at(r, c + 1) - vertex.at(r, c - 1);
            const Vec3 b = vertex.at(r + 1, c) - vertex.at(r - 1, c);
            const Vec3 n = a.cross(b);
            const double len = n.norm();
            if (!(len > 0.0)) continue;
            double sign = 1.0;
            if (n.dot(vertex.at(r, c) - cloud.origin()) > 0.0) sign = -1.0;
            normal.at(r, c) = n * (sign / len);
            inv_len.at(r, c) = 1.0 / len;
            flip.at(r, c) = sign;
            nvalid.at(r, c) = 1;
        }

    // Loss terms at pixels whose right and down neighbors also carry normals.
    long count = 0;
    for (int r = 1; r < h - 1; ++r)
        for (int c = 1; c < w - 1; ++c)
            if (nvalid.at(r, c) && nvalid.at(r, c + 1) && nvalid.at(r + 1, c)) ++count;
    if (count == 0) return res;

    Grid<double> term(w, h, 0.0);
    Grid<Vec3> g_normal(w, h);
    const double inv_count = 1.0 / double(count);
    for (int r = 1; r < h - 1; ++r)
        for (int c = 1; c < w - 1; ++c) {
            if (!(nvalid.at(r, c) && nvalid.at(r, c + 1) && nvalid.at(r + 1, c)))
                continue;
            const Vec3& ni = normal.at(r, c);
            const Vec3& nr = normal.at(r, c + 1);
            const Vec3& nd = normal.at(r + 1, c);
            const double mean_dot = 0.5 * (ni.dot(nr) + ni.dot(nd));
            const double coef = 0.5 * lambda_s * (1.0 - w_grad.at(r, c));
            term.at(r, c) = coef * (1.0 - mean_dot);
            const double gdot = -coef * inv_count * 0.5;
            g_normal.at(r, c) += gdot * (nr + nd);
            g_normal.at(r, c + 1) += gdot * ni;
            g_normal.at(r + 1, c) += gdot * ni;
        }
    res.value = deterministic_sum(term) * inv_count;

    // Back through normalization, the cross product and the ray-linear
    // vertices.
    for (int r = 1; r < h - 1; ++r)
        for (int c = 1; c < w - 1; ++c) {
            if (!nvalid.at(r, c)) continue;
            const Vec3& u = g_normal.at(r, c);
            if (u.x == 0 && u.y == 0 && u.z == 0) continue;
            const Vec3& n = normal.at(r, c);  // unit, already flipped
            const Vec3 gn_raw = (u - n * n.dot(u)) * (flip.at(r, c) * inv_len.at(r, c));
            const Vec3 a = vertex.at(r, c + 1) - vertex.at(r, c - 1);
            const Vec3 b = vertex.at(r + 1, c) - vertex.at(r - 1, c);
            const Vec3 ga = b.cross(gn_raw);
            const Vec3 gb = gn_raw.cross(a);
            const int ke = cloud.index_at(r, c + 1);
            const int kw = cloud.index_at(r, c - 1);
            const int ks = cloud.index_at(r + 1, c);
            const int kn = cloud.index_at(r - 1, c);
            res.grad[ke] += ga.dot(dirs[ke]);
            res.grad[kw] -= ga.dot(dirs[kw]);
            res.grad[ks] += gb.dot(dirs[ks]);
            res.grad[kn] -= gb.dot(dirs[kn]);
        }
    return res;
}

// ---------------------------------------------------------------------------

ExposureModel fit_exposure(const ColorImage& rendered, const ColorImage& reference,
                           const Mask& valid) {
    ExposureModel model;
    double sum_r[3] = {0, 0, 0}, sum_f[3] = {0, 0, 0};
    double sum_rr[3] = {0, 0, 0}, sum_rf[3] = {0, 0, 0};
    long n = 0;
    for (int r = 0; r < rendered.height; ++r)
        for (int c = 0; c < rendered.width; ++c) {
            if (!valid.at(r, c)) continue;
            const Vec3& x = rendered.at(r, c);
            const Vec3& y = reference.at(r, c);
            const double xs[3] = {x.x, x.y, x.z};
            const double ys[3] = {y.x, y.y, y.z};
            for (int ch = 0; ch < 3; ++ch) {
                sum_r[ch] += xs[ch];
                sum_f[ch] += ys[ch];
                sum_rr[ch] += xs[ch] * xs[ch];
                sum_rf[ch] += xs[ch] * ys[ch];
            }
            ++n;
        }
    if (n == 0) return model;

    double gain[3], bias[3];
    for (int ch = 0; ch < 3; ++ch) {
        const double denom = n * sum_rr[ch] - sum_r[ch] * sum_r[ch];
        if (n < 100 || denom <= 1e-12 * n * n) {
            gain[ch] = 1.0;
            bias[ch] = (sum_f[ch] - sum_r[ch]) / n;
        } else {
            gain[ch] = (n * sum_rf[ch] - sum_r[ch] * sum_f[ch]) / denom;
            bias[ch] = (sum_f[ch] - gain[ch] * sum_r[ch]) / n;
        }
    }
    model.gain = {gain[0], gain[1], gain[2]};
    model.bias = {bias[0], bias[1], bias[2]};
    return model;
}

ColorImage apply_exposure(const ColorImage& rendered, const ExposureModel& model) {
    ColorImage out = rendered;
    for (Vec3& v : out.data) v = v.cwise_mul(model.gain) + model.bias;
    return out;
}

}  // namespace pagas

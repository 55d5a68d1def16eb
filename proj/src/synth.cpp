// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#include "pagas/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "pagas/geometry.hpp"

namespace pagas {

namespace {

constexpr double kPi = 3.14159265358979323846;

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

double hash_u01(uint64_t x) { return double(splitmix64(x) >> 11) * 0x1.0p-53; }

// Standard normal from a counter-based hash; order-independent and
// bit-reproducible across platforms.
double hash_gauss(uint64_t x) {
    const double u1 = std::max(hash_u01(x), 1e-300);
    const double u2 = hash_u01(x ^ 0x5851f42d4c957f2dull);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// 3D value noise in [0, 1] on an integer lattice.
double value_noise(const Vec3& p, uint64_t seed) {
    const double fx = std::floor(p.x), fy = std::floor(p.y), fz = std::floor(p.z);
    const int64_t xi = int64_t(fx), yi = int64_t(fy), zi = int64_t(fz);
    const double tx = smoothstep(p.x - fx);
    const double ty = smoothstep(p.y - fy);
    const double tz = smoothstep(p.z - fz);
    auto corner = [&](int64_t dx, int64_t dy, int64_t dz) {
        uint64_t h = seed;
        h = splitmix64(h ^ uint64_t(xi + dx) * 0x8da6b343ull);
        h = splitmix64(h ^ uint64_t(yi + dy) * 0xd8163841ull);
        h = splitmix64(h ^ uint64_t(zi + dz) * 0xcb1ab31full);
        return double(h >> 11) * 0x1.0p-53;
    };
    auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
    const double c00 = lerp(corner(0, 0, 0), corner(1, 0, 0), tx);
    const double c10 = lerp(corner(0, 1, 0), corner(1, 1, 0), tx);
    const double c01 = lerp(corner(0, 0, 1), corner(1, 0, 1), tx);
    const double c11 = lerp(corner(0, 1, 1), corner(1, 1, 1), tx);
    return lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz);
}

// Fixed oblique axes so texture cells never align with pixel rows.
const Vec3 kTexAxis1 = Vec3{1.0, 0.23, 0.11}.normalized();
const Vec3 kTexAxis2 = Vec3{-0.19, 1.0, 0.07}.normalized();

}  // namespace

Vec3 Texture::sample(const Vec3& p) const {
    switch (kind) {
        case Kind::Checker: {
            const long pu = long(std::floor(p.dot(kTexAxis1) / period));
            const long pv = long(std::floor(p.dot(kTexAxis2) / period));
            return ((pu + pv) & 1) ? color_b : color_a;
        }
        case Kind::ValueNoise: {
            // Two octaves keep the spectrum below the half-resolution
            // Nyquist limit of the preset scenes; the contrast expansion
            // sharpens blob boundaries so the local color gradient carries
            // signal comparable to real textures.
            const Vec3 q = p / period;
            const double n = (2.0 / 3.0) * value_noise(q, seed) +
                             (1.0 / 3.0) * value_noise(q * 2.0 + Vec3{17.3, 9.1, 4.7}, seed ^ 0xabcdull);
            const double expanded = std::clamp(0.5 + 2.5 * (n - 0.5), 0.0, 1.0);
            return color_a + (color_b - color_a) * expanded;
        }
        case Kind::Sinusoid: {
            const double s = 0.5 + 0.5 * std::sin(2.0 * kPi * p.dot(kTexAxis1) / period) *
                                       std::sin(2.0 * kPi * p.dot(kTexAxis2) / period);
            return color_a + (color_b - color_a) * s;
        }
    }
    return color_a;
}

namespace {

bool hit_plane(const PlaneSurface& s, const Vec3& o, const Vec3& d, double t_min,
               double& t_out) {
    const double denom = d.dot(s.normal);
    if (std::abs(denom) < 1e-12) return false;
    const double t = (s.point - o).dot(s.normal) / denom;
    if (t <= t_min) return false;
    if (s.half_u > 0.0 || s.half_v > 0.0) {
        const Vec3 rel = o + t * d - s.point;
        if (s.half_u > 0.0 && std::abs(rel.dot(s.u_axis)) > s.half_u) return false;
        if (s.half_v > 0.0 && std::abs(rel.dot(s.v_axis)) > s.half_v) return false;
    }
    t_out = t;
    return true;
}

bool hit_sphere(const SphereSurface& s, const Vec3& o, const Vec3& d, double t_min,
                double& t_out) {
    const Vec3 oc = o - s.center;
    const double b = oc.dot(d);
    const double c = oc.squared_norm() - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0.0) return false;
    const double sq = std::sqrt(disc);
    double t = -b - sq;
    if (t <= t_min) t = -b + sq;
    if (t <= t_min) return false;
    t_out = t;
    return true;
}

bool hit_box(const BoxSurface& s, const Vec3& o, const Vec3& d, double t_min,
             double& t_out) {
    double t0 = -1e300, t1 = 1e300;
    const double os[3] = {o.x, o.y, o.z};
    const double ds[3] = {d.x, d.y, d.z};
    const double lo[3] = {s.min.x, s.min.y, s.min.z};
    const double hi[3] = {s.max.x, s.max.y, s.max.z};
    for (int a = 0; a < 3; ++a) {
        if (std::abs(ds[a]) < 1e-15) {
            if (os[a] < lo[a] || os[a] > hi[a]) return false;
            continue;
        }
        double ta = (lo[a] - os[a]) / ds[a];
        double tb = (hi[a] - os[a]) / ds[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    const double t = t0 > t_min ? t0 : t1;
    if (t <= t_min) return false;
    t_out = t;
    return true;
}

}  // namespace

Hit trace(const SyntheticScene& scene, const Vec3& origin, const Vec3& dir,
          double t_min) {
    Hit best;
    for (size_t i = 0; i < scene.surfaces.size(); ++i) {
        const Surface& s = scene.surfaces[i];
        double t = 0.0;
        bool ok = false;
        switch (s.shape) {
            case Surface::Shape::Plane: ok = hit_plane(s.plane, origin, dir, t_min, t); break;
            case Surface::Shape::Sphere: ok = hit_sphere(s.sphere, origin, dir, t_min, t); break;
            case Surface::Shape::Box: ok = hit_box(s.box, origin, dir, t_min, t); break;
        }
        if (ok && (!best.valid || t < best.t)) {
            best.valid = true;
            best.t = t;
            best.point = origin + t * dir;
            best.surface_id = int(i);
        }
    }
    return best;
}

RaycastResult raycast(const SyntheticScene& scene, const CameraIntrinsics& intr,
                      const CameraPose& pose) {
    RaycastResult out;
    out.color = ColorImage(intr.width, intr.height, scene.background);
    out.ray_depth = DepthMap(intr.width, intr.height);
    out.z_depth = Grid<double>(intr.width, intr.height, 0.0);
    out.surface_ids = Grid<int>(intr.width, intr.height, -1);

    // Color integrates over the pixel footprint (box-averaged subsamples)
    // plus a small optical PSF; depth and ids are the exact center-ray
    // values. The PSF sigma is matched to the resolution of the pixel
    // splats so ground-truth depth is a true photometric optimum.
    constexpr int kAA = 3;
    constexpr double kPsfSigma = 0.55;  // pixels

#pragma omp parallel for schedule(static)
    for (int r = 0; r < intr.height; ++r) {
        for (int c = 0; c < intr.width; ++c) {
            const Vec3 dir_cam = ray_direction(pixel_coord(c), pixel_coord(r), intr);
            const Hit center = trace(scene, pose.translation, pose.rotation * dir_cam);

            Vec3 color_acc{};
            for (int sr = 0; sr < kAA; ++sr)
                for (int sc = 0; sc < kAA; ++sc) {
                    const double u = c + (sc + 0.5) / kAA;
                    const double v = r + (sr + 0.5) / kAA;
                    const Hit hit =
                        trace(scene, pose.translation,
                              pose.rotation * ray_direction(u, v, intr));
                    color_acc += hit.valid
                                     ? scene.surfaces[hit.surface_id].texture.sample(hit.point)
                                     : scene.background;
                }
            out.color.at(r, c) = color_acc * (1.0 / (kAA * kAA));

            if (!center.valid) continue;
            out.ray_depth.set(r, c, center.t);
            out.z_depth.at(r, c) = center.t * dir_cam.z;
            out.surface_ids.at(r, c) = center.surface_id;
        }
    }

    // Separable 3-tap PSF, renormalized at the borders.
    const double w1 = std::exp(-0.5 / (kPsfSigma * kPsfSigma));
    ColorImage tmp = out.color;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < intr.height; ++r)
        for (int c = 0; c < intr.width; ++c) {
            Vec3 acc = out.color.at(r, c);
            double norm = 1.0;
            if (c > 0) { acc += w1 * out.color.at(r, c - 1); norm += w1; }
            if (c + 1 < intr.width) { acc += w1 * out.color.at(r, c + 1); norm += w1; }
            tmp.at(r, c) = acc * (1.0 / norm);
        }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < intr.height; ++r)
        for (int c = 0; c < intr.width; ++c) {
            Vec3 acc = tmp.at(r, c);
            double norm = 1.0;
            if (r > 0) { acc += w1 * tmp.at(r - 1, c); norm += w1; }
            if (r + 1 < intr.height) { acc += w1 * tmp.at(r + 1, c); norm += w1; }
            out.color.at(r, c) = acc * (1.0 / norm);
        }
    return out;
}

bool point_visible(const SyntheticScene& scene, const CameraIntrinsics& intr,
                   const CameraPose& pose, const Vec3& point, double tol) {
    const Projected prj = project(point, intr, pose);
    if (prj.behind || prj.u < 0.0 || prj.u > intr.width || prj.v < 0.0 ||
        prj.v > intr.height)
        return false;
    const Vec3 to_point = point - pose.translation;
    const double dist = to_point.norm();
    if (dist <= 0.0) return false;
    const Hit hit = trace(scene, pose.translation, to_point / dist);
    return hit.valid && std::abs(hit.t - dist) <= tol * (1.0 + dist);
}

DepthMap perturb_depth(const DepthMap& depth, PerturbMode mode, double magnitude,
                       uint64_t seed) {
    DepthMap out = depth;
    const int w = depth.width(), h = depth.height();
    if (mode == PerturbMode::GaussianRelative) {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                if (!depth.valid_at(r, c)) continue;
                const double n = hash_gauss(splitmix64(seed) ^ (uint64_t(r) * w + c));
                out.values.at(r, c) = depth.values.at(r, c) * (1.0 + magnitude * n);
            }
    } else {
        // Sum of a few seeded sinusoids over normalized image coordinates.
        const int kWaves = 4;
        double fx[kWaves], fy[kWaves], ph[kWaves], amp[kWaves];
        double amp_sum = 0.0;
        for (int j = 0; j < kWaves; ++j) {
            fx[j] = 0.5 + 2.0 * hash_u01(splitmix64(seed) ^ uint64_t(4 * j + 0));
            fy[j] = 0.5 + 2.0 * hash_u01(splitmix64(seed) ^ uint64_t(4 * j + 1));
            ph[j] = 2.0 * kPi * hash_u01(splitmix64(seed) ^ uint64_t(4 * j + 2));
            amp[j] = 0.25 + hash_u01(splitmix64(seed) ^ uint64_t(4 * j + 3));
            amp_sum += amp[j];
        }
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                if (!depth.valid_at(r, c)) continue;
                double field = 0.0;
                for (int j = 0; j < kWaves; ++j)
                    field += amp[j] * std::sin(2.0 * kPi * (fx[j] * c / w + fy[j] * r / h) + ph[j]);
                out.values.at(r, c) = depth.values.at(r, c) * (1.0 + magnitude * field / amp_sum);
            }
    }
    return out;
}

SyntheticScene make_scene(std::string_view preset) {
    SyntheticScene scene;
    if (preset == "plane-checker") {
        Surface s;
        s.shape = Surface::Shape::Plane;
        s.plane.point = {0.0, 0.0, 0.3};
        s.plane.normal = Vec3{0.10, 0.06, -1.0}.normalized();
        s.texture.kind = Texture::Kind::Checker;
        s.texture.period = 0.02;
        // Moderate per-channel contrast: strong enough for w_grad at the
        // edges, low enough that regularized neighbor splats stay within
        // the self-render reproduction bound.
        s.texture.color_a = {0.72, 0.70, 0.38};
        s.texture.color_b = {0.32, 0.34, 0.58};
        scene.surfaces.push_back(s);
    } else if (preset == "sphere-noise") {
        // Sphere embedded in the backplane (a bulge, sunk for a gentle rim angle): depth is continuous
        // at the contact circle, so the coarse-to-fine upsample has no
        // silhouette to bleed across.
        Surface sphere;
        sphere.shape = Surface::Shape::Sphere;
        sphere.sphere.center = {0.0, 0.0, 0.585};
        sphere.sphere.radius = 0.12;
        sphere.texture.kind = Texture::Kind::ValueNoise;
        sphere.texture.period = 0.022;
        sphere.texture.color_a = {0.9, 0.62, 0.18};
        sphere.texture.color_b = {0.12, 0.32, 0.75};
        sphere.texture.seed = 7;
        scene.surfaces.push_back(sphere);

        Surface back;
        back.shape = Surface::Shape::Plane;
        back.plane.point = {0.0, 0.0, 0.5};
        back.plane.normal = Vec3{0.12, 0.08, -1.0}.normalized();
        back.texture.kind = Texture::Kind::ValueNoise;
        back.texture.period = 0.026;
        back.texture.color_a = {0.88, 0.85, 0.8};
        back.texture.color_b = {0.15, 0.25, 0.35};
        back.texture.seed = 21;
        scene.surfaces.push_back(back);
    } else if (preset == "step-occluder") {
        Surface wall;
        wall.shape = Surface::Shape::Plane;
        wall.plane.point = {0.0, 0.0, 0.4};
        wall.plane.normal = {0.0, 0.0, -1.0};
        wall.texture.kind = Texture::Kind::Checker;
        wall.texture.period = 0.025;
        wall.texture.color_a = {0.9, 0.85, 0.4};
        wall.texture.color_b = {0.2, 0.25, 0.5};
        scene.surfaces.push_back(wall);

        Surface step;
        step.shape = Surface::Shape::Box;
        step.box.min = {-0.14, -0.1, 0.26};
        step.box.max = {-0.01, 0.1, 0.34};
        step.texture.kind = Texture::Kind::Sinusoid;
        step.texture.period = 0.02;
        step.texture.color_a = {0.85, 0.3, 0.3};
        step.texture.color_b = {0.2, 0.6, 0.35};
        scene.surfaces.push_back(step);
    } else {
        throw std::invalid_argument("unknown scene preset: " + std::string(preset));
    }
    return scene;
}

Vec3 scene_target_point(std::string_view preset) {
    if (preset == "sphere-noise") return {0.0, 0.0, 0.42};
    if (preset == "step-occluder") return {0.0, 0.0, 0.36};
    return {0.0, 0.0, 0.3};
}

namespace {

CameraPose look_at(const Vec3& center, const Vec3& target) {
    const Vec3 fwd = (target - center).normalized();
    const Vec3 up{0.0, 1.0, 0.0};
    const Vec3 right = up.cross(fwd).normalized();
    const Vec3 down = fwd.cross(right);
    CameraPose pose;
    pose.rotation = Mat3::from_cols(right, down, fwd);
    pose.translation = center;
    return pose;
}

}  // namespace

std::vector<CameraPose> make_ring_poses(std::string_view preset, int count,
                                        uint64_t seed) {
    const Vec3 target = scene_target_point(preset);
    std::vector<CameraPose> poses;
    poses.reserve(count);
    poses.push_back(look_at({0.0, 0.0, 0.0}, target));
    if (count <= 1) return poses;

    const double radius = 0.15;
    const double angle0 = 2.0 * kPi * hash_u01(splitmix64(seed ^ 0xabcdef));
    for (int i = 1; i < count; ++i) {
        const double a = angle0 + 2.0 * kPi * (i - 1) / (count - 1);
        poses.push_back(look_at({radius * std::cos(a), radius * std::sin(a), 0.0}, target));
    }
    return poses;
}

CameraIntrinsics make_ring_intrinsics(int width, int height) {
    CameraIntrinsics intr;
    intr.fx = intr.fy = 1.2 * width;
    intr.cx = 0.5 * width;
    intr.cy = 0.5 * height;
    intr.width = width;
    intr.height = height;
    return intr;
}

}  // namespace pagas

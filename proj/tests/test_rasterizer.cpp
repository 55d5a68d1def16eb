// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "pagas/parallel.hpp"
#include "pagas/pipeline.hpp"
#include "pagas/rasterizer.hpp"
#include "test_helpers.hpp"

using namespace pagas;

namespace {

// Hand-built projection for blend-math tests: Gaussians dropped at given
// screen positions/depths with unit-ish covariance.
SplatProjection manual_projection(const std::vector<Vec2>& means,
                                  const std::vector<double>& zs) {
    SplatProjection proj;
    const size_t n = means.size();
    proj.mean2d = means;
    proj.z = zs;
    proj.cov2d.assign(n, Sym2{0.25 + kCovRegularizer, 0.0, 0.25 + kCovRegularizer});
    proj.extent_px.assign(n, 3.0);
    proj.in_frustum.assign(n, 1);
    proj.p_cam.assign(n, Vec3{0, 0, 1});
    proj.ray_cam.assign(n, Vec3{0, 0, 1});
    proj.scale.assign(n, 0.01);
    for (size_t i = 0; i < n; ++i) proj.order.push_back(int(i));
    std::sort(proj.order.begin(), proj.order.end(), [&](int a, int b) {
        if (proj.z[a] != proj.z[b]) return proj.z[a] < proj.z[b];
        return a < b;
    });
    return proj;
}

double max_channel_diff(const RenderBuffers& a, const RenderBuffers& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.color.data.size(); ++i) {
        const Vec3 d = a.color.data[i] - b.color.data[i];
        m = std::max({m, std::abs(d.x), std::abs(d.y), std::abs(d.z)});
    }
    return m;
}

}  // namespace

TEST_CASE("on-axis footprint is half a pixel before regularization") {
    // fx = fy = f, depth z, scale z / (2f): projected sigma = f * s / z = 0.5.
    const CameraIntrinsics intr = make_ring_intrinsics(16, 16);
    ColorImage image(16, 16, Vec3{1, 1, 1});
    DepthMap depth(16, 16);
    const double z = 0.4;
    // On-axis pixel: principal point sits on the corner between pixels, so
    // use a custom center pixel instead.
    CameraIntrinsics c_intr = intr;
    c_intr.cx = pixel_coord(8);
    c_intr.cy = pixel_coord(8);
    depth.set(8, 8, z);
    const PixelGaussianCloud cloud = init_from_depth(image, depth, c_intr, {});
    const SplatProjection proj = project_gaussians(cloud, c_intr, {}, {});
    REQUIRE(proj.size() == 1);
    CHECK(proj.in_frustum[0]);
    const double var = proj.cov2d[0].a - kCovRegularizer;
    CHECK(std::abs(std::sqrt(var) - 0.5) < 1e-9);
    CHECK(std::abs(std::sqrt(proj.cov2d[0].c - kCovRegularizer) - 0.5) < 1e-9);
    CHECK(std::abs(proj.cov2d[0].b) < 1e-12);
    CHECK(proj.mean2d[0].x == doctest::Approx(c_intr.cx));
    CHECK(proj.z[0] == doctest::Approx(z));
}

TEST_CASE("behind-camera Gaussians are flagged, index space preserved") {
    const CameraIntrinsics intr = make_ring_intrinsics(8, 8);
    ColorImage image(8, 8);
    DepthMap depth(8, 8);
    depth.set(4, 4, 1.0);
    const PixelGaussianCloud cloud = init_from_depth(image, depth, intr, {});

    CameraPose behind;  // camera moved past the Gaussian, still looking +z
    behind.translation = {0, 0, 2.0};
    const SplatProjection proj = project_gaussians(cloud, intr, behind, {});
    REQUIRE(proj.size() == cloud.size());
    CHECK_FALSE(proj.in_frustum[0]);
    CHECK(proj.order.empty());
}

TEST_CASE("doubling the scale doubles the projected sigma pre-regularization") {
    const CameraIntrinsics intr = make_ring_intrinsics(16, 16);
    ColorImage image(16, 16);
    DepthMap depth(16, 16);
    depth.set(5, 9, 0.5);
    PixelGaussianCloud cloud = init_from_depth(image, depth, intr, {});
    const SplatProjection p1 = project_gaussians(cloud, intr, {}, {});

    // Scale is linear in depth, but doubling depth also moves the Gaussian;
    // compare against a second cloud with doubled focal instead (halving
    // the pixel footprint) to isolate the scale factor. Simpler: scale the
    // covariance model directly through depth at fixed z by doubling depth
    // and renormalizing z: cov entries scale with (s/z)^2, so use the
    // analytic ratio.
    cloud.mutable_depths()[0] *= 2.0;
    const SplatProjection p2 = project_gaussians(cloud, intr, {}, {});
    // s doubles with depth and z doubles too; J entries carry 1/z, so the
    // projected sigma stays constant for an on-axis point. Check both
    // effects: sigma same, and the raw s doubled.
    CHECK(p2.scale[0] == doctest::Approx(2.0 * p1.scale[0]).epsilon(1e-12));
    CHECK(std::sqrt(p2.cov2d[0].a - kCovRegularizer) ==
          doctest::Approx(std::sqrt(p1.cov2d[0].a - kCovRegularizer)).epsilon(1e-6));

    // Isolated scale doubling at fixed geometry: build the covariance by
    // hand from the projection Jacobian.
    const Vec3 p = p1.p_cam[0];
    const double inv_z = 1.0 / p.z;
    const double j00 = intr.fx * inv_z, j02 = -intr.fx * p.x * inv_z * inv_z;
    const double m00 = j00 * j00 + j02 * j02;
    const double s = p1.scale[0];
    CHECK(std::sqrt((2 * s) * (2 * s) * m00) ==
          doctest::Approx(2.0 * std::sqrt(s * s * m00)).epsilon(1e-12));
}

TEST_CASE("single opaque Gaussian at a pixel center blends with background") {
    const std::vector<Vec3> colors{{0.8, 0.4, 0.2}};
    RasterSettings st;
    st.radius_threshold = 1.42;
    st.depth_threshold = 0.1;
    st.background = {0.1, 0.1, 0.1};
    const SplatProjection proj = manual_projection({{pixel_coord(2), pixel_coord(2)}}, {1.0});

    const RenderBuffers buf = rasterize_reference(proj, colors, st, 5, 5);
    // G = exp(0) = 1 capped to alpha_cap; pixel = (1 - w) bg + w c.
    const double w = st.alpha_cap;
    const Vec3 expect = st.background * (1.0 - w) + colors[0] * w;
    CHECK((buf.color.at(2, 2) - expect).norm() < 1e-12);
    CHECK(buf.alpha.at(2, 2) == doctest::Approx(w));
    CHECK(buf.depth.at(2, 2) == doctest::Approx(1.0));

    // alpha_cap -> 1 drives the pixel to the Gaussian color exactly.
    RasterSettings nearly_opaque = st;
    nearly_opaque.alpha_cap = 1.0 - 1e-12;
    const RenderBuffers buf2 = rasterize_reference(proj, colors, nearly_opaque, 5, 5);
    CHECK((buf2.color.at(2, 2) - colors[0]).norm() < 1e-9);
}

TEST_CASE("second Gaussian at the same pixel gets weight cap*(1-cap)") {
    const std::vector<Vec3> colors{{1, 0, 0}, {0, 1, 0}};
    RasterSettings st;
    const Vec2 q{pixel_coord(2), pixel_coord(2)};
    const SplatProjection proj = manual_projection({q, q}, {1.0, 1.01});
    const RenderBuffers buf = rasterize_reference(proj, colors, st, 5, 5);
    REQUIRE(buf.contrib_count.at(2, 2) == 2);
    const Contributor& rear = buf.contribs[buf.contrib_offset.at(2, 2) + 1];
    CHECK(rear.gaussian == 1);
    CHECK(rear.weight == doctest::Approx(st.alpha_cap * (1.0 - st.alpha_cap)));
    CHECK(rear.transmittance == doctest::Approx(1.0 - st.alpha_cap));
}

TEST_CASE("depth gate excludes Gaussians beyond z_front + threshold") {
    const std::vector<Vec3> colors{{1, 0, 0}, {0, 1, 0}};
    RasterSettings st;
    st.depth_threshold = 0.05;
    const Vec2 q{pixel_coord(2), pixel_coord(2)};
    // Rear sits at z_front + 2 * threshold: excluded entirely.
    const SplatProjection proj = manual_projection({q, q}, {1.0, 1.0 + 2 * st.depth_threshold});
    const RenderBuffers buf = rasterize_reference(proj, colors, st, 5, 5);
    REQUIRE(buf.contrib_count.at(2, 2) == 1);
    CHECK(buf.contribs[buf.contrib_offset.at(2, 2)].gaussian == 0);
    CHECK(buf.depth_gate_skips > 0);

    // Just inside the gate: blended.
    const SplatProjection proj2 = manual_projection({q, q}, {1.0, 1.0 + 0.5 * st.depth_threshold});
    CHECK(rasterize_reference(proj2, colors, st, 5, 5).contrib_count.at(2, 2) == 2);
}

TEST_CASE("tile-parallel rasterize equals the naive reference") {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        auto ms = testing::make_mini_scene("sphere-noise", 32, 32, 3, seed);
        // Perturbed depths create gate activity in the context views.
        const DepthMap noisy =
            perturb_depth(ms.gt_depth, PerturbMode::GaussianRelative, 0.02, seed);
        PixelGaussianCloud cloud =
            init_from_depth(ms.target_image, noisy, ms.intr, ms.poses[0]);
        RasterSettings st;
        st.depth_threshold = 0.015;
        for (const CameraPose& pose : ms.poses) {
            const SplatProjection proj = project_gaussians(cloud, ms.intr, pose, st);
            const RenderBuffers tiled = rasterize(proj, cloud.colors(), st, 32, 32);
            const RenderBuffers naive =
                rasterize_reference(proj, cloud.colors(), st, 32, 32);
            CHECK(max_channel_diff(tiled, naive) < 1e-6);
            // Contributor records agree too.
            REQUIRE(tiled.contribs.size() == naive.contribs.size());
            for (int r = 0; r < 32; ++r)
                for (int c = 0; c < 32; ++c) {
                    REQUIRE(tiled.contrib_count.at(r, c) == naive.contrib_count.at(r, c));
                    for (int i = 0; i < tiled.contrib_count.at(r, c); ++i) {
                        const Contributor& a =
                            tiled.contribs[tiled.contrib_offset.at(r, c) + i];
                        const Contributor& b =
                            naive.contribs[naive.contrib_offset.at(r, c) + i];
                        CHECK(a.gaussian == b.gaussian);
                        CHECK(a.weight == doctest::Approx(b.weight).epsilon(1e-12));
                    }
                }
        }
    }
}

TEST_CASE("blend weights and final transmittance sum to one") {
    auto ms = testing::make_mini_scene("sphere-noise", 24, 24, 2, 9);
    RasterSettings st;
    st.depth_threshold = 0.02;
    const SplatProjection proj = project_gaussians(ms.cloud, ms.intr, ms.poses[1], st);
    const RenderBuffers buf = rasterize(proj, ms.cloud.colors(), st, 24, 24);
    for (int r = 0; r < 24; ++r)
        for (int c = 0; c < 24; ++c) {
            const int count = buf.contrib_count.at(r, c);
            double weight_sum = 0.0;
            double t = 1.0;
            for (int i = 0; i < count; ++i) {
                const Contributor& cb = buf.contribs[buf.contrib_offset.at(r, c) + i];
                weight_sum += cb.weight;
                t = cb.transmittance * (1.0 - cb.weight / cb.transmittance);
                // Contributor order is nondecreasing in z.
                if (i > 0)
                    CHECK(proj.z[cb.gaussian] >=
                          proj.z[buf.contribs[buf.contrib_offset.at(r, c) + i - 1].gaussian]);
            }
            if (count == 0) t = 1.0;
            CHECK(std::abs(weight_sum + t - 1.0) < 1e-5);
        }
}

TEST_CASE("removing everywhere-gated Gaussians never changes the output") {
    auto ms = testing::make_mini_scene("step-occluder", 32, 32, 3, 4);
    RasterSettings st;
    st.depth_threshold = 0.01;
    const SplatProjection proj = project_gaussians(ms.cloud, ms.intr, ms.poses[2], st);
    const RenderBuffers before = rasterize(proj, ms.cloud.colors(), st, 32, 32);

    std::vector<uint8_t> contributes(ms.cloud.size(), 0);
    for (const Contributor& cb : before.contribs) contributes[cb.gaussian] = 1;
    size_t removed = 0;
    SplatProjection pruned = proj;
    pruned.order.clear();
    for (int idx : proj.order) {
        if (contributes[idx]) pruned.order.push_back(idx);
        else {
            pruned.in_frustum[idx] = 0;
            ++removed;
        }
    }
    REQUIRE(removed > 0);  // the step scene must exercise the gate
    const RenderBuffers after = rasterize(pruned, ms.cloud.colors(), st, 32, 32);
    CHECK(max_channel_diff(before, after) == 0.0);
}

TEST_CASE("self-render reproduces the input image on opaque pixels") {
    // Band-limited value-noise textures; hard checker edges necessarily
    // blur through the regularized splat footprint.
    auto ms = testing::make_mini_scene("sphere-noise", 96, 96, 1, 6);
    RasterSettings st;
    st.depth_threshold = depth_threshold_from_init(ms.gt_depth, ms.intr, 20);
    const SplatProjection proj = project_gaussians(ms.cloud, ms.intr, ms.poses[0], st);
    const RenderBuffers buf = rasterize(proj, ms.cloud.colors(), st, 96, 96);
    long checked = 0;
    for (int r = 0; r < 96; ++r)
        for (int c = 0; c < 96; ++c) {
            if (buf.alpha.at(r, c) <= 0.99) continue;
            const Vec3 d = buf.color.at(r, c) - ms.target_image.at(r, c);
            CHECK(std::abs(d.x) <= 0.1);
            CHECK(std::abs(d.y) <= 0.1);
            CHECK(std::abs(d.z) <= 0.1);
            ++checked;
        }
    CHECK(checked > 500);  // most of the frame is opaque
}

TEST_CASE("rasterize output is identical across thread counts") {
    auto ms = testing::make_mini_scene("sphere-noise", 32, 32, 2, 8);
    RasterSettings st;
    st.depth_threshold = 0.02;
    const SplatProjection proj = project_gaussians(ms.cloud, ms.intr, ms.poses[1], st);

    set_threads(1);
    const RenderBuffers one = rasterize(proj, ms.cloud.colors(), st, 32, 32);
    set_threads(8);
    const RenderBuffers eight = rasterize(proj, ms.cloud.colors(), st, 32, 32);
    set_threads(0);

    REQUIRE(one.color.data.size() == eight.color.data.size());
    CHECK(std::memcmp(one.color.data.data(), eight.color.data.data(),
                      one.color.data.size() * sizeof(Vec3)) == 0);
    CHECK(std::memcmp(one.depth.data.data(), eight.depth.data.data(),
                      one.depth.data.size() * sizeof(double)) == 0);
    REQUIRE(one.contribs.size() == eight.contribs.size());
    for (size_t i = 0; i < one.contribs.size(); ++i) {
        CHECK(one.contribs[i].gaussian == eight.contribs[i].gaussian);
        CHECK(one.contribs[i].weight == eight.contribs[i].weight);
        CHECK(one.contribs[i].transmittance == eight.contribs[i].transmittance);
    }
}

// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "pagas/cloud.hpp"
#include "pagas/geometry.hpp"
#include "test_helpers.hpp"

using namespace pagas;

namespace {

CameraIntrinsics tiny_intr(int w = 2, int h = 2) {
    CameraIntrinsics intr;
    intr.fx = intr.fy = 500.0;
    intr.cx = 0.5 * w;
    intr.cy = 0.5 * h;
    intr.width = w;
    intr.height = h;
    return intr;
}

}  // namespace

TEST_CASE("init_from_depth counts valid pixels") {
    const CameraIntrinsics intr = tiny_intr();
    ColorImage image(2, 2, Vec3{0.5, 0.2, 0.1});
    DepthMap depth(2, 2);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) depth.set(r, c, 1.0 + r + c);

    const PixelGaussianCloud full = init_from_depth(image, depth, intr, {});
    CHECK(full.size() == 4);
    for (size_t k = 0; k < 4; ++k) {
        const PixelId id = full.pixel_ids()[k];
        CHECK(full.depths()[k] == depth.values.at(id.row, id.col));
        CHECK((full.colors()[k] - image.at(id.row, id.col)).norm() == 0.0);
    }

    Mask mask(2, 2, 1);
    mask.at(1, 1) = 0;
    CHECK(init_from_depth(image, depth, intr, {}, &mask).size() == 3);

    depth.values.at(0, 0) = 0.0;  // zero depth -> excluded even while flagged valid
    CHECK(init_from_depth(image, depth, intr, {}).size() == 3);
    depth.values.at(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK(init_from_depth(image, depth, intr, {}).size() == 2);
}

TEST_CASE("init_from_depth rejects empty clouds and shape mismatches") {
    const CameraIntrinsics intr = tiny_intr();
    ColorImage image(2, 2);
    DepthMap empty(2, 2);
    CHECK_THROWS_AS(init_from_depth(image, empty, intr, {}), std::invalid_argument);

    DepthMap wrong(3, 2);
    wrong.set(0, 0, 1.0);
    CHECK_THROWS_AS(init_from_depth(image, wrong, intr, {}), std::invalid_argument);
}

TEST_CASE("positions are linear in depth and match backproject") {
    const CameraIntrinsics intr = tiny_intr(4, 4);
    ColorImage image(4, 4);
    DepthMap depth(4, 4);
    auto gen = testing::rng(3);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) depth.set(r, c, testing::uniform(gen, 0.5, 3.0));

    CameraPose pose;
    pose.rotation = rotation_from_quaternion(0.9, 0.1, 0.3, 0.1 * std::sqrt(6.0));
    // Normalize the quaternion before use.
    {
        const double n = std::sqrt(0.81 + 0.01 + 0.09 + 0.06);
        pose.rotation = rotation_from_quaternion(0.9 / n, 0.1 / n, 0.3 / n,
                                                 0.1 * std::sqrt(6.0) / n);
    }
    pose.translation = {0.4, -0.2, 0.7};

    PixelGaussianCloud cloud = init_from_depth(image, depth, intr, pose);
    const VertexMap vm = backproject(depth, intr, pose);
    const std::vector<Vec3> pos = cloud.positions();
    for (size_t k = 0; k < cloud.size(); ++k) {
        const PixelId id = cloud.pixel_ids()[k];
        CHECK((pos[k] - vm.positions.at(id.row, id.col)).norm() < 1e-12);
    }

    // Doubling a depth doubles the displacement from the origin.
    const Vec3 before = pos[0] - cloud.origin();
    cloud.mutable_depths()[0] *= 2.0;
    const Vec3 after = cloud.positions()[0] - cloud.origin();
    CHECK((after - before * 2.0).norm() < 1e-12);
}

TEST_CASE("positions at principal point with identity pose") {
    CameraIntrinsics intr = tiny_intr(3, 3);
    intr.cx = intr.cy = 1.5;  // center of pixel (1, 1)
    ColorImage image(3, 3);
    DepthMap depth(3, 3);
    depth.set(1, 1, 3.0);
    const PixelGaussianCloud cloud = init_from_depth(image, depth, intr, {});
    REQUIRE(cloud.size() == 1);
    CHECK((cloud.positions()[0] - Vec3{0, 0, 3}).norm() < 1e-15);
}

TEST_CASE("scales follow the conditioning formulas") {
    CameraIntrinsics intr = tiny_intr(3, 3);
    intr.cx = intr.cy = 1.5;
    ColorImage image(3, 3);
    DepthMap depth(3, 3);
    depth.set(1, 1, 1000.0);  // on-axis
    depth.set(0, 0, 2.0);
    PixelGaussianCloud cloud = init_from_depth(image, depth, intr, {});

    const std::vector<double> s = cloud.scales();
    for (size_t k = 0; k < cloud.size(); ++k) {
        const PixelId id = cloud.pixel_ids()[k];
        const double d_e = ray_depth_to_z(cloud.depths()[k], pixel_coord(id.col),
                                          pixel_coord(id.row), intr);
        CHECK(s[k] == doctest::Approx(gaussian_scale(d_e, intr)).epsilon(1e-12));
        if (id.row == 1 && id.col == 1) CHECK(s[k] == doctest::Approx(1.0));  // 1000/(2*500)
    }

    // Monotone in depth per pixel.
    cloud.mutable_depths()[0] *= 1.7;
    CHECK(cloud.scales()[0] > s[0]);
}

TEST_CASE("depth clamp bounds and floor") {
    const CameraIntrinsics intr = tiny_intr();
    ColorImage image(2, 2);
    DepthMap depth(2, 2);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) depth.set(r, c, 2.0);
    PixelGaussianCloud cloud = init_from_depth(image, depth, intr, {});

    cloud.mutable_depths()[0] = 10.0;
    cloud.mutable_depths()[1] = -5.0;
    cloud.clamp_depths(0.5);
    CHECK(cloud.depths()[0] == doctest::Approx(3.0));  // 2 * (1 + 0.5)
    CHECK(cloud.depths()[1] == doctest::Approx(1.0));  // 2 * (1 - 0.5)

    // delta = infinity disables the relative clamp but keeps the floor.
    cloud.mutable_depths()[0] = 50.0;
    cloud.mutable_depths()[1] = -1.0;
    cloud.clamp_depths(std::numeric_limits<double>::infinity());
    CHECK(cloud.depths()[0] == 50.0);
    CHECK(cloud.depths()[1] == 1e-6);
}

TEST_CASE("cloud exposes exactly one optimizable array of K scalars") {
    // Structural degrees-of-freedom audit at module level: K Gaussians hold
    // K mutable depths; colors, rays and ids stay fixed, and positions and
    // scales are pure functions of the depths.
    const auto ms = testing::make_mini_scene("plane-checker", 8, 8, 1, 5);
    PixelGaussianCloud cloud = ms.cloud;
    const size_t K = cloud.size();
    CHECK(cloud.mutable_depths().size() == K);
    CHECK(cloud.colors().size() == K);
    CHECK(cloud.ray_dirs().size() == K);

    const std::vector<Vec3> colors_before = cloud.colors();
    const std::vector<Vec3> pos_before = cloud.positions();
    cloud.mutable_depths()[0] += 0.01;
    CHECK((cloud.positions()[0] - pos_before[0]).norm() > 0.0);
    CHECK((cloud.colors()[0] - colors_before[0]).norm() == 0.0);
}

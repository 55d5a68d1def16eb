// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pagas/geometry.hpp"
#include "test_helpers.hpp"

using namespace pagas;

namespace {

CameraIntrinsics test_intr() {
    CameraIntrinsics intr;
    intr.fx = 500.0;
    intr.fy = 500.0;
    intr.cx = 320.0;
    intr.cy = 240.0;
    intr.width = 640;
    intr.height = 480;
    return intr;
}

CameraPose random_pose(std::mt19937_64& gen) {
    // Random rotation from a normalized quaternion, random center.
    double q[4];
    double norm = 0.0;
    for (double& v : q) {
        v = testing::uniform(gen, -1, 1);
        norm += v * v;
    }
    norm = std::sqrt(norm);
    CameraPose pose;
    pose.rotation = rotation_from_quaternion(q[0] / norm, q[1] / norm, q[2] / norm,
                                             q[3] / norm);
    pose.translation = {testing::uniform(gen, -2, 2), testing::uniform(gen, -2, 2),
                        testing::uniform(gen, -2, 2)};
    return pose;
}

}  // namespace

TEST_CASE("ray_direction basics") {
    const CameraIntrinsics intr = test_intr();

    const Vec3 on_axis = ray_direction(intr.cx, intr.cy, intr);
    CHECK(on_axis.x == doctest::Approx(0.0));
    CHECK(on_axis.y == doctest::Approx(0.0));
    CHECK(on_axis.z == doctest::Approx(1.0));

    const Vec3 d45 = ray_direction(intr.cx + intr.fx, intr.cy, intr);
    CHECK(d45.x == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(d45.y == doctest::Approx(0.0));
    CHECK(d45.z == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("ray_direction matches direct formula") {
    const CameraIntrinsics intr = test_intr();
    auto gen = testing::rng(11);
    for (int i = 0; i < 200; ++i) {
        const double u = testing::uniform(gen, 0, intr.width);
        const double v = testing::uniform(gen, 0, intr.height);
        const Vec3 dir = ray_direction(u, v, intr);
        const Vec3 expect =
            Vec3{(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0}.normalized();
        CHECK(dir.norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(dir.z > 0.0);
        CHECK((dir - expect).norm() < 1e-14);
    }
}

TEST_CASE("ray_depth_to_z on-axis and 45 degree cases") {
    const CameraIntrinsics intr = test_intr();
    CHECK(ray_depth_to_z(5.0, intr.cx, intr.cy, intr) == doctest::Approx(5.0));
    CHECK(ray_depth_to_z(5.0, intr.cx + intr.fx, intr.cy, intr) ==
          doctest::Approx(5.0 / std::sqrt(2.0)));
}

TEST_CASE("ray_depth_to_z algebraic inverse and monotonicity") {
    const CameraIntrinsics intr = test_intr();
    auto gen = testing::rng(12);
    for (int i = 0; i < 200; ++i) {
        const double u = testing::uniform(gen, 0, intr.width);
        const double v = testing::uniform(gen, 0, intr.height);
        const double d = testing::uniform(gen, 0.01, 50.0);
        const double z = ray_depth_to_z(d, u, v, intr);
        const double nx = (u - intr.cx) / intr.fx;
        const double ny = (v - intr.cy) / intr.fy;
        CHECK(z * std::sqrt(nx * nx + ny * ny + 1.0) == doctest::Approx(d).epsilon(1e-12));
        CHECK(z <= d);
        CHECK(z > 0.0);
        // Monotone in d at a fixed pixel.
        CHECK(ray_depth_to_z(d * 1.5, u, v, intr) > z);
    }
    CHECK(ray_depth_to_z(3.0, intr.cx, intr.cy, intr) == 3.0);
}

TEST_CASE("gaussian_scale spot values and linearity") {
    CameraIntrinsics intr = test_intr();
    CHECK(gaussian_scale(1000.0, intr) == doctest::Approx(1.0));  // fx = fy = 500

    intr.fx = 400.0;
    intr.fy = 900.0;  // sqrt(fx fy) = 600
    CHECK(gaussian_scale(600.0, intr) == doctest::Approx(0.5));

    auto gen = testing::rng(13);
    for (int i = 0; i < 100; ++i) {
        const double d_e = testing::uniform(gen, 1e-3, 100.0);
        CHECK(gaussian_scale(2.0 * d_e, intr) ==
              doctest::Approx(2.0 * gaussian_scale(d_e, intr)).epsilon(1e-12));
    }
}

TEST_CASE("backproject identity pose basics") {
    CameraIntrinsics intr = test_intr();
    intr.width = 4;
    intr.height = 4;
    intr.cx = 2.5;  // principal point on the center of pixel (2, 2)
    intr.cy = 2.5;

    DepthMap depth(4, 4);
    depth.set(2, 2, 1.0);
    CameraPose pose;

    VertexMap vm = backproject(depth, intr, pose);
    REQUIRE(vm.valid_at(2, 2));
    CHECK((vm.positions.at(2, 2) - Vec3{0, 0, 1}).norm() < 1e-15);
    CHECK_FALSE(vm.valid_at(0, 0));  // invalid propagates

    pose.translation = {3.0, -1.0, 2.0};
    vm = backproject(depth, intr, pose);
    CHECK((vm.positions.at(2, 2) - Vec3{3, -1, 3}).norm() < 1e-15);
}

TEST_CASE("project pinhole definition and behind-camera flag") {
    const CameraIntrinsics intr = test_intr();
    const CameraPose identity;

    const Projected center = project({0, 0, 1}, intr, identity);
    CHECK_FALSE(center.behind);
    CHECK(center.u == doctest::Approx(intr.cx));
    CHECK(center.v == doctest::Approx(intr.cy));
    CHECK(center.z == doctest::Approx(1.0));

    const Projected generic = project({0.3, -0.2, 2.5}, intr, identity);
    CHECK(generic.u == doctest::Approx(intr.fx * 0.3 / 2.5 + intr.cx));
    CHECK(generic.v == doctest::Approx(intr.fy * -0.2 / 2.5 + intr.cy));

    CHECK(project({0, 0, -1}, intr, identity).behind);
    CHECK(project({0, 0, 0}, intr, identity).behind);
}

TEST_CASE("project and backproject are mutual inverses") {
    const CameraIntrinsics intr = test_intr();
    auto gen = testing::rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const CameraPose pose = random_pose(gen);
        // Rotation stays orthonormal with det +1.
        const Mat3 rtr = pose.rotation.transpose() * pose.rotation;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(std::abs(rtr.m[i][j] - (i == j ? 1.0 : 0.0)) < 1e-9);
        CHECK(pose.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));

        for (int i = 0; i < 20; ++i) {
            const int c = int(testing::uniform(gen, 0, intr.width));
            const int r = int(testing::uniform(gen, 0, intr.height));
            const double d = testing::uniform(gen, 0.1, 10.0);
            DepthMap depth(intr.width, intr.height);
            depth.set(r, c, d);
            const VertexMap vm = backproject(depth, intr, pose);
            const Projected prj = project(vm.positions.at(r, c), intr, pose);
            REQUIRE_FALSE(prj.behind);
            CHECK(prj.u == doctest::Approx(pixel_coord(c)).epsilon(1e-9));
            CHECK(prj.v == doctest::Approx(pixel_coord(r)).epsilon(1e-9));
            const double z_expect = ray_depth_to_z(d, pixel_coord(c), pixel_coord(r), intr);
            CHECK(prj.z == doctest::Approx(z_expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("normals of a fronto-parallel plane face the camera") {
    CameraIntrinsics intr = test_intr();
    intr.width = 8;
    intr.height = 8;
    intr.cx = 4.0;
    intr.cy = 4.0;
    intr.fx = intr.fy = 10.0;
    const CameraPose identity;

    DepthMap depth(8, 8);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
            // Constant z-plane: ray depth = z / cos factor.
            const double zf = ray_to_z_factor(pixel_coord(c), pixel_coord(r), intr);
            depth.set(r, c, 2.0 / zf);
        }
    const NormalMap nm = normals_from_depth(backproject(depth, intr, identity));
    int checked = 0;
    for (int r = 1; r < 7; ++r)
        for (int c = 1; c < 7; ++c) {
            REQUIRE(nm.valid_at(r, c));
            CHECK((nm.normals.at(r, c) - Vec3{0, 0, -1}).norm() < 1e-9);
            ++checked;
        }
    CHECK(checked == 36);
    CHECK_FALSE(nm.valid_at(0, 0));  // border

    // Unit norm everywhere valid.
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            if (nm.valid_at(r, c))
                CHECK(std::abs(nm.normals.at(r, c).norm() - 1.0) < 1e-6);
}

TEST_CASE("normals of a slanted plane match the analytic gradient") {
    CameraIntrinsics intr = test_intr();
    intr.width = 16;
    intr.height = 16;
    intr.cx = intr.cy = 8.0;
    intr.fx = intr.fy = 20.0;
    const CameraPose identity;
    const double slope = 0.3;  // plane z = slope * x + 2

    DepthMap depth(16, 16);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) {
            const Vec3 dir = ray_direction(pixel_coord(c), pixel_coord(r), intr);
            // Intersect the ray with z = slope x + 2: t dz = slope t dx + 2.
            const double t = 2.0 / (dir.z - slope * dir.x);
            depth.set(r, c, t);
        }
    const NormalMap nm = normals_from_depth(backproject(depth, intr, identity));
    const Vec3 expect = Vec3{slope, 0.0, -1.0}.normalized();  // camera-facing sign
    for (int r = 2; r < 14; ++r)
        for (int c = 2; c < 14; ++c) {
            REQUIRE(nm.valid_at(r, c));
            CHECK((nm.normals.at(r, c) - expect).norm() < 1e-6);
            CHECK(nm.normals.at(r, c)
                      .dot(backproject(depth, intr, identity).positions.at(r, c)) < 0.0);
        }
}

TEST_CASE("normals degenerate collinear neighborhood is invalid") {
    // All vertices on one line: cross products vanish.
    VertexMap vm(3, 3, Frame::Camera);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            vm.positions.at(r, c) = Vec3{double(r + c), 0.0, 1.0};
            vm.validity.at(r, c) = 1;
        }
    const NormalMap nm = normals_from_depth(vm);
    CHECK_FALSE(nm.valid_at(1, 1));
}

TEST_CASE("select_context_views ranks by optical axis alignment") {
    const CameraIntrinsics intr = test_intr();
    CameraPose target;  // axis +z

    auto pose_with_axis_dot = [&](double dot) {
        // Rotate about x so the z axis tilts to the requested alignment.
        const double angle = std::acos(dot);
        CameraPose p;
        p.rotation = rotation_from_quaternion(std::cos(angle / 2), std::sin(angle / 2), 0, 0);
        return p;
    };

    std::vector<CameraIntrinsics> ci{intr, intr};
    std::vector<CameraPose> cp{pose_with_axis_dot(0.3), pose_with_axis_dot(0.9)};
    CHECK(select_context_views(intr, target, ci, cp, 1) == std::vector<int>{1});
    CHECK(select_context_views(intr, target, ci, cp, 2) == std::vector<int>{1, 0});

    // Tie in dot product: lower index first.
    std::vector<CameraPose> tie{pose_with_axis_dot(0.7), pose_with_axis_dot(0.7)};
    CHECK(select_context_views(intr, target, ci, tie, 2) == std::vector<int>{0, 1});
}

TEST_CASE("select_context_views filters mismatched fields of view") {
    const CameraIntrinsics intr = test_intr();
    CameraIntrinsics tele = intr;
    tele.fx *= 2.0;  // half the horizontal FOV: ratio > 1.5, excluded
    const CameraPose target;
    std::vector<CameraIntrinsics> ci{tele, intr};
    std::vector<CameraPose> cp{target, target};
    const auto picked = select_context_views(intr, target, ci, cp, 2);
    CHECK(picked == std::vector<int>{1});  // shortfall reported by short list
}

TEST_CASE("select_context_views is permutation invariant") {
    const CameraIntrinsics intr = test_intr();
    const CameraPose target;
    auto gen = testing::rng(15);
    std::vector<CameraIntrinsics> ci;
    std::vector<CameraPose> cp;
    for (int i = 0; i < 8; ++i) {
        ci.push_back(intr);
        cp.push_back(random_pose(gen));
    }
    const auto baseline = select_context_views(intr, target, ci, cp, 3);
    // Reverse the candidate ordering and map indices back.
    std::vector<CameraIntrinsics> ci_rev(ci.rbegin(), ci.rend());
    std::vector<CameraPose> cp_rev(cp.rbegin(), cp.rend());
    auto reversed = select_context_views(intr, target, ci_rev, cp_rev, 3);
    for (int& idx : reversed) idx = int(cp.size()) - 1 - idx;
    CHECK(baseline == reversed);
}

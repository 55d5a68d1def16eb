// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0
//
// Benchmarks the tile-parallel rasterize/backward kernels against the serial
// reference paths and verifies they agree.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "pagas/backward.hpp"
#include "pagas/parallel.hpp"
#include "pagas/pipeline.hpp"
#include "pagas/synth.hpp"

using namespace pagas;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        fn();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    const int size = argc > 1 ? std::atoi(argv[1]) : 256;
    const int reps = argc > 2 ? std::atoi(argv[2]) : 3;
    set_threads(0);

    const SyntheticScene scene = make_scene("sphere-noise");
    const CameraIntrinsics intr = make_ring_intrinsics(size, size);
    const auto poses = make_ring_poses("sphere-noise", 2, 1);
    const RaycastResult rc = raycast(scene, intr, poses[0]);
    const DepthMap noisy = perturb_depth(rc.ray_depth, PerturbMode::GaussianRelative,
                                         0.01, 7);
    PixelGaussianCloud cloud = init_from_depth(rc.color, noisy, intr, poses[0]);

    RasterSettings st;
    st.depth_threshold = depth_threshold_from_init(noisy, intr, 20);

    std::printf("scene: sphere-noise, %dx%d px, %zu Gaussians, %d threads\n", size,
                size, cloud.size(), max_threads());

    const SplatProjection proj = project_gaussians(cloud, intr, poses[1], st);

    RenderBuffers tiled, naive;
    const double t_tiled = time_best_of(reps, [&] {
        tiled = rasterize(proj, cloud.colors(), st, size, size);
    });
    const double t_naive = time_best_of(reps, [&] {
        naive = rasterize_reference(proj, cloud.colors(), st, size, size);
    });

    double max_diff = 0.0;
    for (size_t i = 0; i < tiled.color.data.size(); ++i) {
        const Vec3 d = tiled.color.data[i] - naive.color.data[i];
        max_diff = std::max({max_diff, std::abs(d.x), std::abs(d.y), std::abs(d.z)});
    }
    std::printf("rasterize      tile-parallel %8.3f ms   serial reference %10.3f ms"
                "   speedup %6.1fx   max diff %.2e\n",
                1e3 * t_tiled, 1e3 * t_naive, t_naive / t_tiled, max_diff);

    Grid<Vec3> grad_color(size, size, Vec3{0.3, -0.2, 0.5});
    DepthGradients par, ser;
    const double t_bwd = time_best_of(reps, [&] {
        par = backward(tiled, grad_color, nullptr, proj, cloud, intr, st);
    });
    const double t_bwd_ref = time_best_of(reps, [&] {
        ser = backward_reference(tiled, grad_color, nullptr, proj, cloud, intr, st);
    });
    double max_grad_diff = 0.0;
    for (size_t k = 0; k < par.grad.size(); ++k)
        max_grad_diff = std::max(max_grad_diff, std::abs(par.grad[k] - ser.grad[k]));
    std::printf("backward       tile-parallel %8.3f ms   serial reference %10.3f ms"
                "   speedup %6.1fx   max diff %.2e\n",
                1e3 * t_bwd, 1e3 * t_bwd_ref, t_bwd_ref / t_bwd, max_grad_diff);

    const bool ok = max_diff < 1e-6 && max_grad_diff < 1e-10;
    std::printf("%s\n", ok ? "kernels agree" : "KERNEL MISMATCH");
    return ok ? 0 : 1;
}

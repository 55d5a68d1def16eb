// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <vector>

#include "pagas/camera.hpp"
#include "pagas/grid.hpp"

namespace pagas {

/// Dense truncated signed distance volume. tsdf is normalized by the
/// truncation distance (in [-1, 1], positive in front of the surface toward
/// the camera); weight counts observations.
struct TsdfVolume {
    Vec3 origin;
    double voxel_size = 0.01;
    int dims[3] = {0, 0, 0};
    std::vector<float> tsdf;
    std::vector<float> weight;
    std::vector<Vec3> color;  // allocated lazily on first colored integration

    TsdfVolume() = default;
    TsdfVolume(const Vec3& origin_, double voxel_size_, int nx, int ny, int nz)
        : origin(origin_), voxel_size(voxel_size_), dims{nx, ny, nz},
          tsdf(size_t(nx) * ny * nz, 1.0f), weight(size_t(nx) * ny * nz, 0.0f) {}

    size_t index(int i, int j, int k) const {
        return (size_t(k) * dims[1] + j) * dims[0] + i;
    }
    Vec3 voxel_center(int i, int j, int k) const {
        return origin + Vec3{(i + 0.5) * voxel_size, (j + 0.5) * voxel_size,
                             (k + 0.5) * voxel_size};
    }
    size_t voxel_count() const { return tsdf.size(); }
};

/// Axis-aligned volume covering the back-projection of every valid depth,
/// inflated by 3 * truncation. Depth values here are ray lengths.
TsdfVolume make_volume_for_depths(std::span<const DepthMap> depths,
                                  std::span<const CameraIntrinsics> intr,
                                  std::span<const CameraPose> poses,
                                  double voxel_size, double truncation);

/// Projective TSDF update from one view. `z_depth` holds camera z-depths
/// with `valid` marking measured pixels; `color` is optional per-vertex
/// color input. For each voxel in the frustum, sd = depth(pixel) - voxel z,
/// integrated as a running weighted average of clamp(sd / truncation, -1, 1)
/// wherever sd > -truncation, one unit of weight per observation.
void tsdf_integrate(TsdfVolume& volume, const Grid<double>& z_depth,
                    const Mask& valid, const ColorImage* color,
                    const CameraIntrinsics& intr, const CameraPose& pose,
                    double truncation);

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec3> colors;  // empty when uncolored

    bool empty() const { return triangles.empty(); }
};

/// Zero-level-set extraction with the 256-case table and linear edge
/// interpolation. Cells touching any unobserved (zero-weight) corner are
/// skipped; degenerate triangles are dropped. An empty surface yields an
/// empty mesh.
TriangleMesh marching_cubes(const TsdfVolume& volume, double iso = 0.0);

}  // namespace pagas

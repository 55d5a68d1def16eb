// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#include "pagas/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pagas {

Vec3 ray_direction(double u, double v, const CameraIntrinsics& intr) {
    const Vec3 dir{(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0};
    return dir.normalized();
}

double ray_to_z_factor(double u, double v, const CameraIntrinsics& intr) {
    const double nx = (u - intr.cx) / intr.fx;
    const double ny = (v - intr.cy) / intr.fy;
    return 1.0 / std::sqrt(nx * nx + ny * ny + 1.0);
}

double ray_depth_to_z(double d, double u, double v, const CameraIntrinsics& intr) {
    return d * ray_to_z_factor(u, v, intr);
}

double gaussian_scale(double d_e, const CameraIntrinsics& intr) {
    return d_e / (2.0 * std::sqrt(intr.fx * intr.fy));
}

VertexMap backproject(const DepthMap& depth, const CameraIntrinsics& intr,
                      const CameraPose& pose) {
    VertexMap vmap(depth.width(), depth.height(), Frame::World);
    for (int r = 0; r < depth.height(); ++r) {
        for (int c = 0; c < depth.width(); ++c) {
            if (!depth.valid_at(r, c)) continue;
            const Vec3 dir = ray_direction(pixel_coord(c), pixel_coord(r), intr);
            vmap.positions.at(r, c) =
                pose.translation + depth.values.at(r, c) * (pose.rotation * dir);
            vmap.validity.at(r, c) = 1;
        }
    }
    return vmap;
}

Projected project(const Vec3& point, const CameraIntrinsics& intr,
                  const CameraPose& pose, double z_near) {
    const Vec3 p = pose.world_to_camera(point);
    Projected out;
    out.z = p.z;
    if (p.z <= z_near) {
        out.behind = true;
        return out;
    }
    out.u = intr.fx * p.x / p.z + intr.cx;
    out.v = intr.fy * p.y / p.z + intr.cy;
    return out;
}

NormalMap normals_from_depth(const VertexMap& vmap, const Vec3& camera_center) {
    NormalMap nmap(vmap.width(), vmap.height());
    for (int r = 1; r + 1 < vmap.height(); ++r) {
        for (int c = 1; c + 1 < vmap.width(); ++c) {
            if (!vmap.valid_at(r, c) || !vmap.valid_at(r, c - 1) ||
                !vmap.valid_at(r, c + 1) || !vmap.valid_at(r - 1, c) ||
                !vmap.valid_at(r + 1, c))
                continue;
            const Vec3 dx = vmap.positions.at(r, c + 1) - vmap.positions.at(r, c - 1);
            const Vec3 dy = vmap.positions.at(r + 1, c) - vmap.positions.at(r - 1, c);
            Vec3 n = dx.cross(dy);
            const double len = n.norm();
            if (!(len > 0.0) || !n.all_finite()) continue;
            n = n / len;
            const Vec3 view_dir = vmap.positions.at(r, c) - camera_center;
            if (n.dot(view_dir) > 0.0) n = -n;
            nmap.normals.at(r, c) = n;
            nmap.validity.at(r, c) = 1;
        }
    }
    return nmap;
}

std::vector<int> select_context_views(const CameraIntrinsics& target_intr,
                                      const CameraPose& target_pose,
                                      std::span<const CameraIntrinsics> cand_intr,
                                      std::span<const CameraPose> cand_poses,
                                      int n, double max_fov_ratio) {
    const double target_fov = target_intr.horizontal_fov();
    const Vec3 target_axis = target_pose.optical_axis();

    std::vector<int> survivors;
    for (size_t i = 0; i < cand_poses.size(); ++i) {
        const double fov = cand_intr[i].horizontal_fov();
        const double ratio = std::max(fov / target_fov, target_fov / fov);
        if (ratio <= max_fov_ratio) survivors.push_back(int(i));
    }
    std::sort(survivors.begin(), survivors.end(), [&](int a, int b) {
        const double da = target_axis.dot(cand_poses[a].optical_axis());
        const double db = target_axis.dot(cand_poses[b].optical_axis());
        if (da != db) return da > db;
        return a < b;
    });
    if (int(survivors.size()) > n) survivors.resize(n);
    return survivors;
}

}  // namespace pagas

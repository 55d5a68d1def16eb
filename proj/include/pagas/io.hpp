// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "pagas/camera.hpp"
#include "pagas/fusion.hpp"
#include "pagas/grid.hpp"
#include "pagas/pipeline.hpp"

namespace pagas {

/// Calibration of a whole capture, COLMAP text convention. Poses are stored
/// world-from-camera (converted from COLMAP's camera-from-world on load).
struct LoadedCameras {
    std::vector<CameraIntrinsics> intrinsics;
    std::vector<CameraPose> poses;
    std::vector<std::string> names;  // image names, load order = file order
};

/// Reads cameras.txt (PINHOLE model only) and images.txt from `dir`. Throws
/// std::runtime_error naming the offending model or line on malformed input.
LoadedCameras load_cameras(const std::string& dir);

/// Writes cameras.txt/images.txt at full double precision (%.17g).
void save_cameras(const std::string& dir, const LoadedCameras& cams);

/// Depth I/O. ".pfm": 32-bit float PFM, bottom-up rows, scale sign encodes
/// endianness. ".png": 16-bit gray with a "<path>.json" sidecar holding
/// {scale, offset}; stored value 0 marks invalid. Zero, negative and
/// non-finite values load as invalid either way.
DepthMap load_depth(const std::string& path);
void save_depth(const std::string& path, const DepthMap& depth,
                double png_scale = 1.0 / 5000.0, double png_offset = 0.0);

ColorImage load_image_png(const std::string& path);
void save_image_png(const std::string& path, const ColorImage& image);

/// Nonzero pixels are foreground.
Mask load_mask_png(const std::string& path);

/// Unit normals mapped channel-wise from [-1, 1] to [0, 255]; invalid
/// pixels black.
void save_normal_png(const NormalMap& nmap, const std::string& path);

void save_mesh_ply(const std::string& path, const TriangleMesh& mesh,
                   bool binary = true);

/// Applies "key = value" lines (# comments allowed) onto a config. Throws
/// std::runtime_error with the line number on malformed or unknown keys.
void apply_config_file(RefineConfig& cfg, const std::string& path);
/// Applies one "key=value" pair; same keys as the config file.
void apply_config_entry(RefineConfig& cfg, const std::string& key,
                        const std::string& value);
/// Flat key/value snapshot of a config (the config-file schema).
std::vector<std::pair<std::string, std::string>> config_entries(const RefineConfig& cfg);

/// One JSON line per iteration record, then a summary line with wall time.
void save_run_log(const std::string& path, const RefineDiagnostics& diag);

}  // namespace pagas

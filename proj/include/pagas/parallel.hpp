// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace pagas {

/// Caps the worker pool shared by raster tiles, per-pixel loops and voxel
/// slabs. n <= 0 restores the default (PAGAS_THREADS env var if set, else
/// the OpenMP default).
void set_threads(int n);

/// Current worker-pool cap.
int max_threads();

/// Value of the PAGAS_THREADS environment variable, or 0 if unset/invalid.
int threads_from_env();

}  // namespace pagas

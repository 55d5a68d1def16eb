// Copyright Contributors to the PAGaS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

#include "pagas/vecmath.hpp"

namespace pagas {

/// Dense row-major H x W grid.
template <typename T>
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int w, int h, T fill = T{}) : width(w), height(h), data(size_t(w) * h, fill) {}

    bool empty() const { return data.empty(); }
    size_t size() const { return data.size(); }
    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height && col >= 0 && col < width;
    }
    T& at(int row, int col) {
        assert(in_bounds(row, col));
        return data[size_t(row) * width + col];
    }
    const T& at(int row, int col) const {
        assert(in_bounds(row, col));
        return data[size_t(row) * width + col];
    }
    bool same_size(int w, int h) const { return width == w && height == h; }
};

using ColorImage = Grid<Vec3>;  // RGB in [0, 1]
using Mask = Grid<uint8_t>;

/// Per-pixel ray-length depth (distance along the unit pixel ray, world units)
/// plus a validity mask. Valid entries are finite and > 0.
struct DepthMap {
    Grid<double> values;
    Mask validity;

    DepthMap() = default;
    DepthMap(int w, int h) : values(w, h, 0.0), validity(w, h, 0) {}

    int width() const { return values.width; }
    int height() const { return values.height; }
    bool valid_at(int row, int col) const { return validity.at(row, col) != 0; }
    void set(int row, int col, double d) {
        values.at(row, col) = d;
        validity.at(row, col) = 1;
    }
    void invalidate(int row, int col) {
        values.at(row, col) = 0.0;
        validity.at(row, col) = 0;
    }
    size_t valid_count() const {
        size_t n = 0;
        for (uint8_t v : validity.data) n += v != 0;
        return n;
    }
};

enum class Frame { Camera, World };

/// H x W map of 3D positions with the frame they live in.
struct VertexMap {
    Grid<Vec3> positions;
    Mask validity;
    Frame frame = Frame::World;

    VertexMap() = default;
    VertexMap(int w, int h, Frame f)
        : positions(w, h), validity(w, h, 0), frame(f) {}
    int width() const { return positions.width; }
    int height() const { return positions.height; }
    bool valid_at(int row, int col) const { return validity.at(row, col) != 0; }
};

/// H x W map of unit normals.
struct NormalMap {
    Grid<Vec3> normals;
    Mask validity;

    NormalMap() = default;
    NormalMap(int w, int h) : normals(w, h), validity(w, h, 0) {}
    int width() const { return normals.width; }
    int height() const { return normals.height; }
    bool valid_at(int row, int col) const { return validity.at(row, col) != 0; }
};

}  // namespace pagas

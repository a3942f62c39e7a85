#pragma once

#include <span>
#include <vector>

#include "dcvsr/tensor.hpp"

// Spatio-temporal tiling of latent videos with 50% overlap and Gaussian
// alpha blending on merge.
namespace dcvsr {

struct TileDims {
    int height = 64;
    int width  = 64;
    int frames = 14;

    bool operator==(const TileDims&) const = default;
};

struct TileGrid {
    TileDims tile;
    Shape4 video;
    std::vector<int> offsets_y;
    std::vector<int> offsets_x;
    std::vector<int> offsets_t;

    int spatial_count() const { return static_cast<int>(offsets_y.size() * offsets_x.size()); }
    int temporal_count() const { return static_cast<int>(offsets_t.size()); }
    int tile_count() const { return spatial_count() * temporal_count(); }

    // Spatial index m enumerates offsets row-major: m = iy * |offsets_x| + ix.
    int origin_y(int m) const { return offsets_y[m / static_cast<int>(offsets_x.size())]; }
    int origin_x(int m) const { return offsets_x[m % static_cast<int>(offsets_x.size())]; }
    int origin_t(int n) const { return offsets_t[n]; }

    Shape4 tile_shape() const { return {tile.frames, video.channels, tile.height, tile.width}; }
};

struct Tile {
    int m = 0;
    int n = 0;
    VideoTensor payload;
};

struct BlendMask {
    TileDims dims;
    std::vector<float> weights;  // frames x height x width

    float at(int t, int y, int x) const {
        return weights[(static_cast<size_t>(t) * dims.height + y) * dims.width + x];
    }
};

// Offsets along one axis: start at 0, stride tile/2, final offset clamped to extent - tile.
std::vector<int> plan_offsets(int extent, int tile_extent);

TileGrid plan_tiles(const Shape4& video, const TileDims& tile);

// Tiles are returned in ascending (n, m) order.
std::vector<Tile> split(const VideoTensor& latent, const TileGrid& grid);

// Separable Gaussian, sigma = sigma_fraction * extent per axis, peak 1 at the
// geometric center. Not normalized.
BlendMask gaussian_mask(const TileDims& dims, double sigma_fraction = 0.25);

// Weighted average of overlapping tiles. Accumulates in ascending (n, m)
// order independent of the order of `tiles`.
VideoTensor merge(std::span<const Tile> tiles, const TileGrid& grid, const BlendMask& mask);

// [x_1, l_1, ..., x_N, l_N] along the frame axis.
VideoTensor interleave(const VideoTensor& x, const VideoTensor& l);

struct Deinterleaved {
    VideoTensor x;
    VideoTensor l;
};
Deinterleaved deinterleave(const VideoTensor& y);

}  // namespace dcvsr

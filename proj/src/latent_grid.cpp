#include "dcvsr/latent_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dcvsr {

std::vector<int> plan_offsets(int extent, int tile_extent) {
    if (tile_extent < 1) throw DimensionError("plan_offsets: tile extent must be >= 1");
    if (extent < tile_extent) {
        throw DimensionError("plan_offsets: extent " + std::to_string(extent) + " smaller than tile " +
                             std::to_string(tile_extent));
    }
    const int stride = std::max(1, tile_extent / 2);
    const int last   = extent - tile_extent;
    std::vector<int> offsets;
    for (int o = 0;; o += stride) {
        const int clamped = std::min(o, last);
        if (offsets.empty() || offsets.back() != clamped) offsets.push_back(clamped);
        if (clamped == last) break;
    }
    return offsets;
}

TileGrid plan_tiles(const Shape4& video, const TileDims& tile) {
    TileGrid grid;
    grid.tile      = tile;
    grid.video     = video;
    grid.offsets_y = plan_offsets(video.height, tile.height);
    grid.offsets_x = plan_offsets(video.width, tile.width);
    grid.offsets_t = plan_offsets(video.frames, tile.frames);
    return grid;
}

std::vector<Tile> split(const VideoTensor& latent, const TileGrid& grid) {
    if (!(latent.shape() == grid.video)) {
        throw DimensionError("split: latent " + to_string(latent.shape()) + " does not match grid " +
                             to_string(grid.video));
    }
    const Shape4 ts = grid.tile_shape();
    std::vector<Tile> tiles;
    tiles.reserve(grid.tile_count());
    for (int n = 0; n < grid.temporal_count(); ++n) {
        for (int m = 0; m < grid.spatial_count(); ++m) {
            const int t0 = grid.origin_t(n), y0 = grid.origin_y(m), x0 = grid.origin_x(m);
            Tile tile{m, n, VideoTensor(ts)};
            for (int t = 0; t < ts.frames; ++t)
                for (int c = 0; c < ts.channels; ++c)
                    for (int y = 0; y < ts.height; ++y) {
                        const float* src = latent.values().data() + latent.index(t0 + t, c, y0 + y, x0);
                        std::copy_n(src, ts.width, &tile.payload.at(t, c, y, 0));
                    }
            tiles.push_back(std::move(tile));
        }
    }
    return tiles;
}

BlendMask gaussian_mask(const TileDims& dims, double sigma_fraction) {
    if (!(sigma_fraction > 0.0)) throw DimensionError("gaussian_mask: sigma_fraction must be > 0");
    auto axis = [&](int extent) {
        std::vector<double> w(extent);
        const double center = (extent - 1) / 2.0;
        const double sigma  = sigma_fraction * extent;
        for (int i = 0; i < extent; ++i) {
            const double d = i - center;
            w[i]           = std::exp(-(d * d) / (2.0 * sigma * sigma));
        }
        return w;
    };
    const auto wt = axis(dims.frames), wy = axis(dims.height), wx = axis(dims.width);
    BlendMask mask{dims, std::vector<float>(static_cast<size_t>(dims.frames) * dims.height * dims.width)};
    size_t i = 0;
    for (int t = 0; t < dims.frames; ++t)
        for (int y = 0; y < dims.height; ++y)
            for (int x = 0; x < dims.width; ++x) mask.weights[i++] = static_cast<float>(wt[t] * wy[y] * wx[x]);
    return mask;
}

VideoTensor merge(std::span<const Tile> tiles, const TileGrid& grid, const BlendMask& mask) {
    if (!(mask.dims == grid.tile)) throw DimensionError("merge: mask dims differ from grid tile dims");
    const int count = grid.tile_count();
    std::vector<const Tile*> ordered(count, nullptr);
    const Shape4 ts = grid.tile_shape();
    for (const Tile& tile : tiles) {
        if (tile.m < 0 || tile.m >= grid.spatial_count() || tile.n < 0 || tile.n >= grid.temporal_count()) {
            throw DimensionError("merge: tile index out of grid");
        }
        if (!(tile.payload.shape() == ts)) throw DimensionError("merge: tile payload shape mismatch");
        const Tile*& slot = ordered[tile.n * grid.spatial_count() + tile.m];
        if (slot) throw DimensionError("merge: duplicate tile");
        slot = &tile;
    }
    for (int i = 0; i < count; ++i) {
        if (!ordered[i]) {
            throw DimensionError("merge: missing tile m=" + std::to_string(i % grid.spatial_count()) +
                                 " n=" + std::to_string(i / grid.spatial_count()));
        }
    }

    const Shape4& vs = grid.video;
    std::vector<double> num(vs.numel(), 0.0);
    std::vector<double> den(static_cast<size_t>(vs.frames) * vs.height * vs.width, 0.0);
    for (const Tile* tile : ordered) {
        const int t0 = grid.origin_t(tile->n), y0 = grid.origin_y(tile->m), x0 = grid.origin_x(tile->m);
        for (int t = 0; t < ts.frames; ++t)
            for (int y = 0; y < ts.height; ++y)
                for (int x = 0; x < ts.width; ++x) {
                    const double w = mask.at(t, y, x);
                    den[(static_cast<size_t>(t0 + t) * vs.height + y0 + y) * vs.width + x0 + x] += w;
                    for (int c = 0; c < ts.channels; ++c) {
                        const size_t gi = ((static_cast<size_t>(t0 + t) * vs.channels + c) * vs.height + y0 + y) *
                                              vs.width + x0 + x;
                        num[gi] += w * tile->payload.at(t, c, y, x);
                    }
                }
    }

    VideoTensor out(vs);
    for (int t = 0; t < vs.frames; ++t)
        for (int c = 0; c < vs.channels; ++c)
            for (int y = 0; y < vs.height; ++y)
                for (int x = 0; x < vs.width; ++x) {
                    const double d = den[(static_cast<size_t>(t) * vs.height + y) * vs.width + x];
                    out.at(t, c, y, x) = static_cast<float>(num[out.index(t, c, y, x)] / d);
                }
    return out;
}

VideoTensor interleave(const VideoTensor& x, const VideoTensor& l) {
    require_same_shape(x, l, "interleave");
    Shape4 s = x.shape();
    s.frames *= 2;
    VideoTensor out(s);
    for (int n = 0; n < x.frames(); ++n) {
        std::ranges::copy(x.frame_span(n), out.frame_span(2 * n).begin());
        std::ranges::copy(l.frame_span(n), out.frame_span(2 * n + 1).begin());
    }
    return out;
}

Deinterleaved deinterleave(const VideoTensor& y) {
    if (y.frames() % 2 != 0) throw DimensionError("deinterleave: odd frame count");
    Shape4 s = y.shape();
    s.frames /= 2;
    Deinterleaved out{VideoTensor(s), VideoTensor(s)};
    for (int n = 0; n < s.frames; ++n) {
        std::ranges::copy(y.frame_span(2 * n), out.x.frame_span(n).begin());
        std::ranges::copy(y.frame_span(2 * n + 1), out.l.frame_span(n).begin());
    }
    return out;
}

}  // namespace dcvsr

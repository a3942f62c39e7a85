#include "dcvsr/degrade.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

namespace dcvsr {

namespace {

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

// Catmull-Rom (a = -0.5).
double cubic_weight(double t) {
    t = std::fabs(t);
    if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
    if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
    return 0.0;
}

struct Taps {
    std::array<int, 4> index;
    std::array<double, 4> weight;
};

std::vector<Taps> cubic_taps(int in_extent, int out_extent) {
    const double scale = static_cast<double>(out_extent) / in_extent;
    std::vector<Taps> taps(out_extent);
    for (int o = 0; o < out_extent; ++o) {
        const double src = (o + 0.5) / scale - 0.5;
        const double fl  = std::floor(src);
        const double fr  = src - fl;
        for (int k = 0; k < 4; ++k) {
            taps[o].index[k]  = clamp_index(static_cast<int>(fl) - 1 + k, in_extent);
            taps[o].weight[k] = cubic_weight(fr - (k - 1));
        }
    }
    return taps;
}

}  // namespace

void validate(const DegradationConfig& cfg) {
    if (cfg.down_factor < 1) throw ConfigError("degrade: down_factor must be >= 1");
    if (cfg.quant_levels < 2) throw ConfigError("degrade: quant_levels must be >= 2");
    if (!(cfg.blur_sigma >= 0.0)) throw ConfigError("degrade: blur_sigma must be >= 0");
    if (!(cfg.noise_sigma >= 0.0)) throw ConfigError("degrade: noise_sigma must be >= 0");
}

VideoTensor gaussian_blur(const VideoTensor& video, double sigma) {
    if (!(sigma > 0.0)) return video;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    const int H = video.height(), W = video.width();
    VideoTensor out(video.shape());
    std::vector<double> tmp(static_cast<size_t>(H) * W);
    for (int n = 0; n < video.frames(); ++n)
        for (int c = 0; c < video.channels(); ++c) {
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    double acc = 0.0;
                    for (int k = -radius; k <= radius; ++k)
                        acc += kernel[k + radius] * video.at(n, c, y, clamp_index(x + k, W));
                    tmp[static_cast<size_t>(y) * W + x] = acc;
                }
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    double acc = 0.0;
                    for (int k = -radius; k <= radius; ++k)
                        acc += kernel[k + radius] * tmp[static_cast<size_t>(clamp_index(y + k, H)) * W + x];
                    out.at(n, c, y, x) = static_cast<float>(acc);
                }
        }
    return out;
}

VideoTensor bicubic_resize_to(const VideoTensor& video, int out_height, int out_width) {
    if (out_height < 1 || out_width < 1) throw DimensionError("bicubic_resize: output extent must be >= 1");
    const int H = video.height(), W = video.width();
    const auto ty = cubic_taps(H, out_height);
    const auto tx = cubic_taps(W, out_width);
    Shape4 s  = video.shape();
    s.height  = out_height;
    s.width   = out_width;
    VideoTensor out(s);
    std::vector<double> rows(static_cast<size_t>(H) * out_width);
    for (int n = 0; n < s.frames; ++n)
        for (int c = 0; c < s.channels; ++c) {
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < out_width; ++x) {
                    double acc = 0.0;
                    for (int k = 0; k < 4; ++k) acc += tx[x].weight[k] * video.at(n, c, y, tx[x].index[k]);
                    rows[static_cast<size_t>(y) * out_width + x] = acc;
                }
            for (int y = 0; y < out_height; ++y)
                for (int x = 0; x < out_width; ++x) {
                    double acc = 0.0;
                    for (int k = 0; k < 4; ++k)
                        acc += ty[y].weight[k] * rows[static_cast<size_t>(ty[y].index[k]) * out_width + x];
                    out.at(n, c, y, x) = static_cast<float>(acc);
                }
        }
    return out;
}

VideoTensor bicubic_resize(const VideoTensor& video, double scale) {
    if (!(scale > 0.0)) throw DimensionError("bicubic_resize: scale must be > 0");
    const int oh = std::max(1, static_cast<int>(std::lround(video.height() * scale)));
    const int ow = std::max(1, static_cast<int>(std::lround(video.width() * scale)));
    return bicubic_resize_to(video, oh, ow);
}

VideoTensor quantize(const VideoTensor& video, int levels) {
    if (levels < 2) throw ConfigError("quantize: levels must be >= 2");
    const double steps = levels - 1;
    VideoTensor out(video.shape());
    auto src = video.values();
    auto dst = out.values();
    for (size_t i = 0; i < src.size(); ++i) {
        const double v = std::clamp(static_cast<double>(src[i]), 0.0, 1.0);
        dst[i]         = static_cast<float>(std::round(v * steps) / steps);
    }
    return out;
}

VideoTensor degrade(const VideoTensor& video, const DegradationConfig& cfg) {
    validate(cfg);
    VideoTensor v = gaussian_blur(video, cfg.blur_sigma);
    if (cfg.down_factor > 1) {
        if (v.height() % cfg.down_factor != 0 || v.width() % cfg.down_factor != 0) {
            throw DimensionError("degrade: frame size not divisible by down_factor");
        }
        v = bicubic_resize_to(v, v.height() / cfg.down_factor, v.width() / cfg.down_factor);
    }
    if (cfg.noise_sigma > 0.0) {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> normal(0.0, cfg.noise_sigma);
        for (float& x : v.values()) x = static_cast<float>(std::clamp(x + normal(rng), 0.0, 1.0));
    }
    return quantize(v, cfg.quant_levels);
}

}  // namespace dcvsr

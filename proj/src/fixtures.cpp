#include "dcvsr/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>

namespace dcvsr {

VideoTensor make_translating_video(const Shape4& shape, int dy, int dx, uint64_t seed) {
    VideoTensor out(shape);
    const int span_y = std::abs(dy) * (shape.frames - 1), span_x = std::abs(dx) * (shape.frames - 1);
    const int BH = shape.height + span_y, BW = shape.width + span_x;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> uniform(0.0f, 1.0f);
    std::vector<float> base(static_cast<size_t>(shape.channels) * BH * BW);
    for (float& v : base) v = uniform(rng);

    // Frame i shows the base window whose origin moves by -(dy, dx) per frame.
    const int oy = dy > 0 ? span_y : 0, ox = dx > 0 ? span_x : 0;
    for (int n = 0; n < shape.frames; ++n)
        for (int c = 0; c < shape.channels; ++c)
            for (int y = 0; y < shape.height; ++y)
                for (int x = 0; x < shape.width; ++x) {
                    const int by = y + oy - n * dy, bx = x + ox - n * dx;
                    out.at(n, c, y, x) = base[(static_cast<size_t>(c) * BH + by) * BW + bx];
                }
    return out;
}

VideoTensor make_textured_video(const Shape4& shape, uint64_t seed) {
    VideoTensor out(shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    struct Wave {
        double fy, fx, phase;
    };
    std::vector<Wave> waves(4);
    for (auto& w : waves) w = {uniform(rng) * 0.5, uniform(rng) * 0.5, uniform(rng) * 2 * std::numbers::pi};
    std::vector<double> grain(static_cast<size_t>(shape.channels) * shape.height * shape.width);
    for (double& g : grain) g = (uniform(rng) - 0.5) * 0.1;

    for (int c = 0; c < shape.channels; ++c)
        for (int y = 0; y < shape.height; ++y)
            for (int x = 0; x < shape.width; ++x) {
                double v = 0.0;
                for (const auto& w : waves) v += std::sin(2 * std::numbers::pi * (w.fy * y + w.fx * x) + w.phase + c);
                v = 0.5 + 0.1 * v + grain[(static_cast<size_t>(c) * shape.height + y) * shape.width + x];
                const float clamped = static_cast<float>(std::clamp(v, 0.0, 1.0));
                for (int n = 0; n < shape.frames; ++n) out.at(n, c, y, x) = clamped;
            }
    return out;
}

VideoTensor make_constant_video(const Shape4& shape, float value) {
    VideoTensor out(shape);
    std::ranges::fill(out.values(), value);
    return out;
}

}  // namespace dcvsr

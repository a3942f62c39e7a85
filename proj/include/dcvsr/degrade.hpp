#pragma once

#include <cstdint>

#include "dcvsr/tensor.hpp"

namespace dcvsr {

struct DegradationConfig {
    double blur_sigma  = 1.0;
    int down_factor    = 4;
    double noise_sigma = 0.02;
    int quant_levels   = 256;
    uint64_t seed      = 0;
};

void validate(const DegradationConfig& cfg);

// Separable Gaussian blur per frame and channel, radius ceil(3 sigma), edge
// clamped. sigma <= 0 returns the input unchanged.
VideoTensor gaussian_blur(const VideoTensor& video, double sigma);

// Catmull-Rom bicubic resampling with half-pixel centers and edge-clamped taps.
// Output extent is round(extent * scale).
VideoTensor bicubic_resize(const VideoTensor& video, double scale);
VideoTensor bicubic_resize_to(const VideoTensor& video, int out_height, int out_width);

// Uniform quantization of [0, 1] values to `levels` levels.
VideoTensor quantize(const VideoTensor& video, int levels);

// blur -> bicubic downscale -> seeded Gaussian noise (clamped to [0, 1]) -> quantize.
VideoTensor degrade(const VideoTensor& video, const DegradationConfig& cfg);

}  // namespace dcvsr

#pragma once

#include <cstdint>

#include "dcvsr/tensor.hpp"

namespace dcvsr {

// Seeded i.i.d. texture moving by (dy, dx) pixels per frame: content at p in
// frame i sits at p + (dy, dx) in frame i+1. No wrap-around, so interior
// block-match flow is exact.
VideoTensor make_translating_video(const Shape4& shape, int dy, int dx, uint64_t seed);

// Static plane of seeded sinusoids plus fine grain, values in [0, 1].
VideoTensor make_textured_video(const Shape4& shape, uint64_t seed);

VideoTensor make_constant_video(const Shape4& shape, float value);

}  // namespace dcvsr

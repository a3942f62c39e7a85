#pragma once

#include <functional>
#include <vector>

#include "dcvsr/tensor.hpp"

// Frame quality and temporal-consistency metrics. Frames are single-frame
// VideoTensors; flow is estimated on the channel mean.
namespace dcvsr {

struct FlowField {
    int height = 0;
    int width  = 0;
    std::vector<float> dy;
    std::vector<float> dx;

    float at_dy(int y, int x) const { return dy[static_cast<size_t>(y) * width + x]; }
    float at_dx(int y, int x) const { return dx[static_cast<size_t>(y) * width + x]; }
};

// Content at p in `from` is found at p + flow(p) in `to`.
using FlowFn = std::function<FlowField(const VideoTensor& from, const VideoTensor& to)>;
using FrameDistanceFn = std::function<double(const VideoTensor& a, const VideoTensor& b)>;

double psnr(const VideoTensor& a, const VideoTensor& b);
double ssim(const VideoTensor& a, const VideoTensor& b);

// Per-block integer displacement minimising SAD within +-radius. Ties go to
// the smallest squared displacement, then to lexicographically smallest (dy, dx).
FlowField block_match_flow(const VideoTensor& f1, const VideoTensor& f2, int block, int radius);
FlowFn block_match_flow_fn(int block = 8, int radius = 4);

double mean_abs_difference(const VideoTensor& a, const VideoTensor& b);

// Mean over frame pairs and pixels of the L1 flow difference.
double tof(const VideoTensor& gt, const VideoTensor& restored, const FlowFn& flow);
// Mean over frame pairs of |dist(restored pair) - dist(gt pair)|.
double tlp(const VideoTensor& gt, const VideoTensor& restored, const FrameDistanceFn& dist = mean_abs_difference);

// Backward warp: out(q) = frame(q - flow(q)) with bilinear edge-clamped sampling.
VideoTensor warp_frame(const VideoTensor& frame, const FlowField& flow);

// Mean over i of mean |warp(frame_i, flow(frame_i, frame_i+1)) - frame_i+1|,
// ignoring `border` pixels on each side.
double warping_error(const VideoTensor& video, const FlowFn& flow, int border = 0);

}  // namespace dcvsr

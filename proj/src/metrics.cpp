#include "dcvsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dcvsr {

namespace {

void require_pairable(const VideoTensor& a, const VideoTensor& b, const char* what) { require_same_shape(a, b, what); }

void require_sequence(const VideoTensor& v, const char* what) {
    if (v.frames() < 2) throw DimensionError(std::string(what) + ": need at least 2 frames");
}

// Channel mean of a single frame as a height x width plane.
std::vector<double> luminance(const VideoTensor& frame) {
    const int H = frame.height(), W = frame.width(), C = frame.channels();
    std::vector<double> out(static_cast<size_t>(H) * W, 0.0);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) out[static_cast<size_t>(y) * W + x] += frame.at(0, c, y, x);
    for (double& v : out) v /= C;
    return out;
}

double ssim_plane(const VideoTensor& a, const VideoTensor& b, int n, int c) {
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    const int H = a.height(), W = a.width();
    const int wh = std::min(8, H), ww = std::min(8, W);
    double total = 0.0;
    int windows  = 0;
    for (int y0 = 0; y0 + wh <= H; ++y0)
        for (int x0 = 0; x0 + ww <= W; ++x0) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int y = y0; y < y0 + wh; ++y)
                for (int x = x0; x < x0 + ww; ++x) {
                    const double va = a.at(n, c, y, x), vb = b.at(n, c, y, x);
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            const double k   = static_cast<double>(wh) * ww;
            const double ma  = sa / k, mb = sb / k;
            const double va  = saa / k - ma * ma;
            const double vb  = sbb / k - mb * mb;
            const double cov = sab / k - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++windows;
        }
    return total / windows;
}

double sample_clamped(const std::vector<double>& plane, int H, int W, int y, int x) {
    return plane[static_cast<size_t>(std::clamp(y, 0, H - 1)) * W + std::clamp(x, 0, W - 1)];
}

}  // namespace

double psnr(const VideoTensor& a, const VideoTensor& b) {
    require_pairable(a, b, "psnr");
    double se = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.values()[i]) - b.values()[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    if (mse == 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const VideoTensor& a, const VideoTensor& b) {
    require_pairable(a, b, "ssim");
    double total = 0.0;
    for (int n = 0; n < a.frames(); ++n)
        for (int c = 0; c < a.channels(); ++c) total += ssim_plane(a, b, n, c);
    return total / (static_cast<double>(a.frames()) * a.channels());
}

FlowField block_match_flow(const VideoTensor& f1, const VideoTensor& f2, int block, int radius) {
    require_pairable(f1, f2, "block_match_flow");
    const int H = f1.height(), W = f1.width();
    if (block < 1 || block > H || block > W) throw DimensionError("block_match_flow: block larger than frame");
    if (radius < 0) throw DimensionError("block_match_flow: radius must be >= 0");
    const auto a = luminance(f1);
    const auto b = luminance(f2);

    FlowField flow{H, W, std::vector<float>(static_cast<size_t>(H) * W), std::vector<float>(static_cast<size_t>(H) * W)};
    const int by_count = (H + block - 1) / block, bx_count = (W + block - 1) / block;
    for (int by = 0; by < by_count; ++by)
        for (int bx = 0; bx < bx_count; ++bx) {
            const int y0 = std::min(by * block, H - block), x0 = std::min(bx * block, W - block);
            double best_sad = std::numeric_limits<double>::infinity();
            int best_dy = 0, best_dx = 0, best_mag = 0;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) {
                    double sad = 0.0;
                    for (int y = y0; y < y0 + block; ++y)
                        for (int x = x0; x < x0 + block; ++x)
                            sad += std::fabs(a[static_cast<size_t>(y) * W + x] - sample_clamped(b, H, W, y + dy, x + dx));
                    const int mag = dy * dy + dx * dx;
                    // Candidates arrive in lexicographic order, so strict
                    // comparisons keep the earliest on equal magnitude.
                    if (sad < best_sad || (sad == best_sad && mag < best_mag)) {
                        best_sad = sad;
                        best_dy  = dy;
                        best_dx  = dx;
                        best_mag = mag;
                    }
                }
            // Pixels take the flow of the block tile they fall in.
            for (int y = by * block; y < std::min(H, (by + 1) * block); ++y)
                for (int x = bx * block; x < std::min(W, (bx + 1) * block); ++x) {
                    flow.dy[static_cast<size_t>(y) * W + x] = static_cast<float>(best_dy);
                    flow.dx[static_cast<size_t>(y) * W + x] = static_cast<float>(best_dx);
                }
        }
    return flow;
}

FlowFn block_match_flow_fn(int block, int radius) {
    return [block, radius](const VideoTensor& from, const VideoTensor& to) {
        return block_match_flow(from, to, std::min({block, from.height(), from.width()}), radius);
    };
}

double mean_abs_difference(const VideoTensor& a, const VideoTensor& b) {
    require_pairable(a, b, "mean_abs_difference");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += std::fabs(static_cast<double>(a.values()[i]) - b.values()[i]);
    return acc / static_cast<double>(a.size());
}

double tof(const VideoTensor& gt, const VideoTensor& restored, const FlowFn& flow) {
    require_pairable(gt, restored, "tof");
    require_sequence(gt, "tof");
    double acc = 0.0;
    for (int i = 1; i < gt.frames(); ++i) {
        const FlowField fr = flow(restored.frame(i - 1), restored.frame(i));
        const FlowField fg = flow(gt.frame(i - 1), gt.frame(i));
        double pair = 0.0;
        for (size_t p = 0; p < fr.dy.size(); ++p) {
            pair += std::fabs(static_cast<double>(fr.dy[p]) - fg.dy[p]) + std::fabs(static_cast<double>(fr.dx[p]) - fg.dx[p]);
        }
        acc += pair / static_cast<double>(fr.dy.size());
    }
    return acc / (gt.frames() - 1);
}

double tlp(const VideoTensor& gt, const VideoTensor& restored, const FrameDistanceFn& dist) {
    require_pairable(gt, restored, "tlp");
    require_sequence(gt, "tlp");
    double acc = 0.0;
    for (int i = 1; i < gt.frames(); ++i) {
        acc += std::fabs(dist(restored.frame(i - 1), restored.frame(i)) - dist(gt.frame(i - 1), gt.frame(i)));
    }
    return acc / (gt.frames() - 1);
}

VideoTensor warp_frame(const VideoTensor& frame, const FlowField& flow) {
    const int H = frame.height(), W = frame.width();
    if (flow.height != H || flow.width != W) throw DimensionError("warp_frame: flow size mismatch");
    VideoTensor out(frame.shape());
    for (int c = 0; c < frame.channels(); ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double sy = y - flow.at_dy(y, x), sx = x - flow.at_dx(y, x);
                const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
                const double fy = sy - y0, fx = sx - x0;
                auto px = [&](int yy, int xx) {
                    return static_cast<double>(frame.at(0, c, std::clamp(yy, 0, H - 1), std::clamp(xx, 0, W - 1)));
                };
                double v = px(y0, x0) * (1 - fy) * (1 - fx);
                if (fx != 0.0) v += px(y0, x0 + 1) * (1 - fy) * fx;
                if (fy != 0.0) v += px(y0 + 1, x0) * fy * (1 - fx);
                if (fx != 0.0 && fy != 0.0) v += px(y0 + 1, x0 + 1) * fy * fx;
                out.at(0, c, y, x) = static_cast<float>(v);
            }
    return out;
}

double warping_error(const VideoTensor& video, const FlowFn& flow, int border) {
    require_sequence(video, "warping_error");
    const int H = video.height(), W = video.width();
    if (border < 0 || 2 * border >= H || 2 * border >= W) throw DimensionError("warping_error: border too large");
    double acc = 0.0;
    for (int i = 0; i + 1 < video.frames(); ++i) {
        const VideoTensor a = video.frame(i), b = video.frame(i + 1);
        const VideoTensor w = warp_frame(a, flow(a, b));
        double pair = 0.0;
        long count  = 0;
        for (int c = 0; c < video.channels(); ++c)
            for (int y = border; y < H - border; ++y)
                for (int x = border; x < W - border; ++x, ++count)
                    pair += std::fabs(static_cast<double>(w.at(0, c, y, x)) - b.at(0, c, y, x));
        acc += pair / count;
    }
    return acc / (video.frames() - 1);
}

}  // namespace dcvsr

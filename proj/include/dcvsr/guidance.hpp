#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "dcvsr/tensor.hpp"

namespace dcvsr {

enum class GuidanceMode { none, cfg, sag, pag, dssag, cfg_dssag };

std::string_view to_string(GuidanceMode mode);
GuidanceMode parse_guidance_mode(std::string_view text);

// Denoiser evaluations a guided step costs per tile.
int feed_forwards_per_iteration(GuidanceMode mode);

struct GuidanceConfig {
    GuidanceMode mode        = GuidanceMode::cfg_dssag;
    double scale             = 1.0;
    double rho               = 0.5;
    double sag_blur_sigma    = 1.0;
    double sag_mask_quantile = 0.5;
};

void validate(const GuidanceConfig& cfg);

// base + (1 + s) * (target - base). All guidance rules share this form.
VideoTensor guide(const VideoTensor& base, const VideoTensor& target, double s);

inline VideoTensor cfg(const VideoTensor& eps_uncond, const VideoTensor& eps_cond, double s) {
    return guide(eps_uncond, eps_cond, s);
}
inline VideoTensor pag_combine(const VideoTensor& eps_perturbed, const VideoTensor& eps_normal, double s) {
    return guide(eps_perturbed, eps_normal, s);
}
inline VideoTensor dssag_combine(const VideoTensor& eps_suppressed, const VideoTensor& eps_target, double s) {
    return guide(eps_suppressed, eps_target, s);
}

// ((ln sigma_t - ln sigma_end) / (ln sigma_start - ln sigma_end))^rho.
double gamma_schedule(double sigma_t, double sigma_start, double sigma_end, double rho);

struct NoisePrediction {
    VideoTensor eps;
    std::optional<VideoTensor> attention_map;
};

// Evaluates the noise estimate at x; must return an attention map when asked.
using NoiseFn = std::function<NoisePrediction(const VideoTensor& x, bool want_attention)>;

// Binary mask (frames x 1 x H x W) of tokens whose score exceeds the quantile
// threshold, nearest-upsampled to the latent resolution.
VideoTensor sag_mask(const VideoTensor& attention_map, double quantile, int height, int width);

struct SagResult {
    VideoTensor guided;
    VideoTensor eps_plain;    // eps(x_t)
    VideoTensor eps_blurred;  // eps(b(x_t))
    VideoTensor perturbed;    // b(x_t)
};

SagResult sag_detailed(const NoiseFn& noise, const VideoTensor& x_t, double sigma, const GuidanceConfig& cfg);

inline VideoTensor sag(const NoiseFn& noise, const VideoTensor& x_t, double sigma, const GuidanceConfig& cfg) {
    return sag_detailed(noise, x_t, sigma, cfg).guided;
}

}  // namespace dcvsr

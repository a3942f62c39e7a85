#include "dcvsr/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dcvsr/degrade.hpp"

namespace dcvsr {

std::string_view to_string(GuidanceMode mode) {
    switch (mode) {
        case GuidanceMode::none: return "none";
        case GuidanceMode::cfg: return "cfg";
        case GuidanceMode::sag: return "sag";
        case GuidanceMode::pag: return "pag";
        case GuidanceMode::dssag: return "dssag";
        case GuidanceMode::cfg_dssag: return "cfg_dssag";
    }
    return "?";
}

GuidanceMode parse_guidance_mode(std::string_view text) {
    for (GuidanceMode m : {GuidanceMode::none, GuidanceMode::cfg, GuidanceMode::sag, GuidanceMode::pag,
                           GuidanceMode::dssag, GuidanceMode::cfg_dssag}) {
        if (to_string(m) == text) return m;
    }
    throw ConfigError("unknown guidance mode '" + std::string(text) + "'");
}

int feed_forwards_per_iteration(GuidanceMode mode) {
    switch (mode) {
        case GuidanceMode::none: return 1;
        case GuidanceMode::cfg:
        case GuidanceMode::dssag:
        case GuidanceMode::cfg_dssag: return 2;
        case GuidanceMode::sag:
        case GuidanceMode::pag: return 3;
    }
    return 0;
}

void validate(const GuidanceConfig& cfg) {
    if (!(cfg.rho > 0.0)) throw ConfigError("guidance: rho must be > 0");
    if (!(cfg.sag_mask_quantile > 0.0 && cfg.sag_mask_quantile <= 1.0)) {
        throw ConfigError("guidance: sag_mask_quantile must be in (0, 1]");
    }
    if (!(cfg.sag_blur_sigma >= 0.0)) throw ConfigError("guidance: sag_blur_sigma must be >= 0");
    if (!std::isfinite(cfg.scale)) throw ConfigError("guidance: scale must be finite");
}

VideoTensor guide(const VideoTensor& base, const VideoTensor& target, double s) {
    require_same_shape(base, target, "guidance");
    VideoTensor out(base.shape());
    auto b = base.values();
    auto t = target.values();
    auto o = out.values();
    const double w = 1.0 + s;
    for (size_t i = 0; i < o.size(); ++i) {
        o[i] = static_cast<float>(b[i] + w * (static_cast<double>(t[i]) - b[i]));
    }
    return out;
}

double gamma_schedule(double sigma_t, double sigma_start, double sigma_end, double rho) {
    if (!(sigma_start > sigma_end && sigma_end > 0.0)) {
        throw DimensionError("gamma_schedule: need sigma_start > sigma_end > 0");
    }
    if (!(sigma_t >= sigma_end && sigma_t <= sigma_start)) {
        throw DimensionError("gamma_schedule: sigma_t outside [sigma_end, sigma_start]");
    }
    const double frac = (std::log(sigma_t) - std::log(sigma_end)) / (std::log(sigma_start) - std::log(sigma_end));
    return std::pow(frac, rho);
}

VideoTensor sag_mask(const VideoTensor& attention_map, double quantile, int height, int width) {
    std::vector<float> sorted(attention_map.values().begin(), attention_map.values().end());
    std::sort(sorted.begin(), sorted.end());
    const size_t idx = static_cast<size_t>(std::floor(quantile * static_cast<double>(sorted.size() - 1)));
    const float threshold = sorted[std::min(idx, sorted.size() - 1)];

    const int th = attention_map.height(), tw = attention_map.width();
    if (height % th != 0 || width % tw != 0) {
        throw DimensionError("sag_mask: latent size not a multiple of the token grid");
    }
    const int sy = height / th, sx = width / tw;
    VideoTensor mask({attention_map.frames(), 1, height, width});
    for (int f = 0; f < attention_map.frames(); ++f)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                mask.at(f, 0, y, x) = attention_map.at(f, 0, y / sy, x / sx) > threshold ? 1.0f : 0.0f;
    return mask;
}

SagResult sag_detailed(const NoiseFn& noise, const VideoTensor& x_t, double sigma, const GuidanceConfig& cfg) {
    NoisePrediction first = noise(x_t, true);
    if (!first.attention_map) throw ConfigError("sag: denoiser provides no attention map");
    require_same_shape(first.eps, x_t, "sag");

    const VideoTensor mask = sag_mask(*first.attention_map, cfg.sag_mask_quantile, x_t.height(), x_t.width());

    VideoTensor x0(x_t.shape());
    for (size_t i = 0; i < x0.size(); ++i) {
        x0.values()[i] = static_cast<float>(x_t.values()[i] - sigma * first.eps.values()[i]);
    }
    const VideoTensor blurred = gaussian_blur(x0, cfg.sag_blur_sigma);

    // b(x_t) = blurred x0 + sigma * eps inside the mask, x_t elsewhere.
    VideoTensor perturbed = x_t;
    for (int n = 0; n < x_t.frames(); ++n)
        for (int c = 0; c < x_t.channels(); ++c)
            for (int y = 0; y < x_t.height(); ++y)
                for (int x = 0; x < x_t.width(); ++x) {
                    if (mask.at(n, 0, y, x) == 0.0f) continue;
                    const double delta = static_cast<double>(blurred.at(n, c, y, x)) - x0.at(n, c, y, x);
                    if (delta != 0.0) perturbed.at(n, c, y, x) = static_cast<float>(x_t.at(n, c, y, x) + delta);
                }

    VideoTensor eps_blurred = noise(perturbed, false).eps;
    VideoTensor guided      = guide(eps_blurred, first.eps, cfg.scale);
    return {std::move(guided), std::move(first.eps), std::move(eps_blurred), std::move(perturbed)};
}

}  // namespace dcvsr

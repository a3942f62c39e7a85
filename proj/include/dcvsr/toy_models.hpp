#pragma once

#include <cstdint>
#include <vector>

#include "dcvsr/denoiser.hpp"
#include "dcvsr/tensor.hpp"

namespace dcvsr {

// Exact posterior mean for data ~ N(mu, sigma_data^2 I). `mu` holds one value
// (broadcast) or one value per channel.
class AnalyticGaussianDenoiser : public Denoiser {
public:
    AnalyticGaussianDenoiser(std::vector<float> mu, double sigma_data);

    // (sigma_d^2 x + sigma^2 mu) / (sigma_d^2 + sigma^2) on a plain tensor.
    VideoTensor analytic_denoise(const VideoTensor& x, double sigma) const;

    DenoiseOutput denoise(const DenoiseRequest& request) const override;
    std::vector<int> hookable_layers() const override { return {}; }
    int cond_dim() const override { return 0; }

    double sigma_data() const { return sigma_data_; }

private:
    float mu_at(int channel) const;

    std::vector<float> mu_;
    double sigma_data_;
};

struct ToyNetSpec {
    uint64_t seed       = 1;
    int channels        = 3;
    int patch           = 4;
    int embed_dim       = 32;
    int spatial_layers  = 4;
    int cond_dim        = 8;
    double sigma_data   = 0.5;
};

void validate(const ToyNetSpec& spec);

// Seeded patch-token network: embed -> spatial self-attention layers with a
// temporal attention layer after the first half -> linear head, wrapped in EDM
// preconditioning. Spatial attention runs per frame.
class ToyAttentionDenoiser : public Denoiser {
public:
    explicit ToyAttentionDenoiser(const ToyNetSpec& spec);

    DenoiseOutput denoise(const DenoiseRequest& request) const override;
    // First two and last two spatial layers.
    std::vector<int> hookable_layers() const override;
    int cond_dim() const override { return spec_.cond_dim; }
    int patch_size() const override { return spec_.patch; }
    bool provides_attention_map() const override { return true; }

    const ToyNetSpec& spec() const { return spec_; }

private:
    struct AttentionBlock {
        Matrix wq, wk, wv, wo, w1, w2;
    };

    Matrix forward_tokens(Matrix tokens, int frames, int tokens_per_frame, const HookSet* hooks,
                          DenoiseOutput& out, int grid_h, int grid_w) const;

    ToyNetSpec spec_;
    Matrix embed_;       // (2 C p^2) x d
    Matrix cond_proj_;   // cond_dim x d
    std::vector<float> noise_embed_;  // d
    std::vector<AttentionBlock> spatial_;
    AttentionBlock temporal_;
    Matrix head_;        // d x (C p^2)
};

// Linear stand-in for the VAE: f x f box-average encoder, nearest-neighbour
// decoder. Preserves constants exactly.
class ToyCodec {
public:
    explicit ToyCodec(int factor = 8);

    VideoTensor encode(const VideoTensor& video) const;
    VideoTensor decode(const VideoTensor& latent) const;
    int factor() const { return factor_; }

private:
    int factor_;
};

}  // namespace dcvsr

#pragma once

#include <atomic>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "dcvsr/attention.hpp"
#include "dcvsr/tensor.hpp"

namespace dcvsr {

// Kernel used by a hooked spatial self-attention layer.
enum class AttentionKernel {
    vanilla,   // softmax(Q K^T / sqrt(d)) V over own plus injected keys
    tempered,  // gamma-tempered softmax over own plus injected keys
    identity,  // identity score matrix, returns own V
};

struct LayerHook {
    AttentionKernel kernel = AttentionKernel::vanilla;
    double gamma           = 0.0;
    // Per-frame injection (SAP). Either empty or one entry per tile frame.
    std::vector<InjectedKV> per_frame;
    // Injection shared by every frame of the tile (TAP).
    InjectedKV shared;
};

struct HookSet {
    std::map<int, LayerHook> layers;
    bool capture_kv        = false;
    bool capture_attention = false;

    bool empty() const { return layers.empty() && !capture_kv && !capture_attention; }
};

// Own keys and values of one spatial attention layer, one matrix per frame.
struct LayerKV {
    int layer = 0;
    std::vector<Matrix> keys;
    std::vector<Matrix> values;
};

enum class PassPurpose { evaluate, gather };

struct DenoiseRequest {
    // Interleaved [x_1, l_1, ..., x_F, l_F] tile.
    const VideoTensor* input = nullptr;
    std::span<const float> cond;
    double sigma           = 1.0;
    const HookSet* hooks   = nullptr;
    PassPurpose purpose    = PassPurpose::evaluate;
};

struct DenoiseOutput {
    // Denoised estimate of the x frames (F frames).
    VideoTensor denoised;
    std::vector<LayerKV> captured;
    // Mean attention received per own token: frames x 1 x token_h x token_w.
    std::optional<VideoTensor> attention_map;
};

// D(x; c, sigma) with optional attention hooks. Implementations must be safe
// to call concurrently.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual DenoiseOutput denoise(const DenoiseRequest& request) const = 0;

    // Spatial self-attention layers that accept hooks.
    virtual std::vector<int> hookable_layers() const = 0;
    virtual int cond_dim() const = 0;
    // Token grid spacing in latent pixels (1 when no attention).
    virtual int patch_size() const { return 1; }
    virtual bool provides_attention_map() const { return false; }
};

// Forwards to another denoiser and counts calls by purpose.
class CountingDenoiser : public Denoiser {
public:
    explicit CountingDenoiser(const Denoiser& inner) : inner_(inner) {}

    DenoiseOutput denoise(const DenoiseRequest& request) const override {
        (request.purpose == PassPurpose::gather ? gathers_ : evaluations_)
            .fetch_add(1, std::memory_order_relaxed);
        return inner_.denoise(request);
    }
    std::vector<int> hookable_layers() const override { return inner_.hookable_layers(); }
    int cond_dim() const override { return inner_.cond_dim(); }
    int patch_size() const override { return inner_.patch_size(); }
    bool provides_attention_map() const override { return inner_.provides_attention_map(); }

    long evaluations() const { return evaluations_.load(); }
    long gathers() const { return gathers_.load(); }
    void reset() {
        evaluations_ = 0;
        gathers_     = 0;
    }

private:
    const Denoiser& inner_;
    mutable std::atomic<long> evaluations_{0};
    mutable std::atomic<long> gathers_{0};
};

}  // namespace dcvsr

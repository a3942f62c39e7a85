#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dcvsr/denoiser.hpp"
#include "dcvsr/guidance.hpp"
#include "dcvsr/latent_grid.hpp"
#include "dcvsr/sampler.hpp"
#include "dcvsr/tensor.hpp"

namespace dcvsr {

class ToyCodec;

enum class Scheme { sap, tap, plain };
enum class TapDirection { none, forward, backward };
enum class StartPhase { sap_first, tap_first };

std::string_view to_string(Scheme s);
std::string_view to_string(TapDirection d);

struct PipelineConfig {
    int steps                   = 25;
    double sigma_min            = 0.002;
    double sigma_max            = 700.0;
    double schedule_exponent    = 7.0;
    TileDims tile               = {64, 64, 14};
    bool sap                    = true;
    bool tap                    = true;
    int sap_rate                = 2;
    int tap_frames              = 4;
    int tap_range               = 1;
    StartPhase start            = StartPhase::sap_first;
    GuidanceConfig guidance;
    double blend_sigma_fraction = 0.25;
    int upscale                 = 4;
    uint64_t seed               = 0;
    int threads                 = 1;
};

void validate(const PipelineConfig& cfg);

struct StepTrace {
    int step           = 0;
    double sigma       = 0.0;
    double sigma_next  = 0.0;
    double gamma       = 0.0;
    Scheme scheme      = Scheme::plain;
    TapDirection direction = TapDirection::none;
    GuidanceMode guidance  = GuidanceMode::none;
};

std::string format_trace_line(const StepTrace& t);

// Scheme and TAP direction of every step: SAP/TAP alternate by step parity,
// TAP directions alternate starting forward. A disabled scheme leaves its
// steps as plain passes.
std::vector<StepTrace> plan_steps(const PipelineConfig& cfg, const SigmaSchedule& schedule);

struct StepContext {
    double sigma = 1.0;
    double gamma = 0.0;
    std::span<const float> cond;
};

// Per-layer injections applied to a tile's hooked layers.
using InjectionMap = std::vector<std::pair<int, LayerHook>>;

struct TileEstimate {
    VideoTensor eps;
    std::vector<LayerKV> captured;
    int injected_rows = 0;  // rows injected at the first hooked layer, summed over frames
};

struct PassResult {
    std::vector<VideoTensor> eps;
    std::vector<int> injected_rows;
};

struct SampleResult {
    VideoTensor hr;
    VideoTensor latent;
    std::vector<StepTrace> trace;
};

class DcVsrSampler {
public:
    DcVsrSampler(const Denoiser& denoiser, PipelineConfig cfg);

    const PipelineConfig& config() const { return cfg_; }

    // Guided noise estimate for one tile.
    TileEstimate evaluate_tile(const VideoTensor& x_tile, const VideoTensor& l_tile, const StepContext& ctx,
                               const InjectionMap& injections, bool capture_kv) const;

    // Tiles of one temporal index n, ordered by m.
    PassResult denoise_pass_sap(std::span<const VideoTensor> x_tiles, std::span<const VideoTensor> l_tiles,
                                const StepContext& ctx) const;
    // Tiles of one spatial index m, ordered by n.
    PassResult denoise_pass_tap(std::span<const VideoTensor> x_tiles, std::span<const VideoTensor> l_tiles,
                                const StepContext& ctx, TapDirection direction) const;
    PassResult denoise_pass_plain(std::span<const VideoTensor> x_tiles, std::span<const VideoTensor> l_tiles,
                                  const StepContext& ctx) const;

    // Runs the sampling loop on a latent initialised at sigma_max.
    SampleResult sample_latent(const VideoTensor& lr_latent, VideoTensor x_init, std::span<const float> cond) const;

    // Bicubic upsample -> encode -> seeded init -> sampling loop -> decode.
    SampleResult run(const VideoTensor& lr_video, const ToyCodec& codec) const;

private:
    VideoTensor branch_eps(const VideoTensor& x_tile, const VideoTensor& input, std::span<const float> cond,
                           double sigma, const HookSet& hooks, DenoiseOutput* keep) const;

    const Denoiser& denoiser_;
    PipelineConfig cfg_;
    std::vector<int> hooked_;
    std::vector<float> null_cond_;
};

// Conditioning placeholder from the first LR frame: per-channel mean and std,
// cycled to `dim` entries.
std::vector<float> first_frame_condition(const VideoTensor& lr_video, int dim);

SampleResult dc_vsr_sample(const VideoTensor& lr_video, const Denoiser& denoiser, const ToyCodec& codec,
                           const PipelineConfig& cfg);

}  // namespace dcvsr

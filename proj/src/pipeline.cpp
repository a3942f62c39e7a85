#include "dcvsr/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "dcvsr/degrade.hpp"
#include "dcvsr/parallel.hpp"
#include "dcvsr/toy_models.hpp"

namespace dcvsr {

std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::sap: return "sap";
        case Scheme::tap: return "tap";
        case Scheme::plain: return "plain";
    }
    return "?";
}

std::string_view to_string(TapDirection d) {
    switch (d) {
        case TapDirection::none: return "-";
        case TapDirection::forward: return "forward";
        case TapDirection::backward: return "backward";
    }
    return "?";
}

void validate(const PipelineConfig& cfg) {
    if (cfg.steps < 1) throw ConfigError("pipeline: steps must be >= 1");
    if (!(cfg.sigma_min > 0.0 && cfg.sigma_min < cfg.sigma_max)) {
        throw ConfigError("pipeline: need 0 < sigma_min < sigma_max");
    }
    if (cfg.tile.height < 1 || cfg.tile.width < 1 || cfg.tile.frames < 1) {
        throw ConfigError("pipeline: tile dims must be >= 1");
    }
    if (cfg.sap_rate < 1) throw ConfigError("pipeline: sap_rate must be >= 1");
    if (cfg.tap_frames < 1 || cfg.tap_frames > cfg.tile.frames) {
        throw ConfigError("pipeline: tap_l must be in [1, tile frames]");
    }
    if (cfg.tap_range != 1) throw ConfigError("pipeline: only a TAP propagation range of 1 is supported");
    if (!(cfg.blend_sigma_fraction > 0.0)) throw ConfigError("pipeline: blend sigma fraction must be > 0");
    if (cfg.upscale < 1) throw ConfigError("pipeline: upscale must be >= 1");
    if (cfg.threads < 1) throw ConfigError("pipeline: threads must be >= 1");
    validate(cfg.guidance);
}

std::string format_trace_line(const StepTrace& t) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "step=%d sigma=%.9g sigma_next=%.9g gamma=%.9g scheme=%s direction=%s guidance=%s",
                  t.step, t.sigma, t.sigma_next, t.gamma, std::string(to_string(t.scheme)).c_str(),
                  std::string(to_string(t.direction)).c_str(), std::string(to_string(t.guidance)).c_str());
    return buf;
}

std::vector<StepTrace> plan_steps(const PipelineConfig& cfg, const SigmaSchedule& schedule) {
    std::vector<StepTrace> plan;
    const auto& sig  = schedule.sigmas;
    const int offset = cfg.start == StartPhase::tap_first ? 1 : 0;
    int tap_phases   = 0;
    for (int i = 0; i < schedule.steps(); ++i) {
        StepTrace t;
        t.step       = i;
        t.sigma      = sig[i];
        t.sigma_next = sig[i + 1];
        t.gamma      = gamma_schedule(sig[i], sig.front(), sig.back(), cfg.guidance.rho);
        t.guidance   = cfg.guidance.mode;
        const bool sap_phase = (i + offset) % 2 == 0;
        if (sap_phase) {
            t.scheme = cfg.sap ? Scheme::sap : Scheme::plain;
        } else {
            const TapDirection dir = tap_phases % 2 == 0 ? TapDirection::forward : TapDirection::backward;
            ++tap_phases;
            if (cfg.tap) {
                t.scheme    = Scheme::tap;
                t.direction = dir;
            }
        }
        plan.push_back(t);
    }
    return plan;
}

std::vector<float> first_frame_condition(const VideoTensor& lr_video, int dim) {
    std::vector<float> stats;
    for (int c = 0; c < lr_video.channels(); ++c) {
        double sum = 0.0, sq = 0.0;
        const int n = lr_video.height() * lr_video.width();
        for (int y = 0; y < lr_video.height(); ++y)
            for (int x = 0; x < lr_video.width(); ++x) {
                const double v = lr_video.at(0, c, y, x);
                sum += v;
                sq += v * v;
            }
        const double mean = sum / n;
        stats.push_back(static_cast<float>(mean));
        stats.push_back(static_cast<float>(std::sqrt(std::max(0.0, sq / n - mean * mean))));
    }
    std::vector<float> cond(dim);
    for (int i = 0; i < dim; ++i) cond[i] = stats[i % stats.size()];
    return cond;
}

// ---------------------------------------------------------------------------

DcVsrSampler::DcVsrSampler(const Denoiser& denoiser, PipelineConfig cfg)
    : denoiser_(denoiser), cfg_(std::move(cfg)), hooked_(denoiser.hookable_layers()),
      null_cond_(denoiser.cond_dim(), 0.0f) {
    validate(cfg_);
    const GuidanceMode mode = cfg_.guidance.mode;
    const bool needs_hooks  = cfg_.sap || cfg_.tap || mode == GuidanceMode::dssag ||
                             mode == GuidanceMode::cfg_dssag || mode == GuidanceMode::pag;
    if (needs_hooks && hooked_.empty()) {
        throw ConfigError("pipeline: denoiser exposes no hookable attention layers for SAP/TAP/DSSAG/PAG");
    }
    if (mode == GuidanceMode::sag && !denoiser_.provides_attention_map()) {
        throw ConfigError("pipeline: sag guidance needs a denoiser with attention-map output");
    }
    const int p = denoiser_.patch_size();
    if (cfg_.tile.height % p != 0 || cfg_.tile.width % p != 0) {
        throw ConfigError("pipeline: tile spatial size must be a multiple of the denoiser patch size");
    }
}

VideoTensor DcVsrSampler::branch_eps(const VideoTensor& x_tile, const VideoTensor& input, std::span<const float> cond,
                                     double sigma, const HookSet& hooks, DenoiseOutput* keep) const {
    DenoiseRequest req;
    req.input   = &input;
    req.cond    = cond;
    req.sigma   = sigma;
    req.hooks   = &hooks;
    req.purpose = PassPurpose::evaluate;
    DenoiseOutput out = denoiser_.denoise(req);
    require_same_shape(out.denoised, x_tile, "denoiser output");
    VideoTensor eps(x_tile.shape());
    for (size_t i = 0; i < eps.size(); ++i) {
        eps.values()[i] =
            static_cast<float>((static_cast<double>(x_tile.values()[i]) - out.denoised.values()[i]) / sigma);
    }
    if (keep) *keep = std::move(out);
    return eps;
}

namespace {

VideoTensor add_scaled_difference(const VideoTensor& base, const VideoTensor& a, const VideoTensor& b, double w) {
    VideoTensor out(base.shape());
    for (size_t i = 0; i < out.size(); ++i) {
        out.values()[i] = static_cast<float>(base.values()[i] +
                                             w * (static_cast<double>(a.values()[i]) - b.values()[i]));
    }
    return out;
}

int injected_rows_at(const InjectionMap& injections) {
    if (injections.empty()) return 0;
    const LayerHook& h = injections.front().second;
    int rows           = h.shared.rows();
    for (const InjectedKV& kv : h.per_frame) rows += kv.rows();
    return rows;
}

}  // namespace

TileEstimate DcVsrSampler::evaluate_tile(const VideoTensor& x_tile, const VideoTensor& l_tile, const StepContext& ctx,
                                         const InjectionMap& injections, bool capture_kv) const {
    const VideoTensor input = interleave(x_tile, l_tile);
    const GuidanceConfig& g = cfg_.guidance;

    HookSet plain;
    for (const auto& [layer, hook] : injections) plain.layers[layer] = hook;

    const bool target_uncond       = g.mode == GuidanceMode::dssag;
    std::span<const float> target_c = target_uncond ? std::span<const float>(null_cond_) : ctx.cond;

    TileEstimate est;
    est.injected_rows = injected_rows_at(injections);

    HookSet target_hooks   = plain;
    target_hooks.capture_kv = capture_kv;
    DenoiseOutput target_out;
    const VideoTensor eps_target = branch_eps(x_tile, input, target_c, ctx.sigma, target_hooks, &target_out);
    est.captured = std::move(target_out.captured);

    const double s = g.scale;
    switch (g.mode) {
        case GuidanceMode::none: est.eps = eps_target; break;
        case GuidanceMode::cfg: {
            const VideoTensor eps_u = branch_eps(x_tile, input, null_cond_, ctx.sigma, plain, nullptr);
            est.eps = cfg(eps_u, eps_target, s);
            break;
        }
        case GuidanceMode::dssag:
        case GuidanceMode::cfg_dssag: {
            HookSet suppressed = plain;
            for (int layer : hooked_) {
                LayerHook& h = suppressed.layers[layer];
                h.kernel     = AttentionKernel::tempered;
                h.gamma      = ctx.gamma;
            }
            const VideoTensor eps_s = branch_eps(x_tile, input, null_cond_, ctx.sigma, suppressed, nullptr);
            est.eps = dssag_combine(eps_s, eps_target, s);
            break;
        }
        case GuidanceMode::pag: {
            const VideoTensor eps_u = branch_eps(x_tile, input, null_cond_, ctx.sigma, plain, nullptr);
            HookSet perturbed;
            for (int layer : hooked_) perturbed.layers[layer].kernel = AttentionKernel::identity;
            const VideoTensor eps_p = branch_eps(x_tile, input, null_cond_, ctx.sigma, perturbed, nullptr);
            est.eps = add_scaled_difference(pag_combine(eps_p, eps_u, s), eps_target, eps_u, 1.0 + s);
            break;
        }
        case GuidanceMode::sag: {
            NoiseFn noise = [&](const VideoTensor& x, bool want_attention) {
                HookSet hooks           = plain;
                hooks.capture_attention = want_attention;
                const VideoTensor in    = interleave(x, l_tile);
                DenoiseOutput out;
                NoisePrediction pred;
                pred.eps           = branch_eps(x, in, null_cond_, ctx.sigma, hooks, &out);
                pred.attention_map = std::move(out.attention_map);
                return pred;
            };
            const SagResult r = sag_detailed(noise, x_tile, ctx.sigma, g);
            est.eps           = add_scaled_difference(r.guided, eps_target, r.eps_plain, 1.0 + s);
            break;
        }
    }
    return est;
}

PassResult DcVsrSampler::denoise_pass_plain(std::span<const VideoTensor> x_tiles, std::span<const VideoTensor> l_tiles,
                                            const StepContext& ctx) const {
    if (x_tiles.size() != l_tiles.size()) throw DimensionError("denoise pass: tile list sizes differ");
    const int count = static_cast<int>(x_tiles.size());
    PassResult res{std::vector<VideoTensor>(count), std::vector<int>(count, 0)};
    parallel_for(count, cfg_.threads, [&](int i) {
        res.eps[i] = evaluate_tile(x_tiles[i], l_tiles[i], ctx, {}, false).eps;
    });
    return res;
}

PassResult DcVsrSampler::denoise_pass_sap(std::span<const VideoTensor> x_tiles, std::span<const VideoTensor> l_tiles,
                                          const StepContext& ctx) const {
    if (x_tiles.size() != l_tiles.size()) throw DimensionError("denoise pass: tile list sizes differ");
    if (hooked_.empty()) throw ConfigError("SAP: denoiser exposes no hookable attention layers");
    const int count = static_cast<int>(x_tiles.size());
    const int p     = denoiser_.patch_size();
    const bool target_uncond = cfg_.guidance.mode == GuidanceMode::dssag;
    std::span<const float> gather_c = target_uncond ? std::span<const float>(null_cond_) : ctx.cond;

    // Phase 1: plain passes collecting each tile's keys and values.
    std::vector<std::vector<LayerKV>> gathered(count);
    parallel_for(count, cfg_.threads, [&](int i) {
        const VideoTensor input = interleave(x_tiles[i], l_tiles[i]);
        HookSet hooks;
        hooks.capture_kv = true;
        DenoiseRequest req;
        req.input   = &input;
        req.cond    = gather_c;
        req.sigma   = ctx.sigma;
        req.hooks   = &hooks;
        req.purpose = PassPurpose::gather;
        gathered[i] = denoiser_.denoise(req).captured;
        if (gathered[i].size() != hooked_.size()) throw ConfigError("SAP: hook layers missing from denoiser output");
    });

    // Subsample and aggregate over m per layer and frame.
    InjectionMap injections;
    for (size_t li = 0; li < hooked_.size(); ++li) {
        LayerHook hook;
        const int frames = static_cast<int>(gathered.front()[li].keys.size());
        const TokenGrid grid{x_tiles.front().height() / p, x_tiles.front().width() / p, 1};
        for (int f = 0; f < frames; ++f) {
            std::vector<InjectedKV> parts;
            parts.reserve(count);
            for (int m = 0; m < count; ++m) {
                const LayerKV& kv = gathered[m][li];
                parts.push_back(subsample_spatial_kv({Matrix{}, kv.keys[f], kv.values[f]}, cfg_.sap_rate, grid));
            }
            hook.per_frame.push_back(aggregate_frame_kv(parts));
        }
        injections.emplace_back(gathered.front()[li].layer, std::move(hook));
    }

    // Phase 2: every tile attends to the frame-wide subsampled set.
    PassResult res{std::vector<VideoTensor>(count), std::vector<int>(count, 0)};
    parallel_for(count, cfg_.threads, [&](int i) {
        TileEstimate est     = evaluate_tile(x_tiles[i], l_tiles[i], ctx, injections, false);
        res.eps[i]           = std::move(est.eps);
        res.injected_rows[i] = est.injected_rows;
    });
    return res;
}

PassResult DcVsrSampler::denoise_pass_tap(std::span<const VideoTensor> x_tiles, std::span<const VideoTensor> l_tiles,
                                          const StepContext& ctx, TapDirection direction) const {
    if (x_tiles.size() != l_tiles.size()) throw DimensionError("denoise pass: tile list sizes differ");
    if (hooked_.empty()) throw ConfigError("TAP: denoiser exposes no hookable attention layers");
    if (direction == TapDirection::none) throw ConfigError("TAP: direction required");
    const int count = static_cast<int>(x_tiles.size());
    PassResult res{std::vector<VideoTensor>(count), std::vector<int>(count, 0)};
    const KvSource tag = direction == TapDirection::forward ? KvSource::tap_forward : KvSource::tap_backward;

    std::vector<LayerKV> previous;
    for (int k = 0; k < count; ++k) {
        const int n = direction == TapDirection::forward ? k : count - 1 - k;
        InjectionMap injections;
        for (const LayerKV& kv : previous) {
            const auto frames = select_tap_frames(kv.keys, cfg_.tap_frames);
            LayerHook hook;
            hook.shared.source = tag;
            for (int f : frames) {
                hook.shared.keys   = concat_rows(hook.shared.keys, kv.keys[f]);
                hook.shared.values = concat_rows(hook.shared.values, kv.values[f]);
            }
            injections.emplace_back(kv.layer, std::move(hook));
        }
        TileEstimate est     = evaluate_tile(x_tiles[n], l_tiles[n], ctx, injections, k + 1 < count);
        res.eps[n]           = std::move(est.eps);
        res.injected_rows[n] = est.injected_rows;
        previous             = std::move(est.captured);
        if (k + 1 < count && previous.size() != hooked_.size()) {
            throw ConfigError("TAP: hook layers missing from denoiser output");
        }
    }
    return res;
}

SampleResult DcVsrSampler::sample_latent(const VideoTensor& lr_latent, VideoTensor x, std::span<const float> cond) const {
    require_same_shape(x, lr_latent, "sample_latent");
    const SigmaSchedule schedule = build_sigma_schedule(cfg_.steps, cfg_.sigma_min, cfg_.sigma_max,
                                                        cfg_.schedule_exponent);
    const TileGrid grid   = plan_tiles(x.shape(), cfg_.tile);
    const BlendMask mask  = gaussian_mask(cfg_.tile, cfg_.blend_sigma_fraction);
    const auto l_tiles    = split(lr_latent, grid);
    const int M = grid.spatial_count(), N = grid.temporal_count();

    SampleResult result;
    result.trace = plan_steps(cfg_, schedule);
    for (const StepTrace& step : result.trace) {
        const StepContext ctx{step.sigma, step.gamma, cond};
        const auto x_tiles = split(x, grid);
        std::vector<VideoTensor> xs(x_tiles.size()), ls(x_tiles.size());
        for (size_t i = 0; i < x_tiles.size(); ++i) {
            xs[i] = x_tiles[i].payload;
            ls[i] = l_tiles[i].payload;
        }
        auto idx = [M](int m, int n) { return n * M + m; };

        std::vector<Tile> eps_tiles(x_tiles.size());
        switch (step.scheme) {
            case Scheme::plain: {
                PassResult r = denoise_pass_plain(xs, ls, ctx);
                for (size_t i = 0; i < xs.size(); ++i) eps_tiles[i] = {x_tiles[i].m, x_tiles[i].n, std::move(r.eps[i])};
                break;
            }
            case Scheme::sap: {
                for (int n = 0; n < N; ++n) {
                    const std::span<const VideoTensor> xn(xs.data() + idx(0, n), M), ln(ls.data() + idx(0, n), M);
                    PassResult r = denoise_pass_sap(xn, ln, ctx);
                    for (int m = 0; m < M; ++m) eps_tiles[idx(m, n)] = {m, n, std::move(r.eps[m])};
                }
                break;
            }
            case Scheme::tap: {
                std::vector<PassResult> per_m(M);
                DcVsrSampler serial = *this;
                serial.cfg_.threads = 1;
                parallel_for(M, cfg_.threads, [&](int m) {
                    std::vector<VideoTensor> xm, lm;
                    for (int n = 0; n < N; ++n) {
                        xm.push_back(xs[idx(m, n)]);
                        lm.push_back(ls[idx(m, n)]);
                    }
                    per_m[m] = serial.denoise_pass_tap(xm, lm, ctx, step.direction);
                });
                for (int m = 0; m < M; ++m)
                    for (int n = 0; n < N; ++n) eps_tiles[idx(m, n)] = {m, n, std::move(per_m[m].eps[n])};
                break;
            }
        }

        const VideoTensor eps = merge(eps_tiles, grid, mask);
        if (!eps.all_finite()) {
            throw NumericError("sampler: non-finite noise estimate at step " + std::to_string(step.step) +
                               " (sigma=" + std::to_string(step.sigma) + ", scheme=" +
                               std::string(to_string(step.scheme)) + ")");
        }
        x = euler_step_eps(x, eps, step.sigma, step.sigma_next);
        if (!x.all_finite()) {
            throw NumericError("sampler: non-finite latent after step " + std::to_string(step.step));
        }
    }
    result.latent = std::move(x);
    return result;
}

SampleResult DcVsrSampler::run(const VideoTensor& lr_video, const ToyCodec& codec) const {
    if (!lr_video.all_finite()) throw NumericError("pipeline: non-finite input video");
    const VideoTensor upsampled = bicubic_resize(lr_video, cfg_.upscale);
    const VideoTensor lr_latent = codec.encode(upsampled);

    VideoTensor x(lr_latent.shape());
    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (float& v : x.values()) v = static_cast<float>(normal(rng) * cfg_.sigma_max);

    const std::vector<float> cond = first_frame_condition(lr_video, denoiser_.cond_dim());
    SampleResult result           = sample_latent(lr_latent, std::move(x), cond);
    result.hr                     = codec.decode(result.latent);
    return result;
}

SampleResult dc_vsr_sample(const VideoTensor& lr_video, const Denoiser& denoiser, const ToyCodec& codec,
                           const PipelineConfig& cfg) {
    return DcVsrSampler(denoiser, cfg).run(lr_video, codec);
}

}  // namespace dcvsr

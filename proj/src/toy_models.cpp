#include "dcvsr/toy_models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dcvsr/attention.hpp"
#include "dcvsr/latent_grid.hpp"
#include "dcvsr/sampler.hpp"

namespace dcvsr {

AnalyticGaussianDenoiser::AnalyticGaussianDenoiser(std::vector<float> mu, double sigma_data)
    : mu_(std::move(mu)), sigma_data_(sigma_data) {
    if (mu_.empty()) mu_.push_back(0.0f);
    if (!(sigma_data_ > 0.0)) throw ConfigError("analytic denoiser: sigma_data must be > 0");
}

float AnalyticGaussianDenoiser::mu_at(int channel) const {
    if (mu_.size() == 1) return mu_[0];
    if (channel >= static_cast<int>(mu_.size())) throw DimensionError("analytic denoiser: mu has too few channels");
    return mu_[channel];
}

VideoTensor AnalyticGaussianDenoiser::analytic_denoise(const VideoTensor& x, double sigma) const {
    if (!(sigma >= 0.0)) throw DimensionError("analytic_denoise: sigma must be >= 0");
    const double sd2 = sigma_data_ * sigma_data_;
    VideoTensor out(x.shape());
    if (std::isinf(sigma)) {
        for (int n = 0; n < x.frames(); ++n)
            for (int c = 0; c < x.channels(); ++c)
                for (int y = 0; y < x.height(); ++y)
                    for (int w = 0; w < x.width(); ++w) out.at(n, c, y, w) = mu_at(c);
        return out;
    }
    const double s2 = sigma * sigma;
    for (int n = 0; n < x.frames(); ++n)
        for (int c = 0; c < x.channels(); ++c) {
            const double mu = mu_at(c);
            for (int y = 0; y < x.height(); ++y)
                for (int w = 0; w < x.width(); ++w)
                    out.at(n, c, y, w) = static_cast<float>((sd2 * x.at(n, c, y, w) + s2 * mu) / (sd2 + s2));
        }
    return out;
}

DenoiseOutput AnalyticGaussianDenoiser::denoise(const DenoiseRequest& request) const {
    if (request.hooks && !request.hooks->layers.empty()) {
        throw ConfigError("analytic denoiser: hook on nonexistent layer " +
                          std::to_string(request.hooks->layers.begin()->first));
    }
    DenoiseOutput out;
    out.denoised = analytic_denoise(deinterleave(*request.input).x, request.sigma);
    return out;
}

// ---------------------------------------------------------------------------

void validate(const ToyNetSpec& spec) {
    if (spec.channels < 1 || spec.patch < 1 || spec.embed_dim < 1 || spec.cond_dim < 0) {
        throw ConfigError("toy denoiser: channels, patch and embed_dim must be >= 1");
    }
    if (spec.spatial_layers < 4) throw ConfigError("toy denoiser: need at least 4 spatial layers");
    if (!(spec.sigma_data > 0.0)) throw ConfigError("toy denoiser: sigma_data must be > 0");
}

namespace {

Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double gain) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    const double scale = gain / std::sqrt(static_cast<double>(rows));
    for (float& v : m.data) v = static_cast<float>(normal(rng) * scale);
    return m;
}

Matrix rms_norm(const Matrix& h) {
    Matrix out(h.rows, h.cols);
    for (int r = 0; r < h.rows; ++r) {
        double ss = 0.0;
        for (float v : h.row(r)) ss += static_cast<double>(v) * v;
        const double inv = 1.0 / std::sqrt(ss / h.cols + 1e-6);
        auto src = h.row(r);
        auto dst = out.row(r);
        for (int c = 0; c < h.cols; ++c) dst[c] = static_cast<float>(src[c] * inv);
    }
    return out;
}

void add_into(Matrix& h, const Matrix& delta) {
    for (size_t i = 0; i < h.data.size(); ++i) h.data[i] += delta.data[i];
}

Matrix rows_of(const Matrix& h, int first, int count) {
    Matrix out(count, h.cols);
    std::copy_n(h.data.begin() + static_cast<size_t>(first) * h.cols, static_cast<size_t>(count) * h.cols,
                out.data.begin());
    return out;
}

void store_rows(Matrix& h, int first, const Matrix& block) {
    std::copy(block.data.begin(), block.data.end(), h.data.begin() + static_cast<size_t>(first) * h.cols);
}

Matrix tanh_mlp(const Matrix& h, const Matrix& w1, const Matrix& w2) {
    Matrix hidden = matmul(rms_norm(h), w1);
    for (float& v : hidden.data) v = std::tanh(v);
    return matmul(hidden, w2);
}

}  // namespace

ToyAttentionDenoiser::ToyAttentionDenoiser(const ToyNetSpec& spec) : spec_(spec) {
    validate(spec_);
    std::mt19937_64 rng(spec_.seed);
    const int d       = spec_.embed_dim;
    const int patch_f = spec_.channels * spec_.patch * spec_.patch;
    embed_            = random_matrix(rng, 2 * patch_f, d, 1.0);
    cond_proj_        = random_matrix(rng, std::max(spec_.cond_dim, 1), d, 1.0);
    {
        std::normal_distribution<double> normal(0.0, 0.1);
        noise_embed_.resize(d);
        for (float& v : noise_embed_) v = static_cast<float>(normal(rng));
    }
    auto block = [&] {
        AttentionBlock b;
        b.wq = random_matrix(rng, d, d, 1.0);
        b.wk = random_matrix(rng, d, d, 1.0);
        b.wv = random_matrix(rng, d, d, 1.0);
        b.wo = random_matrix(rng, d, d, 0.5);
        b.w1 = random_matrix(rng, d, d, 1.0);
        b.w2 = random_matrix(rng, d, d, 0.5);
        return b;
    };
    for (int i = 0; i < spec_.spatial_layers; ++i) spatial_.push_back(block());
    temporal_ = block();
    head_     = random_matrix(rng, d, patch_f, 1.0);
}

std::vector<int> ToyAttentionDenoiser::hookable_layers() const {
    const int s = spec_.spatial_layers;
    return {0, 1, s - 2, s - 1};
}

Matrix ToyAttentionDenoiser::forward_tokens(Matrix h, int frames, int tpf, const HookSet* hooks,
                                            DenoiseOutput& out, int grid_h, int grid_w) const {
    const auto hookable = hookable_layers();
    const bool want_kv  = hooks && hooks->capture_kv;
    const bool want_map = hooks && hooks->capture_attention;
    if (want_map) out.attention_map = VideoTensor({frames, 1, grid_h, grid_w});

    for (int j = 0; j < spec_.spatial_layers; ++j) {
        if (j == spec_.spatial_layers / 2) {
            // Temporal attention over frames at every token position.
            for (int p = 0; p < tpf; ++p) {
                Matrix seq(frames, h.cols);
                for (int f = 0; f < frames; ++f) {
                    auto src = h.row(f * tpf + p);
                    std::copy(src.begin(), src.end(), seq.row(f).begin());
                }
                const Matrix z = rms_norm(seq);
                AttentionTensors a{matmul(z, temporal_.wq), matmul(z, temporal_.wk), matmul(z, temporal_.wv)};
                const Matrix delta = matmul(self_attention(a), temporal_.wo);
                for (int f = 0; f < frames; ++f) {
                    auto dst = h.row(f * tpf + p);
                    auto add = delta.row(f);
                    for (int c = 0; c < h.cols; ++c) dst[c] += add[c];
                }
            }
        }

        const AttentionBlock& blk = spatial_[j];
        const bool is_hookable    = std::find(hookable.begin(), hookable.end(), j) != hookable.end();
        const LayerHook* hook     = nullptr;
        if (hooks) {
            auto it = hooks->layers.find(j);
            if (it != hooks->layers.end()) hook = &it->second;
        }
        if (hook && !hook->per_frame.empty() && static_cast<int>(hook->per_frame.size()) != frames) {
            throw DimensionError("toy denoiser: per-frame injection count does not match tile frames");
        }
        LayerKV captured{j, {}, {}};

        for (int f = 0; f < frames; ++f) {
            Matrix hf      = rows_of(h, f * tpf, tpf);
            const Matrix z = rms_norm(hf);
            AttentionTensors a{matmul(z, blk.wq), matmul(z, blk.wk), matmul(z, blk.wv)};

            InjectedKV inj;
            if (hook) {
                if (!hook->per_frame.empty()) inj = hook->per_frame[f];
                if (!hook->shared.empty()) {
                    inj.keys   = concat_rows(inj.keys, hook->shared.keys);
                    inj.values = concat_rows(inj.values, hook->shared.values);
                }
            }

            Matrix attn;
            double temperature = 1.0;
            const AttentionKernel kernel = hook ? hook->kernel : AttentionKernel::vanilla;
            AttentionTensors ext = inj.empty() ? a : AttentionTensors{a.q, concat_rows(a.k, inj.keys),
                                                                      concat_rows(a.v, inj.values)};
            switch (kernel) {
                case AttentionKernel::vanilla: attn = extended_self_attention(a, inj); break;
                case AttentionKernel::tempered:
                    temperature = suppression_temperature(ext, {hook->gamma});
                    attn        = tempered_attention(ext, temperature);
                    break;
                case AttentionKernel::identity: attn = pag_attention(a); break;
            }

            if (want_map && j == spec_.spatial_layers - 1) {
                for (int t = 0; t < tpf; ++t) out.attention_map->at(f, 0, t / grid_w, t % grid_w) = 0.0f;
                if (kernel == AttentionKernel::identity) {
                    for (int t = 0; t < tpf; ++t) out.attention_map->at(f, 0, t / grid_w, t % grid_w) = 1.0f / tpf;
                } else {
                    const auto probs = attention_probabilities(ext, temperature);
                    for (int t = 0; t < tpf; ++t) {
                        double acc = 0.0;
                        for (int r = 0; r < probs.rows; ++r) acc += probs.at(r, t);
                        out.attention_map->at(f, 0, t / grid_w, t % grid_w) = static_cast<float>(acc / probs.rows);
                    }
                }
            }
            if (want_kv && is_hookable) {
                captured.keys.push_back(std::move(a.k));
                captured.values.push_back(std::move(a.v));
            }

            add_into(hf, matmul(attn, blk.wo));
            add_into(hf, tanh_mlp(hf, blk.w1, blk.w2));
            store_rows(h, f * tpf, hf);
        }
        if (want_kv && is_hookable) out.captured.push_back(std::move(captured));
    }
    return h;
}

DenoiseOutput ToyAttentionDenoiser::denoise(const DenoiseRequest& request) const {
    if (!request.input) throw DimensionError("toy denoiser: no input");
    const auto parts = deinterleave(*request.input);
    const VideoTensor& x = parts.x;
    const VideoTensor& l = parts.l;
    const int C = spec_.channels, p = spec_.patch;
    if (x.channels() != C) throw DimensionError("toy denoiser: channel count mismatch");
    if (x.height() % p != 0 || x.width() % p != 0) {
        throw DimensionError("toy denoiser: tile " + to_string(x.shape()) + " not divisible by patch size");
    }
    if (request.hooks) {
        const auto hookable = hookable_layers();
        for (const auto& [layer, hook] : request.hooks->layers) {
            if (std::find(hookable.begin(), hookable.end(), layer) == hookable.end()) {
                throw ConfigError("toy denoiser: hook on nonexistent layer " + std::to_string(layer));
            }
        }
    }
    if (!request.cond.empty() && static_cast<int>(request.cond.size()) != spec_.cond_dim) {
        throw DimensionError("toy denoiser: conditioning vector length mismatch");
    }

    const Precondition pre = precondition(request.sigma, spec_.sigma_data);
    const int F = x.frames(), gh = x.height() / p, gw = x.width() / p, tpf = gh * gw;
    const int patch_f = C * p * p;

    Matrix tokens(F * tpf, 2 * patch_f);
    for (int f = 0; f < F; ++f)
        for (int ty = 0; ty < gh; ++ty)
            for (int tx = 0; tx < gw; ++tx) {
                auto row = tokens.row((f * gh + ty) * gw + tx);
                int k    = 0;
                for (int c = 0; c < C; ++c)
                    for (int py = 0; py < p; ++py)
                        for (int px = 0; px < p; ++px, ++k) {
                            row[k]           = static_cast<float>(pre.c_in * x.at(f, c, ty * p + py, tx * p + px));
                            row[patch_f + k] = l.at(f, c, ty * p + py, tx * p + px);
                        }
            }

    Matrix h = matmul(tokens, embed_);
    std::vector<double> bias(spec_.embed_dim, 0.0);
    for (int c = 0; c < spec_.embed_dim; ++c) bias[c] = pre.c_noise * noise_embed_[c];
    for (size_t i = 0; i < request.cond.size(); ++i)
        for (int c = 0; c < spec_.embed_dim; ++c) bias[c] += static_cast<double>(request.cond[i]) * cond_proj_.at(i, c);
    for (int r = 0; r < h.rows; ++r)
        for (int c = 0; c < h.cols; ++c) h.at(r, c) = static_cast<float>(h.at(r, c) + bias[c]);

    DenoiseOutput out;
    h                = forward_tokens(std::move(h), F, tpf, request.hooks, out, gh, gw);
    const Matrix raw = matmul(rms_norm(h), head_);

    out.denoised = VideoTensor(x.shape());
    for (int f = 0; f < F; ++f)
        for (int ty = 0; ty < gh; ++ty)
            for (int tx = 0; tx < gw; ++tx) {
                auto row = raw.row((f * gh + ty) * gw + tx);
                int k    = 0;
                for (int c = 0; c < C; ++c)
                    for (int py = 0; py < p; ++py)
                        for (int px = 0; px < p; ++px, ++k) {
                            const int y = ty * p + py, xx = tx * p + px;
                            out.denoised.at(f, c, y, xx) =
                                static_cast<float>(pre.c_skip * x.at(f, c, y, xx) + pre.c_out * row[k]);
                        }
            }
    return out;
}

// ---------------------------------------------------------------------------

ToyCodec::ToyCodec(int factor) : factor_(factor) {
    if (factor < 1) throw ConfigError("codec: factor must be >= 1");
}

VideoTensor ToyCodec::encode(const VideoTensor& video) const {
    const int f = factor_;
    if (video.height() % f != 0 || video.width() % f != 0) {
        throw DimensionError("codec: frame " + to_string(video.shape()) + " not divisible by factor " +
                             std::to_string(f));
    }
    Shape4 s  = video.shape();
    s.height /= f;
    s.width  /= f;
    VideoTensor out(s);
    const double area = static_cast<double>(f) * f;
    for (int n = 0; n < s.frames; ++n)
        for (int c = 0; c < s.channels; ++c)
            for (int y = 0; y < s.height; ++y)
                for (int x = 0; x < s.width; ++x) {
                    double acc = 0.0;
                    for (int dy = 0; dy < f; ++dy)
                        for (int dx = 0; dx < f; ++dx) acc += video.at(n, c, y * f + dy, x * f + dx);
                    out.at(n, c, y, x) = static_cast<float>(acc / area);
                }
    return out;
}

VideoTensor ToyCodec::decode(const VideoTensor& latent) const {
    const int f = factor_;
    Shape4 s  = latent.shape();
    s.height *= f;
    s.width  *= f;
    VideoTensor out(s);
    for (int n = 0; n < s.frames; ++n)
        for (int c = 0; c < s.channels; ++c)
            for (int y = 0; y < s.height; ++y)
                for (int x = 0; x < s.width; ++x) out.at(n, c, y, x) = latent.at(n, c, y / f, x / f);
    return out;
}

}  // namespace dcvsr

#include "dcvsr/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dcvsr {

namespace {

void validate(const AttentionTensors& a) {
    if (a.q.cols < 1) throw DimensionError("attention: feature dim must be >= 1");
    if (a.k.cols != a.q.cols) {
        throw DimensionError("attention: key dim " + std::to_string(a.k.cols) + " != query dim " +
                             std::to_string(a.q.cols));
    }
    if (a.k.rows != a.v.rows) throw DimensionError("attention: key/value row counts differ");
    if (a.k.rows < 1) throw DimensionError("attention: no keys");
    require_finite(a.q, "attention Q");
    require_finite(a.k, "attention K");
    require_finite(a.v, "attention V");
}

// Computes the probability row for query i into `row`.
void softmax_row(const AttentionTensors& a, int i, double scale, std::vector<double>& row) {
    const int d = a.q.cols;
    auto q      = a.q.row(i);
    double mx   = -INFINITY;
    for (int j = 0; j < a.k.rows; ++j) {
        auto k   = a.k.row(j);
        double s = 0.0;
        for (int f = 0; f < d; ++f) s += static_cast<double>(q[f]) * k[f];
        row[j] = s * scale;
        mx     = std::max(mx, row[j]);
    }
    double sum = 0.0;
    for (int j = 0; j < a.k.rows; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
    }
    for (int j = 0; j < a.k.rows; ++j) row[j] /= sum;
}

double logit_scale(const AttentionTensors& a, double temperature) {
    return 1.0 / (temperature * std::sqrt(static_cast<double>(a.d())));
}

double max_abs(const Matrix& m) {
    float mx = 0.0f;
    for (float v : m.data) mx = std::max(mx, std::fabs(v));
    return mx;
}

}  // namespace

void require_finite(const Matrix& m, const char* what) {
    for (float v : m.data) {
        if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite value");
    }
}

Matrix tempered_attention(const AttentionTensors& a, double temperature) {
    validate(a);
    const double scale = logit_scale(a, temperature);
    Matrix out(a.q.rows, a.v.cols);
    std::vector<double> row(a.k.rows);
    std::vector<double> acc(a.v.cols);
    for (int i = 0; i < a.q.rows; ++i) {
        softmax_row(a, i, scale, row);
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int j = 0; j < a.k.rows; ++j) {
            auto v = a.v.row(j);
            for (int c = 0; c < a.v.cols; ++c) acc[c] += row[j] * v[c];
        }
        for (int c = 0; c < a.v.cols; ++c) out.at(i, c) = static_cast<float>(acc[c]);
    }
    return out;
}

AttentionProbabilities attention_probabilities(const AttentionTensors& a, double temperature) {
    validate(a);
    const double scale = logit_scale(a, temperature);
    AttentionProbabilities out{a.q.rows, a.k.rows, std::vector<double>(static_cast<size_t>(a.q.rows) * a.k.rows)};
    std::vector<double> row(a.k.rows);
    for (int i = 0; i < a.q.rows; ++i) {
        softmax_row(a, i, scale, row);
        std::copy(row.begin(), row.end(), out.p.begin() + static_cast<size_t>(i) * a.k.rows);
    }
    return out;
}

Matrix self_attention(const AttentionTensors& a) { return tempered_attention(a, 1.0); }

Matrix extended_self_attention(const AttentionTensors& a, const InjectedKV& inj) {
    if (inj.empty()) return self_attention(a);
    if (inj.keys.cols != a.k.cols) {
        throw DimensionError("extended_self_attention: injected key dim " + std::to_string(inj.keys.cols) +
                             " != " + std::to_string(a.k.cols));
    }
    if (inj.values.cols != a.v.cols || inj.values.rows != inj.keys.rows) {
        throw DimensionError("extended_self_attention: injected value shape mismatch");
    }
    AttentionTensors ext{a.q, concat_rows(a.k, inj.keys), concat_rows(a.v, inj.values)};
    return self_attention(ext);
}

double suppression_temperature(const AttentionTensors& a, SuppressionParam p) {
    if (!(p.gamma >= 0.0)) throw DimensionError("dssag_attention: gamma must be >= 0");
    return std::max(p.gamma * p.gamma * max_abs(a.q) * max_abs(a.k), 1.0);
}

Matrix dssag_attention(const AttentionTensors& a, SuppressionParam p) {
    return tempered_attention(a, suppression_temperature(a, p));
}

Matrix pag_attention(const AttentionTensors& a) {
    if (a.q.rows != a.k.rows) throw DimensionError("pag_attention: query and key token counts differ");
    if (a.k.rows != a.v.rows) throw DimensionError("pag_attention: key/value row counts differ");
    return a.v;
}

InjectedKV subsample_spatial_kv(const AttentionTensors& tile_kv, int rate, const TokenGrid& grid) {
    if (rate < 1) throw DimensionError("subsample_spatial_kv: rate must be >= 1");
    if (tile_kv.k.rows != grid.tokens() || tile_kv.v.rows != grid.tokens()) {
        throw DimensionError("subsample_spatial_kv: token count " + std::to_string(tile_kv.k.rows) +
                             " does not match grid " + std::to_string(grid.tokens()));
    }
    std::vector<int> keep;
    for (int f = 0; f < grid.frames; ++f)
        for (int y = 0; y < grid.height; y += rate)
            for (int x = 0; x < grid.width; x += rate) keep.push_back((f * grid.height + y) * grid.width + x);
    return {select_rows(tile_kv.k, keep), select_rows(tile_kv.v, keep), KvSource::sap_global};
}

InjectedKV aggregate_frame_kv(std::span<const InjectedKV> per_tile) {
    InjectedKV out;
    if (!per_tile.empty()) out.source = per_tile.front().source;
    for (const InjectedKV& kv : per_tile) {
        if (!out.empty() && !kv.empty() &&
            (kv.keys.cols != out.keys.cols || kv.values.cols != out.values.cols)) {
            throw DimensionError("aggregate_frame_kv: feature dims differ between tiles");
        }
        out.keys   = concat_rows(out.keys, kv.keys);
        out.values = concat_rows(out.values, kv.values);
    }
    return out;
}

double population_std(std::span<const float> values) {
    if (values.empty()) return 0.0;
    double mean = 0.0;
    for (float v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (float v : values) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(values.size()));
}

std::vector<int> select_tap_frames(std::span<const Matrix> keys_by_frame, int count) {
    const int frames = static_cast<int>(keys_by_frame.size());
    if (count < 0 || count > frames) {
        throw DimensionError("select_tap_frames: requested " + std::to_string(count) + " of " +
                             std::to_string(frames) + " frames");
    }
    std::vector<double> stds(frames);
    for (int f = 0; f < frames; ++f) {
        if (keys_by_frame[f].data.empty()) throw DimensionError("select_tap_frames: empty key matrix");
        stds[f] = population_std(keys_by_frame[f].data);
    }
    std::vector<int> order(frames);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return stds[a] > stds[b]; });
    order.resize(count);
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace dcvsr

#pragma once

#include <span>
#include <vector>

#include "dcvsr/tensor.hpp"

namespace dcvsr {

// Q: tokens_q x d, K: tokens_k x d, V: tokens_k x d_v.
struct AttentionTensors {
    Matrix q;
    Matrix k;
    Matrix v;

    int d() const { return q.cols; }
};

enum class KvSource { sap_global, tap_forward, tap_backward };

// Extra key/value rows appended to a layer's own keys and values.
struct InjectedKV {
    Matrix keys;
    Matrix values;
    KvSource source = KvSource::sap_global;

    bool empty() const { return keys.rows == 0; }
    int rows() const { return keys.rows; }
};

struct SuppressionParam {
    double gamma = 0.0;
};

// Row-major probability matrix kept in double for analysis (entropy, SAG maps).
struct AttentionProbabilities {
    int rows = 0;
    int cols = 0;
    std::vector<double> p;

    double at(int r, int c) const { return p[static_cast<size_t>(r) * cols + c]; }
};

// softmax(Q K^T / (temperature * sqrt(d))) V with a max-subtracted softmax.
// Every attention variant below reduces to this kernel.
Matrix tempered_attention(const AttentionTensors& a, double temperature);
AttentionProbabilities attention_probabilities(const AttentionTensors& a, double temperature);

Matrix self_attention(const AttentionTensors& a);
Matrix extended_self_attention(const AttentionTensors& a, const InjectedKV& inj);

// max(gamma^2 * q * k, 1) with q, k the largest absolute entries of Q and K.
double suppression_temperature(const AttentionTensors& a, SuppressionParam p);
Matrix dssag_attention(const AttentionTensors& a, SuppressionParam p);

// Identity score matrix: returns V.
Matrix pag_attention(const AttentionTensors& a);

struct TokenGrid {
    int height = 1;
    int width  = 1;
    int frames = 1;

    int tokens() const { return height * width * frames; }
};

// Keeps tokens at (y, x) with y % rate == 0 and x % rate == 0 in every frame.
// Token order is (frame, y, x).
InjectedKV subsample_spatial_kv(const AttentionTensors& tile_kv, int rate, const TokenGrid& grid);

// Row concatenation in the given (ascending m) order.
InjectedKV aggregate_frame_kv(std::span<const InjectedKV> per_tile);

// The L frames with the largest population std of their key elements, ties to
// the lower index, returned in ascending order.
std::vector<int> select_tap_frames(std::span<const Matrix> keys_by_frame, int count);

double population_std(std::span<const float> values);

void require_finite(const Matrix& m, const char* what);

}  // namespace dcvsr

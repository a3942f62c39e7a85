#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcvsr {

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Shape4 {
    int frames   = 1;
    int channels = 1;
    int height   = 1;
    int width    = 1;

    size_t numel() const {
        return static_cast<size_t>(frames) * channels * height * width;
    }
    bool operator==(const Shape4&) const = default;
};

std::string to_string(const Shape4& s);

// Dense frames x channels x height x width float32 tensor, row-major.
class VideoTensor {
public:
    VideoTensor() = default;
    explicit VideoTensor(Shape4 shape, float fill = 0.0f);
    VideoTensor(Shape4 shape, std::vector<float> values);

    const Shape4& shape() const { return shape_; }
    int frames() const { return shape_.frames; }
    int channels() const { return shape_.channels; }
    int height() const { return shape_.height; }
    int width() const { return shape_.width; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    size_t index(int n, int c, int y, int x) const {
        return ((static_cast<size_t>(n) * shape_.channels + c) * shape_.height + y) * shape_.width + x;
    }
    float& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
    float at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }
    const std::vector<float>& storage() const { return data_; }

    // Contiguous view of one frame (channels x height x width).
    std::span<float> frame_span(int n);
    std::span<const float> frame_span(int n) const;

    VideoTensor frame(int n) const;
    VideoTensor frames_range(int first, int count) const;

    bool all_finite() const;

    bool operator==(const VideoTensor&) const = default;

private:
    Shape4 shape_{0, 0, 0, 0};
    std::vector<float> data_;
};

void require_same_shape(const VideoTensor& a, const VideoTensor& b, const char* what);

// Row-major rows x cols float matrix. Token matrices (tokens x features) use this.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(int r, int c, float fill = 0.0f);

    float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    std::span<float> row(int r) { return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
    std::span<const float> row(int r) const {
        return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }
    bool empty() const { return rows == 0; }

    bool operator==(const Matrix&) const = default;
};

// Stacks b below a. Either may be empty (zero rows).
Matrix concat_rows(const Matrix& a, const Matrix& b);
Matrix select_rows(const Matrix& m, std::span<const int> rows);
// a (n x k) times b (k x m), double accumulation.
Matrix matmul(const Matrix& a, const Matrix& b);

}  // namespace dcvsr

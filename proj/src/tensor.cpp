#include "dcvsr/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace dcvsr {

std::string to_string(const Shape4& s) {
    return std::to_string(s.frames) + "x" + std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
           std::to_string(s.width);
}

VideoTensor::VideoTensor(Shape4 shape, float fill) : shape_(shape) {
    if (shape.frames < 1 || shape.channels < 1 || shape.height < 1 || shape.width < 1) {
        throw DimensionError("VideoTensor: all dims must be >= 1, got " + to_string(shape));
    }
    data_.assign(shape.numel(), fill);
}

VideoTensor::VideoTensor(Shape4 shape, std::vector<float> values) : VideoTensor(shape) {
    if (values.size() != shape.numel()) {
        throw DimensionError("VideoTensor: value count " + std::to_string(values.size()) + " does not match " +
                             to_string(shape));
    }
    data_ = std::move(values);
}

std::span<float> VideoTensor::frame_span(int n) {
    const size_t len = static_cast<size_t>(shape_.channels) * shape_.height * shape_.width;
    return {data_.data() + n * len, len};
}

std::span<const float> VideoTensor::frame_span(int n) const {
    const size_t len = static_cast<size_t>(shape_.channels) * shape_.height * shape_.width;
    return {data_.data() + n * len, len};
}

VideoTensor VideoTensor::frame(int n) const { return frames_range(n, 1); }

VideoTensor VideoTensor::frames_range(int first, int count) const {
    if (first < 0 || count < 1 || first + count > shape_.frames) {
        throw DimensionError("VideoTensor: frame range out of bounds");
    }
    Shape4 s = shape_;
    s.frames = count;
    VideoTensor out(s);
    const size_t len = static_cast<size_t>(shape_.channels) * shape_.height * shape_.width;
    std::copy_n(data_.begin() + first * len, count * len, out.data_.begin());
    return out;
}

bool VideoTensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void require_same_shape(const VideoTensor& a, const VideoTensor& b, const char* what) {
    if (!(a.shape() == b.shape())) {
        throw DimensionError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                             to_string(b.shape()));
    }
}

Matrix::Matrix(int r, int c, float fill) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

Matrix concat_rows(const Matrix& a, const Matrix& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (a.cols != b.cols) {
        throw DimensionError("concat_rows: column mismatch " + std::to_string(a.cols) + " vs " +
                             std::to_string(b.cols));
    }
    Matrix out;
    out.rows = a.rows + b.rows;
    out.cols = a.cols;
    out.data.reserve(a.data.size() + b.data.size());
    out.data.insert(out.data.end(), a.data.begin(), a.data.end());
    out.data.insert(out.data.end(), b.data.begin(), b.data.end());
    return out;
}

Matrix select_rows(const Matrix& m, std::span<const int> rows) {
    Matrix out(static_cast<int>(rows.size()), m.cols);
    for (size_t i = 0; i < rows.size(); ++i) {
        auto src = m.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(static_cast<int>(i)).begin());
    }
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw DimensionError("matmul: inner dims " + std::to_string(a.cols) + " vs " + std::to_string(b.rows));
    }
    Matrix out(a.rows, b.cols);
    std::vector<double> acc(b.cols);
    for (int i = 0; i < a.rows; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            const float* brow = b.data.data() + static_cast<size_t>(k) * b.cols;
            for (int j = 0; j < b.cols; ++j) acc[j] += aik * brow[j];
        }
        for (int j = 0; j < b.cols; ++j) out.at(i, j) = static_cast<float>(acc[j]);
    }
    return out;
}

}  // namespace dcvsr

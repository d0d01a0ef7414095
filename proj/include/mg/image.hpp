#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mg {

using Array = Eigen::ArrayXf;

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParamError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Deterministic 64-bit generator (splitmix64). Same seed, same draws,
/// independent of platform or standard-library version.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    float next_float() { return static_cast<float>(next_double()); }

    /// Uniform integer in [lo, hi] inclusive.
    int next_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    /// Uniform in [lo, hi).
    float next_range(float lo, float hi) { return lo + (hi - lo) * next_float(); }

    /// Stream derivation: independent substream for (seed, stream).
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed ^ (0x632be59bd9b4e019ULL * (stream + 1)));
        return r.next_u64();
    }

private:
    std::uint64_t state_;
};

/// C-major H×W×C raster with values in [0,1]. Flat index: c*H*W + i*W + j.
class ImageTensor {
public:
    ImageTensor() = default;
    ImageTensor(int channels, int height, int width, float fill = 0.0f)
        : channels_(channels), height_(height), width_(width),
          data_(Array::Constant(static_cast<Eigen::Index>(channels) * height * width, fill)) {
        if (channels <= 0 || height <= 0 || width <= 0)
            throw ParamError("ImageTensor: dimensions must be positive");
        if (fill < 0.0f || fill > 1.0f)
            throw ParamError("ImageTensor: fill outside [0,1]");
    }

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }
    Eigen::Index size() const { return data_.size(); }

    float& at(int c, int i, int j) { return data_[idx(c, i, j)]; }
    float at(int c, int i, int j) const { return data_[idx(c, i, j)]; }

    Array& data() { return data_; }
    const Array& data() const { return data_; }

    bool same_shape(const ImageTensor& o) const {
        return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
    }

private:
    Eigen::Index idx(int c, int i, int j) const {
        return (static_cast<Eigen::Index>(c) * height_ + i) * width_ + j;
    }

    int channels_ = 0, height_ = 0, width_ = 0;
    Array data_;
};

/// H×W mask with elements in {0,1}, stored as float for cheap arithmetic.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int height, int width, float fill = 0.0f)
        : height_(height), width_(width),
          data_(Array::Constant(static_cast<Eigen::Index>(height) * width, fill)) {
        if (height <= 0 || width <= 0)
            throw ParamError("BinaryMask: dimensions must be positive");
        if (fill != 0.0f && fill != 1.0f)
            throw ParamError("BinaryMask: fill must be 0 or 1");
    }

    int height() const { return height_; }
    int width() const { return width_; }
    Eigen::Index size() const { return data_.size(); }

    float& at(int i, int j) { return data_[static_cast<Eigen::Index>(i) * width_ + j]; }
    float at(int i, int j) const { return data_[static_cast<Eigen::Index>(i) * width_ + j]; }

    Array& data() { return data_; }
    const Array& data() const { return data_; }

    /// Number of 1-pixels.
    Eigen::Index count() const { return static_cast<Eigen::Index>(data_.sum()); }
    bool empty() const { return count() == 0; }

    bool same_shape(const BinaryMask& o) const {
        return height_ == o.height_ && width_ == o.width_;
    }

private:
    int height_ = 0, width_ = 0;
    Array data_;
};

enum class SampleMode { bernoulli, half_plane };

/// r = m*pred + (1-m)*x, elementwise per channel.
ImageTensor composite(const ImageTensor& pred, const ImageTensor& x, const BinaryMask& m);

/// Morphological dilation: all-ones kernel_side x kernel_side convolution
/// followed by a >0 threshold. Output shape equals input shape.
BinaryMask expand_mask(const BinaryMask& m, int kernel_side);

/// E' = max(0, min(1, e - t)) elementwise; result disjoint from t.
BinaryMask subtract_trigger(const BinaryMask& e, const BinaryMask& t);

/// Random subset of e's 1-pixels. bernoulli keeps each pixel independently
/// with probability `fraction`; half_plane keeps a contiguous side of a
/// random split through the mask centroid (fraction ignored except 0/1).
BinaryMask sample_incomplete(const BinaryMask& e, double fraction, std::uint64_t seed,
                             SampleMode mode = SampleMode::bernoulli);

/// Axis-aligned rectangle mask, 1 inside [i0,i1) x [j0,j1).
BinaryMask rect_mask(int height, int width, int i0, int j0, int rect_h, int rect_w);

}  // namespace mg

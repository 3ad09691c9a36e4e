#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace panorad {

/// Raised for shape contract violations (mismatched grids, bad aspect ratio).
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for out-of-range parameters (field of view, channel count, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when input data is unusable: non-finite values, too few samples,
/// unreadable or malformed files.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// H x W x C raster on the equirectangular sphere, stored row-major with
/// channels interleaved: index = (h * W + w) * C + c.
///
/// Rows are latitudes (row 0 is the north pole band) and columns are
/// longitudes starting at -pi. The upright full-sphere convention W = 2H is
/// enforced at construction.
template <typename Scalar>
class ErpGridT {
public:
    using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    ErpGridT() = default;

    ErpGridT(int height, int width, int channels, Scalar fill = Scalar(0))
        : height_(height), width_(width), channels_(channels) {
        if (height <= 0 || channels <= 0) {
            throw DimensionError("ErpGrid: height and channels must be positive");
        }
        if (width != 2 * height) {
            throw DimensionError("ErpGrid: width must equal 2 * height (got " +
                                 std::to_string(width) + "x" + std::to_string(height) + ")");
        }
        data_ = Storage::Constant(Eigen::Index(height) * width * channels, fill);
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    Eigen::Index size() const { return data_.size(); }
    bool empty() const { return data_.size() == 0; }

    Scalar& operator()(int h, int w, int c = 0) { return data_[index(h, w, c)]; }
    Scalar operator()(int h, int w, int c = 0) const { return data_[index(h, w, c)]; }

    Storage& data() { return data_; }
    const Storage& data() const { return data_; }

    Eigen::Index index(int h, int w, int c) const {
        return (Eigen::Index(h) * width_ + w) * channels_ + c;
    }

    bool same_shape(const ErpGridT& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    bool same_raster(const ErpGridT& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    template <typename Other>
    ErpGridT<Other> cast() const {
        ErpGridT<Other> out(height_, width_, channels_);
        out.data() = data_.template cast<Other>();
        return out;
    }

    /// Copies channel `c` into a fresh single-channel grid.
    ErpGridT channel(int c) const {
        ErpGridT out(height_, width_, 1);
        for (Eigen::Index p = 0; p < Eigen::Index(height_) * width_; ++p) {
            out.data_[p] = data_[p * channels_ + c];
        }
        return out;
    }

    void set_channel(int c, const ErpGridT& src) {
        if (!same_raster(src) || src.channels() != 1) {
            throw DimensionError("ErpGrid::set_channel: raster mismatch");
        }
        for (Eigen::Index p = 0; p < Eigen::Index(height_) * width_; ++p) {
            data_[p * channels_ + c] = src.data_[p];
        }
    }

    friend bool operator==(const ErpGridT& a, const ErpGridT& b) {
        return a.same_shape(b) && (a.data_ == b.data_).all();
    }

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    Storage data_;
};

using ErpGrid = ErpGridT<double>;
using ErpGridf = ErpGridT<float>;

/// Latitude phi in [-pi/2, pi/2], longitude theta in [-pi, pi).
struct SphericalDirection {
    double latitude = 0.0;
    double longitude = 0.0;
};

/// Unit vector in the y-up, z-forward frame.
inline Eigen::Vector3d to_unit_vector(const SphericalDirection& d) {
    const double c = std::cos(d.latitude);
    return {c * std::sin(d.longitude), std::sin(d.latitude), c * std::cos(d.longitude)};
}

inline SphericalDirection from_unit_vector(const Eigen::Vector3d& v) {
    const double horizontal = std::hypot(v.x(), v.z());
    return {std::atan2(v.y(), horizontal), std::atan2(v.x(), v.z())};
}

/// Latitude of the centre of row h.
inline double row_latitude(int h, int height) {
    return std::numbers::pi / 2 - std::numbers::pi * (h + 0.5) / height;
}

/// Longitude of the centre of column w.
inline double column_longitude(int w, int width) {
    return -std::numbers::pi + 2 * std::numbers::pi * (w + 0.5) / width;
}

inline SphericalDirection pixel_to_dir(int h, int w, int height, int width) {
    if (width != 2 * height) {
        throw DimensionError("pixel_to_dir: width must equal 2 * height");
    }
    if (h < 0 || h >= height || w < 0 || w >= width) {
        throw std::out_of_range("pixel_to_dir: pixel (" + std::to_string(h) + ", " +
                                std::to_string(w) + ") outside " + std::to_string(height) +
                                "x" + std::to_string(width));
    }
    return {row_latitude(h, height), column_longitude(w, width)};
}

struct PixelIndex {
    int row = 0;
    int col = 0;
    friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

/// Pixel whose cell contains the direction (equivalently, the nearest centre
/// in row/column index space). Longitude wraps; latitude clamps at the poles.
inline PixelIndex dir_to_pixel(const SphericalDirection& d, int height, int width) {
    const double pi = std::numbers::pi;
    int h = static_cast<int>(std::floor((pi / 2 - d.latitude) / pi * height));
    h = std::clamp(h, 0, height - 1);
    int w = static_cast<int>(std::floor((d.longitude + pi) / (2 * pi) * width));
    w %= width;
    if (w < 0) {
        w += width;
    }
    return {h, w};
}

/// Relative solid angle of a pixel in row h compared with an equator pixel.
inline double solid_angle_weight(int h, int height) {
    if (h < 0 || h >= height) {
        throw std::out_of_range("solid_angle_weight: row " + std::to_string(h) + " outside [0, " +
                                std::to_string(height) + ")");
    }
    return std::cos(row_latitude(std::min(h, height - 1 - h), height));
}

/// Column w of the result is column (w - shift) mod W of the input.
template <typename Scalar>
ErpGridT<Scalar> cyclic_shift(const ErpGridT<Scalar>& grid, int shift) {
    const int width = grid.width();
    const int channels = grid.channels();
    int s = shift % width;
    if (s < 0) {
        s += width;
    }
    ErpGridT<Scalar> out(grid.height(), width, channels);
    for (int h = 0; h < grid.height(); ++h) {
        for (int w = 0; w < width; ++w) {
            const int src = (w - s + width) % width;
            for (int c = 0; c < channels; ++c) {
                out(h, w, c) = grid(h, src, c);
            }
        }
    }
    return out;
}

/// Fraction of the sphere covered by the nonzero pixels of a 1-channel mask,
/// with every pixel weighted by its solid angle.
template <typename Scalar>
double weighted_coverage(const ErpGridT<Scalar>& mask) {
    double covered = 0.0;
    double total = 0.0;
    for (int h = 0; h < mask.height(); ++h) {
        const double weight = solid_angle_weight(h, mask.height());
        for (int w = 0; w < mask.width(); ++w) {
            total += weight;
            if (mask(h, w) != Scalar(0)) {
                covered += weight;
            }
        }
    }
    return covered / total;
}

}  // namespace panorad

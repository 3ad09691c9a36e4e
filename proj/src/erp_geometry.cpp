#include "panorad/erp_geometry.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace panorad {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

// Splits a yaw angle into an integer column shift and a residual yaw in
// [0, one column). Masks are rendered at the residual yaw and shifted, so
// yaw offsets that are whole columns reproduce the shifted mask exactly.
struct YawSplit {
    int columns = 0;
    double residual = 0.0;
};

YawSplit split_yaw(double yaw, int width) {
    const double cols = yaw * width / kTwoPi;
    const double whole = std::floor(cols + 1e-9);
    YawSplit split;
    split.residual = std::max(0.0, cols - whole) * kTwoPi / width;
    const long long k = static_cast<long long>(whole) % width;
    split.columns = static_cast<int>(k < 0 ? k + width : k);
    return split;
}

}  // namespace

Eigen::Matrix3d sensor_rotation(double pitch, double yaw) {
    return (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(-pitch, Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

ErpGrid camera_mask(double fov_horizontal, double fov_vertical, double pitch, double yaw,
                    int height, int width) {
    const double pi = std::numbers::pi;
    if (!(fov_horizontal > 0 && fov_horizontal < pi) || !(fov_vertical > 0 && fov_vertical < pi)) {
        throw ParameterError("camera_mask: fields of view must lie in (0, pi)");
    }
    const YawSplit split = split_yaw(yaw, width);
    const Eigen::Matrix3d world_to_cam = sensor_rotation(pitch, split.residual).transpose();
    const double tan_h = std::tan(fov_horizontal / 2);
    const double tan_v = std::tan(fov_vertical / 2);

    ErpGrid mask(height, width, 1);
    for (int h = 0; h < height; ++h) {
        for (int w = 0; w < width; ++w) {
            const Eigen::Vector3d d = world_to_cam * to_unit_vector(pixel_to_dir(h, w, height, width));
            if (d.z() > 0 && std::abs(d.x()) <= tan_h * d.z() && std::abs(d.y()) <= tan_v * d.z()) {
                mask(h, w) = 1.0;
            }
        }
    }
    return split.columns == 0 ? mask : cyclic_shift(mask, split.columns);
}

std::vector<double> lidar_ring_elevations(const LidarParams& params) {
    if (params.channels < 1) {
        throw ParameterError("lidar: channel count must be at least 1");
    }
    if (params.fov_lower < 0 || params.fov_upper < 0) {
        throw ParameterError("lidar: fields of view must be non-negative");
    }
    std::vector<double> elevations;
    if (params.channels == 1) {
        elevations.push_back((params.fov_upper - params.fov_lower) / 2);
        return elevations;
    }
    const double span = params.fov_lower + params.fov_upper;
    for (int i = 0; i < params.channels; ++i) {
        elevations.push_back(-params.fov_lower + span * i / (params.channels - 1));
    }
    return elevations;
}

ErpGrid lidar_mask(const LidarParams& params, int height, int width) {
    const std::vector<double> elevations = lidar_ring_elevations(params);
    const YawSplit split = split_yaw(params.yaw, width);
    const Eigen::Matrix3d rotation = sensor_rotation(params.pitch, split.residual);
    const int samples = 4 * width;

    ErpGrid mask(height, width, 1);
    for (double elevation : elevations) {
        const double ce = std::cos(elevation);
        const double se = std::sin(elevation);
        for (int j = 0; j < samples; ++j) {
            const double azimuth = kTwoPi * j / samples;
            const Eigen::Vector3d d = rotation * Eigen::Vector3d(ce * std::sin(azimuth), se,
                                                                 ce * std::cos(azimuth));
            const PixelIndex px = dir_to_pixel(from_unit_vector(d), height, width);
            mask(px.row, px.col) = 1.0;
        }
    }
    return split.columns == 0 ? mask : cyclic_shift(mask, split.columns);
}

ErpGrid mask_union(const ErpGrid& a, const ErpGrid& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("mask_union: shape mismatch");
    }
    ErpGrid out = a;
    out.data() = (a.data() != 0.0 || b.data() != 0.0).cast<double>();
    return out;
}

}  // namespace panorad

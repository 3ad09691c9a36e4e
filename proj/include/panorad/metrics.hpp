#pragma once

#include "panorad/erp_grid.hpp"
#include "panorad/scene_depth.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace panorad {

using Polygon = std::vector<Eigen::Vector2d>;

/// Returned by psnr for identical images.
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) over all channels, capped at kPsnrCap.
double psnr(const ErpGrid& pred, const ErpGrid& gt);

/// Mean local SSIM of the channel-mean luminance: 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1. Windows wrap around
/// in longitude and stay inside the image in latitude.
double ssim(const ErpGrid& pred, const ErpGrid& gt);

/// Mean of |p - g| / g over valid pixels (all pixels when validity is null).
double absrel(const ErpGrid& pred, const ErpGrid& gt, const ErpGrid* validity = nullptr);

/// Root-mean-square depth error over valid pixels, in millimetres.
double rmse_mm(const ErpGrid& pred, const ErpGrid& gt, const ErpGrid* validity = nullptr);

/// Raster resolution of layout_iou2d.
inline constexpr int kIouRaster = 512;

/// IoU of two floor polygons rasterised at pixel centres on a 512 x 512 grid
/// spanning their joint bounding box.
double layout_iou2d(const Polygon& a, const Polygon& b);
double layout_iou2d(const SceneAnnotation& a, const SceneAnnotation& b);

struct FloorExtractionOptions {
    int rays = 256;
    double depression = 0.5235987755982988;  // 30 degrees below the equator
};

/// Casts rays at evenly spaced longitudes and a fixed depression angle and
/// projects each hit point horizontally onto the floor plane. A ray that
/// lands on the floor (within 1% of camera_height) falls back to the
/// equator sample of its column. Returns the points in longitude order.
Polygon extract_floor_polygon(const ErpGrid& depth, double camera_height,
                              const FloorExtractionOptions& options = {},
                              const ErpGrid* validity = nullptr);

struct CornerError {
    double value = 0.0;
    bool count_mismatch = false;
};

/// Mean matched-corner distance over cyclic alignments in both orientations,
/// divided by the diagonal of the ground-truth bounding box. When the counts
/// differ, each corner of the smaller set is matched to its nearest
/// neighbour in the other and count_mismatch is set.
CornerError corner_error(const Polygon& pred, const Polygon& gt);

struct MetricReport {
    std::optional<double> psnr;
    std::optional<double> ssim;
    std::optional<double> absrel;
    std::optional<double> rmse;
    std::optional<double> iou2d;
    std::optional<double> corner_err;
};

}  // namespace panorad

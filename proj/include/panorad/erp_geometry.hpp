#pragma once

#include "panorad/erp_grid.hpp"

#include <Eigen/Geometry>

#include <vector>

namespace panorad {

/// Sensor-to-world rotation: pitch about x (positive looks up), then yaw
/// about y. The sensor's forward axis +z maps to
/// (cos(pitch) sin(yaw), sin(pitch), cos(pitch) cos(yaw)).
Eigen::Matrix3d sensor_rotation(double pitch, double yaw);

/// Binary visibility mask of a pinhole camera frustum.
///
/// A pixel is visible when its direction in the camera frame has z > 0 and
/// lies within tan(fov/2) horizontally and vertically. Throws ParameterError
/// unless both fields of view lie in (0, pi).
ErpGrid camera_mask(double fov_horizontal, double fov_vertical, double pitch, double yaw,
                    int height, int width);

/// Parameters of a mechanical spinning LiDAR.
struct LidarParams {
    double fov_lower = 0.0;  ///< radians below the sensor horizon
    double fov_upper = 0.0;  ///< radians above the sensor horizon
    double pitch = 0.0;
    double yaw = 0.0;
    int channels = 1;
};

/// Sensor-frame elevations of the scan rings, evenly spaced over
/// [-fov_lower, +fov_upper]; a single channel sits at the midpoint.
std::vector<double> lidar_ring_elevations(const LidarParams& params);

/// Rasterises every scan ring at 4W azimuth samples into 1-pixel-wide rings.
ErpGrid lidar_mask(const LidarParams& params, int height, int width);

/// Logical OR of two binary masks.
ErpGrid mask_union(const ErpGrid& a, const ErpGrid& b);

}  // namespace panorad

#pragma once

#include "panorad/erp_grid.hpp"
#include "panorad/random.hpp"

#include <Eigen/Core>

#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace panorad {

class AnnotationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Room shell: floor polygon in the camera-centred xz-plane plus the two
/// heights measured from the floor. The camera sits at the origin.
struct SceneAnnotation {
    std::vector<Eigen::Vector2d> corners_xz;  // (x, z), counter-clockwise
    double camera_height = 1.5;
    double ceiling_height = 3.0;

    /// Throws AnnotationError unless the polygon is simple, strictly contains
    /// the camera, and 0 < camera_height < ceiling_height.
    void validate() const;

    double floor_y() const { return -camera_height; }
    double ceiling_y() const { return ceiling_height - camera_height; }

    friend bool operator==(const SceneAnnotation&, const SceneAnnotation&) = default;
};

/// Axis-aligned furniture block in camera-centred coordinates.
struct Box {
    Eigen::Vector3d lo;
    Eigen::Vector3d hi;
    friend bool operator==(const Box&, const Box&) = default;
};

struct RgbdScene {
    ErpGrid rgb;       // 3 channels in [0, 1]
    ErpGrid depth;     // metres, Euclidean ray distance
    ErpGrid validity;  // 1 where depth is observed
    SceneAnnotation layout;
    std::vector<Box> boxes;
};

/// Signed shoelace area of a polygon in the (x, z) plane.
double polygon_area(const std::vector<Eigen::Vector2d>& polygon);

/// Strict interior test; points within `margin` of an edge count as outside.
bool polygon_contains(const std::vector<Eigen::Vector2d>& polygon, const Eigen::Vector2d& p,
                      double margin = 0.0);

bool polygon_is_simple(const std::vector<Eigen::Vector2d>& polygon);

/// Distance along a unit direction from the camera to the room shell.
double shell_distance(const SceneAnnotation& ann, const Eigen::Vector3d& dir);

/// Distance to the nearer face of a box, or +inf if the ray misses it.
double box_distance(const Box& box, const Eigen::Vector3d& dir);

/// Per-pixel distance from the camera to the room shell.
ErpGrid layout_depth(const SceneAnnotation& ann, int height, int width);

struct DepthDecomposition {
    ErpGrid layout;
    ErpGrid residual;
};

/// Splits total depth into the analytic shell depth and a signed residual.
DepthDecomposition decompose_depth(const ErpGrid& total, const SceneAnnotation& ann);

/// Element-wise layout + residual, clamped below at zero.
ErpGrid recompose_depth(const ErpGrid& layout, const ErpGrid& residual);

struct SceneOptions {
    int min_boxes = 0;
    int max_boxes = 6;
};

/// Procedural room with flat-shaded surfaces and exact ray-cast depth.
RgbdScene generate_scene(Seed seed, int height, int width, const SceneOptions& options = {});

/// RGB in channels 0..2 and depth in channel 3.
ErpGrid stack_rgbd(const ErpGrid& rgb, const ErpGrid& depth);

}  // namespace panorad

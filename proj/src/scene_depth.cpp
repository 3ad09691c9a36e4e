#include "panorad/scene_depth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace panorad {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() * b.y() - a.y() * b.x();
}

bool segments_intersect(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                        const Eigen::Vector2d& q1, const Eigen::Vector2d& q2) {
    const double d1 = cross2(q2 - q1, p1 - q1);
    const double d2 = cross2(q2 - q1, p2 - q1);
    const double d3 = cross2(p2 - p1, q1 - p1);
    const double d4 = cross2(p2 - p1, q2 - p1);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
        return true;
    }
    auto on_segment = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                         const Eigen::Vector2d& p) {
        return p.x() >= std::min(a.x(), b.x()) && p.x() <= std::max(a.x(), b.x()) &&
               p.y() >= std::min(a.y(), b.y()) && p.y() <= std::max(a.y(), b.y());
    };
    return (d1 == 0 && on_segment(q1, q2, p1)) || (d2 == 0 && on_segment(q1, q2, p2)) ||
           (d3 == 0 && on_segment(p1, p2, q1)) || (d4 == 0 && on_segment(p1, p2, q2));
}

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b) {
    const Eigen::Vector2d e = b - a;
    const double t = std::clamp((p - a).dot(e) / e.squaredNorm(), 0.0, 1.0);
    return (a + t * e - p).norm();
}

// Which surface a ray hit, for shading.
enum class SurfaceKind { floor, ceiling, wall, box };

struct Hit {
    double distance = kInf;
    SurfaceKind kind = SurfaceKind::wall;
    int index = 0;
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
};

Hit shell_hit(const SceneAnnotation& ann, const Eigen::Vector3d& dir) {
    Hit hit;
    if (dir.y() < 0) {
        hit = {ann.camera_height / -dir.y(), SurfaceKind::floor, 0, Eigen::Vector3d::UnitY()};
    } else if (dir.y() > 0) {
        hit = {ann.ceiling_y() / dir.y(), SurfaceKind::ceiling, 0, -Eigen::Vector3d::UnitY()};
    }
    const Eigen::Vector2d d(dir.x(), dir.z());
    const auto& poly = ann.corners_xz;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d& a = poly[i];
        const Eigen::Vector2d e = poly[(i + 1) % n] - a;
        const double denom = cross2(d, e);
        if (denom == 0.0) {
            continue;
        }
        const double t = cross2(a, e) / denom;
        const double s = cross2(a, d) / denom;
        if (t > 0 && s >= -1e-12 && s <= 1 + 1e-12 && t < hit.distance) {
            Eigen::Vector2d inward(-e.y(), e.x());
            if (inward.dot(-a) < 0) {
                inward = -inward;
            }
            inward.normalize();
            hit = {t, SurfaceKind::wall, static_cast<int>(i),
                   Eigen::Vector3d(inward.x(), 0.0, inward.y())};
        }
    }
    return hit;
}

Hit box_hit(const Box& box, const Eigen::Vector3d& dir) {
    double t_near = -kInf;
    double t_far = kInf;
    int axis_near = 0;
    for (int axis = 0; axis < 3; ++axis) {
        if (dir[axis] == 0.0) {
            if (0.0 < box.lo[axis] || 0.0 > box.hi[axis]) {
                return {};
            }
            continue;
        }
        double t0 = box.lo[axis] / dir[axis];
        double t1 = box.hi[axis] / dir[axis];
        if (t0 > t1) {
            std::swap(t0, t1);
        }
        if (t0 > t_near) {
            t_near = t0;
            axis_near = axis;
        }
        t_far = std::min(t_far, t1);
    }
    if (t_near > t_far || t_near <= 0) {
        return {};
    }
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
    normal[axis_near] = dir[axis_near] > 0 ? -1.0 : 1.0;
    return {t_near, SurfaceKind::box, 0, normal};
}

}  // namespace

double polygon_area(const std::vector<Eigen::Vector2d>& polygon) {
    double area = 0.0;
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        area += cross2(polygon[i], polygon[(i + 1) % polygon.size()]);
    }
    return area / 2;
}

bool polygon_contains(const std::vector<Eigen::Vector2d>& polygon, const Eigen::Vector2d& p,
                      double margin) {
    const std::size_t n = polygon.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Eigen::Vector2d& a = polygon[i];
        const Eigen::Vector2d& b = polygon[j];
        if (point_segment_distance(p, a, b) <= margin) {
            return false;
        }
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (p.x() < x) {
                inside = !inside;
            }
        }
    }
    return inside;
}

bool polygon_is_simple(const std::vector<Eigen::Vector2d>& polygon) {
    const std::size_t n = polygon.size();
    if (n < 3) {
        return false;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if ((polygon[i] - polygon[(i + 1) % n]).squaredNorm() == 0.0) {
            return false;
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) {
                continue;
            }
            if (segments_intersect(polygon[i], polygon[(i + 1) % n], polygon[j],
                                   polygon[(j + 1) % n])) {
                return false;
            }
        }
    }
    return std::abs(polygon_area(polygon)) > 1e-9;
}

void SceneAnnotation::validate() const {
    if (corners_xz.size() < 3) {
        throw AnnotationError("annotation: need at least 3 floor corners");
    }
    if (!polygon_is_simple(corners_xz)) {
        throw AnnotationError("annotation: floor polygon is not simple");
    }
    if (!polygon_contains(corners_xz, Eigen::Vector2d::Zero(), 1e-9)) {
        throw AnnotationError("annotation: camera lies outside the floor polygon");
    }
    if (!(camera_height > 0 && camera_height < ceiling_height)) {
        throw AnnotationError("annotation: need 0 < camera_height < ceiling_height");
    }
}

double shell_distance(const SceneAnnotation& ann, const Eigen::Vector3d& dir) {
    return shell_hit(ann, dir).distance;
}

double box_distance(const Box& box, const Eigen::Vector3d& dir) {
    return box_hit(box, dir).distance;
}

ErpGrid layout_depth(const SceneAnnotation& ann, int height, int width) {
    ann.validate();
    ErpGrid depth(height, width, 1);
    for (int h = 0; h < height; ++h) {
        for (int w = 0; w < width; ++w) {
            depth(h, w) = shell_distance(ann, to_unit_vector(pixel_to_dir(h, w, height, width)));
        }
    }
    return depth;
}

DepthDecomposition decompose_depth(const ErpGrid& total, const SceneAnnotation& ann) {
    if (total.channels() != 1) {
        throw DimensionError("decompose_depth: depth must have one channel");
    }
    DepthDecomposition out{layout_depth(ann, total.height(), total.width()), total};
    out.residual.data() = total.data() - out.layout.data();
    return out;
}

ErpGrid recompose_depth(const ErpGrid& layout, const ErpGrid& residual) {
    if (!layout.same_shape(residual)) {
        throw DimensionError("recompose_depth: shape mismatch");
    }
    ErpGrid total = layout;
    total.data() = (layout.data() + residual.data()).max(0.0);
    return total;
}

ErpGrid stack_rgbd(const ErpGrid& rgb, const ErpGrid& depth) {
    if (!rgb.same_raster(depth) || rgb.channels() != 3 || depth.channels() != 1) {
        throw DimensionError("stack_rgbd: expected 3-channel RGB and 1-channel depth");
    }
    ErpGrid out(rgb.height(), rgb.width(), 4);
    for (int h = 0; h < rgb.height(); ++h) {
        for (int w = 0; w < rgb.width(); ++w) {
            for (int c = 0; c < 3; ++c) {
                out(h, w, c) = rgb(h, w, c);
            }
            out(h, w, 3) = depth(h, w);
        }
    }
    return out;
}

namespace {

SceneAnnotation random_room(CounterRng rng) {
    SceneAnnotation ann;
    const int corners = rng.uniform_int(4, 8);
    if (corners == 4 && rng.uniform() < 0.75) {
        // Rectangular room, camera off-centre.
        const double hx = rng.uniform(1.5, 5.0);
        const double hz = rng.uniform(1.5, 5.0);
        const double cx = rng.uniform(-0.6, 0.6) * hx;
        const double cz = rng.uniform(-0.6, 0.6) * hz;
        ann.corners_xz = {{cx - hx, cz - hz}, {cx + hx, cz - hz}, {cx + hx, cz + hz},
                          {cx - hx, cz + hz}};
    } else {
        // Star-shaped polygon around the camera: angular gaps stay below pi.
        const double base = rng.uniform(0.0, 2 * std::numbers::pi);
        for (int k = 0; k < corners; ++k) {
            const double angle =
                base + 2 * std::numbers::pi * (k + rng.uniform(-0.3, 0.3)) / corners;
            const double radius = rng.uniform(1.5, 5.0);
            ann.corners_xz.emplace_back(radius * std::cos(angle), radius * std::sin(angle));
        }
    }
    if (polygon_area(ann.corners_xz) < 0) {
        std::reverse(ann.corners_xz.begin(), ann.corners_xz.end());
    }
    ann.camera_height = rng.uniform(1.2, 1.8);
    ann.ceiling_height = rng.uniform(2.4, 3.5);
    return ann;
}

bool footprint_fits(const SceneAnnotation& ann, const Eigen::Vector2d& lo,
                    const Eigen::Vector2d& hi) {
    const std::vector<Eigen::Vector2d> rect{lo, {hi.x(), lo.y()}, hi, {lo.x(), hi.y()}};
    for (const auto& corner : rect) {
        if (!polygon_contains(ann.corners_xz, corner, 0.05)) {
            return false;
        }
    }
    const auto& poly = ann.corners_xz;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& p = poly[i];
        if (p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y()) {
            return false;
        }
        for (std::size_t k = 0; k < 4; ++k) {
            if (segments_intersect(p, poly[(i + 1) % poly.size()], rect[k], rect[(k + 1) % 4])) {
                return false;
            }
        }
    }
    // Keep clear of the camera column.
    const Eigen::Vector2d nearest = Eigen::Vector2d::Zero().cwiseMax(lo).cwiseMin(hi);
    return nearest.norm() > 0.4;
}

std::vector<Box> random_boxes(const SceneAnnotation& ann, CounterRng rng, int count) {
    Eigen::Vector2d lo = ann.corners_xz.front();
    Eigen::Vector2d hi = lo;
    for (const auto& c : ann.corners_xz) {
        lo = lo.cwiseMin(c);
        hi = hi.cwiseMax(c);
    }
    std::vector<Box> boxes;
    for (int attempt = 0; attempt < 200 && static_cast<int>(boxes.size()) < count; ++attempt) {
        const Eigen::Vector2d size(rng.uniform(0.3, 1.5), rng.uniform(0.3, 1.5));
        const Eigen::Vector2d centre(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()));
        const double box_height = rng.uniform(0.3, std::min(2.0, ann.ceiling_height - 0.2));
        const Eigen::Vector2d flo = centre - size / 2;
        const Eigen::Vector2d fhi = centre + size / 2;
        if (!footprint_fits(ann, flo, fhi)) {
            continue;
        }
        boxes.push_back({{flo.x(), ann.floor_y(), flo.y()},
                         {fhi.x(), ann.floor_y() + box_height, fhi.y()}});
    }
    return boxes;
}

Eigen::Vector3d random_colour(CounterRng& rng, double lo, double hi) {
    return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

}  // namespace

RgbdScene generate_scene(Seed seed, int height, int width, const SceneOptions& options) {
    const CounterRng root(seed, 0x5CE4E);
    RgbdScene scene;
    scene.layout = random_room(root.split(1));
    scene.layout.validate();
    const int count = root.split(2).uniform_int(options.min_boxes, options.max_boxes);
    scene.boxes = random_boxes(scene.layout, root.split(3), count);

    CounterRng palette = root.split(4);
    const Eigen::Vector3d floor_colour = random_colour(palette, 0.2, 0.7);
    const Eigen::Vector3d ceiling_colour = random_colour(palette, 0.7, 1.0);
    std::vector<Eigen::Vector3d> wall_colours;
    for (std::size_t i = 0; i < scene.layout.corners_xz.size(); ++i) {
        wall_colours.push_back(random_colour(palette, 0.3, 0.95));
    }
    std::vector<Eigen::Vector3d> box_colours;
    for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
        box_colours.push_back(random_colour(palette, 0.05, 0.9));
    }

    const Eigen::Vector3d light = Eigen::Vector3d(0.3, 0.8, -0.5).normalized();
    scene.rgb = ErpGrid(height, width, 3);
    scene.depth = ErpGrid(height, width, 1);
    scene.validity = ErpGrid(height, width, 1, 1.0);
    for (int h = 0; h < height; ++h) {
        for (int w = 0; w < width; ++w) {
            const Eigen::Vector3d dir = to_unit_vector(pixel_to_dir(h, w, height, width));
            Hit hit = shell_hit(scene.layout, dir);
            const double shell = hit.distance;
            for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
                Hit candidate = box_hit(scene.boxes[b], dir);
                if (candidate.distance < hit.distance) {
                    hit = candidate;
                    hit.index = static_cast<int>(b);
                }
            }
            Eigen::Vector3d albedo = Eigen::Vector3d::Zero();
            switch (hit.kind) {
                case SurfaceKind::floor:
                    albedo = floor_colour;
                    break;
                case SurfaceKind::ceiling:
                    albedo = ceiling_colour;
                    break;
                case SurfaceKind::wall:
                    albedo = wall_colours[hit.index];
                    break;
                case SurfaceKind::box:
                    albedo = box_colours[hit.index];
                    break;
            }
            const double shade = 0.35 + 0.65 * std::max(0.0, hit.normal.dot(light));
            for (int c = 0; c < 3; ++c) {
                scene.rgb(h, w, c) = std::clamp(albedo[c] * shade, 0.0, 1.0);
            }
            // Stored as shell + (hit - shell) so that decompose_depth and
            // recompose_depth round-trip bit-exactly.
            scene.depth(h, w) = shell + (hit.distance - shell);
        }
    }
    return scene;
}

}  // namespace panorad

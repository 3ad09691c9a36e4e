#include "panorad/sensor_sim.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace panorad {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

std::string to_string(Modality m) {
    switch (m) {
        case Modality::rgb_only:
            return "rgb_only";
        case Modality::depth_only:
            return "depth_only";
        case Modality::both:
            return "both";
    }
    return "both";
}

std::string to_string(DepthKind k) { return k == DepthKind::lidar ? "lidar" : "perspective"; }

Modality modality_from_string(const std::string& s) {
    if (s == "rgb_only") return Modality::rgb_only;
    if (s == "depth_only") return Modality::depth_only;
    if (s == "both") return Modality::both;
    throw ParameterError("unknown modality '" + s + "'");
}

DepthKind depth_kind_from_string(const std::string& s) {
    if (s == "lidar") return DepthKind::lidar;
    if (s == "perspective") return DepthKind::perspective;
    throw ParameterError("unknown depth kind '" + s + "'");
}

bool operator==(const SensorConfig& a, const SensorConfig& b) {
    const auto& la = a.lidar;
    const auto& lb = b.lidar;
    return a.modality == b.modality && a.depth_kind == b.depth_kind && a.camera == b.camera &&
           la.fov_lower == lb.fov_lower && la.fov_upper == lb.fov_upper && la.pitch == lb.pitch &&
           la.yaw == lb.yaw && la.channels == lb.channels;
}

SensorConfig sample_config(Seed seed) {
    // One child stream per parameter so adding a field never perturbs others.
    const CounterRng root(seed, 0x5E5502);
    auto draw = [&](std::uint64_t stream) { return root.split(stream); };

    SensorConfig cfg;
    constexpr std::array modalities{Modality::rgb_only, Modality::depth_only, Modality::both};
    cfg.modality = modalities[draw(1).below(3)];
    cfg.depth_kind = draw(2).below(2) == 0 ? DepthKind::lidar : DepthKind::perspective;

    cfg.camera.fov_horizontal = draw(3).uniform(60.0, 90.0) * kDeg;
    cfg.camera.fov_vertical = draw(4).uniform(60.0, 90.0) * kDeg;
    cfg.camera.pitch = draw(5).uniform(-90.0, 90.0) * kDeg;
    cfg.camera.viewpoints = draw(6).uniform_int(1, 4);
    cfg.camera.global_yaw = draw(7).uniform(0.0, 360.0) * kDeg;

    constexpr std::array channel_counts{2, 4, 8, 16};
    const int eta = channel_counts[draw(8).below(4)];
    cfg.lidar.channels = eta;
    cfg.lidar.pitch = draw(9).uniform(-90.0, 90.0) * kDeg;
    cfg.lidar.yaw = draw(10).uniform(0.0, 360.0) * kDeg;
    cfg.lidar.fov_lower = eta * draw(11).uniform_int(1, 3) * kDeg;
    cfg.lidar.fov_upper = eta * draw(12).uniform_int(1, 3) * kDeg;
    return cfg;
}

namespace {

ErpGrid rig_mask(const CameraRig& rig, int height, int width) {
    ErpGrid mask(height, width, 1);
    for (int k = 0; k < rig.viewpoints; ++k) {
        const double yaw = rig.global_yaw + 2 * std::numbers::pi * k / rig.viewpoints;
        mask = mask_union(mask, camera_mask(rig.fov_horizontal, rig.fov_vertical, rig.pitch, yaw,
                                            height, width));
    }
    return mask;
}

}  // namespace

ErpGrid compose_rgb_mask(const SensorConfig& cfg, int height, int width) {
    if (!cfg.has_rgb()) {
        throw UsageError("compose_rgb_mask: configuration has no RGB cameras");
    }
    if (cfg.camera.viewpoints < 1) {
        throw ParameterError("compose_rgb_mask: viewpoint count must be positive");
    }
    return rig_mask(cfg.camera, height, width);
}

ErpGrid compose_depth_mask(const SensorConfig& cfg, int height, int width) {
    if (!cfg.has_depth()) {
        throw UsageError("compose_depth_mask: configuration has no depth sensor");
    }
    if (cfg.depth_kind == DepthKind::perspective) {
        return rig_mask(cfg.camera, height, width);
    }
    return lidar_mask(cfg.lidar, height, width);
}

std::pair<ErpGrid, ErpGrid> config_masks(const SensorConfig& cfg, int height, int width) {
    ErpGrid rgb = cfg.has_rgb() ? compose_rgb_mask(cfg, height, width) : ErpGrid(height, width, 1);
    ErpGrid depth =
        cfg.has_depth() ? compose_depth_mask(cfg, height, width) : ErpGrid(height, width, 1);
    return {std::move(rgb), std::move(depth)};
}

MaskedInputs apply_masks(const ErpGrid& panorama, const ErpGrid& rgb_mask,
                         const ErpGrid& depth_mask) {
    if (panorama.channels() < 4) {
        throw DimensionError("apply_masks: panorama needs RGB + depth channels");
    }
    if (!panorama.same_raster(rgb_mask) || !panorama.same_raster(depth_mask) ||
        rgb_mask.channels() != 1 || depth_mask.channels() != 1) {
        throw DimensionError("apply_masks: masks must be 1-channel and match the panorama");
    }
    const int height = panorama.height();
    const int width = panorama.width();
    MaskedInputs out{ErpGrid(height, width, 4), ErpGrid(height, width, 2)};
    for (int h = 0; h < height; ++h) {
        for (int w = 0; w < width; ++w) {
            const double mr = rgb_mask(h, w);
            const double md = depth_mask(h, w);
            for (int c = 0; c < 3; ++c) {
                out.rgb(h, w, c) = mr != 0.0 ? panorama(h, w, c) : 0.0;
            }
            out.rgb(h, w, 3) = mr;
            out.depth(h, w, 0) = md != 0.0 ? panorama(h, w, 3) : 0.0;
            out.depth(h, w, 1) = md;
        }
    }
    return out;
}

}  // namespace panorad

#include <doctest.h>

#include "panorad/sensor_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

using namespace panorad;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

// Kolmogorov-Smirnov statistic of samples against U[lo, hi].
double ks_uniform(std::vector<double> xs, double lo, double hi) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = (xs[i] - lo) / (hi - lo);
        worst = std::max({worst, std::abs(f - double(i) / n), std::abs(double(i + 1) / n - f)});
    }
    return worst;
}

SensorConfig rig(int viewpoints, double fov, double pitch, double yaw) {
    SensorConfig cfg;
    cfg.modality = Modality::both;
    cfg.depth_kind = DepthKind::perspective;
    cfg.camera = {fov, fov, pitch, viewpoints, yaw};
    return cfg;
}

int set_pixels(const ErpGrid& mask) {
    return static_cast<int>((mask.data() != 0.0).count());
}

}  // namespace

TEST_CASE("sample_config: ranges, determinism and marginals over 10^4 seeds") {
    constexpr int kSeeds = 10000;
    std::vector<double> fov_h, fov_v, pitch, yaw;
    std::set<int> viewpoints, channels, lower_ratio, upper_ratio;
    int modality_counts[3] = {0, 0, 0};
    int lidar = 0;
    for (int s = 0; s < kSeeds; ++s) {
        const SensorConfig cfg = sample_config(Seed{static_cast<std::uint64_t>(s)});
        const CameraRig& cam = cfg.camera;
        CHECK(cam.fov_horizontal >= 60 * kDeg);
        CHECK(cam.fov_horizontal <= 90 * kDeg);
        CHECK(cam.fov_vertical >= 60 * kDeg);
        CHECK(cam.fov_vertical <= 90 * kDeg);
        CHECK(std::abs(cam.pitch) <= 90 * kDeg);
        CHECK(cam.global_yaw >= 0.0);
        CHECK(cam.global_yaw < 2 * kPi);
        CHECK(cfg.lidar.yaw >= 0.0);
        CHECK(cfg.lidar.yaw < 2 * kPi);
        fov_h.push_back(cam.fov_horizontal / kDeg);
        fov_v.push_back(cam.fov_vertical / kDeg);
        pitch.push_back(cam.pitch / kDeg);
        yaw.push_back(cfg.lidar.yaw / kDeg);
        viewpoints.insert(cam.viewpoints);
        channels.insert(cfg.lidar.channels);
        const double eta = cfg.lidar.channels * kDeg;
        lower_ratio.insert(static_cast<int>(std::lround(cfg.lidar.fov_lower / eta)));
        upper_ratio.insert(static_cast<int>(std::lround(cfg.lidar.fov_upper / eta)));
        ++modality_counts[static_cast<int>(cfg.modality)];
        lidar += cfg.depth_kind == DepthKind::lidar;
    }
    CHECK(ks_uniform(fov_h, 60, 90) < 0.02);
    CHECK(ks_uniform(fov_v, 60, 90) < 0.02);
    CHECK(ks_uniform(pitch, -90, 90) < 0.02);
    CHECK(ks_uniform(yaw, 0, 360) < 0.02);
    CHECK(viewpoints == std::set<int>{1, 2, 3, 4});
    CHECK(channels == std::set<int>{2, 4, 8, 16});
    CHECK(lower_ratio == std::set<int>{1, 2, 3});
    CHECK(upper_ratio == std::set<int>{1, 2, 3});
    for (const int count : modality_counts) {
        CHECK(std::abs(count - kSeeds / 3.0) < 4 * std::sqrt(kSeeds * 2.0 / 9.0));
    }
    CHECK(std::abs(lidar - kSeeds / 2.0) < 4 * std::sqrt(kSeeds / 4.0));

    CHECK(sample_config(Seed{42}) == sample_config(Seed{42}));
    CHECK_FALSE(sample_config(Seed{42}) == sample_config(Seed{43}));
}

TEST_CASE("compose_rgb_mask: single view, tiling ring, union bound") {
    const SensorConfig one = rig(1, 75 * kDeg, 20 * kDeg, 1.0);
    CHECK(compose_rgb_mask(one, 32, 64).data().cwiseEqual(camera_mask(75 * kDeg, 75 * kDeg, 20 * kDeg, 1.0, 32, 64).data()).all());

    const SensorConfig ring = rig(4, 90 * kDeg, 0.0, 0.3);
    const ErpGrid mask = compose_rgb_mask(ring, 64, 128);
    for (int w = 0; w < 128; ++w) {
        CHECK(mask(32, w) == 1.0);
        CHECK(mask(31, w) == 1.0);
    }

    for (int s = 0; s < 20; ++s) {
        SensorConfig cfg = sample_config(Seed{static_cast<std::uint64_t>(s)});
        cfg.modality = Modality::both;
        double individual = 0.0;
        for (int k = 0; k < cfg.camera.viewpoints; ++k) {
            individual += weighted_coverage(camera_mask(cfg.camera.fov_horizontal, cfg.camera.fov_vertical,
                                                        cfg.camera.pitch,
                                                        cfg.camera.global_yaw + 2 * kPi * k / cfg.camera.viewpoints,
                                                        32, 64));
        }
        CHECK(weighted_coverage(compose_rgb_mask(cfg, 32, 64)) <= individual + 1e-12);
    }
}

TEST_CASE("compose_rgb_mask: global yaw shifts") {
    for (const int n : {1, 2, 3, 4}) {
        const SensorConfig base = rig(n, 70 * kDeg, -15 * kDeg, 0.0);
        const ErpGrid m = compose_rgb_mask(base, 32, 64);
        for (const int k : {1, 7, 40}) {
            const SensorConfig turned = rig(n, 70 * kDeg, -15 * kDeg, 2 * kPi * k / 64);
            CHECK(compose_rgb_mask(turned, 32, 64).data().cwiseEqual(cyclic_shift(m, k).data()).all());
        }
    }
    // A shift by the ring spacing maps the viewpoint set onto itself.
    const SensorConfig a = rig(4, 70 * kDeg, 10 * kDeg, 0.25 * kPi / 2 / 4);
    const SensorConfig b = rig(4, 70 * kDeg, 10 * kDeg, 0.25 * kPi / 2 / 4 + kPi / 2);
    CHECK(compose_rgb_mask(a, 32, 64).data().cwiseEqual(compose_rgb_mask(b, 32, 64).data()).all());
}

TEST_CASE("compose_depth_mask: perspective reuses the rig, lidar draws rings") {
    for (int s = 0; s < 20; ++s) {
        SensorConfig cfg = sample_config(Seed{static_cast<std::uint64_t>(100 + s)});
        cfg.modality = Modality::both;
        cfg.depth_kind = DepthKind::perspective;
        CHECK(compose_depth_mask(cfg, 32, 64).data().cwiseEqual(compose_rgb_mask(cfg, 32, 64).data()).all());
    }

    SensorConfig cfg;
    cfg.modality = Modality::depth_only;
    cfg.depth_kind = DepthKind::lidar;
    cfg.lidar = {16 * kDeg, 16 * kDeg, 0.0, 0.7, 16};
    const ErpGrid mask = compose_depth_mask(cfg, 128, 256);
    int full_rows = 0;
    for (int h = 0; h < 128; ++h) {
        int set = 0;
        for (int w = 0; w < 256; ++w) {
            set += mask(h, w) != 0.0;
        }
        CHECK((set == 0 || set == 256));
        full_rows += set == 256;
    }
    CHECK(full_rows == 16);
    CHECK(compose_depth_mask(cfg, 128, 256).data().cwiseEqual(lidar_mask(cfg.lidar, 128, 256).data()).all());

    CHECK_THROWS_AS(compose_rgb_mask(cfg, 32, 64), UsageError);
    cfg.modality = Modality::rgb_only;
    CHECK_THROWS_AS(compose_depth_mask(cfg, 32, 64), UsageError);
}

TEST_CASE("config_masks substitutes empty masks for absent modalities") {
    SensorConfig cfg = sample_config(Seed{5});
    cfg.modality = Modality::rgb_only;
    const auto [rgb, depth] = config_masks(cfg, 32, 64);
    CHECK(set_pixels(rgb) > 0);
    CHECK(set_pixels(depth) == 0);
    cfg.modality = Modality::depth_only;
    const auto [rgb2, depth2] = config_masks(cfg, 32, 64);
    CHECK(set_pixels(rgb2) == 0);
    CHECK(set_pixels(depth2) > 0);
}

TEST_CASE("apply_masks: all-ones, all-zeros and partial masks") {
    ErpGrid pano(16, 32, 4);
    CounterRng rng(Seed{9});
    for (Eigen::Index i = 0; i < pano.size(); ++i) {
        pano.data()[i] = rng.uniform(0.1, 5.0);
    }
    const ErpGrid ones(16, 32, 1, 1.0);
    const ErpGrid zeros(16, 32, 1, 0.0);

    const MaskedInputs all = apply_masks(pano, ones, ones);
    REQUIRE(all.rgb.channels() == 4);
    REQUIRE(all.depth.channels() == 2);
    for (int h = 0; h < 16; ++h) {
        for (int w = 0; w < 32; ++w) {
            for (int c = 0; c < 3; ++c) {
                CHECK(all.rgb(h, w, c) == pano(h, w, c));
            }
            CHECK(all.rgb(h, w, 3) == 1.0);
            CHECK(all.depth(h, w, 0) == pano(h, w, 3));
            CHECK(all.depth(h, w, 1) == 1.0);
        }
    }

    const MaskedInputs none = apply_masks(pano, zeros, zeros);
    CHECK((none.rgb.data() == 0.0).all());
    CHECK((none.depth.data() == 0.0).all());

    const ErpGrid rgb_mask = camera_mask(80 * kDeg, 70 * kDeg, 0.0, 0.0, 16, 32);
    const ErpGrid depth_mask = camera_mask(80 * kDeg, 70 * kDeg, 0.4, 2.0, 16, 32);
    const MaskedInputs part = apply_masks(pano, rgb_mask, depth_mask);
    for (int h = 0; h < 16; ++h) {
        for (int w = 0; w < 32; ++w) {
            for (int c = 0; c < 3; ++c) {
                CHECK(part.rgb(h, w, c) == (rgb_mask(h, w) != 0.0 ? pano(h, w, c) : 0.0));
            }
            CHECK(part.rgb(h, w, 3) == rgb_mask(h, w));
            CHECK(part.depth(h, w, 0) == (depth_mask(h, w) != 0.0 ? pano(h, w, 3) : 0.0));
            CHECK(part.depth(h, w, 1) == depth_mask(h, w));
        }
    }

    CHECK_THROWS_AS(apply_masks(pano, ErpGrid(8, 16, 1, 1.0), ones), DimensionError);
    CHECK_THROWS_AS(apply_masks(pano.channel(0), ones, ones), DimensionError);
}

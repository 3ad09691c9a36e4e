#include <doctest.h>

#include "panorad/scene_depth.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

using namespace panorad;
using namespace panorad::oracle;

namespace {

std::vector<Eigen::Vector2d> rotate(const std::vector<Eigen::Vector2d>& p, double angle) {
    std::vector<Eigen::Vector2d> out;
    for (const auto& v : p) {
        out.emplace_back(v.x() * std::cos(angle) + v.y() * std::sin(angle),
                         v.y() * std::cos(angle) - v.x() * std::sin(angle));
    }
    return out;
}

}  // namespace

TEST_CASE("layout_depth: cuboid room against the ray-box oracle") {
    const SceneAnnotation room = cuboid_room();
    CHECK(shell_distance(room, direction(0, kPi / 2)) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(shell_distance(room, direction(0, -kPi / 2)) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(shell_distance(room, direction(0, 0)) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(std::abs(shell_distance(room, {0, -1, 0}) - 1.5) < 1e-6);
    CHECK(std::abs(shell_distance(room, {0, 1, 0}) - 1.5) < 1e-6);

    const int height = 128;
    const int width = 256;
    const ErpGrid depth = layout_depth(room, height, width);
    const Eigen::Vector3d lo(-2.0, -1.5, -3.0);
    const Eigen::Vector3d hi(2.0, 1.5, 3.0);
    double worst = 0.0;
    for (int h = 0; h < height; ++h) {
        for (int w = 0; w < width; ++w) {
            const double expected = cuboid_oracle(pixel_ray(h, w, height, width), lo, hi);
            worst = std::max(worst, std::abs(depth(h, w) - expected) / expected);
        }
    }
    CHECK(worst < 1e-3);

    const double polar = kPi / 2 - kPi * 0.5 / height;
    for (int w = 0; w < width; ++w) {
        CHECK(depth(height - 1, w) == doctest::Approx(1.5 / std::sin(polar)).epsilon(1e-9));
        CHECK(depth(0, w) == doctest::Approx(1.5 / std::sin(polar)).epsilon(1e-9));
        CHECK(std::abs(depth(height - 1, w) - 1.5) < 1.5e-4);
    }
}

TEST_CASE("layout_depth rejects invalid annotations") {
    SceneAnnotation room = cuboid_room();
    for (auto& c : room.corners_xz) {
        c.x() += 5.0;
    }
    CHECK_THROWS_AS(layout_depth(room, 16, 32), AnnotationError);
    SceneAnnotation low = cuboid_room();
    low.ceiling_height = 1.0;
    CHECK_THROWS_AS(layout_depth(low, 16, 32), AnnotationError);
    SceneAnnotation bowtie = cuboid_room();
    std::swap(bowtie.corners_xz[1], bowtie.corners_xz[2]);
    CHECK_THROWS_AS(layout_depth(bowtie, 16, 32), AnnotationError);
    SceneAnnotation two = cuboid_room();
    two.corners_xz.resize(2);
    CHECK_THROWS_AS(layout_depth(two, 16, 32), AnnotationError);
}

TEST_CASE("decompose and recompose") {
    const SceneAnnotation room = cuboid_room();
    const ErpGrid layout = layout_depth(room, 32, 64);
    const DepthDecomposition empty = decompose_depth(layout, room);
    CHECK((empty.residual.data() == 0.0).all());
    CHECK((empty.layout.data() == layout.data()).all());

    // A box whose front face sits at z = 2 in front of the z = 3 wall.
    const Box box{{-0.5, -1.5, 2.0}, {0.5, 0.5, 2.5}};
    CHECK(box_distance(box, direction(0, 0)) - shell_distance(room, direction(0, 0)) ==
          doctest::Approx(-1.0).epsilon(1e-12));
    ErpGrid total = layout;
    int occluded = 0;
    for (int h = 0; h < 32; ++h) {
        for (int w = 0; w < 64; ++w) {
            const Eigen::Vector3d d = pixel_ray(h, w, 32, 64);
            const double hit = box_distance(box, d);
            if (hit < total(h, w)) {
                total(h, w) = hit;
                ++occluded;
            }
        }
    }
    REQUIRE(occluded > 0);
    const DepthDecomposition split = decompose_depth(total, room);
    for (int h = 0; h < 32; ++h) {
        for (int w = 0; w < 64; ++w) {
            const Eigen::Vector3d d = pixel_ray(h, w, 32, 64);
            const double hit = cuboid_oracle(d, box.lo, box.hi);
            if (total(h, w) < layout(h, w)) {
                // On the front face the residual is -1 m scaled by the ray's obliquity.
                if (std::abs(hit * d.z() - 2.0) < 1e-9) {
                    CHECK(split.residual(h, w) == doctest::Approx(-1.0 / d.z()).epsilon(1e-9));
                }
            }
            CHECK(split.residual(h, w) <= 0.0);
        }
    }
    CHECK((recompose_depth(split.layout, split.residual).data() == total.data()).all());

    ErpGrid three(4, 8, 1, 3.0);
    ErpGrid minus(4, 8, 1, -1.0);
    CHECK((recompose_depth(three, minus).data() == 2.0).all());
    CHECK((recompose_depth(three, ErpGrid(4, 8, 1, 0.0)).data() == 3.0).all());
    CHECK((recompose_depth(three, ErpGrid(4, 8, 1, -5.0)).data() == 0.0).all());
    CHECK_THROWS_AS(recompose_depth(three, ErpGrid(8, 16, 1)), DimensionError);
    CHECK_THROWS_AS(decompose_depth(ErpGrid(4, 8, 2), room), DimensionError);
}

TEST_CASE("layout_depth: date-line continuity and rotation equivariance") {
    for (int s = 0; s < 20; ++s) {
        const SceneAnnotation room = generate_scene(Seed{static_cast<std::uint64_t>(s)}, 16, 32).layout;
        const ErpGrid depth = layout_depth(room, 64, 128);
        double steepest = 0.0;
        double seam = 0.0;
        for (int h = 0; h < 64; ++h) {
            for (int w = 0; w + 1 < 128; ++w) {
                steepest = std::max(steepest, std::abs(depth(h, w + 1) - depth(h, w)));
            }
            seam = std::max(seam, std::abs(depth(h, 0) - depth(h, 127)));
        }
        CHECK(seam <= steepest);
        for (const int k : {1, 5, 64}) {
            SceneAnnotation turned = room;
            turned.corners_xz = rotate(room.corners_xz, 2 * kPi * k / 128);
            const ErpGrid expected = cyclic_shift(depth, k);
            const ErpGrid got = layout_depth(turned, 64, 128);
            const double rel = ((got.data() - expected.data()).abs() / expected.data()).maxCoeff();
            CHECK(rel < 1e-6);
        }
    }
}

TEST_CASE("generate_scene: 100 scenes against the brute-force oracle") {
    const int height = 32;
    const int width = 64;
    CounterRng pick(Seed{77});
    for (int s = 0; s < 100; ++s) {
        const RgbdScene scene = generate_scene(Seed{static_cast<std::uint64_t>(s)}, height, width);
        const SceneAnnotation& ann = scene.layout;
        CHECK(ann.corners_xz.size() >= 4);
        CHECK(ann.corners_xz.size() <= 8);
        CHECK(ann.camera_height >= 1.2);
        CHECK(ann.camera_height <= 1.8);
        CHECK(ann.ceiling_height >= 2.4);
        CHECK(ann.ceiling_height <= 3.5);
        CHECK(scene.boxes.size() <= 6);
        CHECK(polygon_area(ann.corners_xz) > 0);
        Eigen::Vector2d lo = ann.corners_xz.front();
        Eigen::Vector2d hi = lo;
        for (const auto& c : ann.corners_xz) {
            lo = lo.cwiseMin(c);
            hi = hi.cwiseMax(c);
        }
        CHECK((hi - lo).maxCoeff() <= 10.0);
        CHECK((scene.validity.data() == 1.0).all());
        CHECK(scene.rgb.data().minCoeff() >= 0.0);
        CHECK(scene.rgb.data().maxCoeff() <= 1.0);
        CHECK(scene.depth.data().minCoeff() > 0.0);

        const DepthDecomposition split = decompose_depth(scene.depth, ann);
        CHECK(split.residual.data().maxCoeff() <= 1e-3);
        CHECK((recompose_depth(split.layout, split.residual).data() == scene.depth.data()).all());

        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const int h = static_cast<int>(pick.below(height));
            const int w = static_cast<int>(pick.below(width));
            const double expected = brute_force_depth(scene, pixel_ray(h, w, height, width));
            worst = std::max(worst, std::abs(scene.depth(h, w) - expected) / expected);
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("generate_scene: empty rooms and determinism") {
    const SceneOptions empty{0, 0};
    for (int s = 0; s < 10; ++s) {
        const RgbdScene scene = generate_scene(Seed{static_cast<std::uint64_t>(s)}, 32, 64, empty);
        CHECK(scene.boxes.empty());
        CHECK((scene.depth.data() == layout_depth(scene.layout, 32, 64).data()).all());
    }
    const RgbdScene a = generate_scene(Seed{11}, 32, 64);
    const RgbdScene b = generate_scene(Seed{11}, 32, 64);
    CHECK((a.rgb.data() == b.rgb.data()).all());
    CHECK((a.depth.data() == b.depth.data()).all());
    CHECK(a.layout == b.layout);
    CHECK(a.boxes == b.boxes);
    const RgbdScene c = generate_scene(Seed{12}, 32, 64);
    CHECK_FALSE(a.layout == c.layout);

    int with_boxes = 0;
    for (int s = 0; s < 30; ++s) {
        with_boxes += !generate_scene(Seed{static_cast<std::uint64_t>(s)}, 16, 32).boxes.empty();
    }
    CHECK(with_boxes > 10);
}

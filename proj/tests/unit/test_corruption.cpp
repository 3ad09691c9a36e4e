#include <doctest.h>

#include "panorad/corruption.hpp"

#include <cmath>

using namespace panorad;

namespace {

ErpGrid scene_rgbd(std::uint64_t seed, int height = 64) {
    const RgbdScene s = generate_scene(Seed{seed}, height, 2 * height);
    return stack_rgbd(s.rgb, s.depth);
}

double mean_abs_deviation(const ErpGrid& a, const ErpGrid& b) {
    return (a.data() - b.data()).abs().mean();
}

bool channels_equal(const ErpGrid& a, const ErpGrid& b, int first, int count) {
    for (int c = first; c < first + count; ++c) {
        if (!(a.channel(c) == b.channel(c))) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("corrupt: level 0 is the identity") {
    const ErpGrid p = scene_rgbd(1, 32);
    for (const CorruptionKind k : kCorruptionKinds) {
        for (const CorruptionTarget t : {CorruptionTarget::rgb, CorruptionTarget::depth}) {
            CHECK(corrupt(p, Corruption{k, 0, t, Seed{9}}) == p);
        }
    }
}

TEST_CASE("corrupt: only the target channels change") {
    const ErpGrid p = scene_rgbd(2, 32);
    for (const CorruptionKind k : kCorruptionKinds) {
        CAPTURE(to_string(k));
        const ErpGrid d = corrupt(p, Corruption{k, 3, CorruptionTarget::depth, Seed{4}});
        CHECK(channels_equal(d, p, 0, 3));
        CHECK_FALSE(channels_equal(d, p, 3, 1));
        const ErpGrid r = corrupt(p, Corruption{k, 3, CorruptionTarget::rgb, Seed{4}});
        CHECK(channels_equal(r, p, 3, 1));
        CHECK_FALSE(channels_equal(r, p, 0, 3));
    }

    const RgbdScene s = generate_scene(Seed{3}, 32, 64);
    const RgbdScene cs = corrupt(s, Corruption{CorruptionKind::swirl, 2, CorruptionTarget::depth, Seed{1}});
    CHECK(cs.rgb == s.rgb);
    CHECK(cs.validity == s.validity);
    CHECK(cs.layout == s.layout);
    CHECK_FALSE(cs.depth == s.depth);
}

TEST_CASE("corrupt: salt and pepper fraction") {
    const ErpGrid p = scene_rgbd(5);
    for (const std::uint64_t seed : {1, 2, 3}) {
        const ErpGrid out = corrupt(p, Corruption{CorruptionKind::salt_pepper, 2, CorruptionTarget::rgb, Seed{seed}});
        int changed = 0;
        for (int h = 0; h < p.height(); ++h) {
            for (int w = 0; w < p.width(); ++w) {
                bool any = false;
                for (int c = 0; c < 3; ++c) {
                    any = any || out(h, w, c) != p(h, w, c);
                }
                changed += any;
            }
        }
        const double fraction = double(changed) / (p.height() * p.width());
        CHECK(fraction > 0.09);
        CHECK(fraction < 0.11);
    }
}

TEST_CASE("corrupt: noise standard deviation") {
    const ErpGrid p(64, 128, 4, 0.5);
    for (const int level : {1, 2}) {
        const ErpGrid out = corrupt(p, Corruption{CorruptionKind::gaussian_noise, level, CorruptionTarget::rgb, Seed{8}});
        double ss = 0;
        int n = 0;
        for (int h = 0; h < 64; ++h) {
            for (int w = 0; w < 128; ++w) {
                for (int c = 0; c < 3; ++c) {
                    ss += (out(h, w, c) - 0.5) * (out(h, w, c) - 0.5);
                    ++n;
                }
            }
        }
        CHECK(std::sqrt(ss / n) == doctest::Approx(level * 0.05).epsilon(0.03));
    }
}

TEST_CASE("corrupt: blur kernel width follows the level") {
    ErpGrid p(64, 128, 4, 0.0);
    for (int h = 0; h < 64; ++h) {
        p(h, 40, 0) = 1.0;
    }
    for (const int level : {1, 2, 4}) {
        const double sigma = level * 0.01 * 128;
        const ErpGrid out = corrupt(p, Corruption{CorruptionKind::gaussian_blur, level, CorruptionTarget::rgb, Seed{0}});
        for (int d = 0; d < 3; ++d) {
            const double ratio = out(30, 40 + d + 1, 0) / out(30, 40 + d, 0);
            CHECK(ratio == doctest::Approx(std::exp(-((d + 1) * (d + 1) - d * d) / (2 * sigma * sigma))).epsilon(1e-9));
        }
        CHECK(out(30, 39, 0) == doctest::Approx(out(30, 41, 0)).epsilon(1e-12));
        double total = 0;
        for (int w = 0; w < 128; ++w) {
            total += out(30, w, 0);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(gaussian_blur(p, 0.0), ParameterError);
}

TEST_CASE("corrupt: blur commutes with cyclic shifts") {
    const ErpGrid p = scene_rgbd(6);
    for (const int shift : {1, 17, 64}) {
        for (const CorruptionTarget t : {CorruptionTarget::rgb, CorruptionTarget::depth}) {
            const Corruption c{CorruptionKind::gaussian_blur, 3, t, Seed{0}};
            CHECK(corrupt(cyclic_shift(p, shift), c) == cyclic_shift(corrupt(p, c), shift));
        }
    }
}

TEST_CASE("corrupt: severity is monotone in level") {
    for (std::uint64_t seed = 0; seed < 32; ++seed) {
        const ErpGrid p = scene_rgbd(100 + seed);
        for (const CorruptionKind k : kCorruptionKinds) {
            for (const CorruptionTarget t : {CorruptionTarget::rgb, CorruptionTarget::depth}) {
                double previous = 0.0;
                for (int level = 1; level <= kMaxCorruptionLevel; ++level) {
                    const double mad = mean_abs_deviation(corrupt(p, Corruption{k, level, t, Seed{seed}}), p);
                    CAPTURE(seed);
                    CAPTURE(to_string(k));
                    CAPTURE(to_string(t));
                    CAPTURE(level);
                    CHECK(mad >= previous);
                    previous = mad;
                }
            }
        }
    }
}

TEST_CASE("corrupt: deterministic and validated") {
    const ErpGrid p = scene_rgbd(7, 32);
    for (const CorruptionKind k : kCorruptionKinds) {
        const Corruption c{k, 2, CorruptionTarget::rgb, Seed{77}};
        CHECK(corrupt(p, c) == corrupt(p, c));
        CHECK(corruption_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(corrupt(p, Corruption{CorruptionKind::swirl, 5, CorruptionTarget::rgb, Seed{}}), ParameterError);
    CHECK_THROWS_AS(corrupt(p, Corruption{CorruptionKind::swirl, -1, CorruptionTarget::rgb, Seed{}}), ParameterError);
    CHECK_THROWS_AS(corrupt(p.channel(0), Corruption{}), DimensionError);
    CHECK_THROWS_AS(corruption_kind_from_string("jpeg"), ParameterError);
    CHECK_THROWS_AS(corruption_target_from_string("both"), ParameterError);
}

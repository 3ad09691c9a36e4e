#include <doctest.h>

#include "panorad/raster_io.hpp"
#include "panorad/scene_depth.hpp"
#include "panorad/sensor_sim.hpp"

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace panorad;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / ("panorad_test_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ErpGrid random_grid(int h, int c, CounterRng rng) {
    ErpGrid g(h, 2 * h, c);
    for (Eigen::Index i = 0; i < g.data().size(); ++i) {
        g.data()[i] = rng.uniform();
    }
    return g;
}

}  // namespace

TEST_CASE("rgb round trip within half a quantisation step") {
    TempDir dir("rgb");
    const ErpGrid rgb = random_grid(16, 3, CounterRng(Seed{1}));
    write_rgb(dir.path / "a.png", rgb);
    const ErpGrid back = read_rgb(dir.path / "a.png");
    REQUIRE(back.same_shape(rgb));
    CHECK((back.data() - rgb.data()).abs().maxCoeff() <= 1.0 / 510 + 1e-12);

    write_rgb(dir.path / "b.png", back);
    CHECK(file_bytes(dir.path / "a.png") == file_bytes(dir.path / "b.png"));

    ErpGrid zeros(4, 8, 3);
    write_rgb(dir.path / "z.png", zeros);
    CHECK((read_rgb(dir.path / "z.png").data() == 0.0).all());
    ErpGrid ones(4, 8, 3);
    ones.data().setOnes();
    write_rgb(dir.path / "o.png", ones);
    CHECK((read_rgb(dir.path / "o.png").data() == 1.0).all());
}

TEST_CASE("rgb reader rejects wrong layouts") {
    TempDir dir("rgb_bad");
    ErpGrid mask(4, 8, 1);
    write_mask(dir.path / "m.png", mask);
    CHECK_THROWS_AS(read_rgb(dir.path / "m.png"), IoError);
    CHECK_THROWS_AS(read_rgb(dir.path / "missing.png"), IoError);
    write_text_file(dir.path / "t.png", "not an image");
    CHECK_THROWS_AS(read_rgb(dir.path / "t.png"), IoError);
    CHECK_THROWS_AS(write_rgb(dir.path / "x.png", mask), DimensionError);
}

TEST_CASE("depth stores millimetres with a zero sentinel") {
    TempDir dir("depth");
    ErpGrid depth(2, 4, 1);
    depth.data() << 1.5, 0.0, 70.0, 2.0004, 3.2, -1.0, 0.0001, 65.535;
    CHECK(write_depth(dir.path / "d.png", depth) == 1);
    const DepthRaster back = read_depth(dir.path / "d.png");
    CHECK(back.depth.data()[0] == 1.5);
    CHECK(back.validity.data()[0] == 1.0);
    CHECK(back.depth.data()[1] == 0.0);
    CHECK(back.validity.data()[1] == 0.0);
    CHECK(back.depth.data()[2] == 65.535);
    CHECK(back.depth.data()[3] == 2.0);
    CHECK(back.validity.data()[5] == 0.0);
    CHECK(back.depth.data()[6] == 0.001);
    CHECK(back.depth.data()[7] == 65.535);

    ErpGrid validity(2, 4, 1);
    validity.data().setOnes();
    validity.data()[0] = 0.0;
    write_depth(dir.path / "v.png", depth, &validity);
    CHECK(read_depth(dir.path / "v.png").validity.data()[0] == 0.0);
}

TEST_CASE("depth round trip of a generated scene") {
    TempDir dir("depth_scene");
    const RgbdScene scene = generate_scene(Seed{3}, 32, 64);
    write_depth(dir.path / "d.png", scene.depth);
    const DepthRaster back = read_depth(dir.path / "d.png");
    CHECK((back.depth.data() - scene.depth.data()).abs().maxCoeff() <= 0.0005 + 1e-12);
    CHECK((back.validity.data() == 1.0).all());
    write_depth(dir.path / "e.png", back.depth);
    CHECK(file_bytes(dir.path / "d.png") == file_bytes(dir.path / "e.png"));
}

TEST_CASE("mask round trip") {
    TempDir dir("mask");
    const SensorConfig cfg = sample_config(Seed{9});
    const auto [rgb_mask, depth_mask] = config_masks(cfg, 16, 32);
    write_mask(dir.path / "m.png", mask_union(rgb_mask, depth_mask));
    CHECK(read_mask(dir.path / "m.png") == mask_union(rgb_mask, depth_mask));
}

TEST_CASE("manifest round trip and relative paths") {
    TempDir dir("manifest");
    fs::create_directories(dir.path / "scenes");
    Manifest m;
    for (int i = 0; i < 3; ++i) {
        const RgbdScene scene = generate_scene(Seed{static_cast<std::uint64_t>(i)}, 8, 16);
        ManifestEntry e;
        e.id = "scene_" + std::to_string(i);
        e.rgb = dir.path / "scenes" / (e.id + "_rgb.png");
        e.depth = dir.path / "scenes" / (e.id + "_depth.png");
        write_rgb(e.rgb, scene.rgb);
        write_depth(e.depth, scene.depth);
        e.layout = scene.layout;
        if (i == 1) {
            e.sensor_config = sample_config(Seed{42});
            e.mask_rgb = dir.path / "scenes" / "mask.png";
            write_mask(*e.mask_rgb, config_masks(*e.sensor_config, 8, 16).first);
        }
        m.entries.push_back(e);
    }
    write_manifest(dir.path / "manifest.json", m);
    const std::string text = read_text_file(dir.path / "manifest.json");
    CHECK(text.find(dir.path.string()) == std::string::npos);
    CHECK(text.find("scenes/scene_0_rgb.png") != std::string::npos);

    const Manifest back = read_manifest(dir.path / "manifest.json");
    REQUIRE(back.entries.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.entries[i].id == m.entries[i].id);
        CHECK(fs::equivalent(back.entries[i].rgb, m.entries[i].rgb));
        CHECK(back.entries[i].layout == m.entries[i].layout);
    }
    REQUIRE(back.entries[1].sensor_config.has_value());
    CHECK(*back.entries[1].sensor_config == *m.entries[1].sensor_config);
    CHECK(back.entries[1].mask_rgb.has_value());
    CHECK_FALSE(back.entries[0].mask_rgb.has_value());

    write_manifest(dir.path / "again.json", back);
    CHECK(read_text_file(dir.path / "again.json") == text);
}

TEST_CASE("manifest edge cases and errors carry context") {
    TempDir dir("manifest_bad");
    write_manifest(dir.path / "empty.json", Manifest{});
    CHECK(read_manifest(dir.path / "empty.json").entries.empty());

    write_text_file(dir.path / "syntax.json", "{\n  \"format\": \"panorad-manifest\",\n  \"version\": 1,\n  oops\n}");
    try {
        read_manifest(dir.path / "syntax.json");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("syntax.json:4:") != std::string::npos);
    }

    write_text_file(dir.path / "field.json",
                    R"({"format": "panorad-manifest", "version": 1, "entries": [
                        {"id": "a", "rgb": "a.png", "depth": "a_d.png",
                         "layout": {"corners_xz": [[1, 1], [-1, 1], [-1]], "camera_height": 1.5,
                                    "ceiling_height": 3}}]})");
    try {
        read_manifest(dir.path / "field.json", false);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("entries[0].layout.corners_xz[2]") != std::string::npos);
    }

    write_text_file(dir.path / "dup.json",
                    R"({"format": "panorad-manifest", "version": 1, "entries": [
                        {"id": "a", "rgb": "a.png", "depth": "a_d.png",
                         "layout": {"corners_xz": [], "camera_height": 1.5, "ceiling_height": 3}},
                        {"id": "a", "rgb": "a.png", "depth": "a_d.png",
                         "layout": {"corners_xz": [], "camera_height": 1.5, "ceiling_height": 3}}]})");
    CHECK_THROWS_WITH_AS(read_manifest(dir.path / "dup.json", false), doctest::Contains("duplicate"),
                         ParseError);

    write_text_file(dir.path / "missing.json",
                    R"({"format": "panorad-manifest", "version": 1, "entries": [
                        {"id": "a", "rgb": "a.png", "depth": "a_d.png",
                         "layout": {"corners_xz": [], "camera_height": 1.5, "ceiling_height": 3}}]})");
    CHECK_THROWS_AS(read_manifest(dir.path / "missing.json"), IoError);
    CHECK_NOTHROW(read_manifest(dir.path / "missing.json", false));
}

TEST_CASE("feature stats round trip bit-exactly") {
    TempDir dir("stats");
    CounterRng rng(Seed{5});
    FeatureStats s;
    s.count = 123;
    s.mean.resize(7);
    s.cov.resize(7, 7);
    for (int i = 0; i < 7; ++i) {
        s.mean[i] = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
        for (int j = 0; j < 7; ++j) {
            s.cov(i, j) = rng.normal() / 3.0;
        }
    }
    s.mean[0] = std::numeric_limits<double>::denorm_min();
    s.mean[1] = -0.0;
    s.cov(0, 0) = std::nextafter(1.0, 2.0);
    write_stats(dir.path / "s.json", s);
    const FeatureStats back = read_stats(dir.path / "s.json");
    CHECK(back.count == 123);
    for (int i = 0; i < 7; ++i) {
        CHECK(std::bit_cast<std::uint64_t>(back.mean[i]) == std::bit_cast<std::uint64_t>(s.mean[i]));
        for (int j = 0; j < 7; ++j) {
            CHECK(std::bit_cast<std::uint64_t>(back.cov(i, j)) == std::bit_cast<std::uint64_t>(s.cov(i, j)));
        }
    }

    s.cov(2, 3) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(write_stats(dir.path / "n.json", s), IoError);
    write_text_file(dir.path / "bad.json", R"({"format": "panorad-feature-stats", "version": 1,
        "dim": 2, "count": 3, "mean": [0, 1], "cov": [[1, 0], [0, "x"]]})");
    CHECK_THROWS_WITH_AS(read_stats(dir.path / "bad.json"), doctest::Contains("stats.cov[1][1]"), ParseError);
}

TEST_CASE("weights round trip preserves every float bit") {
    TempDir dir("weights");
    WeightsFile w;
    w.arch = "test-net v1";
    CounterRng rng(Seed{6});
    for (int t = 0; t < 3; ++t) {
        WeightTensor wt;
        wt.name = "layer" + std::to_string(t) + ".weight";
        wt.shape = {t + 1, 2, 3};
        for (int i = 0; i < (t + 1) * 6; ++i) {
            wt.data.push_back(static_cast<float>(rng.normal()));
        }
        w.tensors.push_back(wt);
    }
    w.tensors[0].data[0] = std::numeric_limits<float>::denorm_min();
    w.tensors[0].data[1] = -0.0F;
    w.tensors.push_back({"scalar", {}, {3.5F}});
    write_weights(dir.path / "w.bin", w);
    const WeightsFile back = read_weights(dir.path / "w.bin");
    CHECK(back.arch == w.arch);
    REQUIRE(back.tensors.size() == w.tensors.size());
    for (std::size_t t = 0; t < w.tensors.size(); ++t) {
        CHECK(back.tensors[t].name == w.tensors[t].name);
        CHECK(back.tensors[t].shape == w.tensors[t].shape);
        REQUIRE(back.tensors[t].data.size() == w.tensors[t].data.size());
        for (std::size_t i = 0; i < w.tensors[t].data.size(); ++i) {
            CHECK(std::bit_cast<std::uint32_t>(back.tensors[t].data[i]) ==
                  std::bit_cast<std::uint32_t>(w.tensors[t].data[i]));
        }
    }

    const std::string bytes = file_bytes(dir.path / "w.bin");
    // Payload is little-endian: 3.5f = 0x40600000 is the final four bytes.
    CHECK(bytes.substr(bytes.size() - 4) == std::string("\x00\x00\x60\x40", 4));
    write_text_file(dir.path / "short.bin", bytes.substr(0, bytes.size() - 1));
    CHECK_THROWS_AS(read_weights(dir.path / "short.bin"), IoError);
    write_text_file(dir.path / "magic.bin", "PANORAD-WEIGHTS 2\n");
    CHECK_THROWS_WITH_AS(read_weights(dir.path / "magic.bin"), doctest::Contains(":1:"), ParseError);
}

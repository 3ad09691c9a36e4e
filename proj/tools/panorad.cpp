// panorad: command-line front end for scene generation, masks, corruption,
// FAED, metrics and the toy generator.
//
// Every command prints one JSON document on stdout: the command name, the
// resolved configuration and the result. Exit codes: 0 success, 1 usage
// error, 2 data error.

#include "panorad/bips.hpp"
#include "panorad/corruption.hpp"
#include "panorad/faed.hpp"
#include "panorad/metrics.hpp"
#include "panorad/parallel.hpp"
#include "panorad/raster_io.hpp"
#include "panorad/verify_faed.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace panorad;

namespace {

struct Output {
    ordered_json config;
    ordered_json result;
};

std::string scene_id(int i) {
    std::ostringstream os;
    os << "scene_" << std::setw(4) << std::setfill('0') << i;
    return os.str();
}

// Per-item seed drawn from the command seed, independent of item order.
std::uint64_t item_seed(std::uint64_t seed, int i) {
    return CounterRng(Seed{seed}).split(static_cast<std::uint64_t>(i)).next_u64();
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    }
}

ErpGrid rgb_part(const ErpGrid& rgbd) {
    ErpGrid out(rgbd.height(), rgbd.width(), 3);
    for (int c = 0; c < 3; ++c) {
        out.set_channel(c, rgbd.channel(c));
    }
    return out;
}

SceneAnnotation read_annotation(const fs::path& path) {
    return annotation_from_json(parse_json_text(read_text_file(path), path.string()));
}

void write_json(const fs::path& path, const ordered_json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

ordered_json report_json(const MetricReport& r) {
    auto field = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
    return {{"psnr", field(r.psnr)},     {"ssim", field(r.ssim)},   {"absrel", field(r.absrel)},
            {"rmse_mm", field(r.rmse)}, {"iou2d", field(r.iou2d)}, {"corner_error", field(r.corner_err)}};
}

// ---------------------------------------------------------------------------
// scenegen

struct ScenegenArgs {
    int count = 16;
    std::uint64_t seed = 0;
    int height = 64;
    int min_boxes = 0;
    int max_boxes = 6;
    std::string out;
    int threads = 0;
};

Output run_scenegen(const ScenegenArgs& a) {
    if (a.min_boxes > a.max_boxes) {
        throw ParameterError("scenegen: --min-boxes exceeds --max-boxes");
    }
    const int threads = resolve_threads(a.threads);
    const fs::path out(a.out);
    make_dir(out);
    std::vector<RgbdScene> scenes(static_cast<std::size_t>(a.count));
    parallel_for(a.count, threads, [&](int i) {
        scenes[static_cast<std::size_t>(i)] = generate_scene(Seed{a.seed + static_cast<std::uint64_t>(i)}, a.height,
                                                             2 * a.height, {a.min_boxes, a.max_boxes});
    });
    Manifest manifest;
    int clamped = 0;
    int boxes = 0;
    for (int i = 0; i < a.count; ++i) {
        const RgbdScene& s = scenes[static_cast<std::size_t>(i)];
        ManifestEntry e;
        e.id = scene_id(i);
        e.rgb = out / (e.id + "_rgb.png");
        e.depth = out / (e.id + "_depth.png");
        e.layout = s.layout;
        write_rgb(e.rgb, s.rgb);
        clamped += write_depth(e.depth, s.depth, &s.validity);
        boxes += static_cast<int>(s.boxes.size());
        manifest.entries.push_back(std::move(e));
    }
    write_manifest(out / "manifest.json", manifest);

    Output o;
    o.config = {{"count", a.count}, {"seed", a.seed},           {"height", a.height},   {"width", 2 * a.height},
                {"min_boxes", a.min_boxes}, {"max_boxes", a.max_boxes}, {"out", a.out}, {"threads", threads},
                {"scene_seeds", "seed + index"}};
    o.result = {{"manifest", (out / "manifest.json").string()}, {"scenes", a.count}, {"boxes", boxes},
                {"clamped_depth_pixels", clamped}};
    return o;
}

// ---------------------------------------------------------------------------
// maskgen

struct MaskgenArgs {
    std::uint64_t seed = 0;
    int height = 64;
    std::string out;
    int threads = 0;
};

Output run_maskgen(const MaskgenArgs& a) {
    const fs::path out(a.out);
    make_dir(out);
    const SensorConfig cfg = sample_config(Seed{a.seed});
    const auto [rgb, depth] = config_masks(cfg, a.height, 2 * a.height);
    write_mask(out / "mask_rgb.png", rgb);
    write_mask(out / "mask_depth.png", depth);
    write_json(out / "sensor_config.json", to_json(cfg));

    Output o;
    o.config = {{"seed", a.seed},   {"height", a.height},
                {"width", 2 * a.height}, {"out", a.out},
                {"threads", resolve_threads(a.threads)}};
    o.result = {{"sensor_config", to_json(cfg)},
                {"mask_rgb", (out / "mask_rgb.png").string()},
                {"mask_depth", (out / "mask_depth.png").string()},
                {"rgb_coverage", weighted_coverage(rgb)},
                {"depth_coverage", weighted_coverage(depth)}};
    return o;
}

// ---------------------------------------------------------------------------
// layoutdepth

struct LayoutdepthArgs {
    std::string manifest;
    std::string id;
    std::string layout;
    int height = 64;
    std::string out;
    int threads = 0;
};

Output run_layoutdepth(const LayoutdepthArgs& a) {
    if (a.manifest.empty() == a.layout.empty()) {
        throw ParameterError("layoutdepth: give exactly one of --manifest and --layout");
    }
    const fs::path out(a.out);
    make_dir(out);
    Output o;
    o.config = {{"manifest", a.manifest}, {"id", a.id}, {"layout", a.layout}, {"height", a.height}, {"out", a.out},
                {"threads", resolve_threads(a.threads)}};
    ordered_json items = ordered_json::array();
    if (!a.layout.empty()) {
        const SceneAnnotation ann = read_annotation(a.layout);
        const fs::path path = out / "layout_depth.png";
        const ErpGrid depth = layout_depth(ann, a.height, 2 * a.height);
        write_depth(path, depth);
        items.push_back({{"id", "layout"}, {"layout_depth", path.string()}, {"min_m", depth.data().minCoeff()},
                         {"max_m", depth.data().maxCoeff()}});
    } else {
        const Manifest manifest = read_manifest(a.manifest);
        bool found = false;
        for (const ManifestEntry& e : manifest.entries) {
            if (!a.id.empty() && e.id != a.id) {
                continue;
            }
            found = true;
            const DepthRaster total = read_depth(e.depth);
            const DepthDecomposition split = decompose_depth(total.depth, e.layout);
            const fs::path path = out / (e.id + "_layout.png");
            write_depth(path, split.layout);
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (Eigen::Index i = 0; i < total.validity.size(); ++i) {
                if (total.validity.data()[i] != 0.0) {
                    lo = std::min(lo, split.residual.data()[i]);
                    hi = std::max(hi, split.residual.data()[i]);
                }
            }
            items.push_back({{"id", e.id},
                             {"layout_depth", path.string()},
                             {"residual_min_m", std::isfinite(lo) ? ordered_json(lo) : ordered_json(nullptr)},
                             {"residual_max_m", std::isfinite(hi) ? ordered_json(hi) : ordered_json(nullptr)}});
        }
        if (!found) {
            throw DataError("layoutdepth: no manifest entry with id '" + a.id + "'");
        }
    }
    o.result = {{"items", items}};
    return o;
}

// ---------------------------------------------------------------------------
// corrupt

struct CorruptArgs {
    std::string manifest;
    std::string kind;
    int level = 1;
    std::string target = "rgb";
    std::uint64_t seed = 0;
    std::string out;
    int threads = 0;
};

Output run_corrupt(const CorruptArgs& a) {
    const CorruptionKind kind = corruption_kind_from_string(a.kind);
    const CorruptionTarget target = corruption_target_from_string(a.target);
    const int threads = resolve_threads(a.threads);
    const Manifest manifest = read_manifest(a.manifest);
    const std::vector<ErpGrid> corpus = load_corpus(manifest, threads);
    const fs::path out(a.out);
    make_dir(out);
    Manifest result;
    int clamped = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Corruption c{kind, a.level, target, Seed{item_seed(a.seed, static_cast<int>(i))}};
        const ErpGrid g = corrupt(corpus[i], c);
        ManifestEntry e = manifest.entries[i];
        e.rgb = out / (e.id + "_rgb.png");
        e.depth = out / (e.id + "_depth.png");
        e.mask_rgb.reset();
        e.mask_depth.reset();
        write_rgb(e.rgb, rgb_part(g));
        clamped += write_depth(e.depth, g.channel(3));
        result.entries.push_back(std::move(e));
    }
    write_manifest(out / "manifest.json", result);

    Output o;
    o.config = {{"manifest", a.manifest}, {"kind", to_string(kind)}, {"level", a.level},
                {"target", to_string(target)}, {"seed", a.seed},   {"out", a.out},
                {"threads", threads}};
    o.result = {{"manifest", (out / "manifest.json").string()},
                {"scenes", corpus.size()},
                {"clamped_depth_pixels", clamped}};
    return o;
}

// ---------------------------------------------------------------------------
// faed-train, faed-stats, faed

struct FaedTrainArgs {
    std::string manifest;
    std::string out;
    AeTrainConfig train;
    std::string losses;
    int threads = 0;
};

Output run_faed_train(const FaedTrainArgs& a) {
    const int threads = resolve_threads(a.threads);
    const std::vector<ErpGrid> corpus = load_corpus(read_manifest(a.manifest), threads);
    const auto start = std::chrono::steady_clock::now();
    const AeTrainResult r = train_autoencoder(corpus, a.train);
    std::cerr << "faed-train: " << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
              << " s\n";
    save_autoencoder(a.out, r.model);
    if (!a.losses.empty()) {
        write_json(a.losses, ordered_json{{"losses", r.losses}});
    }
    Output o;
    o.config = {{"manifest", a.manifest},
                {"out", a.out},
                {"steps", a.train.steps},
                {"batch", a.train.batch},
                {"lr", a.train.adam.lr},
                {"beta1", a.train.adam.beta1},
                {"beta2", a.train.adam.beta2},
                {"seed", a.train.seed},
                {"threads", threads},
                {"arch", AutoEncoder<float>::kArch}};
    o.result = {{"weights", a.out},
                {"scenes", corpus.size()},
                {"first_loss", r.losses.empty() ? ordered_json(nullptr) : ordered_json(r.losses.front())},
                {"final_loss", r.losses.empty() ? ordered_json(nullptr) : ordered_json(r.losses.back())}};
    return o;
}

struct FaedStatsArgs {
    std::string weights;
    std::string manifest;
    std::string out;
    int threads = 0;
};

Output run_faed_stats(const FaedStatsArgs& a) {
    const int threads = resolve_threads(a.threads);
    const AutoEncoder<float> model = load_autoencoder(a.weights);
    const FeatureStats stats = corpus_stats(model, load_corpus(read_manifest(a.manifest), threads), threads);
    write_stats(a.out, stats);
    Output o;
    o.config = {{"weights", a.weights}, {"manifest", a.manifest}, {"out", a.out}, {"threads", threads}};
    o.result = {{"stats", a.out}, {"count", stats.count}, {"dim", stats.mean.size()}};
    return o;
}

struct FaedArgs {
    std::string stats_a;
    std::string stats_b;
    std::string weights;
    std::string manifest_a;
    std::string manifest_b;
    int threads = 0;
};

Output run_faed(const FaedArgs& a) {
    const bool from_stats = !a.stats_a.empty() || !a.stats_b.empty();
    const bool from_corpora = !a.weights.empty() || !a.manifest_a.empty() || !a.manifest_b.empty();
    if (from_stats == from_corpora || (from_stats && (a.stats_a.empty() || a.stats_b.empty())) ||
        (from_corpora && (a.weights.empty() || a.manifest_a.empty() || a.manifest_b.empty()))) {
        throw ParameterError("faed: give --stats-a and --stats-b, or --weights, --manifest-a and --manifest-b");
    }
    const int threads = resolve_threads(a.threads);
    Output o;
    double d2 = 0.0;
    if (from_stats) {
        d2 = frechet_distance(read_stats(a.stats_a), read_stats(a.stats_b));
        o.config = {{"stats_a", a.stats_a}, {"stats_b", a.stats_b}};
    } else {
        const AutoEncoder<float> model = load_autoencoder(a.weights);
        d2 = compute_faed(model, load_corpus(read_manifest(a.manifest_a), threads),
                          load_corpus(read_manifest(a.manifest_b), threads), threads);
        o.config = {{"weights", a.weights}, {"manifest_a", a.manifest_a}, {"manifest_b", a.manifest_b},
                    {"threads", threads}};
    }
    o.result = {{"d2", d2}};
    return o;
}

// ---------------------------------------------------------------------------
// metrics

struct MetricsArgs {
    std::string pred;
    std::string gt;
    std::string which = "psnr,ssim,absrel,rmse,iou2d,corner";
    int rays = 256;
    int threads = 0;
};

Output run_metrics(const MetricsArgs& a) {
    const std::vector<std::string> known{"psnr", "ssim", "absrel", "rmse", "iou2d", "corner"};
    std::vector<std::string> which;
    std::stringstream ss(a.which);
    for (std::string item; std::getline(ss, item, ',');) {
        if (std::find(known.begin(), known.end(), item) == known.end()) {
            throw ParameterError("metrics: unknown metric '" + item + "' (expected psnr, ssim, absrel, rmse, iou2d, corner)");
        }
        if (std::find(which.begin(), which.end(), item) == which.end()) {
            which.push_back(item);
        }
    }
    if (which.empty()) {
        throw ParameterError("metrics: --which selects no metric");
    }
    auto wants = [&](const char* m) { return std::find(which.begin(), which.end(), m) != which.end(); };
    const bool need_rgb = wants("psnr") || wants("ssim");

    const Manifest pred = read_manifest(a.pred);
    const Manifest gt = read_manifest(a.gt);
    FloorExtractionOptions floor;
    floor.rays = a.rays;

    ordered_json entries = ordered_json::array();
    std::vector<MetricReport> reports;
    int mismatches = 0;
    int layout_failures = 0;
    for (const ManifestEntry& g : gt.entries) {
        const auto it = std::find_if(pred.entries.begin(), pred.entries.end(),
                                     [&](const ManifestEntry& p) { return p.id == g.id; });
        if (it == pred.entries.end()) {
            throw DataError("metrics: prediction manifest has no entry '" + g.id + "'");
        }
        MetricReport r;
        if (need_rgb) {
            const ErpGrid prgb = read_rgb(it->rgb);
            const ErpGrid grgb = read_rgb(g.rgb);
            if (wants("psnr")) r.psnr = psnr(prgb, grgb);
            if (wants("ssim")) r.ssim = ssim(prgb, grgb);
        }
        const DepthRaster pd = read_depth(it->depth);
        const DepthRaster gd = read_depth(g.depth);
        if (wants("absrel")) r.absrel = absrel(pd.depth, gd.depth, &gd.validity);
        if (wants("rmse")) r.rmse = rmse_mm(pd.depth, gd.depth, &gd.validity);
        bool mismatch = false;
        std::optional<std::string> layout_error;
        if (wants("iou2d") || wants("corner")) {
            try {
                const Polygon poly = extract_floor_polygon(pd.depth, g.layout.camera_height, floor, &pd.validity);
                if (wants("iou2d")) r.iou2d = layout_iou2d(poly, g.layout.corners_xz);
                if (wants("corner")) {
                    const CornerError ce = corner_error(poly, g.layout.corners_xz);
                    r.corner_err = ce.value;
                    mismatch = ce.count_mismatch;
                    mismatches += mismatch;
                }
            } catch (const DataError& e) {
                layout_error = e.what();
                ++layout_failures;
            }
        }
        ordered_json j = {{"id", g.id}};
        j.update(report_json(r));
        if (wants("corner")) {
            j["corner_count_mismatch"] = mismatch;
        }
        if (layout_error) {
            j["layout_error"] = *layout_error;
        }
        entries.push_back(std::move(j));
        reports.push_back(r);
    }

    MetricReport mean;
    auto average = [&](std::optional<double> MetricReport::*field) -> std::optional<double> {
        double sum = 0.0;
        int n = 0;
        for (const auto& r : reports) {
            if (r.*field) {
                sum += *(r.*field);
                ++n;
            }
        }
        return n == 0 ? std::nullopt : std::optional<double>(sum / n);
    };
    mean.psnr = average(&MetricReport::psnr);
    mean.ssim = average(&MetricReport::ssim);
    mean.absrel = average(&MetricReport::absrel);
    mean.rmse = average(&MetricReport::rmse);
    mean.iou2d = average(&MetricReport::iou2d);
    mean.corner_err = average(&MetricReport::corner_err);

    Output o;
    o.config = {{"pred", a.pred}, {"gt", a.gt}, {"which", which}, {"rays", a.rays},
                {"threads", resolve_threads(a.threads)}};
    o.result = {{"mean", report_json(mean)}, {"entries", entries}, {"corner_count_mismatches", mismatches},
                {"layout_extraction_failures", layout_failures}};
    return o;
}

// ---------------------------------------------------------------------------
// bips-train, bips-infer

std::vector<BipsSample> load_samples(const Manifest& manifest, int threads) {
    const std::vector<ErpGrid> corpus = load_corpus(manifest, threads);
    std::vector<BipsSample> out;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const ErpGrid& g = corpus[i];
        if (g.height() % Generator<float>::kStride != 0) {
            throw DataError("scene '" + manifest.entries[i].id + "': height " + std::to_string(g.height()) +
                            " is not a multiple of 16");
        }
        out.push_back({g, layout_depth(manifest.entries[i].layout, g.height(), g.width())});
    }
    return out;
}

struct BipsTrainArgs {
    std::string manifest;
    std::string out;
    std::string variant = "full";
    BipsTrainConfig train;
    int threads = 0;
};

Output run_bips_train(const BipsTrainArgs& a) {
    BipsTrainConfig cfg = a.train;
    cfg.variant = bips_variant_from_string(a.variant);
    const int threads = resolve_threads(a.threads);
    const std::vector<BipsSample> corpus = load_samples(read_manifest(a.manifest), threads);
    const auto start = std::chrono::steady_clock::now();
    const BipsTrainResult r = train_bips(corpus, cfg);
    std::cerr << "bips-train: " << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
              << " s\n";
    const fs::path out(a.out);
    make_dir(out);
    save_generator(out / "generator.weights", r.generator);
    save_discriminator(out / "discriminator.weights", r.discriminator);
    ordered_json d_loss = ordered_json::array(), g_loss = ordered_json::array(), adv = ordered_json::array(),
                 pixel = ordered_json::array(), invisible = ordered_json::array();
    for (const BipsStepLog& s : r.log) {
        d_loss.push_back(s.d_loss);
        g_loss.push_back(s.g_loss);
        adv.push_back(s.adversarial);
        pixel.push_back(s.pixel);
        invisible.push_back(s.invisible_depth_l1);
    }
    write_json(out / "log.json", {{"d_loss", d_loss},
                                  {"g_loss", g_loss},
                                  {"adversarial", adv},
                                  {"pixel", pixel},
                                  {"invisible_depth_l1", invisible}});

    auto tail_mean = [&](auto get) -> ordered_json {
        if (r.log.empty()) {
            return nullptr;
        }
        const std::size_t n = std::min<std::size_t>(100, r.log.size());
        double sum = 0.0;
        for (std::size_t i = r.log.size() - n; i < r.log.size(); ++i) {
            sum += get(r.log[i]);
        }
        return sum / double(n);
    };
    Output o;
    o.config = {{"manifest", a.manifest}, {"out", a.out},          {"variant", to_string(cfg.variant)},
                {"steps", cfg.steps},     {"batch", cfg.batch},    {"lambda", cfg.lambda},
                {"lr", cfg.adam.lr},      {"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2},
                {"seed", cfg.seed},       {"threads", threads},    {"arch", r.generator.arch()}};
    o.result = {{"generator", (out / "generator.weights").string()},
                {"discriminator", (out / "discriminator.weights").string()},
                {"log", (out / "log.json").string()},
                {"scenes", corpus.size()},
                {"first_invisible_depth_l1",
                 r.log.empty() ? ordered_json(nullptr) : ordered_json(r.log.front().invisible_depth_l1)},
                {"final_invisible_depth_l1_ma100", tail_mean([](const BipsStepLog& s) { return s.invisible_depth_l1; })},
                {"final_pixel_ma100", tail_mean([](const BipsStepLog& s) { return s.pixel; })}};
    return o;
}

struct BipsInferArgs {
    std::string weights;
    std::string manifest;
    std::string out;
    std::uint64_t seed = 0;
    int threads = 0;
};

Output run_bips_infer(const BipsInferArgs& a) {
    const int threads = resolve_threads(a.threads);
    const Generator<float> g = load_generator(a.weights);
    const Manifest manifest = read_manifest(a.manifest);
    const std::vector<ErpGrid> corpus = load_corpus(manifest, threads);
    const fs::path out(a.out);
    make_dir(out);
    Manifest predictions;
    Manifest layouts;
    ordered_json items = ordered_json::array();
    double invisible_sum = 0.0;
    int invisible_count = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const ManifestEntry& in = manifest.entries[i];
        const ErpGrid& rgbd = corpus[i];
        if (rgbd.height() % Generator<float>::kStride != 0) {
            throw DataError("scene '" + in.id + "': height is not a multiple of 16");
        }
        ErpGrid rgb_mask;
        ErpGrid depth_mask;
        std::optional<SensorConfig> cfg;
        if (in.mask_rgb && in.mask_depth) {
            rgb_mask = read_mask(*in.mask_rgb);
            depth_mask = read_mask(*in.mask_depth);
        } else {
            cfg = sample_config(Seed{item_seed(a.seed, static_cast<int>(i))});
            std::tie(rgb_mask, depth_mask) = config_masks(*cfg, rgbd.height(), rgbd.width());
        }
        const BipsPrediction p = predict(g, apply_masks(rgbd, rgb_mask, depth_mask));

        ManifestEntry e;
        e.id = in.id;
        e.rgb = out / (in.id + "_rgb.png");
        e.depth = out / (in.id + "_depth.png");
        e.mask_rgb = out / (in.id + "_mask_rgb.png");
        e.mask_depth = out / (in.id + "_mask_depth.png");
        e.layout = in.layout;
        e.sensor_config = cfg;
        write_rgb(e.rgb, p.rgb);
        write_depth(e.depth, p.depth);
        write_mask(*e.mask_rgb, rgb_mask);
        write_mask(*e.mask_depth, depth_mask);
        ManifestEntry l = e;
        if (p.layout.size() > 0) {
            l.depth = out / (in.id + "_layout.png");
            write_depth(l.depth, p.layout);
            ErpGrid occlusion = p.residual;
            occlusion.data() = -occlusion.data();
            write_depth(out / (in.id + "_occlusion.png"), occlusion);
        }
        predictions.entries.push_back(e);
        layouts.entries.push_back(l);

        const double inv = invisible_l1(p.depth, rgbd.channel(3), depth_mask);
        invisible_sum += inv;
        ++invisible_count;
        items.push_back({{"id", in.id}, {"invisible_depth_l1", inv}, {"sampled_masks", cfg.has_value()}});
    }
    write_manifest(out / "predictions.json", predictions);
    write_manifest(out / "layouts.json", layouts);

    Output o;
    o.config = {{"weights", a.weights}, {"manifest", a.manifest}, {"out", a.out}, {"seed", a.seed},
                {"threads", threads},   {"arch", g.arch()}};
    o.result = {{"predictions", (out / "predictions.json").string()},
                {"layouts", (out / "layouts.json").string()},
                {"mean_invisible_depth_l1",
                 invisible_count ? ordered_json(invisible_sum / invisible_count) : ordered_json(nullptr)},
                {"items", items}};
    return o;
}

// ---------------------------------------------------------------------------
// verify-faed

struct VerifyFaedArgs {
    VerifyFaedConfig cfg;
    std::string out;
    int threads = 0;
};

Output run_verify_faed(const VerifyFaedArgs& a) {
    VerifyFaedConfig cfg = a.cfg;
    cfg.threads = resolve_threads(a.threads);
    const VerifyFaedResult r = verify_faed(cfg);
    std::cerr << "verify-faed: training " << r.train_seconds << " s, total " << r.total_seconds << " s\n";
    ordered_json rows = ordered_json::array();
    for (const VerifyFaedRow& row : r.rows) {
        rows.push_back({{"kind", to_string(row.kind)},
                        {"target", to_string(row.target)},
                        {"d2", row.d2},
                        {"monotone", row.monotone()}});
    }
    Output o;
    o.config = {{"scenes", cfg.scenes},
                {"height", cfg.height},
                {"width", 2 * cfg.height},
                {"steps", cfg.autoencoder.steps},
                {"batch", cfg.autoencoder.batch},
                {"lr", cfg.autoencoder.adam.lr},
                {"seed", cfg.seed},
                {"levels", kMaxCorruptionLevel},
                {"threads", cfg.threads},
                {"out", a.out}};
    o.result = {{"rows", rows}, {"all_monotone", r.all_monotone()}, {"final_loss", r.final_loss}};
    if (!a.out.empty()) {
        write_json(a.out, o.result);
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"panorad: RGB-D panorama toolkit"};
    app.require_subcommand(1);
    std::function<Output()> run;
    auto add = [&](const std::string& name, const std::string& help) { return app.add_subcommand(name, help); };
    const auto nonneg = CLI::NonNegativeNumber;
    const auto pos = CLI::PositiveNumber;

    ScenegenArgs scenegen;
    {
        CLI::App* s = add("scenegen", "Generate procedural RGB-D scenes and a manifest");
        s->add_option("--count", scenegen.count, "Number of scenes")->check(nonneg);
        s->add_option("--seed", scenegen.seed, "Seed of the first scene; scene i uses seed + i");
        s->add_option("--height", scenegen.height, "Panorama height (width = 2 x height)")->check(pos);
        s->add_option("--min-boxes", scenegen.min_boxes, "Minimum furniture boxes")->check(nonneg);
        s->add_option("--max-boxes", scenegen.max_boxes, "Maximum furniture boxes")->check(nonneg);
        s->add_option("--out", scenegen.out, "Output directory")->required();
        s->add_option("--threads", scenegen.threads, "Worker threads (default: PANORAD_THREADS or 1)")->check(nonneg);
        s->final_callback([&] { run = [&] { return run_scenegen(scenegen); }; });
    }
    MaskgenArgs maskgen;
    {
        CLI::App* s = add("maskgen", "Sample a sensor configuration and write its masks");
        s->add_option("--seed", maskgen.seed, "Configuration seed");
        s->add_option("--height", maskgen.height, "Mask height (width = 2 x height)")->check(pos);
        s->add_option("--out", maskgen.out, "Output directory")->required();
        s->add_option("--threads", maskgen.threads, "Worker threads")->check(nonneg);
        s->final_callback([&] { run = [&] { return run_maskgen(maskgen); }; });
    }
    LayoutdepthArgs layoutdepth;
    {
        CLI::App* s = add("layoutdepth", "Render layout depth from corner annotations");
        s->add_option("--manifest", layoutdepth.manifest, "Scene manifest");
        s->add_option("--id", layoutdepth.id, "Only this manifest entry");
        s->add_option("--layout", layoutdepth.layout, "Single annotation file instead of a manifest");
        s->add_option("--height", layoutdepth.height, "Height for --layout")->check(pos);
        s->add_option("--out", layoutdepth.out, "Output directory")->required();
        s->add_option("--threads", layoutdepth.threads, "Worker threads")->check(nonneg);
        s->final_callback([&] { run = [&] { return run_layoutdepth(layoutdepth); }; });
    }
    CorruptArgs corrupt_args;
    {
        CLI::App* s = add("corrupt", "Corrupt every scene of a manifest");
        s->add_option("--manifest", corrupt_args.manifest, "Scene manifest")->required();
        s->add_option("--kind", corrupt_args.kind,
                      "gaussian_blur, gaussian_noise, uniform_patches, swirl or salt_pepper")
            ->required();
        s->add_option("--level", corrupt_args.level, "Level 0..4")->check(CLI::Range(0, kMaxCorruptionLevel));
        s->add_option("--target", corrupt_args.target, "rgb or depth");
        s->add_option("--seed", corrupt_args.seed, "Corruption seed");
        s->add_option("--out", corrupt_args.out, "Output directory")->required();
        s->add_option("--threads", corrupt_args.threads, "Worker threads")->check(nonneg);
        s->final_callback([&] { run = [&] { return run_corrupt(corrupt_args); }; });
    }
    FaedTrainArgs faed_train;
    {
        CLI::App* s = add("faed-train", "Train the FAED auto-encoder");
        s->add_option("--manifest", faed_train.manifest, "Training manifest")->required();
        s->add_option("--out", faed_train.out, "Weights file")->required();
        s->add_option("--steps", faed_train.train.steps, "Optimiser steps")->check(nonneg);
        s->add_option("--batch", faed_train.train.batch, "Mini-batch size")->check(pos);
        s->add_option("--lr", faed_train.train.adam.lr, "Adam learning rate")->check(pos);
        s->add_option("--seed", faed_train.train.seed, "Initialisation and batching seed");
        s->add_option("--losses", faed_train.losses, "Optional per-step loss file");
        s->add_option("--threads", faed_train.threads, "Worker threads for loading")->check(nonneg);
        s->final_callback([&] { run = [&] { return run_faed_train(faed_train); }; });
    }
    FaedStatsArgs faed_stats;
    {
        CLI::App* s = add("faed-stats", "Feature statistics of a corpus");
        s->add_option("--weights", faed_stats.weights, "Auto-encoder weights")->required();
        s->add_option("--manifest", faed_stats.manifest, "Corpus manifest")->required();
        s->add_option("--out", faed_stats.out, "Statistics file")->required();
        s->add_option("--threads", faed_stats.threads, "Worker threads")->check(nonneg);
        s->final_callback([&] { run = [&] { return run_faed_stats(faed_stats); }; });
    }
    FaedArgs faed;
    {
        CLI::App* s = add("faed", "FAED between two statistics files or two corpora");
        s->add_option("--stats-a", faed.stats_a, "First statistics file");
        s->add_option("--stats-b", faed.stats_b, "Second statistics file");
        s->add_option("--weights", faed.weights, "Auto-encoder weights");
        s->add_option("--manifest-a", faed.manifest_a, "First corpus");
        s->add_option("--manifest-b", faed.manifest_b, "Second corpus");
        s->add_option("--threads", faed.threads, "Worker threads")->check(nonneg);
        s->final_callback([&] { run = [&] { return run_faed(faed); }; });
    }
    MetricsArgs metrics;
    {
        CLI::App* s = add("metrics", "Full-reference metrics between two manifests, matched by id");
        s->add_option("--pred", metrics.pred, "Prediction manifest")->required();
        s->add_option("--gt", metrics.gt, "Ground-truth manifest")->required();
        s->add_option("--which", metrics.which, "Comma-separated subset of psnr,ssim,absrel,rmse,iou2d,corner");
        s->add_option("--rays", metrics.rays, "Rays for floor-polygon extraction")->check(CLI::Range(3, 1 << 16));
        s->add_option("--threads", metrics.threads, "Worker threads")->check(nonneg);
        s->final_callback([&] { run = [&] { return run_metrics(metrics); }; });
    }
    BipsTrainArgs bips_train;
    {
        CLI::App* s = add("bips-train", "Train the toy completion GAN");
        s->add_option("--manifest", bips_train.manifest, "Training manifest")->required();
        s->add_option("--out", bips_train.out, "Output directory")->required();
        s->add_option("--variant", bips_train.variant, "full, no_bff or no_rdal");
        s->add_option("--steps", bips_train.train.steps, "Iterations (one D and one G step each)")->check(nonneg);
        s->add_option("--batch", bips_train.train.batch, "Mini-batch size")->check(pos);
        s->add_option("--lambda", bips_train.train.lambda, "Pixel-loss weight")->check(nonneg);
        s->add_option("--lr", bips_train.train.adam.lr, "Adam learning rate")->check(pos);
        s->add_option("--seed", bips_train.train.seed, "Initialisation, batching and mask seed");
        s->add_option("--threads", bips_train.threads, "Worker threads for loading")->check(nonneg);
        s->final_callback([&] { run = [&] { return run_bips_train(bips_train); }; });
    }
    BipsInferArgs bips_infer;
    {
        CLI::App* s = add("bips-infer", "Complete masked panoramas with a trained generator");
        s->add_option("--weights", bips_infer.weights, "Generator weights")->required();
        s->add_option("--manifest", bips_infer.manifest, "Input manifest (entry masks are used when present)")
            ->required();
        s->add_option("--out", bips_infer.out, "Output directory")->required();
        s->add_option("--seed", bips_infer.seed, "Seed for sampled masks");
        s->add_option("--threads", bips_infer.threads, "Worker threads for loading")->check(nonneg);
        s->final_callback([&] { run = [&] { return run_bips_infer(bips_infer); }; });
    }
    VerifyFaedArgs verify;
    {
        CLI::App* s = add("verify-faed", "Train an auto-encoder and tabulate FAED over corruption levels");
        s->add_option("--scenes", verify.cfg.scenes, "Corpus size")->check(pos);
        s->add_option("--height", verify.cfg.height, "Panorama height")->check(pos);
        s->add_option("--steps", verify.cfg.autoencoder.steps, "Auto-encoder steps")->check(nonneg);
        s->add_option("--batch", verify.cfg.autoencoder.batch, "Auto-encoder batch")->check(pos);
        s->add_option("--seed", verify.cfg.seed, "Scene, training and corruption seed");
        s->add_option("--out", verify.out, "Optional table file");
        s->add_option("--threads", verify.threads, "Worker threads")->check(nonneg);
        s->final_callback([&] {
            verify.cfg.autoencoder.seed = verify.cfg.seed;
            run = [&] { return run_verify_faed(verify); };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        std::cerr << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        std::cerr << (subs.empty() ? app.help() : subs.front()->help());
        return 1;
    }

    try {
        const Output out = run();
        ordered_json doc;
        doc["command"] = app.get_subcommands().front()->get_name();
        doc["config"] = out.config;
        doc["result"] = out.result;
        std::cout << doc.dump(2) << "\n";
        return 0;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

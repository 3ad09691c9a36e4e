#include "panorad/raster_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace panorad {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// PNG plumbing (classic libpng API)

struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 8;
    std::vector<std::uint8_t> bytes;  // rows top to bottom, 16-bit samples big-endian
};

struct PngErrorState {
    std::jmp_buf jump;
    char message[256] = {};
};

void png_error_handler(png_structp png, png_const_charp msg) {
    auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
    std::snprintf(state->message, sizeof(state->message), "%s", msg);
    std::longjmp(state->jump, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

PngImage read_png(const fs::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::uint8_t signature[8];
    if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
        throw IoError("'" + path.string() + "' is not a PNG file");
    }

    PngErrorState state;
    PngImage image;
    std::vector<png_bytep> rows;
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, &state, png_error_handler, png_warning_handler);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(state.jump)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("'" + path.string() + "': " + state.message);
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE || (color & PNG_COLOR_MASK_ALPHA) ||
        (depth != 8 && depth != 16) || png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("'" + path.string() + "': unsupported PNG layout (need 8/16-bit grey or RGB)");
    }
    image.width = static_cast<int>(width);
    image.height = static_cast<int>(height);
    image.channels = png_get_channels(png, info);
    image.bit_depth = depth;
    const std::size_t stride = png_get_rowbytes(png, info);
    image.bytes.resize(stride * height);
    rows.resize(height);
    for (png_uint_32 r = 0; r < height; ++r) {
        rows[r] = image.bytes.data() + r * stride;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void write_png(const fs::path& path, const PngImage& image) {
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) {
        throw IoError("cannot create '" + path.string() + "'");
    }
    PngErrorState state;
    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels * (image.bit_depth / 8);
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
    for (int r = 0; r < image.height; ++r) {
        rows[static_cast<std::size_t>(r)] = const_cast<png_bytep>(image.bytes.data()) + r * stride;
    }
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, &state, png_error_handler, png_warning_handler);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(state.jump)) {
        png_destroy_write_struct(&png, &info);
        throw IoError("'" + path.string() + "': " + state.message);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height),
                 image.bit_depth, image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(file.get()) != 0) {
        throw IoError("write to '" + path.string() + "' failed");
    }
}

void require_panorama(const PngImage& image, int channels, int bit_depth, const fs::path& path) {
    if (image.channels != channels || image.bit_depth != bit_depth) {
        throw IoError("'" + path.string() + "': expected " + std::to_string(channels) + " channel(s) at " +
                      std::to_string(bit_depth) + " bits, found " + std::to_string(image.channels) +
                      " at " + std::to_string(image.bit_depth));
    }
    if (image.width != 2 * image.height) {
        throw IoError("'" + path.string() + "': panorama must be twice as wide as tall, got " +
                      std::to_string(image.width) + "x" + std::to_string(image.height));
    }
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// ---------------------------------------------------------------------------
// Structured-text field access

[[noreturn]] void field_error(const std::string& where, const std::string& what) {
    throw ParseError(where + ": " + what);
}

const json& member(const json& j, const std::string& key, const std::string& where) {
    if (!j.is_object()) {
        field_error(where, "expected an object");
    }
    const auto it = j.find(key);
    if (it == j.end()) {
        field_error(where + "." + key, "missing field");
    }
    return *it;
}

double number(const json& j, const std::string& key, const std::string& where) {
    const json& v = member(j, key, where);
    if (!v.is_number()) {
        field_error(where + "." + key, "expected a number");
    }
    return v.get<double>();
}

int integer(const json& j, const std::string& key, const std::string& where) {
    const json& v = member(j, key, where);
    if (!v.is_number_integer()) {
        field_error(where + "." + key, "expected an integer");
    }
    return v.get<int>();
}

std::string text(const json& j, const std::string& key, const std::string& where) {
    const json& v = member(j, key, where);
    if (!v.is_string()) {
        field_error(where + "." + key, "expected a string");
    }
    return v.get<std::string>();
}

const json& array(const json& j, const std::string& key, const std::string& where) {
    const json& v = member(j, key, where);
    if (!v.is_array()) {
        field_error(where + "." + key, "expected an array");
    }
    return v;
}

double element(const json& a, std::size_t i, const std::string& where) {
    if (!a[i].is_number()) {
        field_error(where + "[" + std::to_string(i) + "]", "expected a number");
    }
    return a[i].get<double>();
}

void require_finite(double v, const std::string& where) {
    if (!std::isfinite(v)) {
        throw IoError(where + ": non-finite value cannot be serialised");
    }
}

std::string relative_to(const fs::path& p, const fs::path& base) {
    const fs::path rel = fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(base).lexically_normal());
    return (rel.empty() ? p : rel).generic_string();
}

}  // namespace

// ---------------------------------------------------------------------------
// Rasters

ErpGrid read_rgb(const fs::path& path) {
    const PngImage image = read_png(path);
    require_panorama(image, 3, 8, path);
    ErpGrid grid(image.height, image.width, 3);
    for (std::size_t i = 0; i < image.bytes.size(); ++i) {
        grid.data()[static_cast<Eigen::Index>(i)] = image.bytes[i] / 255.0;
    }
    return grid;
}

void write_rgb(const fs::path& path, const ErpGrid& rgb) {
    if (rgb.channels() != 3) {
        throw DimensionError("write_rgb: expected 3 channels, got " + std::to_string(rgb.channels()));
    }
    PngImage image{rgb.width(), rgb.height(), 3, 8, {}};
    image.bytes.resize(static_cast<std::size_t>(rgb.data().size()));
    for (Eigen::Index i = 0; i < rgb.data().size(); ++i) {
        image.bytes[static_cast<std::size_t>(i)] = to_byte(rgb.data()[i]);
    }
    write_png(path, image);
}

DepthRaster read_depth(const fs::path& path) {
    const PngImage image = read_png(path);
    require_panorama(image, 1, 16, path);
    DepthRaster out{ErpGrid(image.height, image.width, 1), ErpGrid(image.height, image.width, 1)};
    const Eigen::Index n = out.depth.data().size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const unsigned mm = (unsigned(image.bytes[2 * i]) << 8) | image.bytes[2 * i + 1];
        out.depth.data()[i] = mm / 1000.0;
        out.validity.data()[i] = mm != 0 ? 1.0 : 0.0;
    }
    return out;
}

int write_depth(const fs::path& path, const ErpGrid& depth, const ErpGrid* validity) {
    if (depth.channels() != 1) {
        throw DimensionError("write_depth: expected 1 channel, got " + std::to_string(depth.channels()));
    }
    if (validity && !validity->same_shape(depth)) {
        throw DimensionError("write_depth: validity shape differs from depth");
    }
    PngImage image{depth.width(), depth.height(), 1, 16, {}};
    const Eigen::Index n = depth.data().size();
    image.bytes.resize(static_cast<std::size_t>(2 * n));
    int clamped = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = depth.data()[i];
        long mm = 0;
        if ((!validity || validity->data()[i] != 0) && std::isfinite(d) && d > 0) {
            mm = std::max(1L, std::lround(d * 1000.0));
            if (mm > 65535) {
                mm = 65535;
                ++clamped;
            }
        }
        image.bytes[static_cast<std::size_t>(2 * i)] = static_cast<std::uint8_t>(mm >> 8);
        image.bytes[static_cast<std::size_t>(2 * i + 1)] = static_cast<std::uint8_t>(mm & 0xFF);
    }
    write_png(path, image);
    return clamped;
}

ErpGrid read_mask(const fs::path& path) {
    const PngImage image = read_png(path);
    require_panorama(image, 1, 8, path);
    ErpGrid grid(image.height, image.width, 1);
    for (std::size_t i = 0; i < image.bytes.size(); ++i) {
        grid.data()[static_cast<Eigen::Index>(i)] = image.bytes[i] >= 128 ? 1.0 : 0.0;
    }
    return grid;
}

void write_mask(const fs::path& path, const ErpGrid& mask) {
    if (mask.channels() != 1) {
        throw DimensionError("write_mask: expected 1 channel, got " + std::to_string(mask.channels()));
    }
    PngImage image{mask.width(), mask.height(), 1, 8, {}};
    image.bytes.resize(static_cast<std::size_t>(mask.data().size()));
    for (Eigen::Index i = 0; i < mask.data().size(); ++i) {
        image.bytes[static_cast<std::size_t>(i)] = mask.data()[i] != 0 ? 255 : 0;
    }
    write_png(path, image);
}

ErpGrid read_rgbd(const ManifestEntry& entry) {
    const ErpGrid rgb = read_rgb(entry.rgb);
    const DepthRaster depth = read_depth(entry.depth);
    if (!rgb.same_raster(depth.depth)) {
        throw IoError("entry '" + entry.id + "': RGB and depth rasters differ in size");
    }
    return stack_rgbd(rgb, depth.depth);
}

// ---------------------------------------------------------------------------
// Text files and JSON

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot create '" + path.string() + "'");
    }
    out << content;
    if (!out.flush()) {
        throw IoError("write to '" + path.string() + "' failed");
    }
}

json parse_json_text(const std::string& content, const std::string& source) {
    try {
        return json::parse(content);
    } catch (const json::parse_error& e) {
        const std::size_t offset = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, content.size());
        const auto line = 1 + std::count(content.begin(), content.begin() + static_cast<long>(offset), '\n');
        const std::size_t line_start = content.rfind('\n', offset == 0 ? 0 : offset - 1);
        const std::size_t column = offset - (line_start == std::string::npos ? 0 : line_start + 1) + 1;
        std::string msg = e.what();
        const std::size_t colon = msg.find(": ", msg.find("parse error"));
        throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                         (colon == std::string::npos ? msg : msg.substr(colon + 2)));
    }
}

ordered_json to_json(const SensorConfig& cfg) {
    ordered_json j;
    j["modality"] = to_string(cfg.modality);
    j["depth_kind"] = to_string(cfg.depth_kind);
    j["camera"] = {{"fov_horizontal", cfg.camera.fov_horizontal},
                   {"fov_vertical", cfg.camera.fov_vertical},
                   {"pitch", cfg.camera.pitch},
                   {"viewpoints", cfg.camera.viewpoints},
                   {"global_yaw", cfg.camera.global_yaw}};
    j["lidar"] = {{"fov_lower", cfg.lidar.fov_lower},
                  {"fov_upper", cfg.lidar.fov_upper},
                  {"pitch", cfg.lidar.pitch},
                  {"yaw", cfg.lidar.yaw},
                  {"channels", cfg.lidar.channels}};
    return j;
}

SensorConfig sensor_config_from_json(const json& j, const std::string& where) {
    SensorConfig cfg;
    try {
        cfg.modality = modality_from_string(text(j, "modality", where));
    } catch (const std::invalid_argument& e) {
        field_error(where + ".modality", e.what());
    }
    try {
        cfg.depth_kind = depth_kind_from_string(text(j, "depth_kind", where));
    } catch (const std::invalid_argument& e) {
        field_error(where + ".depth_kind", e.what());
    }
    const json& cam = member(j, "camera", where);
    const std::string cw = where + ".camera";
    cfg.camera.fov_horizontal = number(cam, "fov_horizontal", cw);
    cfg.camera.fov_vertical = number(cam, "fov_vertical", cw);
    cfg.camera.pitch = number(cam, "pitch", cw);
    cfg.camera.viewpoints = integer(cam, "viewpoints", cw);
    cfg.camera.global_yaw = number(cam, "global_yaw", cw);
    const json& lidar = member(j, "lidar", where);
    const std::string lw = where + ".lidar";
    cfg.lidar.fov_lower = number(lidar, "fov_lower", lw);
    cfg.lidar.fov_upper = number(lidar, "fov_upper", lw);
    cfg.lidar.pitch = number(lidar, "pitch", lw);
    cfg.lidar.yaw = number(lidar, "yaw", lw);
    cfg.lidar.channels = integer(lidar, "channels", lw);
    if (cfg.camera.viewpoints < 1) {
        field_error(cw + ".viewpoints", "must be at least 1");
    }
    if (cfg.lidar.channels < 1) {
        field_error(lw + ".channels", "must be at least 1");
    }
    return cfg;
}

ordered_json to_json(const SceneAnnotation& ann) {
    ordered_json corners = ordered_json::array();
    for (const auto& c : ann.corners_xz) {
        require_finite(c.x(), "layout.corners_xz");
        require_finite(c.y(), "layout.corners_xz");
        corners.push_back({c.x(), c.y()});
    }
    return {{"corners_xz", corners},
            {"camera_height", ann.camera_height},
            {"ceiling_height", ann.ceiling_height}};
}

SceneAnnotation annotation_from_json(const json& j, const std::string& where) {
    SceneAnnotation ann;
    const json& corners = array(j, "corners_xz", where);
    for (std::size_t i = 0; i < corners.size(); ++i) {
        const std::string cw = where + ".corners_xz[" + std::to_string(i) + "]";
        if (!corners[i].is_array() || corners[i].size() != 2) {
            field_error(cw, "expected an [x, z] pair");
        }
        ann.corners_xz.emplace_back(element(corners[i], 0, cw), element(corners[i], 1, cw));
    }
    ann.camera_height = number(j, "camera_height", where);
    ann.ceiling_height = number(j, "ceiling_height", where);
    return ann;
}

ordered_json to_json(const FeatureStats& stats) {
    const Eigen::Index d = stats.dim();
    if (stats.cov.rows() != d || stats.cov.cols() != d) {
        throw DimensionError("feature stats: covariance is not dim x dim");
    }
    ordered_json mean = ordered_json::array();
    for (Eigen::Index i = 0; i < d; ++i) {
        require_finite(stats.mean[i], "stats.mean");
        mean.push_back(stats.mean[i]);
    }
    ordered_json cov = ordered_json::array();
    for (Eigen::Index r = 0; r < d; ++r) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index c = 0; c < d; ++c) {
            require_finite(stats.cov(r, c), "stats.cov");
            row.push_back(stats.cov(r, c));
        }
        cov.push_back(std::move(row));
    }
    return {{"format", "panorad-feature-stats"},
            {"version", 1},
            {"dim", d},
            {"count", stats.count},
            {"mean", mean},
            {"cov", cov}};
}

FeatureStats stats_from_json(const json& j) {
    const std::string where = "stats";
    if (text(j, "format", where) != "panorad-feature-stats") {
        field_error(where + ".format", "expected 'panorad-feature-stats'");
    }
    if (integer(j, "version", where) != 1) {
        field_error(where + ".version", "unsupported version");
    }
    const int d = integer(j, "dim", where);
    if (d < 1) {
        field_error(where + ".dim", "must be positive");
    }
    FeatureStats stats;
    const json& count = member(j, "count", where);
    if (!count.is_number_integer()) {
        field_error(where + ".count", "expected an integer");
    }
    stats.count = count.get<long>();
    const json& mean = array(j, "mean", where);
    if (mean.size() != static_cast<std::size_t>(d)) {
        field_error(where + ".mean", "expected " + std::to_string(d) + " values");
    }
    stats.mean.resize(d);
    for (int i = 0; i < d; ++i) {
        stats.mean[i] = element(mean, static_cast<std::size_t>(i), where + ".mean");
    }
    const json& cov = array(j, "cov", where);
    if (cov.size() != static_cast<std::size_t>(d)) {
        field_error(where + ".cov", "expected " + std::to_string(d) + " rows");
    }
    stats.cov.resize(d, d);
    for (int r = 0; r < d; ++r) {
        const std::string rw = where + ".cov[" + std::to_string(r) + "]";
        const json& row = cov[static_cast<std::size_t>(r)];
        if (!row.is_array() || row.size() != static_cast<std::size_t>(d)) {
            field_error(rw, "expected " + std::to_string(d) + " values");
        }
        for (int c = 0; c < d; ++c) {
            stats.cov(r, c) = element(row, static_cast<std::size_t>(c), rw);
        }
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Manifests

Manifest read_manifest(const fs::path& path, bool check_files) {
    const json root = parse_json_text(read_text_file(path), path.string());
    const std::string where = "manifest";
    if (text(root, "format", where) != "panorad-manifest") {
        field_error(where + ".format", "expected 'panorad-manifest'");
    }
    if (integer(root, "version", where) != 1) {
        field_error(where + ".version", "unsupported version");
    }
    const fs::path base = path.parent_path();
    const auto resolve = [&](const std::string& p) { return (base / p).lexically_normal(); };
    Manifest manifest;
    std::set<std::string> ids;
    const json& entries = array(root, "entries", where);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const json& e = entries[i];
        const std::string ew = "entries[" + std::to_string(i) + "]";
        ManifestEntry entry;
        entry.id = text(e, "id", ew);
        if (!ids.insert(entry.id).second) {
            field_error(ew + ".id", "duplicate id '" + entry.id + "'");
        }
        entry.rgb = resolve(text(e, "rgb", ew));
        entry.depth = resolve(text(e, "depth", ew));
        if (e.contains("mask_rgb")) {
            entry.mask_rgb = resolve(text(e, "mask_rgb", ew));
        }
        if (e.contains("mask_depth")) {
            entry.mask_depth = resolve(text(e, "mask_depth", ew));
        }
        entry.layout = annotation_from_json(member(e, "layout", ew), ew + ".layout");
        if (e.contains("sensor_config")) {
            entry.sensor_config = sensor_config_from_json(e["sensor_config"], ew + ".sensor_config");
        }
        if (check_files) {
            for (const fs::path* p : {&entry.rgb, &entry.depth}) {
                if (!fs::exists(*p)) {
                    throw IoError(ew + ": referenced file '" + p->string() + "' does not exist");
                }
            }
            for (const auto* p : {&entry.mask_rgb, &entry.mask_depth}) {
                if (*p && !fs::exists(**p)) {
                    throw IoError(ew + ": referenced file '" + (*p)->string() + "' does not exist");
                }
            }
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
    const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
    ordered_json entries = ordered_json::array();
    std::set<std::string> ids;
    for (const auto& e : manifest.entries) {
        if (!ids.insert(e.id).second) {
            throw IoError("manifest: duplicate id '" + e.id + "'");
        }
        ordered_json j;
        j["id"] = e.id;
        j["rgb"] = relative_to(e.rgb, base);
        j["depth"] = relative_to(e.depth, base);
        if (e.mask_rgb) {
            j["mask_rgb"] = relative_to(*e.mask_rgb, base);
        }
        if (e.mask_depth) {
            j["mask_depth"] = relative_to(*e.mask_depth, base);
        }
        j["layout"] = to_json(e.layout);
        if (e.sensor_config) {
            j["sensor_config"] = to_json(*e.sensor_config);
        }
        entries.push_back(std::move(j));
    }
    const ordered_json root = {{"format", "panorad-manifest"}, {"version", 1}, {"entries", entries}};
    write_text_file(path, root.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Stats and weights files

FeatureStats read_stats(const fs::path& path) {
    return stats_from_json(parse_json_text(read_text_file(path), path.string()));
}

void write_stats(const fs::path& path, const FeatureStats& stats) {
    write_text_file(path, to_json(stats).dump(2) + "\n");
}

namespace {

constexpr const char* kWeightsMagic = "PANORAD-WEIGHTS 1";

std::size_t tensor_size(const WeightTensor& t) {
    std::size_t n = 1;
    for (const int d : t.shape) {
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace

void write_weights(const fs::path& path, const WeightsFile& weights) {
    std::ostringstream header;
    header << kWeightsMagic << "\n";
    header << "arch " << weights.arch << "\n";
    header << "tensors " << weights.tensors.size() << "\n";
    for (const auto& t : weights.tensors) {
        if (t.name.empty() || t.name.find_first_of(" \t\n") != std::string::npos) {
            throw IoError("weights: invalid tensor name '" + t.name + "'");
        }
        if (tensor_size(t) != t.data.size()) {
            throw DimensionError("weights: tensor '" + t.name + "' data does not match its shape");
        }
        header << t.name << " " << t.shape.size();
        for (const int d : t.shape) {
            header << " " << d;
        }
        header << "\n";
    }
    header << "end\n";
    std::string out = header.str();
    for (const auto& t : weights.tensors) {
        for (const float v : t.data) {
            const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
            for (int b = 0; b < 4; ++b) {
                out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
            }
        }
    }
    write_text_file(path, out);
}

WeightsFile read_weights(const fs::path& path) {
    const std::string content = read_text_file(path);
    std::size_t pos = 0;
    int line_no = 0;
    const auto next_line = [&]() {
        const std::size_t end = content.find('\n', pos);
        if (end == std::string::npos) {
            throw ParseError(path.string() + ":" + std::to_string(line_no + 1) + ": unexpected end of header");
        }
        std::string line = content.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        return line;
    };
    const auto fail = [&](const std::string& what) -> void {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + what);
    };

    if (next_line() != kWeightsMagic) {
        fail("missing '" + std::string(kWeightsMagic) + "' header");
    }
    WeightsFile weights;
    {
        const std::string line = next_line();
        if (line.rfind("arch ", 0) != 0) {
            fail("expected 'arch <name>'");
        }
        weights.arch = line.substr(5);
    }
    std::size_t count = 0;
    {
        std::istringstream ss(next_line());
        std::string key;
        if (!(ss >> key >> count) || key != "tensors") {
            fail("expected 'tensors <count>'");
        }
    }
    std::size_t payload = 0;
    for (std::size_t i = 0; i < count; ++i) {
        std::istringstream ss(next_line());
        WeightTensor t;
        int rank = 0;
        if (!(ss >> t.name >> rank) || rank < 0 || rank > 8) {
            fail("expected '<name> <rank> <dims...>'");
        }
        for (int r = 0; r < rank; ++r) {
            int d = 0;
            if (!(ss >> d) || d < 0) {
                fail("bad dimension for tensor '" + t.name + "'");
            }
            t.shape.push_back(d);
        }
        payload += tensor_size(t);
        weights.tensors.push_back(std::move(t));
    }
    if (next_line() != "end") {
        fail("expected 'end'");
    }
    if (content.size() - pos != payload * 4) {
        throw IoError(path.string() + ": payload holds " + std::to_string(content.size() - pos) +
                      " bytes, header describes " + std::to_string(payload * 4));
    }
    for (auto& t : weights.tensors) {
        t.data.resize(tensor_size(t));
        for (auto& v : t.data) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) {
                bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(content[pos++])) << (8 * b);
            }
            v = std::bit_cast<float>(bits);
        }
    }
    return weights;
}

}  // namespace panorad

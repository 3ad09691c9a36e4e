#pragma once

#include "panorad/erp_grid.hpp"
#include "panorad/feature_stats.hpp"
#include "panorad/scene_depth.hpp"
#include "panorad/sensor_sim.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace panorad {

/// Unreadable, malformed, or out-of-contract file contents.
class IoError : public DataError {
public:
    using DataError::DataError;
};

/// Structured-text parse failure; the message names the line or field.
class ParseError : public IoError {
public:
    using IoError::IoError;
};

// ---------------------------------------------------------------------------
// Rasters

/// 8-bit RGB image with width = 2 x height, mapped linearly to [0, 1].
ErpGrid read_rgb(const std::filesystem::path& path);
/// Values are clamped to [0, 1] and rounded to the nearest 8-bit level.
void write_rgb(const std::filesystem::path& path, const ErpGrid& rgb);

struct DepthRaster {
    ErpGrid depth;     // metres, 0 where invalid
    ErpGrid validity;  // 1 where the stored value is nonzero
};

/// 16-bit single-channel millimetres; 0 marks an invalid pixel.
DepthRaster read_depth(const std::filesystem::path& path);

/// Writes rounded millimetres; pixels with validity 0 (or depth <= 0) store 0.
/// Depths beyond 65.535 m are clamped; returns the number clamped.
int write_depth(const std::filesystem::path& path, const ErpGrid& depth,
                const ErpGrid* validity = nullptr);

/// 8-bit single-channel mask stored as 0 / 255.
ErpGrid read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const ErpGrid& mask);

// ---------------------------------------------------------------------------
// Manifests

struct ManifestEntry {
    std::string id;
    std::filesystem::path rgb;
    std::filesystem::path depth;
    std::optional<std::filesystem::path> mask_rgb;
    std::optional<std::filesystem::path> mask_depth;
    SceneAnnotation layout;
    std::optional<SensorConfig> sensor_config;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
};

/// Reads an entry's RGB and depth into one 4-channel panorama (RGB, metres).
ErpGrid read_rgbd(const ManifestEntry& entry);

/// Paths in the file are relative to the manifest's directory; the returned
/// entries hold them resolved against that directory.
Manifest read_manifest(const std::filesystem::path& path, bool check_files = true);

/// Writes entry paths relative to the manifest's directory.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// ---------------------------------------------------------------------------
// Feature statistics and weights

FeatureStats read_stats(const std::filesystem::path& path);
void write_stats(const std::filesystem::path& path, const FeatureStats& stats);

struct WeightTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

struct WeightsFile {
    std::string arch;
    std::vector<WeightTensor> tensors;
};

/// Text header ("PANORAD-WEIGHTS 1", arch, one line per tensor, "end")
/// followed by the little-endian float32 payload in header order.
WeightsFile read_weights(const std::filesystem::path& path);
void write_weights(const std::filesystem::path& path, const WeightsFile& weights);

// ---------------------------------------------------------------------------
// Structured-text conversions

nlohmann::ordered_json to_json(const SensorConfig& cfg);
SensorConfig sensor_config_from_json(const nlohmann::json& j, const std::string& where = "sensor_config");

nlohmann::ordered_json to_json(const SceneAnnotation& ann);
SceneAnnotation annotation_from_json(const nlohmann::json& j, const std::string& where = "layout");

nlohmann::ordered_json to_json(const FeatureStats& stats);
FeatureStats stats_from_json(const nlohmann::json& j);

/// Parses text, reporting syntax errors with their line and column.
nlohmann::json parse_json_text(const std::string& text, const std::string& source);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace panorad

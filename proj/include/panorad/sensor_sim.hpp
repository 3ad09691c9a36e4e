#pragma once

#include "panorad/erp_geometry.hpp"
#include "panorad/random.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace panorad {

enum class Modality { rgb_only, depth_only, both };
enum class DepthKind { lidar, perspective };

std::string to_string(Modality m);
std::string to_string(DepthKind k);
Modality modality_from_string(const std::string& s);
DepthKind depth_kind_from_string(const std::string& s);

/// A ring of identical perspective cameras sharing one pitch.
struct CameraRig {
    double fov_horizontal = 0.0;  // radians
    double fov_vertical = 0.0;    // radians
    double pitch = 0.0;           // radians
    int viewpoints = 1;
    double global_yaw = 0.0;      // radians, yaw of viewpoint 0
    friend bool operator==(const CameraRig&, const CameraRig&) = default;
};

struct SensorConfig {
    Modality modality = Modality::both;
    CameraRig camera;
    LidarParams lidar;
    DepthKind depth_kind = DepthKind::lidar;

    bool has_rgb() const { return modality != Modality::depth_only; }
    bool has_depth() const { return modality != Modality::rgb_only; }
};

bool operator==(const SensorConfig& a, const SensorConfig& b);

/// Raised when a mask is requested for a modality the config does not carry.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Draws every sensor parameter from its training distribution:
/// horizontal/vertical FoV ~ U[60, 90] deg, camera pitch ~ U[-90, 90] deg,
/// viewpoints ~ U{1..4}, LiDAR pitch ~ U[-90, 90] deg, yaw ~ U[0, 360) deg,
/// channels ~ U{2, 4, 8, 16}, lower/upper FoV ~ U{eta, 2 eta, 3 eta} deg.
/// Modality and depth kind are uniform over their options.
SensorConfig sample_config(Seed seed);

/// Union of the camera frustums placed at equal yaw intervals around the ring.
ErpGrid compose_rgb_mask(const SensorConfig& cfg, int height, int width);

/// Perspective depth reuses the camera rig; LiDAR uses its own rings.
ErpGrid compose_depth_mask(const SensorConfig& cfg, int height, int width);

struct MaskedInputs {
    ErpGrid rgb;    // 4 channels: masked RGB, then the mask
    ErpGrid depth;  // 2 channels: masked depth, then the mask
};

/// Builds the generator inputs from a panorama with RGB in channels 0..2
/// and depth in channel 3.
MaskedInputs apply_masks(const ErpGrid& panorama, const ErpGrid& rgb_mask,
                         const ErpGrid& depth_mask);

/// Masks for a config, substituting all-zero masks for absent modalities.
std::pair<ErpGrid, ErpGrid> config_masks(const SensorConfig& cfg, int height, int width);

}  // namespace panorad

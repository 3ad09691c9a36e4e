#pragma once

#include "panorad/erp_grid.hpp"
#include "panorad/random.hpp"
#include "panorad/scene_depth.hpp"

#include <array>
#include <string>

namespace panorad {

enum class CorruptionKind { gaussian_blur, gaussian_noise, uniform_patches, swirl, salt_pepper };
enum class CorruptionTarget { rgb, depth };

inline constexpr std::array<CorruptionKind, 5> kCorruptionKinds = {
    CorruptionKind::gaussian_blur, CorruptionKind::gaussian_noise, CorruptionKind::uniform_patches,
    CorruptionKind::swirl, CorruptionKind::salt_pepper};

inline constexpr int kMaxCorruptionLevel = 4;

/// Value range of depth for noise, patches and salt-and-pepper, in metres.
inline constexpr double kDepthValueRange = 10.0;

std::string to_string(CorruptionKind k);
std::string to_string(CorruptionTarget t);
CorruptionKind corruption_kind_from_string(const std::string& s);
CorruptionTarget corruption_target_from_string(const std::string& s);

struct Corruption {
    CorruptionKind kind = CorruptionKind::gaussian_blur;
    int level = 0;  // 0 .. kMaxCorruptionLevel; 0 is the identity
    CorruptionTarget target = CorruptionTarget::rgb;
    Seed seed;
};

/// Corrupts the target channels of a 4-channel panorama (RGB in [0, 1],
/// depth in metres) and leaves the others bit-identical.
///
/// Level parameterisation:
///   gaussian_blur    sigma = level * 0.01 * W pixels, circular in longitude,
///                    edge-clamped in latitude
///   gaussian_noise   additive, sigma = level * 0.05 * range
///   uniform_patches  level * 3 rectangles with sides of 5-15% of W, each
///                    filled with a uniform random constant
///   swirl            rotation about a random centre direction, up to
///                    level * 0.2 rad, decaying with angular distance
///   salt_pepper      a level * 0.05 fraction of pixels set to 0 or range
///
/// Random draws are shared across levels: noise scales one fixed field,
/// patches extend one fixed list (earlier rectangles stay on top), and
/// salt-and-pepper thresholds one fixed uniform field. The value range is 1
/// for RGB and kDepthValueRange for depth; results are clamped below at 0
/// and, for RGB, above at 1.
ErpGrid corrupt(const ErpGrid& rgbd, const Corruption& c);

/// Scene form: corrupts rgb or depth; validity, layout and boxes are kept.
RgbdScene corrupt(const RgbdScene& scene, const Corruption& c);

/// Separable Gaussian blur of every channel.
ErpGrid gaussian_blur(const ErpGrid& grid, double sigma);

}  // namespace panorad

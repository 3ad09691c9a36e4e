#include "panorad/corruption.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <vector>

namespace panorad {

std::string to_string(CorruptionKind k) {
    switch (k) {
        case CorruptionKind::gaussian_blur: return "gaussian_blur";
        case CorruptionKind::gaussian_noise: return "gaussian_noise";
        case CorruptionKind::uniform_patches: return "uniform_patches";
        case CorruptionKind::swirl: return "swirl";
        case CorruptionKind::salt_pepper: return "salt_pepper";
    }
    throw ParameterError("unknown corruption kind");
}

std::string to_string(CorruptionTarget t) {
    return t == CorruptionTarget::rgb ? "rgb" : "depth";
}

CorruptionKind corruption_kind_from_string(const std::string& s) {
    for (const CorruptionKind k : kCorruptionKinds) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw ParameterError("unknown corruption kind '" + s + "'");
}

CorruptionTarget corruption_target_from_string(const std::string& s) {
    if (s == "rgb") return CorruptionTarget::rgb;
    if (s == "depth") return CorruptionTarget::depth;
    throw ParameterError("unknown corruption target '" + s + "'");
}

namespace {

constexpr double kPatchMinFraction = 0.05;
constexpr double kPatchMaxFraction = 0.15;
constexpr double kSwirlRadius = std::numbers::pi / 3;

struct Channels {
    int first;
    int count;
    double range;
    double upper;  // clamp ceiling
};

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        total += v;
    }
    for (double& v : k) {
        v /= total;
    }
    return k;
}

void add_noise(ErpGrid& g, const Channels& ch, int level, CounterRng rng) {
    const double sigma = level * 0.05 * ch.range;
    for (int h = 0; h < g.height(); ++h) {
        for (int w = 0; w < g.width(); ++w) {
            for (int c = ch.first; c < ch.first + ch.count; ++c) {
                const double v = g(h, w, c) + sigma * rng.normal();
                g(h, w, c) = std::clamp(v, 0.0, ch.upper);
            }
        }
    }
}

void paint_patches(ErpGrid& g, const Channels& ch, int level, CounterRng rng) {
    struct Patch {
        int top, left, rows, cols;
        std::vector<double> value;
    };
    const int width = g.width();
    std::vector<Patch> patches;
    for (int i = 0; i < 3 * level; ++i) {
        Patch p;
        p.cols = std::max(1, static_cast<int>(std::lround(rng.uniform(kPatchMinFraction, kPatchMaxFraction) * width)));
        p.rows = std::max(1, static_cast<int>(std::lround(rng.uniform(kPatchMinFraction, kPatchMaxFraction) * width)));
        p.rows = std::min(p.rows, g.height());
        p.top = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.height() - p.rows + 1)));
        p.left = static_cast<int>(rng.below(static_cast<std::uint64_t>(width)));
        for (int c = 0; c < ch.count; ++c) {
            p.value.push_back(rng.uniform(0.0, ch.range));
        }
        patches.push_back(std::move(p));
    }
    for (auto it = patches.rbegin(); it != patches.rend(); ++it) {
        for (int h = it->top; h < it->top + it->rows; ++h) {
            for (int j = 0; j < it->cols; ++j) {
                const int w = (it->left + j) % width;
                for (int c = 0; c < ch.count; ++c) {
                    g(h, w, ch.first + c) = it->value[static_cast<std::size_t>(c)];
                }
            }
        }
    }
}

void salt_pepper(ErpGrid& g, const Channels& ch, int level, CounterRng rng) {
    const double fraction = level * 0.05;
    for (int h = 0; h < g.height(); ++h) {
        for (int w = 0; w < g.width(); ++w) {
            const double u = rng.uniform();
            const bool salt = rng.next_u64() >> 63;
            if (u < fraction) {
                for (int c = ch.first; c < ch.first + ch.count; ++c) {
                    g(h, w, c) = salt ? ch.range : 0.0;
                }
            }
        }
    }
}

// Bilinear lookup at continuous pixel coordinates: circular in w, clamped in h.
double sample(const ErpGrid& g, double hf, double wf, int c) {
    hf = std::clamp(hf, 0.0, double(g.height() - 1));
    const int h0 = static_cast<int>(std::floor(hf));
    const int h1 = std::min(h0 + 1, g.height() - 1);
    const double th = hf - h0;
    const double wfl = std::floor(wf);
    const double tw = wf - wfl;
    const int w0 = ((static_cast<int>(wfl) % g.width()) + g.width()) % g.width();
    const int w1 = (w0 + 1) % g.width();
    const double top = (1 - tw) * g(h0, w0, c) + tw * g(h0, w1, c);
    const double bottom = (1 - tw) * g(h1, w0, c) + tw * g(h1, w1, c);
    return (1 - th) * top + th * bottom;
}

void swirl(ErpGrid& g, const Channels& ch, int level, CounterRng rng) {
    const double strength = level * 0.2;
    const SphericalDirection centre{std::asin(rng.uniform(-1.0, 1.0)), rng.uniform(-std::numbers::pi, std::numbers::pi)};
    const Eigen::Vector3d axis = to_unit_vector(centre);
    const ErpGrid src = g;
    for (int h = 0; h < g.height(); ++h) {
        for (int w = 0; w < g.width(); ++w) {
            const Eigen::Vector3d d = to_unit_vector(pixel_to_dir(h, w, g.height(), g.width()));
            const double alpha = std::acos(std::clamp(d.dot(axis), -1.0, 1.0));
            const double angle = -strength * std::exp(-alpha / kSwirlRadius);
            const Eigen::Vector3d s = Eigen::AngleAxisd(angle, axis) * d;
            const SphericalDirection sd = from_unit_vector(s);
            const double hf = (std::numbers::pi / 2 - sd.latitude) * g.height() / std::numbers::pi - 0.5;
            const double wf = (sd.longitude + std::numbers::pi) * g.width() / (2 * std::numbers::pi) - 0.5;
            for (int c = ch.first; c < ch.first + ch.count; ++c) {
                g(h, w, c) = std::clamp(sample(src, hf, wf, c), 0.0, ch.upper);
            }
        }
    }
}

void blur_channels(ErpGrid& g, const Channels& ch, double sigma) {
    const std::vector<double> k = gaussian_kernel(sigma);
    const int radius = static_cast<int>(k.size() / 2);
    const int height = g.height();
    const int width = g.width();
    ErpGrid tmp = g;
    for (int h = 0; h < height; ++h) {
        for (int w = 0; w < width; ++w) {
            for (int c = ch.first; c < ch.first + ch.count; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int ws = (((w + i) % width) + width) % width;
                    acc += k[static_cast<std::size_t>(i + radius)] * g(h, ws, c);
                }
                tmp(h, w, c) = acc;
            }
        }
    }
    for (int h = 0; h < height; ++h) {
        for (int w = 0; w < width; ++w) {
            for (int c = ch.first; c < ch.first + ch.count; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int hs = std::clamp(h + i, 0, height - 1);
                    acc += k[static_cast<std::size_t>(i + radius)] * tmp(hs, w, c);
                }
                g(h, w, c) = acc;
            }
        }
    }
}

}  // namespace

ErpGrid gaussian_blur(const ErpGrid& grid, double sigma) {
    if (!(sigma > 0.0)) {
        throw ParameterError("gaussian_blur: sigma must be positive");
    }
    ErpGrid out = grid;
    blur_channels(out, Channels{0, grid.channels(), 1.0, 1.0}, sigma);
    return out;
}

ErpGrid corrupt(const ErpGrid& rgbd, const Corruption& c) {
    if (c.level < 0 || c.level > kMaxCorruptionLevel) {
        throw ParameterError("corrupt: level " + std::to_string(c.level) + " outside 0.." +
                             std::to_string(kMaxCorruptionLevel));
    }
    if (rgbd.channels() != 4) {
        throw DimensionError("corrupt: expected a 4-channel RGB-D panorama");
    }
    ErpGrid out = rgbd;
    if (c.level == 0) {
        return out;
    }
    const Channels ch = c.target == CorruptionTarget::rgb ? Channels{0, 3, 1.0, 1.0}
                                                      : Channels{3, 1, kDepthValueRange, HUGE_VAL};
    const CounterRng rng = CounterRng(c.seed).split(static_cast<std::uint64_t>(c.kind));
    switch (c.kind) {
        case CorruptionKind::gaussian_blur:
            blur_channels(out, ch, c.level * 0.01 * rgbd.width());
            break;
        case CorruptionKind::gaussian_noise:
            add_noise(out, ch, c.level, rng);
            break;
        case CorruptionKind::uniform_patches:
            paint_patches(out, ch, c.level, rng);
            break;
        case CorruptionKind::swirl:
            swirl(out, ch, c.level, rng);
            break;
        case CorruptionKind::salt_pepper:
            salt_pepper(out, ch, c.level, rng);
            break;
    }
    return out;
}

RgbdScene corrupt(const RgbdScene& scene, const Corruption& c) {
    const ErpGrid out = corrupt(stack_rgbd(scene.rgb, scene.depth), c);
    RgbdScene result = scene;
    if (c.target == CorruptionTarget::rgb) {
        for (int ch = 0; ch < 3; ++ch) {
            result.rgb.set_channel(ch, out.channel(ch));
        }
    } else {
        result.depth = out.channel(3);
    }
    return result;
}

}  // namespace panorad

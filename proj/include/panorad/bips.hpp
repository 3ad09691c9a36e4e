#pragma once

#include "panorad/faed.hpp"
#include "panorad/nn.hpp"
#include "panorad/scene_depth.hpp"
#include "panorad/sensor_sim.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace panorad {

/// full: two-stream fusion and three heads. no_bff: one stream on the
/// concatenated branch features. no_rdal: a single total-depth head in place
/// of the layout and residual heads.
enum class BipsVariant { full, no_bff, no_rdal };

std::string to_string(BipsVariant v);
BipsVariant bips_variant_from_string(const std::string& s);

/// Depth heads emit metres; losses and the discriminator see depth / kMaxDepth.
template <typename Scalar>
struct GeneratorOutput {
    nn::TensorT<Scalar> rgb;       // (B, 3, H, W) in [0, 1]
    nn::TensorT<Scalar> layout;    // (B, 1, H, W); undefined for no_rdal
    nn::TensorT<Scalar> residual;  // (B, 1, H, W); undefined for no_rdal
    nn::TensorT<Scalar> total;     // layout + residual, or the single depth head
};

/// Ground truth in the generator's output layout.
template <typename Scalar>
struct GeneratorTarget {
    nn::TensorT<Scalar> rgb;
    nn::TensorT<Scalar> layout;
    nn::TensorT<Scalar> residual;
    nn::TensorT<Scalar> total;
};

namespace detail {

// Encoder-decoder stream: two DownBlocks, two UpBlocks, residual skips at
// both scales. `up_in` is the width entering the first UpBlock.
template <typename Scalar>
struct FusionStream {
    nn::Conv2d<Scalar> down1, down2, up1, up2;

    FusionStream() = default;
    FusionStream(int in, int hidden, int up_in, CounterRng rng)
        : down1(in, hidden, 3, 2, rng.split(0)),
          down2(hidden, hidden, 3, 2, rng.split(1)),
          up1(up_in, hidden, 3, 1, rng.split(2)),
          up2(hidden, in, 3, 1, rng.split(3)) {}

    void collect(nn::ParameterList<Scalar>& out, const std::string& prefix) const {
        down1.collect(out, prefix + ".down1");
        down2.collect(out, prefix + ".down2");
        up1.collect(out, prefix + ".up1");
        up2.collect(out, prefix + ".up2");
    }
};

template <typename Scalar>
struct Head {
    nn::Conv2d<Scalar> up1, up2;

    Head() = default;
    Head(int in, int hidden, int out, CounterRng rng)
        : up1(in, hidden, 3, 1, rng.split(0)), up2(hidden, out, 3, 1, rng.split(1)) {}

    nn::TensorT<Scalar> operator()(const nn::TensorT<Scalar>& x) const { return up2.up(nn::relu(up1.up(x))); }

    void collect(nn::ParameterList<Scalar>& out, const std::string& prefix) const {
        up1.collect(out, prefix + ".up1");
        up2.collect(out, prefix + ".up2");
    }
};

}  // namespace detail

/// Two input branches (RGB + mask, depth + mask; kernels 7, 3, 3 with strides
/// 1, 2, 2 to 32 channels at H/4), a fusion block that exchanges features
/// between the RGB and depth streams after their DownBlocks, and separate
/// decoding heads. Every convolution pads circularly in longitude.
template <typename Scalar>
class Generator {
public:
    static constexpr int kStride = 16;
    static constexpr int kBranchChannels = 32;
    static constexpr int kFusionChannels = 64;
    static constexpr int kHeadChannels = 16;

    explicit Generator(BipsVariant variant = BipsVariant::full, CounterRng rng = CounterRng(Seed{0}))
        : variant_(variant) {
        build_branch(rgb_in_, 4, rng.split(1));
        build_branch(depth_in_, 2, rng.split(2));
        const int b = kBranchChannels;
        const int f = kFusionChannels;
        if (variant == BipsVariant::no_bff) {
            streams_.emplace_back(2 * b, f, f, rng.split(3));
        } else {
            streams_.emplace_back(b, f, 2 * f, rng.split(3));
            streams_.emplace_back(b, f, 2 * f, rng.split(4));
        }
        rgb_head_ = detail::Head<Scalar>(2 * b, kHeadChannels, 3, rng.split(5));
        layout_head_ = detail::Head<Scalar>(2 * b, kHeadChannels, 1, rng.split(6));
        if (variant != BipsVariant::no_rdal) {
            residual_head_ = detail::Head<Scalar>(2 * b, kHeadChannels, 1, rng.split(7));
        }
    }

    BipsVariant variant() const { return variant_; }
    int head_count() const { return variant_ == BipsVariant::no_rdal ? 2 : 3; }
    std::string arch() const { return "bips-generator-" + to_string(variant_) + "-v1"; }

    GeneratorOutput<Scalar> operator()(const nn::TensorT<Scalar>& rgb_in, const nn::TensorT<Scalar>& depth_in) const {
        check_inputs(rgb_in, depth_in);
        const nn::TensorT<Scalar> r = run_branch(rgb_in_, rgb_in);
        const nn::TensorT<Scalar> d = run_branch(depth_in_, depth_in);
        nn::TensorT<Scalar> fused;
        if (variant_ == BipsVariant::no_bff) {
            fused = run_stream(streams_[0], nn::concat_channels<Scalar>({r, d}));
        } else {
            const auto& sr = streams_[0];
            const auto& sd = streams_[1];
            const nn::TensorT<Scalar> r1 = nn::leaky_relu(sr.down1(r));
            const nn::TensorT<Scalar> d1 = nn::leaky_relu(sd.down1(d));
            const nn::TensorT<Scalar> r2 = nn::leaky_relu(sr.down2(r1));
            const nn::TensorT<Scalar> d2 = nn::leaky_relu(sd.down2(d1));
            const nn::TensorT<Scalar> exchange = nn::concat_channels<Scalar>({r2, d2});
            const nn::TensorT<Scalar> ru = nn::relu(sr.up2.up(nn::relu(sr.up1.up(exchange)) + r1)) + r;
            const nn::TensorT<Scalar> du = nn::relu(sd.up2.up(nn::relu(sd.up1.up(exchange)) + d1)) + d;
            fused = nn::concat_channels<Scalar>({ru, du});
        }
        GeneratorOutput<Scalar> out;
        const auto metres = static_cast<Scalar>(kMaxDepth);
        out.rgb = nn::sigmoid(rgb_head_(fused));
        if (variant_ == BipsVariant::no_rdal) {
            out.total = metres * layout_head_(fused);
        } else {
            out.layout = metres * layout_head_(fused);
            out.residual = metres * residual_head_(fused);
            out.total = out.layout + out.residual;
        }
        return out;
    }

    nn::ParameterList<Scalar> parameters() const {
        nn::ParameterList<Scalar> out;
        for (int i = 0; i < 3; ++i) {
            rgb_in_[i].collect(out, "rgb_in." + std::to_string(i));
        }
        for (int i = 0; i < 3; ++i) {
            depth_in_[i].collect(out, "depth_in." + std::to_string(i));
        }
        for (std::size_t i = 0; i < streams_.size(); ++i) {
            streams_[i].collect(out, "fusion." + std::to_string(i));
        }
        rgb_head_.collect(out, "head.rgb");
        if (variant_ == BipsVariant::no_rdal) {
            layout_head_.collect(out, "head.depth");
        } else {
            layout_head_.collect(out, "head.layout");
            residual_head_.collect(out, "head.residual");
        }
        return out;
    }

private:
    static void build_branch(nn::Conv2d<Scalar> (&branch)[3], int in, CounterRng rng) {
        branch[0] = nn::Conv2d<Scalar>(in, 16, 7, 1, rng.split(0));
        branch[1] = nn::Conv2d<Scalar>(16, kBranchChannels, 3, 2, rng.split(1));
        branch[2] = nn::Conv2d<Scalar>(kBranchChannels, kBranchChannels, 3, 2, rng.split(2));
    }

    static nn::TensorT<Scalar> run_branch(const nn::Conv2d<Scalar> (&branch)[3], const nn::TensorT<Scalar>& x) {
        nn::TensorT<Scalar> h = x;
        for (const auto& conv : branch) {
            h = nn::leaky_relu(conv(h));
        }
        return h;
    }

    static nn::TensorT<Scalar> run_stream(const detail::FusionStream<Scalar>& s, const nn::TensorT<Scalar>& x) {
        const nn::TensorT<Scalar> x1 = nn::leaky_relu(s.down1(x));
        const nn::TensorT<Scalar> x2 = nn::leaky_relu(s.down2(x1));
        return nn::relu(s.up2.up(nn::relu(s.up1.up(x2)) + x1)) + x;
    }

    static void check_inputs(const nn::TensorT<Scalar>& rgb_in, const nn::TensorT<Scalar>& depth_in) {
        if (rgb_in.rank() != 4 || depth_in.rank() != 4 || rgb_in.dim(1) != 4 || depth_in.dim(1) != 2 ||
            rgb_in.dim(0) != depth_in.dim(0) || rgb_in.dim(2) != depth_in.dim(2) ||
            rgb_in.dim(3) != depth_in.dim(3)) {
            throw nn::ShapeError("generator: expected (B, 4, H, W) and (B, 2, H, W), got " +
                                 nn::shape_string(rgb_in.shape()) + " and " + nn::shape_string(depth_in.shape()));
        }
        if (rgb_in.dim(2) % kStride != 0 || rgb_in.dim(3) % kStride != 0) {
            throw nn::ShapeError("generator: H and W must be divisible by 16, got " +
                                 nn::shape_string(rgb_in.shape()));
        }
    }

    BipsVariant variant_;
    nn::Conv2d<Scalar> rgb_in_[3];
    nn::Conv2d<Scalar> depth_in_[3];
    std::vector<detail::FusionStream<Scalar>> streams_;
    detail::Head<Scalar> rgb_head_;
    detail::Head<Scalar> layout_head_;  // total-depth head for no_rdal
    detail::Head<Scalar> residual_head_;
};

/// Two-scale patch discriminator: the input and its 2x average-pooled copy,
/// each through four stride-2 convolutions to a one-channel score map.
/// Five input channels (RGB, layout, residual); four for no_rdal (RGB, total).
template <typename Scalar>
class Discriminator {
public:
    static constexpr int kScales = 2;

    explicit Discriminator(int in_channels = 5, CounterRng rng = CounterRng(Seed{0})) : in_channels_(in_channels) {
        const int widths[5] = {in_channels, 16, 32, 64, 1};
        for (int s = 0; s < kScales; ++s) {
            for (int i = 0; i < 4; ++i) {
                layers_[s][i] = nn::Conv2d<Scalar>(widths[i], widths[i + 1], 3, 2,
                                                   rng.split(static_cast<std::uint64_t>(10 * s + i)));
            }
        }
    }

    int in_channels() const { return in_channels_; }
    std::string arch() const { return "bips-discriminator-" + std::to_string(in_channels_) + "ch-v1"; }

    std::vector<nn::TensorT<Scalar>> operator()(const nn::TensorT<Scalar>& x) const {
        if (x.rank() != 4 || x.dim(1) != in_channels_) {
            throw nn::ShapeError("discriminator: expected " + std::to_string(in_channels_) +
                                 " input channels, got " + nn::shape_string(x.shape()));
        }
        std::vector<nn::TensorT<Scalar>> scores;
        nn::TensorT<Scalar> input = x;
        for (int s = 0; s < kScales; ++s) {
            if (s > 0) {
                input = nn::avg_pool2x(input);
            }
            nn::TensorT<Scalar> h = input;
            for (int i = 0; i < 4; ++i) {
                h = layers_[s][i](h);
                if (i < 3) {
                    h = nn::leaky_relu(h);
                }
            }
            scores.push_back(h);
        }
        return scores;
    }

    nn::ParameterList<Scalar> parameters() const {
        nn::ParameterList<Scalar> out;
        for (int s = 0; s < kScales; ++s) {
            for (int i = 0; i < 4; ++i) {
                layers_[s][i].collect(out, "scale" + std::to_string(s) + "." + std::to_string(i));
            }
        }
        return out;
    }

private:
    int in_channels_;
    nn::Conv2d<Scalar> layers_[kScales][4];
};

inline int discriminator_channels(BipsVariant v) {
    return v == BipsVariant::no_rdal ? 4 : 5;
}

/// RGB followed by depth / kMaxDepth: layout and residual, or total alone.
template <typename Scalar>
nn::TensorT<Scalar> discriminator_input(const nn::TensorT<Scalar>& rgb, const nn::TensorT<Scalar>& layout,
                                        const nn::TensorT<Scalar>& residual, const nn::TensorT<Scalar>& total) {
    const auto scale = static_cast<Scalar>(1.0 / kMaxDepth);
    if (layout.defined()) {
        return nn::concat_channels<Scalar>({rgb, scale * layout, scale * residual});
    }
    return nn::concat_channels<Scalar>({rgb, scale * total});
}

template <typename Scalar>
nn::TensorT<Scalar> discriminator_input(const GeneratorOutput<Scalar>& o) {
    return discriminator_input(o.rgb, o.layout, o.residual, o.total);
}

/// Real samples carry the ground-truth decomposition for RDAL variants.
template <typename Scalar>
nn::TensorT<Scalar> discriminator_input(const GeneratorTarget<Scalar>& t, BipsVariant v) {
    if (v == BipsVariant::no_rdal) {
        return discriminator_input(t.rgb, nn::TensorT<Scalar>{}, nn::TensorT<Scalar>{}, t.total);
    }
    return discriminator_input(t.rgb, t.layout, t.residual, t.total);
}

/// Mean absolute errors; depth terms on metres / kMaxDepth. For no_rdal the
/// depth term compares total depth and layout/residual stay undefined.
template <typename Scalar>
struct PixelLoss {
    nn::TensorT<Scalar> rgb;
    nn::TensorT<Scalar> layout;
    nn::TensorT<Scalar> residual;
    nn::TensorT<Scalar> depth;
    nn::TensorT<Scalar> total;  // sum of the defined terms
};

template <typename Scalar>
PixelLoss<Scalar> pixel_loss(const GeneratorOutput<Scalar>& out, const GeneratorTarget<Scalar>& gt) {
    const auto scale = static_cast<Scalar>(1.0 / kMaxDepth);
    PixelLoss<Scalar> l;
    l.rgb = nn::l1_loss(out.rgb, gt.rgb);
    if (out.layout.defined()) {
        l.layout = nn::l1_loss(scale * out.layout, scale * gt.layout);
        l.residual = nn::l1_loss(scale * out.residual, scale * gt.residual);
        l.total = l.rgb + l.layout + l.residual;
    } else {
        l.depth = nn::l1_loss(scale * out.total, scale * gt.total);
        l.total = l.rgb + l.depth;
    }
    return l;
}

namespace detail {

template <typename Scalar>
nn::TensorT<Scalar> mean_over_scales(const std::vector<nn::TensorT<Scalar>>& scores, Scalar target) {
    nn::TensorT<Scalar> acc = nn::mse_to(scores.front(), target);
    for (std::size_t s = 1; s < scores.size(); ++s) {
        acc = acc + nn::mse_to(scores[s], target);
    }
    return static_cast<Scalar>(1.0 / scores.size()) * acc;
}

}  // namespace detail

/// 1/2 mean over scales and patches of (D(fake) - 1)^2.
template <typename Scalar>
nn::TensorT<Scalar> lsgan_generator_loss(const std::vector<nn::TensorT<Scalar>>& fake_scores) {
    return Scalar(0.5) * detail::mean_over_scales(fake_scores, Scalar(1));
}

/// 1/2 [mean (D(real) - 1)^2 + mean D(fake)^2], each averaged over scales.
template <typename Scalar>
nn::TensorT<Scalar> lsgan_discriminator_loss(const std::vector<nn::TensorT<Scalar>>& real_scores,
                                             const std::vector<nn::TensorT<Scalar>>& fake_scores) {
    return Scalar(0.5) * (detail::mean_over_scales(real_scores, Scalar(1)) +
                          detail::mean_over_scales(fake_scores, Scalar(0)));
}

template <typename Scalar>
struct GeneratorLoss {
    PixelLoss<Scalar> pixel;
    nn::TensorT<Scalar> adversarial;
    nn::TensorT<Scalar> total;  // lambda * pixel.total + adversarial
};

template <typename Scalar>
GeneratorLoss<Scalar> generator_loss(const GeneratorOutput<Scalar>& out, const GeneratorTarget<Scalar>& gt,
                                     const Discriminator<Scalar>& d, double lambda) {
    GeneratorLoss<Scalar> l;
    l.pixel = pixel_loss(out, gt);
    l.adversarial = lsgan_generator_loss(d(discriminator_input(out)));
    l.total = static_cast<Scalar>(lambda) * l.pixel.total + l.adversarial;
    return l;
}

// ---------------------------------------------------------------------------
// Data, training and inference

/// One training panorama: RGB + depth (4 channels) and its layout depth.
struct BipsSample {
    ErpGrid rgbd;
    ErpGrid layout;
};

BipsSample make_sample(const RgbdScene& scene);

/// Network inputs and targets for a batch of samples with their masks.
template <typename Scalar>
struct BipsBatch {
    nn::TensorT<Scalar> rgb_in;    // (B, 4, H, W): masked RGB, mask
    nn::TensorT<Scalar> depth_in;  // (B, 2, H, W): masked depth / kMaxDepth, mask
    GeneratorTarget<Scalar> target;
    std::vector<ErpGrid> depth_masks;
};

template <typename Scalar>
BipsBatch<Scalar> make_batch(const std::vector<const BipsSample*>& samples, const std::vector<SensorConfig>& configs);

struct BipsTrainConfig {
    BipsVariant variant = BipsVariant::full;
    double lambda = 100.0;
    int steps = 1000;
    int batch = 2;
    nn::AdamConfig adam;
    std::uint64_t seed = 0;
};

struct BipsStepLog {
    double d_loss = 0.0;
    double g_loss = 0.0;
    double adversarial = 0.0;
    double pixel = 0.0;
    /// Mean |total depth - ground truth| in metres over pixels outside the
    /// depth mask.
    double invisible_depth_l1 = 0.0;
};

struct BipsTrainResult {
    Generator<float> generator;
    Discriminator<float> discriminator;
    std::vector<BipsStepLog> log;
};

/// Alternates one discriminator step and one generator step per iteration;
/// every sample of every batch gets freshly sampled sensor masks.
BipsTrainResult train_bips(const std::vector<BipsSample>& corpus, const BipsTrainConfig& config);

struct BipsPrediction {
    ErpGrid rgb;
    ErpGrid layout;    // empty for no_rdal
    ErpGrid residual;  // empty for no_rdal
    ErpGrid depth;
};

/// Runs the generator on one masked panorama.
BipsPrediction predict(const Generator<float>& g, const MaskedInputs& inputs);

/// Mean |prediction - truth| over pixels where `mask` is 0.
double invisible_l1(const ErpGrid& prediction, const ErpGrid& truth, const ErpGrid& mask);

void save_generator(const std::filesystem::path& path, const Generator<float>& g);
Generator<float> load_generator(const std::filesystem::path& path);
void save_discriminator(const std::filesystem::path& path, const Discriminator<float>& d);

}  // namespace panorad

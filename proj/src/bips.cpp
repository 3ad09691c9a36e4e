#include "panorad/bips.hpp"

#include "panorad/weights.hpp"

namespace panorad {

std::string to_string(BipsVariant v) {
    switch (v) {
        case BipsVariant::full: return "full";
        case BipsVariant::no_bff: return "no_bff";
        case BipsVariant::no_rdal: return "no_rdal";
    }
    throw ParameterError("unknown BIPS variant");
}

BipsVariant bips_variant_from_string(const std::string& s) {
    for (const BipsVariant v : {BipsVariant::full, BipsVariant::no_bff, BipsVariant::no_rdal}) {
        if (to_string(v) == s) {
            return v;
        }
    }
    throw ParameterError("unknown BIPS variant '" + s + "' (expected full, no_bff or no_rdal)");
}

BipsSample make_sample(const RgbdScene& scene) {
    return {stack_rgbd(scene.rgb, scene.depth), layout_depth(scene.layout, scene.depth.height(), scene.depth.width())};
}

namespace {

// Packs channel `c` of each grid, times `scale`, into channel `slot` of a
// (B, C, H, W) value array.
void pack(typename nn::Node<double>::Array& dst, const ErpGrid& g, int c, double scale, Eigen::Index b, int channels,
          int slot) {
    const Eigen::Index plane = Eigen::Index(g.height()) * g.width();
    const Eigen::Index base = (b * channels + slot) * plane;
    for (Eigen::Index p = 0; p < plane; ++p) {
        dst[base + p] = scale * g.data()[p * g.channels() + c];
    }
}

template <typename Scalar>
nn::TensorT<Scalar> as_tensor(const nn::Node<double>::Array& v, nn::Shape shape) {
    return nn::TensorT<Scalar>::constant(std::move(shape), v.cast<Scalar>());
}

ErpGrid unpack(const nn::Tensor& t, int b, int c) {
    const int height = t.dim(2);
    const int width = t.dim(3);
    ErpGrid out(height, width, 1);
    const Eigen::Index plane = Eigen::Index(height) * width;
    const Eigen::Index base = (Eigen::Index(b) * t.dim(1) + c) * plane;
    for (Eigen::Index p = 0; p < plane; ++p) {
        out.data()[p] = static_cast<double>(t.value()[base + p]);
    }
    return out;
}

ErpGrid unpack_rgb(const nn::Tensor& t) {
    ErpGrid out(t.dim(2), t.dim(3), 3);
    for (int c = 0; c < 3; ++c) {
        out.set_channel(c, unpack(t, 0, c));
    }
    return out;
}

}  // namespace

template <typename Scalar>
BipsBatch<Scalar> make_batch(const std::vector<const BipsSample*>& samples, const std::vector<SensorConfig>& configs) {
    if (samples.empty() || samples.size() != configs.size()) {
        throw DimensionError("make_batch: need one sensor configuration per sample");
    }
    const int height = samples.front()->rgbd.height();
    const int width = samples.front()->rgbd.width();
    const auto batch = static_cast<int>(samples.size());
    const Eigen::Index plane = Eigen::Index(height) * width;
    nn::Node<double>::Array rgb_in(batch * 4 * plane), depth_in(batch * 2 * plane), rgb(batch * 3 * plane),
        layout(batch * plane), residual(batch * plane), total(batch * plane);
    BipsBatch<Scalar> out;
    for (int b = 0; b < batch; ++b) {
        const BipsSample& s = *samples[static_cast<std::size_t>(b)];
        if (s.rgbd.height() != height || s.rgbd.channels() != 4 || !s.layout.same_raster(s.rgbd)) {
            throw DimensionError("make_batch: samples must share one size and carry RGB-D plus layout");
        }
        const auto [rgb_mask, depth_mask] = config_masks(configs[static_cast<std::size_t>(b)], height, width);
        const MaskedInputs in = apply_masks(s.rgbd, rgb_mask, depth_mask);
        for (int c = 0; c < 4; ++c) {
            pack(rgb_in, in.rgb, c, 1.0, b, 4, c);
        }
        pack(depth_in, in.depth, 0, 1.0 / kMaxDepth, b, 2, 0);
        pack(depth_in, in.depth, 1, 1.0, b, 2, 1);
        for (int c = 0; c < 3; ++c) {
            pack(rgb, s.rgbd, c, 1.0, b, 3, c);
        }
        pack(layout, s.layout, 0, 1.0, b, 1, 0);
        pack(total, s.rgbd, 3, 1.0, b, 1, 0);
        out.depth_masks.push_back(depth_mask);
    }
    residual = total - layout;
    out.rgb_in = as_tensor<Scalar>(rgb_in, {batch, 4, height, width});
    out.depth_in = as_tensor<Scalar>(depth_in, {batch, 2, height, width});
    out.target.rgb = as_tensor<Scalar>(rgb, {batch, 3, height, width});
    out.target.layout = as_tensor<Scalar>(layout, {batch, 1, height, width});
    out.target.residual = as_tensor<Scalar>(residual, {batch, 1, height, width});
    out.target.total = as_tensor<Scalar>(total, {batch, 1, height, width});
    return out;
}

template BipsBatch<float> make_batch(const std::vector<const BipsSample*>&, const std::vector<SensorConfig>&);
template BipsBatch<double> make_batch(const std::vector<const BipsSample*>&, const std::vector<SensorConfig>&);

double invisible_l1(const ErpGrid& prediction, const ErpGrid& truth, const ErpGrid& mask) {
    if (!prediction.same_shape(truth) || !prediction.same_shape(mask)) {
        throw DimensionError("invisible_l1: grids differ in shape");
    }
    double sum = 0.0;
    long n = 0;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        if (mask.data()[i] == 0.0) {
            sum += std::abs(prediction.data()[i] - truth.data()[i]);
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / double(n);
}

BipsTrainResult train_bips(const std::vector<BipsSample>& corpus, const BipsTrainConfig& config) {
    if (corpus.empty()) {
        throw InsufficientDataError("train_bips: empty corpus");
    }
    if (config.steps < 0 || config.batch < 1 || !(config.lambda >= 0.0)) {
        throw ParameterError("train_bips: steps must be >= 0, batch >= 1 and lambda >= 0");
    }
    const CounterRng rng(Seed{config.seed});
    BipsTrainResult result{Generator<float>(config.variant, rng.split(1)),
                           Discriminator<float>(discriminator_channels(config.variant), rng.split(2)),
                           {}};
    nn::Adam<float> opt_g(result.generator.parameters(), config.adam);
    nn::Adam<float> opt_d(result.discriminator.parameters(), config.adam);
    CounterRng order = rng.split(3);
    CounterRng sensors = rng.split(4);

    std::vector<const BipsSample*> samples(static_cast<std::size_t>(config.batch));
    std::vector<SensorConfig> configs(static_cast<std::size_t>(config.batch));
    for (int step = 0; step < config.steps; ++step) {
        for (std::size_t b = 0; b < samples.size(); ++b) {
            samples[b] = &corpus[order.below(corpus.size())];
            configs[b] = sample_config(Seed{sensors.next_u64()});
        }
        const BipsBatch<float> batch = make_batch<float>(samples, configs);
        const GeneratorOutput<float> out = result.generator(batch.rgb_in, batch.depth_in);

        const nn::Tensor fake = nn::detach(discriminator_input(out));
        const nn::Tensor real = discriminator_input(batch.target, config.variant);
        const nn::Tensor d_loss =
            lsgan_discriminator_loss(result.discriminator(real), result.discriminator(fake));
        opt_d.zero_grad();
        nn::backward(d_loss);
        opt_d.step();

        const GeneratorLoss<float> g_loss = generator_loss(out, batch.target, result.discriminator, config.lambda);
        opt_g.zero_grad();
        nn::backward(g_loss.total);
        opt_g.step();

        BipsStepLog log;
        log.d_loss = d_loss.item();
        log.g_loss = g_loss.total.item();
        log.adversarial = g_loss.adversarial.item();
        log.pixel = g_loss.pixel.total.item();
        double invisible = 0.0;
        for (int b = 0; b < config.batch; ++b) {
            invisible += invisible_l1(unpack(out.total, b, 0), unpack(batch.target.total, b, 0),
                                      batch.depth_masks[static_cast<std::size_t>(b)]);
        }
        log.invisible_depth_l1 = invisible / config.batch;
        result.log.push_back(log);
    }
    return result;
}

BipsPrediction predict(const Generator<float>& g, const MaskedInputs& inputs) {
    const int height = inputs.rgb.height();
    const int width = inputs.rgb.width();
    if (inputs.rgb.channels() != 4 || inputs.depth.channels() != 2 || !inputs.depth.same_raster(inputs.rgb)) {
        throw DimensionError("predict: expected 4-channel RGB and 2-channel depth inputs");
    }
    const Eigen::Index plane = Eigen::Index(height) * width;
    nn::Node<double>::Array rgb_in(4 * plane), depth_in(2 * plane);
    for (int c = 0; c < 4; ++c) {
        pack(rgb_in, inputs.rgb, c, 1.0, 0, 4, c);
    }
    pack(depth_in, inputs.depth, 0, 1.0 / kMaxDepth, 0, 2, 0);
    pack(depth_in, inputs.depth, 1, 1.0, 0, 2, 1);
    const GeneratorOutput<float> out =
        g(as_tensor<float>(rgb_in, {1, 4, height, width}), as_tensor<float>(depth_in, {1, 2, height, width}));
    BipsPrediction p;
    p.rgb = unpack_rgb(out.rgb);
    p.depth = unpack(out.total, 0, 0);
    if (out.layout.defined()) {
        p.layout = unpack(out.layout, 0, 0);
        p.residual = unpack(out.residual, 0, 0);
    }
    return p;
}

void save_generator(const std::filesystem::path& path, const Generator<float>& g) {
    write_weights(path, to_weights_file(g.parameters(), g.arch()));
}

Generator<float> load_generator(const std::filesystem::path& path) {
    const WeightsFile file = read_weights(path);
    const std::string prefix = "bips-generator-";
    const std::string suffix = "-v1";
    if (file.arch.rfind(prefix, 0) != 0 || file.arch.size() <= prefix.size() + suffix.size() ||
        file.arch.compare(file.arch.size() - suffix.size(), suffix.size(), suffix) != 0) {
        throw IoError("load_generator: '" + file.arch + "' is not a generator architecture");
    }
    const std::string name = file.arch.substr(prefix.size(), file.arch.size() - prefix.size() - suffix.size());
    BipsVariant variant;
    try {
        variant = bips_variant_from_string(name);
    } catch (const ParameterError& e) {
        throw IoError(std::string("load_generator: ") + e.what());
    }
    Generator<float> g(variant);
    load_weights_file(g.parameters(), file, g.arch());
    return g;
}

void save_discriminator(const std::filesystem::path& path, const Discriminator<float>& d) {
    write_weights(path, to_weights_file(d.parameters(), d.arch()));
}

}  // namespace panorad

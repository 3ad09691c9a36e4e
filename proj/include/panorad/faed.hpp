#pragma once

#include "panorad/erp_grid.hpp"
#include "panorad/feature_stats.hpp"
#include "panorad/nn.hpp"
#include "panorad/raster_io.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace panorad {

/// Depth normalisation range in metres.
inline constexpr double kMaxDepth = 10.0;

class InsufficientDataError : public DataError {
public:
    using DataError::DataError;
};

/// Batches 4-channel panoramas (RGB in [0, 1], depth in metres) into a
/// (B, 4, H, W) tensor with depth divided by kMaxDepth and clamped to [0, 1].
template <typename Scalar>
nn::TensorT<Scalar> autoencoder_input(const std::vector<const ErpGrid*>& panoramas) {
    if (panoramas.empty()) {
        throw InsufficientDataError("autoencoder_input: no panoramas");
    }
    const int height = panoramas.front()->height();
    const int width = panoramas.front()->width();
    const Eigen::Index plane = Eigen::Index(height) * width;
    typename nn::Node<Scalar>::Array v(Eigen::Index(panoramas.size()) * 4 * plane);
    for (std::size_t b = 0; b < panoramas.size(); ++b) {
        const ErpGrid& p = *panoramas[b];
        if (p.channels() < 4 || p.height() != height) {
            throw DimensionError("autoencoder_input: expected equally sized panoramas with RGB and depth");
        }
        for (Eigen::Index i = 0; i < plane; ++i) {
            const Eigen::Index base = Eigen::Index(b) * 4 * plane + i;
            const Eigen::Index src = i * p.channels();
            for (int c = 0; c < 3; ++c) {
                v[base + c * plane] = static_cast<Scalar>(p.data()[src + c]);
            }
            v[base + 3 * plane] = static_cast<Scalar>(std::clamp(p.data()[src + 3] / kMaxDepth, 0.0, 1.0));
        }
    }
    return nn::TensorT<Scalar>::constant({static_cast<int>(panoramas.size()), 4, height, width}, std::move(v));
}

/// Reconstruction auto-encoder: four stride-2 3x3 DownBlocks
/// (4 -> 16 -> 32 -> 64 -> 64, leaky-ReLU) to a (B, 64, H/16, W/16) latent,
/// mirrored by four upsample-conv UpBlocks (ReLU, sigmoid output).
template <typename Scalar>
class AutoEncoder {
public:
    static constexpr int kStride = 16;
    static constexpr int kLatentChannels = 64;
    static constexpr const char* kArch = "faed-autoencoder-v1";

    explicit AutoEncoder(CounterRng rng) {
        const int enc[5] = {4, 16, 32, 64, kLatentChannels};
        const int dec[5] = {kLatentChannels, 64, 32, 16, 4};
        for (int i = 0; i < 4; ++i) {
            encoder_[i] = nn::Conv2d<Scalar>(enc[i], enc[i + 1], 3, 2, rng.split(static_cast<std::uint64_t>(i)));
            decoder_[i] = nn::Conv2d<Scalar>(dec[i], dec[i + 1], 3, 1, rng.split(static_cast<std::uint64_t>(10 + i)));
        }
    }

    nn::TensorT<Scalar> encode(const nn::TensorT<Scalar>& x) const {
        if (x.rank() != 4 || x.dim(1) != 4 || x.dim(2) % kStride != 0 || x.dim(3) % kStride != 0) {
            throw nn::ShapeError("autoencoder: expected (B, 4, H, W) with H, W divisible by 16, got " +
                                 nn::shape_string(x.shape()));
        }
        nn::TensorT<Scalar> h = x;
        for (const auto& conv : encoder_) {
            h = nn::leaky_relu(conv(h));
        }
        return h;
    }

    nn::TensorT<Scalar> decode(const nn::TensorT<Scalar>& z) const {
        nn::TensorT<Scalar> h = z;
        for (int i = 0; i < 3; ++i) {
            h = nn::relu(decoder_[i].up(h));
        }
        return nn::sigmoid(decoder_[3].up(h));
    }

    nn::TensorT<Scalar> operator()(const nn::TensorT<Scalar>& x) const { return decode(encode(x)); }

    nn::ParameterList<Scalar> parameters() const {
        nn::ParameterList<Scalar> out;
        for (int i = 0; i < 4; ++i) {
            encoder_[i].collect(out, "encoder." + std::to_string(i));
        }
        for (int i = 0; i < 4; ++i) {
            decoder_[i].collect(out, "decoder." + std::to_string(i));
        }
        return out;
    }

private:
    nn::Conv2d<Scalar> encoder_[4];
    nn::Conv2d<Scalar> decoder_[4];
};

struct AeTrainConfig {
    int steps = 1500;
    int batch = 4;
    nn::AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
    std::uint64_t seed = 0;
};

struct AeTrainResult {
    AutoEncoder<float> model;
    std::vector<double> losses;  // mean-squared reconstruction error per step
};

/// Minimises the MSE reconstruction loss over randomly drawn mini-batches.
AeTrainResult train_autoencoder(const std::vector<ErpGrid>& panoramas, const AeTrainConfig& config);

void save_autoencoder(const std::filesystem::path& path, const AutoEncoder<float>& model);
AutoEncoder<float> load_autoencoder(const std::filesystem::path& path);

/// Longitudinal mean of each latent row, weighted by the cosine of the row's
/// pixel-centre latitude on an H'-row grid; flattened channel-major.
/// `latent` points at one (C, H', W') block. Each row mean is summed in
/// sorted order, so the result does not depend on the column origin.
template <typename Scalar>
Eigen::VectorXd pool_features(const Scalar* latent, int channels, int rows, int cols) {
    Eigen::VectorXd out(Eigen::Index(channels) * rows);
    std::vector<double> line(static_cast<std::size_t>(cols));
    for (int c = 0; c < channels; ++c) {
        for (int h = 0; h < rows; ++h) {
            const Scalar* src = latent + (Eigen::Index(c) * rows + h) * cols;
            for (int w = 0; w < cols; ++w) {
                const double v = static_cast<double>(src[w]);
                if (!std::isfinite(v)) {
                    throw DataError("pool_features: non-finite latent value");
                }
                line[static_cast<std::size_t>(w)] = v;
            }
            std::sort(line.begin(), line.end());
            double sum = 0.0;
            for (const double v : line) {
                sum += v;
            }
            out[Eigen::Index(c) * rows + h] = solid_angle_weight(h, rows) * (sum / cols);
        }
    }
    return out;
}

/// Pools every batch item of a (B, C, H', W') latent.
template <typename Scalar>
std::vector<Eigen::VectorXd> pool_features(const nn::TensorT<Scalar>& latent) {
    if (latent.rank() != 4) {
        throw nn::ShapeError("pool_features: expected (B, C, H', W'), got " + nn::shape_string(latent.shape()));
    }
    const int c = latent.dim(1);
    const int h = latent.dim(2);
    const int w = latent.dim(3);
    std::vector<Eigen::VectorXd> out;
    for (int b = 0; b < latent.dim(0); ++b) {
        out.push_back(pool_features(latent.value().data() + Eigen::Index(b) * c * h * w, c, h, w));
    }
    return out;
}

/// Running mean and scatter matrix, mergeable in any fixed order.
class StatsAccumulator {
public:
    static constexpr double kShrinkage = 1e-6;

    void add(const Eigen::VectorXd& v);
    void merge(const StatsAccumulator& other);

    long count() const { return count_; }
    Eigen::Index dim() const { return mean_.size(); }

    /// Mean and unbiased covariance plus kShrinkage * I.
    FeatureStats finalize() const;

private:
    long count_ = 0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd scatter_;
};

/// Squared Frechet distance between the Gaussians N(m, C) and N(m', C'):
/// |m - m'|^2 + Tr(C) + Tr(C') - 2 Tr((C^1/2 C' C^1/2)^1/2), evaluated with
/// symmetric eigendecompositions; negative eigenvalues and the result are
/// clamped at 0.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

/// Encodes and pools every panorama; features are accumulated in index order
/// whatever the thread count.
FeatureStats corpus_stats(const AutoEncoder<float>& model, const std::vector<ErpGrid>& panoramas,
                          int threads = 1);

/// FAED between two corpora.
double compute_faed(const AutoEncoder<float>& model, const std::vector<ErpGrid>& real,
                    const std::vector<ErpGrid>& generated, int threads = 1);

/// All entries of a manifest as 4-channel panoramas.
std::vector<ErpGrid> load_corpus(const Manifest& manifest, int threads = 1);

}  // namespace panorad

#include "panorad/faed.hpp"

#include "panorad/parallel.hpp"
#include "panorad/weights.hpp"

#include <Eigen/Eigenvalues>

namespace panorad {

AeTrainResult train_autoencoder(const std::vector<ErpGrid>& panoramas, const AeTrainConfig& config) {
    if (panoramas.empty()) {
        throw InsufficientDataError("train_autoencoder: empty corpus");
    }
    if (config.steps < 0 || config.batch < 1) {
        throw ParameterError("train_autoencoder: steps must be >= 0 and batch >= 1");
    }
    const int height = panoramas.front().height();
    if (height % AutoEncoder<float>::kStride != 0) {
        throw nn::ShapeError("train_autoencoder: height " + std::to_string(height) + " is not divisible by 16");
    }
    for (const auto& p : panoramas) {
        if (p.height() != height || p.channels() < 4) {
            throw DimensionError("train_autoencoder: panoramas must share one size and carry RGB-D");
        }
    }

    CounterRng rng(Seed{config.seed});
    AeTrainResult result{AutoEncoder<float>(rng.split(1)), {}};
    nn::Adam<float> optimiser(result.model.parameters(), config.adam);
    CounterRng order = rng.split(2);
    std::vector<const ErpGrid*> batch(static_cast<std::size_t>(config.batch));
    for (int step = 0; step < config.steps; ++step) {
        for (auto& b : batch) {
            b = &panoramas[order.below(panoramas.size())];
        }
        const nn::Tensor x = autoencoder_input<float>(batch);
        const nn::Tensor loss = nn::mse_loss(result.model(x), x);
        optimiser.zero_grad();
        nn::backward(loss);
        optimiser.step();
        result.losses.push_back(static_cast<double>(loss.item()));
    }
    return result;
}

void save_autoencoder(const std::filesystem::path& path, const AutoEncoder<float>& model) {
    write_weights(path, to_weights_file(model.parameters(), AutoEncoder<float>::kArch));
}

AutoEncoder<float> load_autoencoder(const std::filesystem::path& path) {
    AutoEncoder<float> model(CounterRng(Seed{0}));
    load_weights_file(model.parameters(), read_weights(path), AutoEncoder<float>::kArch);
    return model;
}

void StatsAccumulator::add(const Eigen::VectorXd& v) {
    if (count_ == 0) {
        mean_ = Eigen::VectorXd::Zero(v.size());
        scatter_ = Eigen::MatrixXd::Zero(v.size(), v.size());
    } else if (v.size() != mean_.size()) {
        throw DimensionError("StatsAccumulator: vector of dim " + std::to_string(v.size()) + ", expected " +
                             std::to_string(mean_.size()));
    }
    if (!v.allFinite()) {
        throw DataError("StatsAccumulator: non-finite feature vector");
    }
    ++count_;
    const Eigen::VectorXd delta = v - mean_;
    mean_ += delta / static_cast<double>(count_);
    scatter_.noalias() += delta * (v - mean_).transpose();
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
    if (other.count_ == 0) {
        return;
    }
    if (count_ == 0) {
        *this = other;
        return;
    }
    if (other.dim() != dim()) {
        throw DimensionError("StatsAccumulator: merging accumulators of different dims");
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    const Eigen::VectorXd delta = other.mean_ - mean_;
    mean_ += delta * (nb / n);
    scatter_ += other.scatter_;
    scatter_.noalias() += (na * nb / n) * delta * delta.transpose();
    count_ += other.count_;
}

FeatureStats StatsAccumulator::finalize() const {
    if (count_ < 2) {
        throw InsufficientDataError("feature statistics need at least 2 samples, got " + std::to_string(count_));
    }
    FeatureStats out;
    out.count = count_;
    out.mean = mean_;
    Eigen::MatrixXd cov = scatter_ / static_cast<double>(count_ - 1);
    out.cov = 0.5 * (cov + cov.transpose());
    out.cov.diagonal().array() += kShrinkage;
    return out;
}

namespace {

void require_usable(const FeatureStats& s, const char* which) {
    if (s.cov.rows() != s.dim() || s.cov.cols() != s.dim()) {
        throw DimensionError(std::string("frechet_distance: ") + which + " covariance is not dim x dim");
    }
    if (!s.mean.allFinite() || !s.cov.allFinite()) {
        throw DataError(std::string("frechet_distance: ") + which + " statistics are not finite");
    }
}

}  // namespace

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
    if (a.dim() != b.dim()) {
        throw DimensionError("frechet_distance: dims " + std::to_string(a.dim()) + " and " +
                             std::to_string(b.dim()) + " differ");
    }
    require_usable(a, "first");
    require_usable(b, "second");

    const Eigen::MatrixXd ca = 0.5 * (a.cov + a.cov.transpose());
    const Eigen::MatrixXd cb = 0.5 * (b.cov + b.cov.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(ca);
    const Eigen::VectorXd root = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd sqrt_a = ea.eigenvectors() * root.asDiagonal() * ea.eigenvectors().transpose();
    Eigen::MatrixXd m = sqrt_a * cb * sqrt_a;
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m, Eigen::EigenvaluesOnly);
    const double trace_sqrt = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double d2 = (a.mean - b.mean).squaredNorm() + ca.trace() + cb.trace() - 2.0 * trace_sqrt;
    return std::max(d2, 0.0);
}

FeatureStats corpus_stats(const AutoEncoder<float>& model, const std::vector<ErpGrid>& panoramas, int threads) {
    std::vector<Eigen::VectorXd> features(panoramas.size());
    parallel_for(static_cast<int>(panoramas.size()), threads, [&](int i) {
        const nn::Tensor z = model.encode(autoencoder_input<float>({&panoramas[static_cast<std::size_t>(i)]}));
        features[static_cast<std::size_t>(i)] = pool_features(z).front();
    });
    StatsAccumulator acc;
    for (const auto& f : features) {
        acc.add(f);
    }
    return acc.finalize();
}

double compute_faed(const AutoEncoder<float>& model, const std::vector<ErpGrid>& real,
                    const std::vector<ErpGrid>& generated, int threads) {
    return frechet_distance(corpus_stats(model, real, threads), corpus_stats(model, generated, threads));
}

std::vector<ErpGrid> load_corpus(const Manifest& manifest, int threads) {
    std::vector<ErpGrid> out(manifest.entries.size(), ErpGrid(1, 2, 1));
    parallel_for(static_cast<int>(manifest.entries.size()), threads, [&](int i) {
        out[static_cast<std::size_t>(i)] = read_rgbd(manifest.entries[static_cast<std::size_t>(i)]);
    });
    return out;
}

}  // namespace panorad

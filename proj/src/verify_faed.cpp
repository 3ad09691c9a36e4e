#include "panorad/verify_faed.hpp"

#include "panorad/parallel.hpp"

#include <chrono>

namespace panorad {

bool VerifyFaedRow::monotone() const {
    for (int level = 2; level <= kMaxCorruptionLevel; ++level) {
        if (!(d2[static_cast<std::size_t>(level)] > d2[static_cast<std::size_t>(level - 1)])) {
            return false;
        }
    }
    return true;
}

bool VerifyFaedResult::all_monotone() const {
    for (const auto& r : rows) {
        if (!r.monotone()) {
            return false;
        }
    }
    return !rows.empty();
}

std::vector<ErpGrid> scene_corpus(int count, int height, std::uint64_t first_seed, int threads) {
    std::vector<ErpGrid> out(static_cast<std::size_t>(std::max(count, 0)), ErpGrid(1, 2, 1));
    parallel_for(count, threads, [&](int i) {
        const RgbdScene s = generate_scene(Seed{first_seed + static_cast<std::uint64_t>(i)}, height, 2 * height);
        out[static_cast<std::size_t>(i)] = stack_rgbd(s.rgb, s.depth);
    });
    return out;
}

VerifyFaedResult verify_faed(const std::vector<ErpGrid>& corpus, const VerifyFaedConfig& config) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    VerifyFaedResult result;
    const AeTrainResult trained = train_autoencoder(corpus, config.autoencoder);
    result.final_loss = trained.losses.empty() ? 0.0 : trained.losses.back();
    result.train_seconds = std::chrono::duration<double>(Clock::now() - start).count();

    const FeatureStats clean = corpus_stats(trained.model, corpus, config.threads);
    const CounterRng rng = CounterRng(Seed{config.seed}).split(0xC0);
    for (const CorruptionKind kind : kCorruptionKinds) {
        for (const CorruptionTarget target : {CorruptionTarget::rgb, CorruptionTarget::depth}) {
            VerifyFaedRow row{kind, target, {}};
            for (int level = 1; level <= kMaxCorruptionLevel; ++level) {
                std::vector<ErpGrid> corrupted(corpus.size(), ErpGrid(1, 2, 1));
                parallel_for(static_cast<int>(corpus.size()), config.threads, [&](int i) {
                    const Seed s{rng.split(static_cast<std::uint64_t>(i)).next_u64()};
                    corrupted[static_cast<std::size_t>(i)] =
                        corrupt(corpus[static_cast<std::size_t>(i)], Corruption{kind, level, target, s});
                });
                row.d2[static_cast<std::size_t>(level)] =
                    frechet_distance(clean, corpus_stats(trained.model, corrupted, config.threads));
            }
            result.rows.push_back(row);
        }
    }
    result.total_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
}

VerifyFaedResult verify_faed(const VerifyFaedConfig& config) {
    return verify_faed(scene_corpus(config.scenes, config.height, config.seed, config.threads), config);
}

}  // namespace panorad

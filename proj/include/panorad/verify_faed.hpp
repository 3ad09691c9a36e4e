#pragma once

#include "panorad/corruption.hpp"
#include "panorad/faed.hpp"

#include <array>
#include <vector>

namespace panorad {

struct VerifyFaedConfig {
    int scenes = 64;
    int height = 64;
    AeTrainConfig autoencoder;
    std::uint64_t seed = 0;  // scene and corruption seeds derive from it
    int threads = 1;
};

/// d^2 between the clean corpus and its corruption at levels 0..4.
struct VerifyFaedRow {
    CorruptionKind kind;
    CorruptionTarget target;
    std::array<double, kMaxCorruptionLevel + 1> d2{};

    /// Strictly increasing over levels 1..4.
    bool monotone() const;
};

struct VerifyFaedResult {
    std::vector<VerifyFaedRow> rows;  // kinds in kCorruptionKinds order, rgb before depth
    double final_loss = 0.0;
    double train_seconds = 0.0;
    double total_seconds = 0.0;

    bool all_monotone() const;
};

/// Procedural corpus of `count` scenes with seeds first_seed, first_seed + 1, ...
std::vector<ErpGrid> scene_corpus(int count, int height, std::uint64_t first_seed, int threads = 1);

/// Trains an auto-encoder on the clean corpus, then corrupts every panorama
/// at each level, kind and target and measures FAED against the clean corpus.
VerifyFaedResult verify_faed(const std::vector<ErpGrid>& corpus, const VerifyFaedConfig& config);

/// The same protocol on a freshly generated corpus.
VerifyFaedResult verify_faed(const VerifyFaedConfig& config);

}  // namespace panorad

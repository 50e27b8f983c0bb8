#pragma once

#include <memory>

#include "embfair/corpus.hpp"
#include "embfair/toy_model.hpp"

namespace embfair {

struct TrainConfig {
    int epochs = 3;
    int batch_size = 16;
    double lr = 1e-3;
    // learning rate for the embedding table; negative means lr * 64/embed_scale,
    // which keeps the per-step movement of the scaled embeddings constant as
    // embed_scale varies
    double emb_lr = -1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t seed = 7;
    int jobs = 1;  // >1 splits each batch across threads; serial mode is the reference
};

struct TrainResult {
    std::unique_ptr<ToyTransformer> model;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int steps = 0;
};

// Cross-entropy next-token training over corpus sentences with Adam.
// Deterministic in single-job mode; throws TrainingFailureError (with the
// failing step) if the loss turns non-finite.
TrainResult train_toy_model(const Corpus& corpus, const Vocabulary& vocab,
                            const ToyConfig& arch, const TrainConfig& train);

struct ReferencePair {
    TrainResult biased;
    TrainResult reference;
};

// Trains the biased model on `profile` and the reference on its balanced
// twin, from identical initialization, so data imbalance is the only
// difference between the two.
ReferencePair train_reference_pair(const BiasProfile& profile, const Vocabulary& vocab, int size,
                                   uint64_t seed, const ToyConfig& arch, const TrainConfig& train,
                                   int jobs = 1);

}  // namespace embfair

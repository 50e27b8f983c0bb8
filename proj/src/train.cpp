#include "embfair/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "embfair/errors.hpp"
#include "embfair/rng.hpp"

namespace embfair {

namespace {

struct AdamState {
    std::vector<Tensor> m, v;
    int t = 0;
};

AdamState make_adam(const ToyTransformer& model) {
    AdamState st;
    for (auto& [name, tensor] : model.tensors()) {
        (void)name;
        st.m.emplace_back(tensor->rows, tensor->cols);
        st.v.emplace_back(tensor->rows, tensor->cols);
    }
    return st;
}

void adam_step(ToyTransformer& model, const ToyTransformer::Gradients& grads, AdamState& st,
               const TrainConfig& cfg) {
    st.t += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, st.t);
    double bc2 = 1.0 - std::pow(cfg.beta2, st.t);
    double emb_lr = cfg.emb_lr >= 0.0 ? cfg.emb_lr
                                      : cfg.lr * 64.0 / model.config().embed_scale;
    auto named = model.tensors();
    for (size_t i = 0; i < named.size(); ++i) {
        double lr = named[i].name == "emb" ? emb_lr : cfg.lr;
        double* p = named[i].tensor->a.data();
        const double* g = grads.t[i].a.data();
        double* m = st.m[i].a.data();
        double* v = st.v[i].a.data();
        size_t n = named[i].tensor->size();
        for (size_t j = 0; j < n; ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace

TrainResult train_toy_model(const Corpus& corpus, const Vocabulary& vocab, const ToyConfig& arch,
                            const TrainConfig& train) {
    if (corpus.sentences.empty()) throw InvalidInputError("training corpus is empty");

    TrainResult result;
    result.model = std::make_unique<ToyTransformer>(vocab, arch);
    ToyTransformer& model = *result.model;

    AdamState adam = make_adam(model);
    auto grads = model.make_gradients();

    const int n = static_cast<int>(corpus.sentences.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(train.seed, "train-shuffle"));

    const int jobs = std::max(1, train.jobs);
    std::vector<ToyTransformer::Gradients> worker_grads;
    for (int w = 0; w < jobs; ++w) worker_grads.push_back(model.make_gradients());

    int step = 0;
    bool first = true;
    for (int epoch = 0; epoch < train.epochs; ++epoch) {
        for (int i = n - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
        for (int start = 0; start < n; start += train.batch_size) {
            int end = std::min(n, start + train.batch_size);
            int bsz = end - start;
            grads.zero();
            double batch_loss = 0.0;
            if (jobs <= 1) {
                for (int i = start; i < end; ++i)
                    batch_loss += model.sequence_loss_grad(corpus.sentences[order[i]], grads);
            } else {
                // fixed chunking per worker keeps results stable for a given job count
                std::vector<double> worker_loss(jobs, 0.0);
                parallel_for(jobs, jobs, [&](int w) {
                    worker_grads[w].zero();
                    for (int i = start + w; i < end; i += jobs)
                        worker_loss[w] +=
                            model.sequence_loss_grad(corpus.sentences[order[i]], worker_grads[w]);
                });
                for (int w = 0; w < jobs; ++w) {
                    batch_loss += worker_loss[w];
                    for (size_t ti = 0; ti < grads.t.size(); ++ti) {
                        double* dst = grads.t[ti].a.data();
                        const double* src = worker_grads[w].t[ti].a.data();
                        for (size_t j = 0; j < grads.t[ti].size(); ++j) dst[j] += src[j];
                    }
                }
            }
            batch_loss /= bsz;
            double scale = 1.0 / bsz;
            for (auto& t : grads.t)
                for (auto& x : t.a) x *= scale;
            if (!std::isfinite(batch_loss))
                throw TrainingFailureError("training loss diverged at step " +
                                               std::to_string(step),
                                           step);
            if (first) {
                result.initial_loss = batch_loss;
                first = false;
            }
            result.final_loss = batch_loss;
            adam_step(model, grads, adam, train);
            ++step;
        }
    }
    result.steps = step;
    return result;
}

ReferencePair train_reference_pair(const BiasProfile& profile, const Vocabulary& vocab, int size,
                                   uint64_t seed, const ToyConfig& arch, const TrainConfig& train,
                                   int jobs) {
    ReferencePair pair;
    Corpus biased = generate_corpus(profile, vocab, size, derive_seed(seed, "biased"), jobs);
    Corpus balanced = generate_corpus(profile.balanced_twin(), vocab, size,
                                      derive_seed(seed, "balanced"), jobs);
    pair.biased = train_toy_model(biased, vocab, arch, train);
    pair.reference = train_toy_model(balanced, vocab, arch, train);
    return pair;
}

}  // namespace embfair

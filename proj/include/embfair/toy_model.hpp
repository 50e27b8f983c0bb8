#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "embfair/model.hpp"

namespace embfair {

// Decoder-only transformer small enough to train at desk scale while still
// exhibiting a learnable occupation-gender association. Pre-LN blocks, GELU
// MLP, learned positions, untied output head (the head belongs to K).
// embed_scale multiplies embedding rows on input; it sets how sensitive the
// logits are to embedding-row displacement, which is what the anchored
// embedding fine-tuning pushes against.
struct ToyConfig {
    int dim = 64;
    int heads = 2;
    int layers = 2;
    int context = 16;
    double embed_scale = 64.0;
    double init_std = 0.08;
    double emb_init_std = 0.0015;
    uint64_t init_seed = 0xe40c7a12u;
};

class ToyTransformer final : public LanguageModel {
public:
    ToyTransformer(Vocabulary vocab, ToyConfig cfg);

    const Vocabulary& vocab() const override { return vocab_; }
    int dim() const override { return cfg_.dim; }
    const std::string& backend_name() const override { return name_; }

    Vec next_token_distribution(std::span<const int> context) const override;
    std::vector<Vec> hidden_states(std::span<const int> context) const override;

    Vec get_embedding(int token_id) const override;
    void set_embedding(int token_id, std::span<const double> row) override;

    ModelFingerprint fingerprint() const override;

    bool supports_embedding_gradient() const override { return true; }
    std::map<int, Vec> embedding_gradient(std::span<const ProbGradTerm> terms,
                                          std::span<const int> token_ids) const override;

    std::unique_ptr<LanguageModel> clone() const override {
        return std::make_unique<ToyTransformer>(*this);
    }

    const ToyConfig& config() const { return cfg_; }

    // All parameter tensors in canonical declaration order, embedding first.
    // Knowledge parameters (K) are every entry except "emb".
    struct NamedTensor {
        std::string name;
        Tensor* tensor;
    };
    std::vector<NamedTensor> tensors();
    std::vector<std::pair<std::string, const Tensor*>> tensors() const;

    // Mean cross-entropy of tokens[1..] predicted from the prefix, with
    // gradients accumulated into grads (same tensor layout as tensors()).
    // Used by the trainer; sequences are capped at the context window.
    struct Gradients;
    double sequence_loss(std::span<const int> tokens) const;
    double sequence_loss_grad(std::span<const int> tokens, Gradients& grads) const;

    struct Gradients {
        std::vector<Tensor> t;  // parallel to tensors()
        void zero();
    };
    Gradients make_gradients() const;

private:
    struct Block {
        Tensor ln1_g, ln1_b;
        Tensor w_qkv, b_qkv;  // (3d x d), (1 x 3d)
        Tensor w_o, b_o;      // (d x d), (1 x d)
        Tensor ln2_g, ln2_b;
        Tensor w_fc, b_fc;      // (4d x d), (1 x 4d)
        Tensor w_proj, b_proj;  // (d x 4d), (1 x d)
    };

    struct Activations;
    void forward(std::span<const int> ids, Activations& acts) const;
    // Backpropagates d(loss)/d(logits) stored in acts.dlogits; accumulates
    // into grads. Gradients tensor list may be null to skip K accumulation.
    void backward(std::span<const int> ids, const Activations& acts, Gradients& grads) const;

    std::vector<int> window(std::span<const int> context) const;
    void check_context(std::span<const int> context) const;

    Vocabulary vocab_;
    ToyConfig cfg_;
    std::string name_ = "toy";

    Tensor emb_;  // X: |V| x d
    Tensor pos_;  // context x d
    std::vector<Block> blocks_;
    Tensor lnf_g, lnf_b;
    Tensor w_head, b_head;  // (|V| x d), (1 x |V|)
};

}  // namespace embfair

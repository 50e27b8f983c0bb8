#pragma once

#include <array>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "embfair/common.hpp"
#include "embfair/vocab.hpp"

namespace embfair {

// Digest over every non-embedding ("knowledge") parameter tensor, taken over
// a canonical serialization: tensors in declaration order, name, dims, then
// values as little-endian 64-bit floats, hashed with SHA-256. Equal digests
// mean byte-identical knowledge parameters; embedding rows never contribute.
struct ModelFingerprint {
    std::array<unsigned char, 32> digest{};

    bool operator==(const ModelFingerprint&) const = default;
    std::string hex() const;
};

// One term of a scalar loss composed from next-token distributions:
// the context to evaluate and d(loss)/d p[token] at the current model output,
// sparse over tokens. Backends backpropagate these through the network to
// embedding rows.
struct ProbGradTerm {
    std::vector<int> context;
    std::vector<std::pair<int, double>> dloss_dp;
};

// Contract shared by every backend. Embedding rows (X) are mutable per token;
// everything else (K) is opaque and only observable through the fingerprint.
class LanguageModel {
public:
    virtual ~LanguageModel() = default;

    virtual const Vocabulary& vocab() const = 0;
    virtual int dim() const = 0;
    virtual const std::string& backend_name() const = 0;

    // Softmax distribution over the vocabulary for the next token.
    // Contexts longer than the backend window are truncated to the last
    // window tokens. Throws InvalidInputError on empty context or bad ids.
    virtual Vec next_token_distribution(std::span<const int> context) const = 0;

    // Final-layer representation per context position (used by sentence
    // encoders).
    virtual std::vector<Vec> hidden_states(std::span<const int> context) const = 0;

    virtual Vec get_embedding(int token_id) const = 0;
    virtual void set_embedding(int token_id, std::span<const double> row) = 0;

    virtual ModelFingerprint fingerprint() const = 0;

    virtual bool supports_embedding_gradient() const { return false; }

    // Exact gradient of sum(terms) with respect to the embedding rows of
    // token_ids. Throws UnsupportedOperationError unless
    // supports_embedding_gradient().
    virtual std::map<int, Vec> embedding_gradient(std::span<const ProbGradTerm> terms,
                                                  std::span<const int> token_ids) const;

    virtual std::unique_ptr<LanguageModel> clone() const = 0;
};

// Gradient of a loss given by ProbGradTerms with respect to one token's row.
Vec embedding_gradient(const LanguageModel& model, std::span<const ProbGradTerm> terms,
                       int token_id);

// Installs rows, runs fn, restores the original rows on scope exit.
class EmbeddingOverride {
public:
    EmbeddingOverride(LanguageModel& model, const std::map<int, Vec>& rows);
    ~EmbeddingOverride();
    EmbeddingOverride(const EmbeddingOverride&) = delete;
    EmbeddingOverride& operator=(const EmbeddingOverride&) = delete;

private:
    LanguageModel& model_;
    std::map<int, Vec> saved_;
};

}  // namespace embfair

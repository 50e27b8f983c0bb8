#include "embfair/model.hpp"

#include "embfair/errors.hpp"

namespace embfair {

std::string ModelFingerprint::hex() const { return to_hex(digest); }

std::map<int, Vec> LanguageModel::embedding_gradient(std::span<const ProbGradTerm>,
                                                     std::span<const int>) const {
    throw UnsupportedOperationError("backend '" + backend_name() +
                                    "' does not provide embedding gradients");
}

Vec embedding_gradient(const LanguageModel& model, std::span<const ProbGradTerm> terms,
                       int token_id) {
    int ids[1] = {token_id};
    auto g = model.embedding_gradient(terms, ids);
    return g.at(token_id);
}

EmbeddingOverride::EmbeddingOverride(LanguageModel& model, const std::map<int, Vec>& rows)
    : model_(model) {
    for (const auto& [id, row] : rows) {
        saved_.emplace(id, model.get_embedding(id));
        model.set_embedding(id, row);
    }
}

EmbeddingOverride::~EmbeddingOverride() {
    for (const auto& [id, row] : saved_) {
        model_.set_embedding(id, row);
    }
}

}  // namespace embfair

#include "embfair/causal.hpp"

#include <cmath>

#include "embfair/errors.hpp"

namespace embfair {

GenderPrediction gender_prediction(const LanguageModel& model, const Template& tmpl) {
    Vec probs = model.next_token_distribution(tmpl.token_ids);
    double p_he = probs[model.vocab().he()];
    double p_she = probs[model.vocab().she()];
    double sum = p_he + p_she;
    if (sum <= 0.0)
        throw DegenerateDistributionError(
            "p(he|t) + p(she|t) = 0; gender distribution cannot be renormalized");
    return {p_he / sum, p_she / sum};
}

std::vector<GenderPrediction> gender_predictions(const LanguageModel& model,
                                                 std::span<const Template> templates, int jobs) {
    std::vector<GenderPrediction> out(templates.size());
    parallel_for(static_cast<int>(templates.size()), jobs,
                 [&](int i) { out[i] = gender_prediction(model, templates[i]); });
    return out;
}

double tde_per_template(const LanguageModel& model, const Template& tmpl) {
    return std::abs(0.5 - gender_prediction(model, tmpl).p_male);
}

TdeEstimate mean_tde(const LanguageModel& model, std::span<const Template> templates, int jobs) {
    if (templates.empty()) throw InvalidInputError("mean TDE requires at least one template");
    TdeEstimate est;
    est.occupation = templates.front().occupation;
    est.template_count = static_cast<int>(templates.size());
    auto preds = gender_predictions(model, templates, jobs);
    est.per_template.resize(preds.size());
    double sum = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
        est.per_template[i] = std::abs(0.5 - preds[i].p_male);
        sum += est.per_template[i];
    }
    est.mean = sum / static_cast<double>(preds.size());
    return est;
}

namespace {

double mean_p_male(const LanguageModel& model, std::span<const Template> templates, int jobs) {
    auto preds = gender_predictions(model, templates, jobs);
    double sum = 0.0;
    for (const auto& p : preds) sum += p.p_male;
    return sum / static_cast<double>(preds.size());
}

}  // namespace

double total_effect(const LanguageModel& biased, const LanguageModel& reference,
                    std::span<const Template> templates, int jobs) {
    if (templates.empty()) throw InvalidInputError("total effect requires at least one template");
    if (!(biased.vocab() == reference.vocab()))
        throw InvalidInputError("models must share a vocabulary");
    return mean_p_male(biased, templates, jobs) - mean_p_male(reference, templates, jobs);
}

EffectDecomposition decompose(const LanguageModel& biased,
                              const std::map<int, Vec>& intervened_embeddings,
                              const LanguageModel& reference,
                              std::span<const Template> templates, const std::string& occupation,
                              int jobs) {
    if (templates.empty()) throw InvalidInputError("decompose requires at least one template");
    if (!(biased.vocab() == reference.vocab()))
        throw InvalidInputError("models must share a vocabulary");
    if (biased.dim() != reference.dim())
        throw InvalidInputError("models must share the embedding dimension");
    for (const auto& [id, row] : intervened_embeddings) {
        if (!biased.vocab().valid_id(id))
            throw InvalidInputError("intervened embedding references an invalid token id");
        if (static_cast<int>(row.size()) != biased.dim())
            throw InvalidInputError("intervened embedding row has wrong dimension");
    }

    double y_x_k = mean_p_male(biased, templates, jobs);  // E[Y|X=x, K=k]

    auto biased_hat = biased.clone();
    EmbeddingOverride install_b(*biased_hat, intervened_embeddings);
    double y_xhat_k = mean_p_male(*biased_hat, templates, jobs);  // E[Y|X=x_hat, K=k]

    auto reference_hat = reference.clone();
    EmbeddingOverride install_r(*reference_hat, intervened_embeddings);
    double y_xhat_k0 = mean_p_male(*reference_hat, templates, jobs);  // E[Y|X=x_hat, K=k0]

    EffectDecomposition d;
    d.occupation = occupation;
    d.te = y_x_k - y_xhat_k0;
    d.tde = y_x_k - y_xhat_k;
    d.nie = y_xhat_k - y_xhat_k0;
    d.biased_model_id = biased.fingerprint().hex();
    d.reference_model_id = reference.fingerprint().hex();
    Sha256 h;
    for (const auto& [id, row] : intervened_embeddings) {
        h.update_u64(static_cast<uint64_t>(id));
        for (double x : row) h.update_f64(x);
    }
    auto digest = h.finish();
    d.intervened_embedding_id = to_hex(digest);
    return d;
}

}  // namespace embfair

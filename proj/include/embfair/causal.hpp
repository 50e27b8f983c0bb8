#pragma once

#include <map>
#include <string>
#include <vector>

#include "embfair/model.hpp"
#include "embfair/templates.hpp"

namespace embfair {

// Two-point distribution over {he, she} renormalized from the raw next-token
// probabilities of one template.
struct GenderPrediction {
    double p_male = 0.0;
    double p_female = 0.0;
};

struct TdeEstimate {
    std::vector<double> per_template;  // |1/2 - p_male| per template
    double mean = 0.0;
    std::string occupation;
    int template_count = 0;
};

// Signed decomposition te = tde + nie against a correct-parameter reference,
// with the optimized embedding standing in for the unknown correct rows.
struct EffectDecomposition {
    double te = 0.0;
    double tde = 0.0;
    double nie = 0.0;
    std::string occupation;
    std::string biased_model_id;
    std::string reference_model_id;
    std::string intervened_embedding_id;
};

GenderPrediction gender_prediction(const LanguageModel& model, const Template& tmpl);

// All templates at once; embarrassingly parallel, reduced in index order.
std::vector<GenderPrediction> gender_predictions(const LanguageModel& model,
                                                 std::span<const Template> templates,
                                                 int jobs = 1);

double tde_per_template(const LanguageModel& model, const Template& tmpl);

TdeEstimate mean_tde(const LanguageModel& model, std::span<const Template> templates,
                     int jobs = 1);

// Mean over templates of p_male(biased) - p_male(reference).
double total_effect(const LanguageModel& biased, const LanguageModel& reference,
                    std::span<const Template> templates, int jobs = 1);

// Evaluates the three expectations of the telescoping identity:
//   te  = E[Y|x,k]  - E[Y|x_hat,k0]
//   tde = E[Y|x,k]  - E[Y|x_hat,k]
//   nie = E[Y|x_hat,k] - E[Y|x_hat,k0]
// where x_hat is installed into copies of both models. Inputs are left
// unmodified.
EffectDecomposition decompose(const LanguageModel& biased,
                              const std::map<int, Vec>& intervened_embeddings,
                              const LanguageModel& reference,
                              std::span<const Template> templates,
                              const std::string& occupation, int jobs = 1);

}  // namespace embfair

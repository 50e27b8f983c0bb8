#pragma once

#include <map>
#include <string>
#include <vector>

#include "embfair/causal.hpp"
#include "embfair/model.hpp"
#include "embfair/templates.hpp"

namespace embfair {

struct DebiasConfig {
    int n = 50;             // optimization templates per word (500 at paper scale)
    int m = 100;            // gradient iterations
    double alpha = 1000.0;  // displacement penalty weight
    double lambda = 0.002;  // learning rate
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t seed = 0;
    // optional outer penalty schedule: alpha multiplied by 10 per round
    int sumt_rounds = 1;

    void validate() const;
};

struct DebiasResult {
    std::string occupation;
    std::vector<int> token_ids;  // constituent tokens, in occupation order
    std::map<int, Vec> initial_rows;
    std::map<int, Vec> final_rows;
    std::vector<double> loss_curve;  // one entry per iteration, before each update
    double tde_before = 0.0;         // held-out templates
    double tde_after = 0.0;
    double displacement = 0.0;  // ||x_hat - x|| over all constituent rows
};

// Entropy-based per-template surrogate: 1 + p1*log2(p1) + p2*log2(p2) with
// probabilities clipped at 1e-12. Zero at p1 = p2 = 0.5, one at the
// deterministic extremes.
double per_template_loss(double p1, double p2);

// Mean per-template loss over templates under the model as currently
// parameterized, plus alpha * sum ||current - original||^2 over rows.
double total_loss(const LanguageModel& model, std::span<const Template> templates,
                  const std::map<int, Vec>& current_rows,
                  const std::map<int, Vec>& original_rows, double alpha, int jobs = 1);

// Exact gradient of total_loss with respect to the listed rows; the current
// rows must already be installed in the model.
std::map<int, Vec> total_loss_gradient(const LanguageModel& model,
                                       std::span<const Template> templates,
                                       const std::map<int, Vec>& current_rows,
                                       const std::map<int, Vec>& original_rows, double alpha);

// Whitespace-split constituent tokens of an occupation.
std::vector<int> constituent_token_ids(const Vocabulary& vocab, const std::string& occupation);

// Anchored gradient descent on the occupation's embedding rows. Installs the
// updated rows into the model each iteration; on return the model carries the
// final rows and every other parameter (and row) is untouched.
DebiasResult damp_debias(LanguageModel& model, const std::string& occupation,
                         std::span<const Template> opt_templates,
                         std::span<const Template> heldout_templates, const DebiasConfig& config);

// Tokens appearing in several results get the arithmetic mean of their
// debiased rows; tokens owned by one result pass through unchanged.
std::map<int, Vec> merge_shared_tokens(std::span<const DebiasResult> results, int dim);

struct WordReport {
    std::string occupation;
    double tde_before = 0.0;
    double tde_after = 0.0;
    double displacement = 0.0;
    double loss_first = 0.0;
    double loss_last = 0.0;
    int iterations = 0;
    uint64_t opt_seed = 0;
    uint64_t heldout_seed = 0;
};

struct DebiasReport {
    std::vector<WordReport> words;
    std::map<std::string, std::string> failures;  // occupation -> error
    std::string fingerprint_before;
    std::string fingerprint_after;
    bool fingerprint_unchanged = false;
    std::map<int, Vec> patch;  // merged rows installed into the model
};

using TemplateSets = std::map<std::string, std::vector<Template>>;

// Debiases each occupation independently on a private model copy using the
// provided template sets, merges shared tokens and installs the result.
// Per-word failures are collected and the remaining words proceed.
DebiasReport debias_words(LanguageModel& model, const std::vector<std::string>& occupations,
                          const TemplateSets& opt_templates,
                          const TemplateSets& heldout_templates, const DebiasConfig& config,
                          int jobs = 1);

// Full per-vocabulary pipeline: per-word template generation (a fresh held-out
// set is drawn from a derived seed), then debias_words.
DebiasReport debias_vocabulary(LanguageModel& model,
                               const std::vector<std::string>& occupations,
                               const GenderedWordList& gendered, TemplateGenConfig gen_config,
                               const DebiasConfig& debias_config, int jobs = 1);

}  // namespace embfair

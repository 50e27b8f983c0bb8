#include "embfair/debias.hpp"

#include <cmath>
#include <sstream>

#include "embfair/errors.hpp"
#include "embfair/rng.hpp"

namespace embfair {

namespace {

constexpr double kProbFloor = 1e-12;

inline double log2_clipped(double p) { return std::log2(std::max(p, kProbFloor)); }

double displacement_sq(const std::map<int, Vec>& current, const std::map<int, Vec>& original) {
    double sq = 0.0;
    for (const auto& [id, cur] : current) {
        const Vec& orig = original.at(id);
        if (cur.size() != orig.size())
            throw InvalidInputError("embedding row dimension mismatch in displacement");
        for (size_t j = 0; j < cur.size(); ++j) {
            double d = cur[j] - orig[j];
            sq += d * d;
        }
    }
    return sq;
}

}  // namespace

void DebiasConfig::validate() const {
    if (m < 1) throw InvalidInputError("iteration count m must be >= 1");
    if (n < 1) throw InvalidInputError("template count n must be >= 1");
    if (alpha < 0.0) throw InvalidInputError("alpha must be >= 0");
    if (lambda < 0.0) throw InvalidInputError("lambda must be >= 0");
    if (sumt_rounds < 1 || sumt_rounds > 3)
        throw InvalidInputError("sumt_rounds must lie in [1, 3]");
}

double per_template_loss(double p1, double p2) {
    return 1.0 + p1 * log2_clipped(p1) + p2 * log2_clipped(p2);
}

double total_loss(const LanguageModel& model, std::span<const Template> templates,
                  const std::map<int, Vec>& current_rows,
                  const std::map<int, Vec>& original_rows, double alpha, int jobs) {
    if (templates.empty()) throw InvalidInputError("total loss requires at least one template");
    auto preds = gender_predictions(model, templates, jobs);
    double entropy = 0.0;
    for (const auto& p : preds) entropy += per_template_loss(p.p_male, p.p_female);
    entropy /= static_cast<double>(preds.size());
    return entropy + alpha * displacement_sq(current_rows, original_rows);
}

std::map<int, Vec> total_loss_gradient(const LanguageModel& model,
                                       std::span<const Template> templates,
                                       const std::map<int, Vec>& current_rows,
                                       const std::map<int, Vec>& original_rows, double alpha) {
    if (templates.empty()) throw InvalidInputError("total loss requires at least one template");
    const int he = model.vocab().he();
    const int she = model.vocab().she();
    const double inv_n = 1.0 / static_cast<double>(templates.size());

    std::vector<ProbGradTerm> terms;
    terms.reserve(templates.size());
    for (const auto& t : templates) {
        Vec probs = model.next_token_distribution(t.token_ids);
        double ph = probs[he], ps = probs[she];
        double sum = ph + ps;
        if (sum <= 0.0)
            throw DegenerateDistributionError(
                "p(he|t) + p(she|t) = 0; gender distribution cannot be renormalized");
        double p1 = ph / sum, p2 = ps / sum;
        // d/dp1 of (1 + p1 log2 p1 + p2 log2 p2) with p2 = 1 - p1, then chain
        // through the renormalization p1 = ph / (ph + ps)
        double dl_dp1 = log2_clipped(p1) - log2_clipped(p2);
        double dl_dph = dl_dp1 * (ps / (sum * sum)) * inv_n;
        double dl_dps = -dl_dp1 * (ph / (sum * sum)) * inv_n;
        ProbGradTerm term;
        term.context = t.token_ids;
        term.dloss_dp = {{he, dl_dph}, {she, dl_dps}};
        terms.push_back(std::move(term));
    }

    std::vector<int> ids;
    for (const auto& [id, row] : current_rows) {
        (void)row;
        ids.push_back(id);
    }
    auto grad = model.embedding_gradient(terms, ids);
    for (auto& [id, g] : grad) {
        const Vec& cur = current_rows.at(id);
        const Vec& orig = original_rows.at(id);
        for (size_t j = 0; j < g.size(); ++j) g[j] += 2.0 * alpha * (cur[j] - orig[j]);
    }
    return grad;
}

std::vector<int> constituent_token_ids(const Vocabulary& vocab, const std::string& occupation) {
    std::vector<int> ids;
    std::istringstream ss(occupation);
    std::string word;
    while (ss >> word) ids.push_back(vocab.id_of(word));
    if (ids.empty()) throw InvalidInputError("occupation is empty");
    return ids;
}

DebiasResult damp_debias(LanguageModel& model, const std::string& occupation,
                         std::span<const Template> opt_templates,
                         std::span<const Template> heldout_templates,
                         const DebiasConfig& config) {
    config.validate();
    if (opt_templates.empty())
        throw InvalidInputError("debias requires optimization templates");
    if (!model.supports_embedding_gradient())
        throw UnsupportedOperationError("backend '" + model.backend_name() +
                                        "' cannot be debiased: no embedding gradients");

    DebiasResult result;
    result.occupation = occupation;
    result.token_ids = constituent_token_ids(model.vocab(), occupation);

    for (int id : result.token_ids) result.initial_rows[id] = model.get_embedding(id);
    std::map<int, Vec> rows = result.initial_rows;

    if (!heldout_templates.empty())
        result.tde_before = mean_tde(model, heldout_templates).mean;

    // Adam state over the concatenated constituent rows
    std::map<int, Vec> m1, m2;
    for (const auto& [id, row] : rows) {
        m1[id] = Vec(row.size(), 0.0);
        m2[id] = Vec(row.size(), 0.0);
    }

    double alpha = config.alpha;
    int adam_t = 0;
    for (int round = 0; round < config.sumt_rounds; ++round) {
        for (int k = 0; k < config.m; ++k) {
            double loss = total_loss(model, opt_templates, rows, result.initial_rows, alpha);
            int iteration = static_cast<int>(result.loss_curve.size());
            if (!std::isfinite(loss))
                throw OptimizationFailureError(
                    "debias loss became non-finite at iteration " + std::to_string(iteration),
                    iteration);
            result.loss_curve.push_back(loss);

            auto grad =
                total_loss_gradient(model, opt_templates, rows, result.initial_rows, alpha);
            ++adam_t;
            double bc1 = 1.0 - std::pow(config.beta1, adam_t);
            double bc2 = 1.0 - std::pow(config.beta2, adam_t);
            for (auto& [id, row] : rows) {
                Vec& g = grad.at(id);
                Vec& m = m1.at(id);
                Vec& v = m2.at(id);
                for (size_t j = 0; j < row.size(); ++j) {
                    m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
                    v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
                    row[j] -= config.lambda * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + config.eps);
                }
                model.set_embedding(id, row);  // updates feed the next evaluation
            }
        }
        alpha *= 10.0;
    }

    result.final_rows = rows;
    result.displacement = std::sqrt(displacement_sq(rows, result.initial_rows));
    if (!heldout_templates.empty())
        result.tde_after = mean_tde(model, heldout_templates).mean;
    return result;
}

std::map<int, Vec> merge_shared_tokens(std::span<const DebiasResult> results, int dim) {
    std::map<int, std::vector<const Vec*>> by_token;
    for (const auto& r : results) {
        for (const auto& [id, row] : r.final_rows) {
            if (static_cast<int>(row.size()) != dim)
                throw InvalidInputError("debiased row has wrong dimension for merge");
            by_token[id].push_back(&row);
        }
    }
    std::map<int, Vec> merged;
    for (const auto& [id, rows] : by_token) {
        Vec mean(dim, 0.0);
        for (const Vec* row : rows)
            for (int j = 0; j < dim; ++j) mean[j] += (*row)[j];
        double inv = 1.0 / static_cast<double>(rows.size());
        for (double& x : mean) x *= inv;
        merged[id] = std::move(mean);
    }
    return merged;
}

DebiasReport debias_words(LanguageModel& model, const std::vector<std::string>& occupations,
                          const TemplateSets& opt_templates,
                          const TemplateSets& heldout_templates, const DebiasConfig& config,
                          int jobs) {
    config.validate();
    DebiasReport report;
    report.fingerprint_before = model.fingerprint().hex();

    const int nwords = static_cast<int>(occupations.size());
    std::vector<DebiasResult> results(nwords);
    std::vector<WordReport> word_reports(nwords);
    std::vector<std::string> errors(nwords);
    std::vector<bool> ok(nwords, false);

    parallel_for(nwords, jobs, [&](int i) {
        const std::string& occ = occupations[i];
        try {
            auto opt_it = opt_templates.find(occ);
            if (opt_it == opt_templates.end() || opt_it->second.empty())
                throw InvalidInputError("no optimization templates for occupation '" + occ + "'");
            std::vector<Template> heldout;
            if (auto it = heldout_templates.find(occ); it != heldout_templates.end())
                heldout = it->second;
            auto local = model.clone();  // words are debiased independently, then merged
            results[i] = damp_debias(*local, occ, opt_it->second, heldout, config);
            WordReport wr;
            wr.occupation = occ;
            wr.tde_before = results[i].tde_before;
            wr.tde_after = results[i].tde_after;
            wr.displacement = results[i].displacement;
            wr.loss_first = results[i].loss_curve.front();
            wr.loss_last = results[i].loss_curve.back();
            wr.iterations = static_cast<int>(results[i].loss_curve.size());
            word_reports[i] = wr;
            ok[i] = true;
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });

    std::vector<DebiasResult> good;
    for (int i = 0; i < nwords; ++i) {
        if (ok[i]) {
            good.push_back(std::move(results[i]));
            report.words.push_back(word_reports[i]);
        } else {
            report.failures[occupations[i]] = errors[i];
        }
    }

    report.patch = merge_shared_tokens(good, model.dim());
    for (const auto& [id, row] : report.patch) model.set_embedding(id, row);

    report.fingerprint_after = model.fingerprint().hex();
    report.fingerprint_unchanged = report.fingerprint_before == report.fingerprint_after;
    return report;
}

DebiasReport debias_vocabulary(LanguageModel& model, const std::vector<std::string>& occupations,
                               const GenderedWordList& gendered, TemplateGenConfig gen_config,
                               const DebiasConfig& debias_config, int jobs) {
    debias_config.validate();
    gen_config.validate();

    TemplateGenConfig opt_cfg = gen_config;
    opt_cfg.seed = derive_seed(gen_config.seed, "opt-templates");
    TemplateGenConfig heldout_cfg = gen_config;
    heldout_cfg.seed = derive_seed(gen_config.seed, "heldout-templates");

    const int nwords = static_cast<int>(occupations.size());
    TemplateSets opt, heldout;
    std::map<std::string, std::string> gen_failures;
    std::vector<std::pair<std::vector<Template>, std::vector<Template>>> sets(nwords);
    std::vector<std::string> errors(nwords);
    parallel_for(nwords, jobs, [&](int i) {
        try {
            sets[i].first = generate_template_set(model, occupations[i], gendered, opt_cfg);
            sets[i].second = generate_template_set(model, occupations[i], gendered, heldout_cfg);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    std::vector<std::string> viable;
    for (int i = 0; i < nwords; ++i) {
        if (!errors[i].empty()) {
            gen_failures[occupations[i]] = errors[i];
            continue;
        }
        opt[occupations[i]] = std::move(sets[i].first);
        heldout[occupations[i]] = std::move(sets[i].second);
        viable.push_back(occupations[i]);
    }

    DebiasReport report = debias_words(model, viable, opt, heldout, debias_config, jobs);
    for (auto& wr : report.words) {
        wr.opt_seed = opt_cfg.seed;
        wr.heldout_seed = heldout_cfg.seed;
    }
    report.failures.insert(gen_failures.begin(), gen_failures.end());
    return report;
}

}  // namespace embfair

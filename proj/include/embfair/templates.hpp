#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "embfair/model.hpp"
#include "embfair/rng.hpp"

namespace embfair {

// Lowercase gendered-word list; membership checks are case-insensitive.
class GenderedWordList {
public:
    static GenderedWordList from_words(const std::vector<std::string>& words);
    static GenderedWordList load(const std::string& path);

    bool contains(const std::string& word) const;
    const std::set<std::string>& words() const { return words_; }

private:
    std::set<std::string> words_;
};

struct TemplateGenConfig {
    double s = 0.08;        // pronoun probability threshold
    int max_len = 15;       // sampled-token budget per attempt (prefix excluded)
    int top_k = 40;         // sampling breadth
    int n = 50;             // templates per occupation
    int max_restarts = 200; // attempts before giving up on an occupation
    uint64_t seed = 0;

    void validate() const;
};

// A generated context "the <occupation> …" made of gender-neutral tokens,
// under which the emitting model assigns both pronouns probability above s.
struct Template {
    std::vector<int> token_ids;
    std::string occupation;
    double p_he = 0.0;
    double p_she = 0.0;
};

bool is_neutral(std::span<const int> token_ids, const Vocabulary& vocab,
                const GenderedWordList& gendered);

bool is_intermediary(const LanguageModel& model, std::span<const int> token_ids, double s);

// One constrained continuation search: extend "the <occupation>" by top-k
// sampling, skipping gendered samples, resetting to the prefix once the
// sampled-token budget is spent, until both pronoun probabilities clear s.
Template generate_template(const LanguageModel& model, const std::string& occupation,
                           const GenderedWordList& gendered, const TemplateGenConfig& config,
                           Rng& rng);

// n templates with per-index derived RNG streams; deterministic for a fixed
// seed regardless of jobs.
std::vector<Template> generate_template_set(const LanguageModel& model,
                                            const std::string& occupation,
                                            const GenderedWordList& gendered,
                                            const TemplateGenConfig& config, int jobs = 1);

void save_templates(const std::vector<Template>& templates, const Vocabulary& vocab,
                    const std::string& path);
std::vector<Template> load_templates(const std::string& path, const Vocabulary& vocab);

}  // namespace embfair

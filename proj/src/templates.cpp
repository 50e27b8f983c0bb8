#include "embfair/templates.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "embfair/errors.hpp"
#include "embfair/rng.hpp"
#include "json.hpp"

namespace embfair {

namespace {

std::string lowercase(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// index of the sampled token among the top-k entries of probs, bos excluded
int top_k_sample(const Vec& probs, int bos, int k, Rng& rng) {
    std::vector<int> idx(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) idx[i] = static_cast<int>(i);
    idx.erase(std::remove(idx.begin(), idx.end(), bos), idx.end());
    int kk = std::min<int>(k, static_cast<int>(idx.size()));
    std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(),
                      [&](int a, int b) { return probs[a] > probs[b]; });
    double total = 0.0;
    for (int i = 0; i < kk; ++i) total += probs[idx[i]];
    double r = rng.uniform01() * total;
    double c = 0.0;
    for (int i = 0; i < kk; ++i) {
        c += probs[idx[i]];
        if (r < c) return idx[i];
    }
    return idx[kk - 1];
}

}  // namespace

GenderedWordList GenderedWordList::from_words(const std::vector<std::string>& words) {
    GenderedWordList list;
    for (const auto& w : words) list.words_.insert(lowercase(w));
    if (!list.contains("he") || !list.contains("she"))
        throw InvalidInputError("gendered word list must contain 'he' and 'she'");
    return list;
}

GenderedWordList GenderedWordList::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open gendered word list: " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) words.push_back(line);
    }
    return from_words(words);
}

bool GenderedWordList::contains(const std::string& word) const {
    return words_.count(lowercase(word)) > 0;
}

void TemplateGenConfig::validate() const {
    if (!(s > 0.0 && s < 0.5)) throw InvalidInputError("threshold s must lie in (0, 0.5)");
    if (max_len < 2) throw InvalidInputError("max_len must be >= 2");
    if (top_k < 1) throw InvalidInputError("top_k must be >= 1");
    if (max_restarts < 1) throw InvalidInputError("max_restarts must be >= 1");
    if (n < 0) throw InvalidInputError("template count must be >= 0");
}

bool is_neutral(std::span<const int> token_ids, const Vocabulary& vocab,
                const GenderedWordList& gendered) {
    for (int id : token_ids) {
        if (gendered.contains(vocab.token(id))) return false;
    }
    return true;
}

bool is_intermediary(const LanguageModel& model, std::span<const int> token_ids, double s) {
    Vec probs = model.next_token_distribution(token_ids);
    return probs[model.vocab().he()] > s && probs[model.vocab().she()] > s;
}

Template generate_template(const LanguageModel& model, const std::string& occupation,
                           const GenderedWordList& gendered, const TemplateGenConfig& config,
                           Rng& rng) {
    config.validate();
    const Vocabulary& vocab = model.vocab();
    const int occ_id = vocab.id_of(occupation);  // throws if not tokenizable
    const std::vector<int> prefix = {vocab.id_of("the"), occ_id};

    std::vector<int> t = prefix;
    Vec probs = model.next_token_distribution(t);
    int sampled = 0;
    int restarts = 0;
    while (true) {
        int w = top_k_sample(probs, vocab.bos(), config.top_k, rng);
        ++sampled;  // gendered samples still spend the budget, which bounds each attempt
        bool changed = false;
        if (!gendered.contains(vocab.token(w))) {
            t.push_back(w);
            changed = true;
        }
        if (sampled > config.max_len) {
            t = prefix;
            sampled = 0;
            ++restarts;
            changed = true;
            if (restarts >= config.max_restarts) {
                throw GenerationFailureError(
                    "no intermediary template found for occupation '" + occupation + "' after " +
                        std::to_string(config.max_restarts) + " restarts",
                    occupation);
            }
        }
        if (changed) probs = model.next_token_distribution(t);
        double p_he = probs[vocab.he()];
        double p_she = probs[vocab.she()];
        if (p_he > config.s && p_she > config.s) {
            Template out;
            out.token_ids = t;
            out.occupation = occupation;
            out.p_he = p_he;
            out.p_she = p_she;
            return out;
        }
    }
}

std::vector<Template> generate_template_set(const LanguageModel& model,
                                            const std::string& occupation,
                                            const GenderedWordList& gendered,
                                            const TemplateGenConfig& config, int jobs) {
    config.validate();
    std::vector<Template> out(config.n);
    std::vector<std::string> failures(config.n);
    parallel_for(config.n, jobs, [&](int i) {
        Rng rng(derive_seed(config.seed, "template:" + occupation, static_cast<uint64_t>(i)));
        try {
            out[i] = generate_template(model, occupation, gendered, config, rng);
        } catch (const GenerationFailureError& e) {
            failures[i] = e.what();
        }
    });
    for (const auto& f : failures) {
        if (!f.empty()) throw GenerationFailureError(f, occupation);
    }
    return out;
}

void save_templates(const std::vector<Template>& templates, const Vocabulary& vocab,
                    const std::string& path) {
    std::string out;
    for (const auto& t : templates) {
        nlohmann::json j;
        j["occupation"] = t.occupation;
        std::vector<std::string> tokens;
        tokens.reserve(t.token_ids.size());
        for (int id : t.token_ids) tokens.push_back(vocab.token(id));
        j["tokens"] = tokens;
        j["p_he"] = t.p_he;
        j["p_she"] = t.p_she;
        out += j.dump();
        out += '\n';
    }
    atomic_write_file(path, out);
}

std::vector<Template> load_templates(const std::string& path, const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open template file: " + path);
    std::vector<Template> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("bad template record in " + path + ": " + e.what());
        }
        Template t;
        t.occupation = j.at("occupation").get<std::string>();
        for (const auto& tok : j.at("tokens")) t.token_ids.push_back(vocab.id_of(tok));
        t.p_he = j.at("p_he").get<double>();
        t.p_she = j.at("p_she").get<double>();
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace embfair

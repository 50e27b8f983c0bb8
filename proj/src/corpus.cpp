#include "embfair/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "embfair/common.hpp"
#include "embfair/errors.hpp"
#include "embfair/rng.hpp"
#include "json.hpp"

namespace embfair {

namespace {

const std::vector<std::string>& function_words() {
    static const std::vector<std::string> w = {"the", "that", "was"};
    return w;
}

const std::vector<std::string>& subject_verbs() {
    static const std::vector<std::string> w = {"said",      "insisted",  "reported", "mentioned",
                                               "announced", "explained", "claimed",  "replied"};
    return w;
}

const std::vector<std::string>& object_verbs() {
    static const std::vector<std::string> w = {"told", "reminded", "assured", "promised"};
    return w;
}

const std::vector<std::string>& neutral_persons() {
    static const std::vector<std::string> w = {"visitor",   "patient",  "client",    "neighbor",
                                               "student",   "passenger", "customer", "colleague",
                                               "assistant", "tenant",   "caller",    "guest"};
    return w;
}

const std::vector<std::string>& gendered_persons() {
    static const std::vector<std::string> w = {"man", "woman", "boy", "girl"};
    return w;
}

const std::vector<std::string>& action_verbs() {
    static const std::vector<std::string> w = {
        "saw",    "checked", "needed", "wanted",  "finished", "found",  "cleaned", "fixed",
        "opened", "closed",  "signed", "carried", "moved",    "brought", "watched", "counted",
        "sorted", "stacked", "washed", "painted", "measured", "locked", "packed",  "repaired"};
    return w;
}

const std::vector<std::string>& objects() {
    static const std::vector<std::string> w = {
        "chart",    "report",   "door",     "window",   "machine",  "letter",   "schedule",
        "ticket",   "book",     "table",    "engine",   "recipe",   "ladder",   "floor",
        "lamp",     "folder",   "device",   "plan",     "budget",   "contract", "sample",
        "package",  "bottle",   "wheel",    "screen",   "keyboard", "notebook", "envelope",
        "toolbox",  "bench",    "cabinet",  "monitor",  "wrench",   "bucket",   "crate",
        "helmet",   "journal",  "blueprint", "invoice",  "drawer",   "shelf",    "printer",
        "camera",   "radio",    "basket",   "carpet",   "curtain",  "mirror",   "kettle",
        "suitcase", "calendar", "manual",   "receipt",  "stapler",  "whiteboard", "clipboard",
        "lantern",  "cart",     "railing",  "beam"};
    return w;
}

const std::vector<std::string>& adjectives() {
    static const std::vector<std::string> w = {"ready", "broken", "heavy", "clean", "new",
                                               "old",   "empty",  "full",  "dusty", "shiny",
                                               "quiet", "warm",   "cold",  "narrow", "wide",
                                               "flat"};
    return w;
}

const std::vector<std::string>& adverbs() {
    static const std::vector<std::string> w = {"yesterday", "today", "quietly", "quickly",
                                               "slowly",    "twice", "again",   "early",
                                               "late",      "outside"};
    return w;
}

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
    return v[rng.uniform_int(static_cast<int>(v.size()))];
}

}  // namespace

void BiasProfile::validate() const {
    if (occupations.empty()) throw InvalidInputError("bias profile has no occupations");
    for (const auto& occ : occupations) {
        auto it = male_rate.find(occ);
        if (it == male_rate.end())
            throw InvalidInputError("no male_rate for occupation: " + occ);
        if (it->second < 0.0 || it->second > 1.0)
            throw InvalidInputError("male_rate out of [0,1] for occupation: " + occ);
    }
    double f = occupation_fraction + gendered_person_fraction + neutral_person_fraction;
    if (occupation_fraction <= 0.0 || f >= 1.0)
        throw InvalidInputError("sentence-type fractions must be positive and sum below 1");
    if (mixed_frame_weight < 0.0 || mixed_frame_weight > 0.5)
        throw InvalidInputError("mixed_frame_weight must lie in [0, 0.5]");
}

double BiasProfile::rate_of(const std::string& occupation) const {
    auto it = male_rate.find(occupation);
    if (it == male_rate.end()) throw InvalidInputError("unknown occupation: " + occupation);
    return it->second;
}

double BiasProfile::mixed_frame_rate(const std::string& occupation) const {
    // pronoun refers to the occupation or the third party with equal odds
    return 0.5 * rate_of(occupation) + 0.25;
}

double BiasProfile::subject_frame_rate(const std::string& occupation) const {
    double r = rate_of(occupation);
    double q = mixed_frame_weight;
    if (q >= 1.0) return r;
    double c = (r - q * mixed_frame_rate(occupation)) / (1.0 - q);
    return std::clamp(c, 0.0, 1.0);
}

BiasProfile BiasProfile::balanced_twin() const {
    BiasProfile twin = *this;
    for (auto& [occ, rate] : twin.male_rate) {
        (void)occ;
        rate = 0.5;
    }
    return twin;
}

BiasProfile BiasProfile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profile: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad profile json in " + path + ": " + e.what());
    }
    BiasProfile p;
    for (const auto& [occ, rate] : j.at("male_rate").items()) {
        p.occupations.push_back(occ);
        p.male_rate[occ] = rate.get<double>();
    }
    std::sort(p.occupations.begin(), p.occupations.end());
    if (j.contains("mixed_frame_weight")) p.mixed_frame_weight = j["mixed_frame_weight"];
    if (j.contains("occupation_fraction")) p.occupation_fraction = j["occupation_fraction"];
    if (j.contains("gendered_person_fraction"))
        p.gendered_person_fraction = j["gendered_person_fraction"];
    if (j.contains("neutral_person_fraction"))
        p.neutral_person_fraction = j["neutral_person_fraction"];
    p.validate();
    return p;
}

void BiasProfile::save(const std::string& path) const {
    nlohmann::json j;
    j["male_rate"] = male_rate;
    j["mixed_frame_weight"] = mixed_frame_weight;
    j["occupation_fraction"] = occupation_fraction;
    j["gendered_person_fraction"] = gendered_person_fraction;
    j["neutral_person_fraction"] = neutral_person_fraction;
    atomic_write_file(path, j.dump(2) + "\n");
}

Vocabulary build_vocabulary(const BiasProfile& profile) {
    profile.validate();
    std::vector<std::string> tokens;
    tokens.push_back(kBosToken);
    tokens.push_back("he");
    tokens.push_back("she");
    auto add = [&](const std::vector<std::string>& words) {
        tokens.insert(tokens.end(), words.begin(), words.end());
    };
    add(function_words());
    add(subject_verbs());
    add(object_verbs());
    add(neutral_persons());
    add(gendered_persons());
    add(action_verbs());
    add(objects());
    add(adjectives());
    add(adverbs());
    for (const auto& occ : profile.occupations) tokens.push_back(occ);
    return Vocabulary::from_tokens(std::move(tokens));
}

Corpus generate_corpus(const BiasProfile& profile, const Vocabulary& vocab, int size,
                       uint64_t seed, int jobs) {
    profile.validate();
    if (size < 1) throw InvalidInputError("corpus size must be >= 1");

    Corpus corpus;
    corpus.profile = profile;
    corpus.seed = seed;
    corpus.sentences.resize(size);

    parallel_for(size, jobs, [&](int i) {
        Rng rng(derive_seed(seed, "corpus", static_cast<uint64_t>(i)));
        std::vector<std::string> words;
        double r = rng.uniform01();
        if (r < profile.occupation_fraction) {
            const auto& occ = pick(profile.occupations, rng);
            bool mixed = rng.uniform01() < profile.mixed_frame_weight;
            double p_male =
                mixed ? profile.mixed_frame_rate(occ) : profile.subject_frame_rate(occ);
            const char* pron = rng.bernoulli(p_male) ? "he" : "she";
            if (mixed) {
                words = {"the", occ, pick(object_verbs(), rng), "the",
                         pick(neutral_persons(), rng), "that", pron,
                         pick(action_verbs(), rng), "the", pick(objects(), rng)};
            } else {
                words = {"the", occ, pick(subject_verbs(), rng), "that", pron,
                         pick(action_verbs(), rng), "the", pick(objects(), rng)};
            }
        } else if (r < profile.occupation_fraction + profile.gendered_person_fraction) {
            int gi = rng.uniform_int(static_cast<int>(gendered_persons().size()));
            const auto& person = gendered_persons()[gi];
            const char* pron = (gi % 2 == 0) ? "he" : "she";  // man/boy male, woman/girl female
            words = {"the", person, pick(subject_verbs(), rng), "that", pron,
                     pick(action_verbs(), rng), "the", pick(objects(), rng)};
        } else if (r < profile.occupation_fraction + profile.gendered_person_fraction +
                           profile.neutral_person_fraction) {
            const char* pron = rng.bernoulli(0.5) ? "he" : "she";
            words = {"the", pick(neutral_persons(), rng), pick(subject_verbs(), rng), "that",
                     pron, pick(action_verbs(), rng), "the", pick(objects(), rng)};
        } else if (rng.bernoulli(0.5)) {
            words = {"the", pick(objects(), rng), "was", pick(adjectives(), rng)};
        } else {
            words = {"the", pick(neutral_persons(), rng), pick(action_verbs(), rng), "the",
                     pick(objects(), rng), pick(adverbs(), rng)};
        }
        std::vector<int> ids;
        ids.reserve(words.size());
        for (const auto& w : words) ids.push_back(vocab.id_of(w));
        corpus.sentences[i] = std::move(ids);
    });
    return corpus;
}

std::map<std::string, double> co_occurrence_rates(const Corpus& corpus, const Vocabulary& vocab) {
    std::map<std::string, std::pair<long, long>> counts;  // occupation -> (male, total)
    std::vector<int> occ_ids;
    for (const auto& occ : corpus.profile.occupations) occ_ids.push_back(vocab.id_of(occ));
    int he = vocab.he(), she = vocab.she();
    for (const auto& sent : corpus.sentences) {
        int occ = -1;
        bool has_he = false, has_she = false;
        for (int id : sent) {
            if (id == he) has_he = true;
            if (id == she) has_she = true;
            for (int oid : occ_ids)
                if (id == oid) occ = oid;
        }
        if (occ < 0 || (!has_he && !has_she)) continue;
        auto& c = counts[vocab.token(occ)];
        c.second += 1;
        if (has_he) c.first += 1;
    }
    std::map<std::string, double> rates;
    for (auto& [occ, c] : counts)
        rates[occ] = c.second ? static_cast<double>(c.first) / c.second : 0.0;
    return rates;
}

void Corpus::save(const std::string& path, const Vocabulary& vocab) const {
    std::string out;
    for (const auto& sent : sentences) {
        for (size_t i = 0; i < sent.size(); ++i) {
            if (i) out += ' ';
            out += vocab.token(sent[i]);
        }
        out += '\n';
    }
    atomic_write_file(path, out);
}

std::vector<std::vector<int>> Corpus::load_sentences(const std::string& path,
                                                     const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus: " + path);
    std::vector<std::vector<int>> sentences;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::vector<int> ids;
        std::string w;
        while (ss >> w) ids.push_back(vocab.id_of(w));
        if (!ids.empty()) sentences.push_back(std::move(ids));
    }
    return sentences;
}

}  // namespace embfair

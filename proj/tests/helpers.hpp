#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "embfair/corpus.hpp"
#include "embfair/toy_model.hpp"

namespace test_helpers {

inline embfair::BiasProfile small_profile() {
    embfair::BiasProfile p;
    p.male_rate = {{"doctor", 0.95}, {"engineer", 0.9}, {"mechanic", 0.9}, {"pilot", 0.85},
                   {"developer", 0.8}, {"manager", 0.7}, {"analyst", 0.6}, {"clerk", 0.5},
                   {"dancer", 0.35},  {"teacher", 0.25}, {"cleaner", 0.2}, {"librarian", 0.15},
                   {"secretary", 0.1}, {"nurse", 0.05}};
    for (const auto& [occ, rate] : p.male_rate) {
        (void)rate;
        p.occupations.push_back(occ);
    }
    return p;
}

inline const std::vector<std::string>& gendered_words_list() {
    static const std::vector<std::string> words = {
        "he",   "she",    "him",    "her",    "his",     "hers",   "himself", "herself",
        "man",  "woman",  "men",    "women",  "boy",     "girl",   "boys",    "girls",
        "mr",   "mrs",    "ms",     "sir",    "madam",   "king",   "queen",   "father",
        "mother", "son",  "daughter", "brother", "sister", "husband", "wife", "uncle",
        "aunt", "gentleman", "lady", "male",  "female"};
    return words;
}

// Fixture directory produced by the fixture_setup ctest fixture (a pipeline
// run over a reduced config). Tests that need trained models load checkpoints
// from here instead of retraining.
inline std::string fixture_dir() {
    const char* env = std::getenv("EMBFAIR_FIXTURE_DIR");
    return env ? env : "test_fixture";
}

inline std::string fixture_path(const std::string& name) {
    return fixture_dir() + "/" + name;
}

inline bool fixture_available() {
    return std::filesystem::exists(fixture_path("model_biased.ckpt"));
}

}  // namespace test_helpers

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "embfair/vocab.hpp"

namespace embfair {

// Per-occupation pronoun imbalance for the synthetic corpus. male_rate is the
// probability that a sentence pairs the occupation with a male pronoun.
// Sentences split between a subject-report frame ("the OCC said that PRON…")
// and a mixed-reference frame ("the OCC told the PERSON that PRON…") whose
// pronoun is only half attributable to the occupation; the per-frame
// conditionals are chosen so the corpus-level co-occurrence stays exactly at
// male_rate while the mixed frame keeps both pronouns elicitable even for
// strongly imbalanced occupations.
struct BiasProfile {
    std::vector<std::string> occupations;
    std::map<std::string, double> male_rate;
    double mixed_frame_weight = 0.1;
    double occupation_fraction = 0.60;
    double gendered_person_fraction = 0.08;
    double neutral_person_fraction = 0.20;

    static BiasProfile load(const std::string& path);
    void save(const std::string& path) const;
    void validate() const;
    BiasProfile balanced_twin() const;

    double rate_of(const std::string& occupation) const;
    // conditional P(male pronoun | frame) for the two occupation frames
    double subject_frame_rate(const std::string& occupation) const;
    double mixed_frame_rate(const std::string& occupation) const;
};

struct Corpus {
    std::vector<std::vector<int>> sentences;
    BiasProfile profile;
    uint64_t seed = 0;

    void save(const std::string& path, const Vocabulary& vocab) const;
    static std::vector<std::vector<int>> load_sentences(const std::string& path,
                                                        const Vocabulary& vocab);
};

// Fixed vocabulary for a profile: grammar words in declaration order followed
// by the profile's occupations.
Vocabulary build_vocabulary(const BiasProfile& profile);

Corpus generate_corpus(const BiasProfile& profile, const Vocabulary& vocab, int size,
                       uint64_t seed, int jobs = 1);

// Empirical fraction of occupation sentences containing "he" among those
// containing either pronoun, per occupation.
std::map<std::string, double> co_occurrence_rates(const Corpus& corpus, const Vocabulary& vocab);

}  // namespace embfair

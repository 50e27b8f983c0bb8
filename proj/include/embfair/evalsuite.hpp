#pragma once

#include <string>
#include <utility>
#include <vector>

#include "embfair/model.hpp"

namespace embfair {

// --- SEAT -----------------------------------------------------------------

struct SeatSpec {
    std::vector<std::string> targets_x;
    std::vector<std::string> targets_y;
    std::vector<std::string> attributes_a;
    std::vector<std::string> attributes_b;

    static SeatSpec load(const std::string& path);
    void validate() const;
};

// Sentence vector: mean of final-layer hidden states over whitespace tokens.
Vec encode_sentence(const LanguageModel& model, const std::string& sentence);

// Standardized differential association
//   d = [mean_x s(x,A,B) - mean_y s(y,A,B)] / std_{w in X u Y} s(w,A,B)
// with s(w,A,B) = mean_a cos(w,a) - mean_b cos(w,b) and sample std.
double seat_effect_size(const LanguageModel& model, const SeatSpec& spec, int jobs = 1);

// --- Perplexity -------------------------------------------------------------

// exp(mean per-token negative log-likelihood) over every next-token
// prediction, sentences scored from a sequence-start marker.
double perplexity(const LanguageModel& model, const std::vector<std::vector<int>>& sentences,
                  int jobs = 1);

// --- StereoSet-style metrics ------------------------------------------------

struct StereoItem {
    std::string context;
    std::string stereotype;
    std::string anti_stereotype;
    std::string unrelated;
};

struct StereoFixture {
    std::vector<StereoItem> items;
    static StereoFixture load(const std::string& path);  // JSON lines
    void validate() const;
};

struct StereoScores {
    double lms = 0.0;   // meaningful over unrelated, percent
    double ss = 0.0;    // stereotype over anti-stereotype, percent
    double icat = 0.0;  // lms * min(ss, 100 - ss) / 50
};

double icat_score(double lms, double ss);

// Continuations are scored by total log-likelihood given the context; ties
// count 0.5 toward each side.
StereoScores stereo_metrics(const LanguageModel& model, const StereoFixture& fixture,
                            int jobs = 1);

// --- Embedding geometry -----------------------------------------------------

// Top principal directions of the pair-difference embedding vectors
// (uncentered), unit norm, sign anchored so the first pair's difference
// projects positive. Throws DegenerateStatisticsError when the requested
// component carries no variance.
std::vector<Vec> gender_subspace(const LanguageModel& model,
                                 const std::vector<std::pair<std::string, std::string>>& pairs,
                                 int components = 1);

struct GeometryReport {
    Vec basis;  // first principal direction
    std::vector<std::string> words;
    std::vector<double> projections;
    std::vector<double> neighbor_fractions;  // share of k nearest with positive projection
    double correlation = 0.0;                // Spearman rank correlation
};

GeometryReport projection_neighbor_curve(const LanguageModel& model,
                                         const std::vector<std::string>& words, const Vec& basis,
                                         int k, int jobs = 1);

// Spearman rank correlation with average ranks for ties; 0 when either side
// has no rank variance.
double spearman_correlation(const std::vector<double>& x, const std::vector<double>& y);

// --- Plots ------------------------------------------------------------------

struct ScatterSeries {
    std::string label;
    std::string color;
    std::vector<std::pair<double, double>> points;
    std::vector<std::string> point_labels;  // optional, parallel to points
};

void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::string& xlabel, const std::string& ylabel,
                       const std::vector<ScatterSeries>& series);

}  // namespace embfair

#pragma once

#include <string>
#include <vector>

#include "embfair/corpus.hpp"
#include "embfair/debias.hpp"
#include "embfair/templates.hpp"
#include "embfair/train.hpp"

namespace embfair {

// Stage names in dependency order.
extern const std::vector<std::string> kStageOrder;

struct PipelineConfig {
    std::string out_dir = "out";
    uint64_t seed = 1;
    bool deterministic = true;
    int jobs = 1;
    std::string backend = "toy";  // "toy" or "adapter"
    std::string adapter_url;

    std::string profile_path;
    std::string occupations_path;
    std::string gendered_words_path;
    std::string seat_spec_path;
    std::string stereo_fixture_path;

    int corpus_size = 16000;
    int heldout_size = 2000;
    ToyConfig arch;
    TrainConfig train;
    TemplateGenConfig templates;
    int eval_templates_n = 50;
    DebiasConfig debias;

    int neighbor_k = 5;
    std::vector<std::pair<std::string, std::string>> definitional_pairs = {
        {"he", "she"}, {"man", "woman"}, {"boy", "girl"}};

    static PipelineConfig load(const std::string& path);
    void validate() const;
    std::string canonical_json() const;
    std::string config_hash() const;

    // effective parallelism: deterministic mode forces the serial path
    int effective_jobs() const { return deterministic ? 1 : std::max(1, jobs); }

    std::string artifact(const std::string& name) const { return out_dir + "/" + name; }
};

// Runs one named stage; artifacts are written atomically and a manifest with
// the config hash, seeds and input/output digests lands next to them.
// Throws MissingUpstreamError when a required artifact is absent.
void run_stage(const std::string& name, const PipelineConfig& config);

// All stages in dependency order; returns the summary JSON text.
std::string full_pipeline(const PipelineConfig& config);

}  // namespace embfair

// Compares the serial reference path (jobs=1) against the OpenMP path for the
// batch evaluation kernels, and checks that both produce identical results.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "embfair/causal.hpp"
#include "embfair/corpus.hpp"
#include "embfair/evalsuite.hpp"
#include "embfair/rng.hpp"
#include "embfair/toy_model.hpp"

using namespace embfair;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Row {
    const char* name;
    double serial_ms;
    double parallel_ms;
    bool identical;
};

}  // namespace

int main(int argc, char** argv) {
    int jobs = hardware_jobs();
    int n_templates = 400;
    int n_sentences = 300;
    for (int i = 1; i + 1 < argc; i += 2) {
        std::string flag = argv[i];
        if (flag == "--jobs") jobs = std::atoi(argv[i + 1]);
        if (flag == "--templates") n_templates = std::atoi(argv[i + 1]);
        if (flag == "--sentences") n_sentences = std::atoi(argv[i + 1]);
    }

    BiasProfile profile;
    profile.occupations = {"doctor", "nurse", "engineer", "teacher"};
    profile.male_rate = {{"doctor", 0.9}, {"nurse", 0.1}, {"engineer", 0.9}, {"teacher", 0.2}};
    Vocabulary vocab = build_vocabulary(profile);

    ToyConfig arch;
    ToyTransformer model(vocab, arch);

    // synthetic contexts standing in for templates; the model is untrained, so
    // probabilities are arbitrary but the kernel work is identical
    Rng rng(123);
    std::vector<Template> templates(n_templates);
    for (int i = 0; i < n_templates; ++i) {
        templates[i].occupation = "doctor";
        templates[i].token_ids = {vocab.id_of("the"), vocab.id_of("doctor")};
        int extra = 3 + rng.uniform_int(8);
        for (int j = 0; j < extra; ++j)
            templates[i].token_ids.push_back(rng.uniform_int(vocab.size() - 1) + 1);
    }
    Corpus corpus = generate_corpus(profile, vocab, n_sentences, 99, 1);

    std::vector<Row> rows;

    {
        auto t0 = Clock::now();
        auto serial = gender_predictions(model, templates, 1);
        double ts = ms_since(t0);
        t0 = Clock::now();
        auto par = gender_predictions(model, templates, jobs);
        double tp = ms_since(t0);
        bool same = true;
        for (size_t i = 0; i < serial.size(); ++i)
            same = same && serial[i].p_male == par[i].p_male;
        rows.push_back({"gender_predictions", ts, tp, same});
    }
    {
        auto t0 = Clock::now();
        auto serial = mean_tde(model, templates, 1);
        double ts = ms_since(t0);
        t0 = Clock::now();
        auto par = mean_tde(model, templates, jobs);
        double tp = ms_since(t0);
        rows.push_back({"mean_tde", ts, tp, serial.mean == par.mean});
    }
    {
        auto t0 = Clock::now();
        double serial = perplexity(model, corpus.sentences, 1);
        double ts = ms_since(t0);
        t0 = Clock::now();
        double par = perplexity(model, corpus.sentences, jobs);
        double tp = ms_since(t0);
        rows.push_back({"perplexity", ts, tp, serial == par});
    }
    {
        auto t0 = Clock::now();
        Corpus serial = generate_corpus(profile, vocab, 20000, 7, 1);
        double ts = ms_since(t0);
        t0 = Clock::now();
        Corpus par = generate_corpus(profile, vocab, 20000, 7, jobs);
        double tp = ms_since(t0);
        rows.push_back({"generate_corpus", ts, tp, serial.sentences == par.sentences});
    }

    std::printf("%-20s %12s %12s %9s %10s\n", "kernel", "serial (ms)", "omp (ms)", "speedup",
                "identical");
    bool all_same = true;
    for (const auto& r : rows) {
        std::printf("%-20s %12.1f %12.1f %8.2fx %10s\n", r.name, r.serial_ms, r.parallel_ms,
                    r.serial_ms / (r.parallel_ms > 0 ? r.parallel_ms : 1e-9),
                    r.identical ? "yes" : "NO");
        all_same = all_same && r.identical;
    }
    std::printf("jobs=%d\n", jobs);
    return all_same ? 0 : 1;
}

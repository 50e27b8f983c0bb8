// Pipeline driver: synthesize -> train -> templates -> debias -> evaluate.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "embfair/errors.hpp"
#include "embfair/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissingUpstream = 3;
constexpr int kExitNumerical = 4;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"embedding-level debiasing pipeline"};

    std::string config_path;
    std::string stage = "all";
    std::string out_dir;
    std::string backend;
    int64_t seed = -1;
    int jobs = 0;
    bool deterministic = false;

    app.add_option("--config", config_path, "pipeline config file (json)")->required();
    app.add_option("--stage", stage,
                   "stage to run: synth, train, templates, debias, tde, eval-seat, eval-ppl, "
                   "eval-stereo, geometry, report, or 'all'");
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--seed", seed, "global seed (overrides config)");
    app.add_option("--jobs", jobs, "worker threads for stage-internal parallelism");
    app.add_option("--backend", backend, "model backend: toy or adapter");
    app.add_flag("--deterministic", deterministic,
                 "bit-stable mode; forces single-threaded execution");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        embfair::PipelineConfig config = embfair::PipelineConfig::load(config_path);
        if (!out_dir.empty()) config.out_dir = out_dir;
        if (seed >= 0) config.seed = static_cast<uint64_t>(seed);
        if (jobs > 0) config.jobs = jobs;
        if (!backend.empty()) config.backend = backend;
        if (deterministic) config.deterministic = true;
        config.validate();

        if (stage == "all") {
            std::string summary = embfair::full_pipeline(config);
            std::fputs(summary.c_str(), stdout);
        } else {
            embfair::run_stage(stage, config);
            std::printf("stage '%s' complete; artifacts in %s\n", stage.c_str(),
                        config.out_dir.c_str());
        }
        return kExitOk;
    } catch (const embfair::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const embfair::InvalidInputError& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kExitConfig;
    } catch (const embfair::MissingUpstreamError& e) {
        std::fprintf(stderr, "missing upstream: %s\n", e.what());
        return kExitMissingUpstream;
    } catch (const embfair::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

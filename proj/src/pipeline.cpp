#include "embfair/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "embfair/adapter.hpp"
#include "embfair/checkpoint.hpp"
#include "embfair/errors.hpp"
#include "embfair/evalsuite.hpp"
#include "embfair/rng.hpp"
#include "json.hpp"

namespace embfair {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kStageOrder = {
    "synth",     "train",    "templates",   "debias",   "tde",
    "eval-seat", "eval-ppl", "eval-stereo", "geometry", "report"};

namespace {

json read_json_file(const std::string& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + what + ": " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("bad json in " + path + ": " + e.what());
    }
}

std::vector<std::string> load_word_list(const std::string& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + what + ": " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) words.push_back(line);
    }
    return words;
}

void require_config_path(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError("config is missing a path for " + what);
    if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::string& path) {
    json j = read_json_file(path, "pipeline config");
    PipelineConfig c;
    try {
        if (j.contains("out_dir")) c.out_dir = j["out_dir"];
        if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
        if (j.contains("deterministic")) c.deterministic = j["deterministic"];
        if (j.contains("jobs")) c.jobs = j["jobs"];
        if (j.contains("backend")) c.backend = j["backend"];
        if (j.contains("adapter_url")) c.adapter_url = j["adapter_url"];
        if (j.contains("paths")) {
            const auto& p = j["paths"];
            if (p.contains("profile")) c.profile_path = p["profile"];
            if (p.contains("occupations")) c.occupations_path = p["occupations"];
            if (p.contains("gendered_words")) c.gendered_words_path = p["gendered_words"];
            if (p.contains("seat_spec")) c.seat_spec_path = p["seat_spec"];
            if (p.contains("stereo_fixture")) c.stereo_fixture_path = p["stereo_fixture"];
        }
        if (j.contains("synth")) {
            const auto& s = j["synth"];
            if (s.contains("corpus_size")) c.corpus_size = s["corpus_size"];
            if (s.contains("heldout_size")) c.heldout_size = s["heldout_size"];
        }
        if (j.contains("arch")) {
            const auto& a = j["arch"];
            if (a.contains("dim")) c.arch.dim = a["dim"];
            if (a.contains("heads")) c.arch.heads = a["heads"];
            if (a.contains("layers")) c.arch.layers = a["layers"];
            if (a.contains("context")) c.arch.context = a["context"];
            if (a.contains("embed_scale")) c.arch.embed_scale = a["embed_scale"];
            if (a.contains("init_std")) c.arch.init_std = a["init_std"];
            if (a.contains("emb_init_std")) c.arch.emb_init_std = a["emb_init_std"];
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            if (t.contains("epochs")) c.train.epochs = t["epochs"];
            if (t.contains("batch_size")) c.train.batch_size = t["batch_size"];
            if (t.contains("lr")) c.train.lr = t["lr"];
        }
        if (j.contains("templates")) {
            const auto& t = j["templates"];
            if (t.contains("s")) c.templates.s = t["s"];
            if (t.contains("max_len")) c.templates.max_len = t["max_len"];
            if (t.contains("top_k")) c.templates.top_k = t["top_k"];
            if (t.contains("n")) c.templates.n = t["n"];
            if (t.contains("max_restarts")) c.templates.max_restarts = t["max_restarts"];
            if (t.contains("eval_n")) c.eval_templates_n = t["eval_n"];
        }
        if (j.contains("debias")) {
            const auto& d = j["debias"];
            if (d.contains("n")) c.debias.n = d["n"];
            if (d.contains("m")) c.debias.m = d["m"];
            if (d.contains("alpha")) c.debias.alpha = d["alpha"];
            if (d.contains("lambda")) c.debias.lambda = d["lambda"];
            if (d.contains("sumt_rounds")) c.debias.sumt_rounds = d["sumt_rounds"];
        }
        if (j.contains("eval")) {
            const auto& e = j["eval"];
            if (e.contains("neighbor_k")) c.neighbor_k = e["neighbor_k"];
            if (e.contains("definitional_pairs")) {
                c.definitional_pairs.clear();
                for (const auto& p : e["definitional_pairs"])
                    c.definitional_pairs.emplace_back(p.at(0).get<std::string>(),
                                                      p.at(1).get<std::string>());
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError("bad pipeline config value: " + std::string(e.what()));
    }
    c.validate();
    return c;
}

void PipelineConfig::validate() const {
    if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
    if (backend != "toy" && backend != "adapter")
        throw ConfigError("backend must be 'toy' or 'adapter'");
    if (backend == "adapter" && adapter_url.empty())
        throw ConfigError("adapter backend requires adapter_url");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (corpus_size < 1 || heldout_size < 1) throw ConfigError("corpus sizes must be >= 1");
    if (eval_templates_n < 0) throw ConfigError("eval template count must be >= 0");
    if (neighbor_k < 1) throw ConfigError("neighbor_k must be >= 1");
}

std::string PipelineConfig::canonical_json() const {
    json j;
    j["out_dir"] = out_dir;
    j["seed"] = seed;
    j["deterministic"] = deterministic;
    j["jobs"] = jobs;
    j["backend"] = backend;
    j["adapter_url"] = adapter_url;
    j["paths"] = {{"profile", profile_path},
                  {"occupations", occupations_path},
                  {"gendered_words", gendered_words_path},
                  {"seat_spec", seat_spec_path},
                  {"stereo_fixture", stereo_fixture_path}};
    j["synth"] = {{"corpus_size", corpus_size}, {"heldout_size", heldout_size}};
    j["arch"] = {{"dim", arch.dim},
                 {"heads", arch.heads},
                 {"layers", arch.layers},
                 {"context", arch.context},
                 {"embed_scale", arch.embed_scale},
                 {"init_std", arch.init_std},
                 {"emb_init_std", arch.emb_init_std}};
    j["train"] = {{"epochs", train.epochs}, {"batch_size", train.batch_size}, {"lr", train.lr}};
    j["templates"] = {{"s", templates.s},
                      {"max_len", templates.max_len},
                      {"top_k", templates.top_k},
                      {"n", templates.n},
                      {"max_restarts", templates.max_restarts},
                      {"eval_n", eval_templates_n}};
    j["debias"] = {{"n", debias.n},
                   {"m", debias.m},
                   {"alpha", debias.alpha},
                   {"lambda", debias.lambda},
                   {"sumt_rounds", debias.sumt_rounds}};
    json pairs = json::array();
    for (const auto& [a, b] : definitional_pairs) pairs.push_back({a, b});
    j["eval"] = {{"neighbor_k", neighbor_k}, {"definitional_pairs", pairs}};
    return j.dump();
}

std::string PipelineConfig::config_hash() const { return sha256_hex_str(canonical_json()); }

namespace {

// ---------------------------------------------------------------------------
// stage plumbing

struct StageIo {
    std::map<std::string, std::string> inputs;   // path -> digest
    std::map<std::string, std::string> outputs;  // path -> digest

    void input(const std::string& path) { inputs[path] = sha256_file_hex(path); }
    void output(const std::string& path) { outputs[path] = sha256_file_hex(path); }
};

void write_manifest(const PipelineConfig& cfg, const std::string& stage, const StageIo& io) {
    json m;
    m["stage"] = stage;
    m["config_hash"] = cfg.config_hash();
    m["seed"] = cfg.seed;
    m["deterministic"] = cfg.deterministic;
    m["inputs"] = io.inputs;
    m["outputs"] = io.outputs;
    atomic_write_file(cfg.artifact(stage + ".manifest.json"), m.dump(2) + "\n");
}

void require_artifact(const PipelineConfig& cfg, const std::string& name,
                      const std::string& producer) {
    if (!fs::exists(cfg.artifact(name)))
        throw MissingUpstreamError("artifact '" + name + "' is missing from " + cfg.out_dir +
                                   "; run stage '" + producer + "' first");
}

void write_report(const PipelineConfig& cfg, const std::string& name, const json& body,
                  StageIo& io) {
    atomic_write_file(cfg.artifact(name), body.dump(2) + "\n");
    io.output(cfg.artifact(name));
}

std::unique_ptr<LanguageModel> open_backend_model(const PipelineConfig& cfg,
                                                  const std::string& ckpt_name, StageIo& io) {
    if (cfg.backend == "adapter") return open_http_model(cfg.adapter_url);
    io.input(cfg.artifact(ckpt_name));
    return load_checkpoint(cfg.artifact(ckpt_name));
}

void require_toy_backend(const PipelineConfig& cfg, const std::string& stage) {
    if (cfg.backend != "toy")
        throw ConfigError("stage '" + stage + "' requires the toy backend");
}

// ---------------------------------------------------------------------------
// stages

void stage_synth(const PipelineConfig& cfg) {
    require_toy_backend(cfg, "synth");
    require_config_path(cfg.profile_path, "bias profile");
    StageIo io;
    io.input(cfg.profile_path);

    BiasProfile profile = BiasProfile::load(cfg.profile_path);
    Vocabulary vocab = build_vocabulary(profile);
    int jobs = cfg.effective_jobs();

    Corpus biased = generate_corpus(profile, vocab, cfg.corpus_size,
                                    derive_seed(cfg.seed, "corpus-biased"), jobs);
    Corpus balanced = generate_corpus(profile.balanced_twin(), vocab, cfg.corpus_size,
                                      derive_seed(cfg.seed, "corpus-balanced"), jobs);
    Corpus heldout = generate_corpus(profile.balanced_twin(), vocab, cfg.heldout_size,
                                     derive_seed(cfg.seed, "corpus-heldout"), jobs);

    vocab.save(cfg.artifact("vocab.txt"));
    profile.save(cfg.artifact("profile.json"));
    biased.save(cfg.artifact("corpus_biased.txt"), vocab);
    balanced.save(cfg.artifact("corpus_balanced.txt"), vocab);
    heldout.save(cfg.artifact("corpus_heldout.txt"), vocab);
    for (const char* f : {"vocab.txt", "profile.json", "corpus_biased.txt",
                          "corpus_balanced.txt", "corpus_heldout.txt"})
        io.output(cfg.artifact(f));
    write_manifest(cfg, "synth", io);
}

void stage_train(const PipelineConfig& cfg) {
    require_toy_backend(cfg, "train");
    for (const char* f : {"vocab.txt", "profile.json", "corpus_biased.txt", "corpus_balanced.txt"})
        require_artifact(cfg, f, "synth");
    StageIo io;
    for (const char* f : {"vocab.txt", "profile.json", "corpus_biased.txt", "corpus_balanced.txt"})
        io.input(cfg.artifact(f));

    Vocabulary vocab = Vocabulary::load(cfg.artifact("vocab.txt"));
    BiasProfile profile = BiasProfile::load(cfg.artifact("profile.json"));

    Corpus biased;
    biased.profile = profile;
    biased.sentences = Corpus::load_sentences(cfg.artifact("corpus_biased.txt"), vocab);
    Corpus balanced;
    balanced.profile = profile.balanced_twin();
    balanced.sentences = Corpus::load_sentences(cfg.artifact("corpus_balanced.txt"), vocab);

    ToyConfig arch = cfg.arch;
    arch.init_seed = derive_seed(cfg.seed, "model-init");  // shared by both models
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "train");
    tc.jobs = cfg.effective_jobs();

    TrainResult bias_result = train_toy_model(biased, vocab, arch, tc);
    TrainResult ref_result = train_toy_model(balanced, vocab, arch, tc);

    save_checkpoint(*bias_result.model, cfg.artifact("model_biased.ckpt"));
    save_checkpoint(*ref_result.model, cfg.artifact("model_reference.ckpt"));
    io.output(cfg.artifact("model_biased.ckpt"));
    io.output(cfg.artifact("model_reference.ckpt"));

    json report;
    report["biased"] = {{"initial_loss", bias_result.initial_loss},
                        {"final_loss", bias_result.final_loss},
                        {"steps", bias_result.steps},
                        {"fingerprint", bias_result.model->fingerprint().hex()}};
    report["reference"] = {{"initial_loss", ref_result.initial_loss},
                           {"final_loss", ref_result.final_loss},
                           {"steps", ref_result.steps},
                           {"fingerprint", ref_result.model->fingerprint().hex()}};
    write_report(cfg, "train_report.json", report, io);
    write_manifest(cfg, "train", io);
}

void stage_templates(const PipelineConfig& cfg) {
    require_toy_backend(cfg, "templates");
    require_artifact(cfg, "model_biased.ckpt", "train");
    require_config_path(cfg.occupations_path, "occupation vocabulary");
    require_config_path(cfg.gendered_words_path, "gendered word list");
    StageIo io;
    io.input(cfg.artifact("model_biased.ckpt"));
    io.input(cfg.occupations_path);
    io.input(cfg.gendered_words_path);

    auto model = load_checkpoint(cfg.artifact("model_biased.ckpt"));
    auto occupations = load_word_list(cfg.occupations_path, "occupation vocabulary");
    auto gendered = GenderedWordList::load(cfg.gendered_words_path);
    int jobs = cfg.effective_jobs();

    // seed derivation matches debias_vocabulary so the two entry points agree
    TemplateGenConfig base = cfg.templates;
    base.seed = derive_seed(cfg.seed, "templates");
    TemplateGenConfig opt_cfg = base;
    opt_cfg.seed = derive_seed(base.seed, "opt-templates");
    TemplateGenConfig heldout_cfg = base;
    heldout_cfg.seed = derive_seed(base.seed, "heldout-templates");
    heldout_cfg.n = cfg.eval_templates_n;

    std::vector<Template> opt_all, heldout_all;
    json failures = json::object();
    json counts = json::object();
    for (const auto& occ : occupations) {
        try {
            auto opt = generate_template_set(*model, occ, gendered, opt_cfg, jobs);
            auto heldout = generate_template_set(*model, occ, gendered, heldout_cfg, jobs);
            counts[occ] = {{"opt", opt.size()}, {"eval", heldout.size()}};
            opt_all.insert(opt_all.end(), opt.begin(), opt.end());
            heldout_all.insert(heldout_all.end(), heldout.begin(), heldout.end());
        } catch (const GenerationFailureError& e) {
            failures[occ] = e.what();
        }
    }

    save_templates(opt_all, model->vocab(), cfg.artifact("templates_opt.jsonl"));
    save_templates(heldout_all, model->vocab(), cfg.artifact("templates_eval.jsonl"));
    io.output(cfg.artifact("templates_opt.jsonl"));
    io.output(cfg.artifact("templates_eval.jsonl"));

    json report;
    report["counts"] = counts;
    report["failures"] = failures;
    report["opt_seed"] = opt_cfg.seed;
    report["heldout_seed"] = heldout_cfg.seed;
    write_report(cfg, "templates_report.json", report, io);
    write_manifest(cfg, "templates", io);
}

TemplateSets group_by_occupation(const std::vector<Template>& templates) {
    TemplateSets sets;
    for (const auto& t : templates) sets[t.occupation].push_back(t);
    return sets;
}

void stage_debias(const PipelineConfig& cfg) {
    require_toy_backend(cfg, "debias");
    require_artifact(cfg, "model_biased.ckpt", "train");
    require_artifact(cfg, "templates_opt.jsonl", "templates");
    require_artifact(cfg, "templates_eval.jsonl", "templates");
    require_config_path(cfg.occupations_path, "occupation vocabulary");
    StageIo io;
    io.input(cfg.artifact("model_biased.ckpt"));
    io.input(cfg.artifact("templates_opt.jsonl"));
    io.input(cfg.artifact("templates_eval.jsonl"));
    io.input(cfg.occupations_path);

    auto model = load_checkpoint(cfg.artifact("model_biased.ckpt"));
    auto occupations = load_word_list(cfg.occupations_path, "occupation vocabulary");
    auto opt = group_by_occupation(
        load_templates(cfg.artifact("templates_opt.jsonl"), model->vocab()));
    auto heldout = group_by_occupation(
        load_templates(cfg.artifact("templates_eval.jsonl"), model->vocab()));

    DebiasConfig dc = cfg.debias;
    dc.seed = derive_seed(cfg.seed, "debias");
    // words with no generated templates are reported as failures by debias_words
    std::vector<std::string> targets;
    for (const auto& occ : occupations)
        targets.push_back(occ);
    DebiasReport report = debias_words(*model, targets, opt, heldout, dc,
                                       cfg.effective_jobs());

    save_checkpoint(*model, cfg.artifact("model_debiased.ckpt"));
    save_embedding_patch(report.patch, model->vocab(), model->dim(),
                         cfg.artifact("embedding_patch.bin"));
    io.output(cfg.artifact("model_debiased.ckpt"));
    io.output(cfg.artifact("embedding_patch.bin"));

    json jr;
    jr["fingerprint_before"] = report.fingerprint_before;
    jr["fingerprint_after"] = report.fingerprint_after;
    jr["fingerprint_unchanged"] = report.fingerprint_unchanged;
    jr["failures"] = report.failures;
    json words = json::array();
    for (const auto& w : report.words) {
        words.push_back({{"occupation", w.occupation},
                         {"tde_before", w.tde_before},
                         {"tde_after", w.tde_after},
                         {"displacement", w.displacement},
                         {"loss_first", w.loss_first},
                         {"loss_last", w.loss_last},
                         {"iterations", w.iterations}});
    }
    jr["words"] = words;
    jr["patched_tokens"] = report.patch.size();
    write_report(cfg, "debias_report.json", jr, io);
    write_manifest(cfg, "debias", io);
}

void stage_tde(const PipelineConfig& cfg) {
    require_toy_backend(cfg, "tde");
    require_artifact(cfg, "model_biased.ckpt", "train");
    require_artifact(cfg, "model_reference.ckpt", "train");
    require_artifact(cfg, "templates_eval.jsonl", "templates");
    require_artifact(cfg, "model_debiased.ckpt", "debias");
    require_artifact(cfg, "embedding_patch.bin", "debias");
    StageIo io;
    for (const char* f : {"model_biased.ckpt", "model_reference.ckpt", "templates_eval.jsonl",
                          "model_debiased.ckpt", "embedding_patch.bin"})
        io.input(cfg.artifact(f));

    auto biased = load_checkpoint(cfg.artifact("model_biased.ckpt"));
    auto reference = load_checkpoint(cfg.artifact("model_reference.ckpt"));
    auto debiased = load_checkpoint(cfg.artifact("model_debiased.ckpt"));
    auto patch =
        load_embedding_patch(cfg.artifact("embedding_patch.bin"), biased->vocab(), biased->dim());
    auto eval_sets = group_by_occupation(
        load_templates(cfg.artifact("templates_eval.jsonl"), biased->vocab()));
    int jobs = cfg.effective_jobs();

    json occs = json::object();
    for (const auto& [occ, templates] : eval_sets) {
        auto ids = constituent_token_ids(biased->vocab(), occ);
        std::map<int, Vec> intervened;
        for (int id : ids) {
            auto it = patch.find(id);
            if (it != patch.end()) intervened[id] = it->second;
        }
        double before = mean_tde(*biased, templates, jobs).mean;
        double after = mean_tde(*debiased, templates, jobs).mean;
        auto dec = decompose(*biased, intervened, *reference, templates, occ, jobs);
        occs[occ] = {{"mean_tde_before", before},
                     {"mean_tde_after", after},
                     {"te", dec.te},
                     {"tde", dec.tde},
                     {"nie", dec.nie},
                     {"identity_residual", dec.te - (dec.tde + dec.nie)},
                     {"n_templates", templates.size()},
                     {"biased_model_id", dec.biased_model_id},
                     {"reference_model_id", dec.reference_model_id},
                     {"intervened_embedding_id", dec.intervened_embedding_id},
                     {"seed", cfg.seed}};
    }
    json report;
    report["occupations"] = occs;
    report["total_effect_reference_as_trained"] = [&] {
        json te = json::object();
        for (const auto& [occ, templates] : eval_sets)
            te[occ] = total_effect(*biased, *reference, templates, jobs);
        return te;
    }();
    write_report(cfg, "effect_report.json", report, io);
    write_manifest(cfg, "tde", io);
}

void stage_eval_seat(const PipelineConfig& cfg) {
    require_config_path(cfg.seat_spec_path, "SEAT spec");
    StageIo io;
    io.input(cfg.seat_spec_path);
    SeatSpec spec = SeatSpec::load(cfg.seat_spec_path);
    int jobs = cfg.effective_jobs();

    json report;
    if (cfg.backend == "adapter") {
        auto model = open_backend_model(cfg, "", io);
        report["model"] = seat_effect_size(*model, spec, jobs);
    } else {
        require_artifact(cfg, "model_biased.ckpt", "train");
        require_artifact(cfg, "model_debiased.ckpt", "debias");
        io.input(cfg.artifact("model_biased.ckpt"));
        io.input(cfg.artifact("model_debiased.ckpt"));
        auto biased = load_checkpoint(cfg.artifact("model_biased.ckpt"));
        auto debiased = load_checkpoint(cfg.artifact("model_debiased.ckpt"));
        report["before"] = seat_effect_size(*biased, spec, jobs);
        report["after"] = seat_effect_size(*debiased, spec, jobs);
    }
    write_report(cfg, "seat_report.json", report, io);
    write_manifest(cfg, "eval-seat", io);
}

void stage_eval_ppl(const PipelineConfig& cfg) {
    require_artifact(cfg, "corpus_heldout.txt", "synth");
    require_artifact(cfg, "vocab.txt", "synth");
    StageIo io;
    io.input(cfg.artifact("corpus_heldout.txt"));
    int jobs = cfg.effective_jobs();

    json report;
    if (cfg.backend == "adapter") {
        auto model = open_backend_model(cfg, "", io);
        auto sentences = Corpus::load_sentences(cfg.artifact("corpus_heldout.txt"), model->vocab());
        report["model"] = perplexity(*model, sentences, jobs);
    } else {
        require_artifact(cfg, "model_biased.ckpt", "train");
        require_artifact(cfg, "model_debiased.ckpt", "debias");
        io.input(cfg.artifact("model_biased.ckpt"));
        io.input(cfg.artifact("model_debiased.ckpt"));
        auto biased = load_checkpoint(cfg.artifact("model_biased.ckpt"));
        auto debiased = load_checkpoint(cfg.artifact("model_debiased.ckpt"));
        auto sentences =
            Corpus::load_sentences(cfg.artifact("corpus_heldout.txt"), biased->vocab());
        double before = perplexity(*biased, sentences, jobs);
        double after = perplexity(*debiased, sentences, jobs);
        report["before"] = before;
        report["after"] = after;
        report["relative_change"] = (after - before) / before;
    }
    write_report(cfg, "ppl_report.json", report, io);
    write_manifest(cfg, "eval-ppl", io);
}

void stage_eval_stereo(const PipelineConfig& cfg) {
    require_config_path(cfg.stereo_fixture_path, "stereo fixture");
    StageIo io;
    io.input(cfg.stereo_fixture_path);
    StereoFixture fixture = StereoFixture::load(cfg.stereo_fixture_path);
    int jobs = cfg.effective_jobs();

    auto to_json = [](const StereoScores& s) {
        return json{{"lms", s.lms}, {"ss", s.ss}, {"icat", s.icat}};
    };
    json report;
    if (cfg.backend == "adapter") {
        auto model = open_backend_model(cfg, "", io);
        report["model"] = to_json(stereo_metrics(*model, fixture, jobs));
    } else {
        require_artifact(cfg, "model_biased.ckpt", "train");
        require_artifact(cfg, "model_debiased.ckpt", "debias");
        io.input(cfg.artifact("model_biased.ckpt"));
        io.input(cfg.artifact("model_debiased.ckpt"));
        auto biased = load_checkpoint(cfg.artifact("model_biased.ckpt"));
        auto debiased = load_checkpoint(cfg.artifact("model_debiased.ckpt"));
        report["before"] = to_json(stereo_metrics(*biased, fixture, jobs));
        report["after"] = to_json(stereo_metrics(*debiased, fixture, jobs));
    }
    write_report(cfg, "stereo_report.json", report, io);
    write_manifest(cfg, "eval-stereo", io);
}

void write_geometry_csv(const PipelineConfig& cfg, const std::string& name,
                        const GeometryReport& rep, StageIo& io) {
    std::ostringstream out;
    out << "word,projection,neighbor_fraction\n";
    for (size_t i = 0; i < rep.words.size(); ++i)
        out << rep.words[i] << "," << rep.projections[i] << "," << rep.neighbor_fractions[i]
            << "\n";
    atomic_write_file(cfg.artifact(name), out.str());
    io.output(cfg.artifact(name));
}

void write_geometry_plots(const PipelineConfig& cfg, const std::string& tag,
                          const LanguageModel& model, const std::vector<Vec>& basis,
                          const GeometryReport& rep, StageIo& io) {
    // projection plane: PC1 vs PC2 of the pair differences
    ScatterSeries male{"male-leaning", "#3465c0", {}, {}};
    ScatterSeries female{"female-leaning", "#c03446", {}, {}};
    for (size_t i = 0; i < rep.words.size(); ++i) {
        Vec row = model.get_embedding(model.vocab().id_of(rep.words[i]));
        double p1 = 0.0, p2 = 0.0;
        for (size_t j = 0; j < row.size(); ++j) {
            p1 += row[j] * basis[0][j];
            if (basis.size() > 1) p2 += row[j] * basis[1][j];
        }
        auto& series = rep.projections[i] > 0 ? male : female;
        series.points.emplace_back(p1, p2);
        series.point_labels.push_back(rep.words[i]);
    }
    write_scatter_svg(cfg.artifact("fig_projection_" + tag + ".svg"),
                      "occupation embeddings in the gender plane (" + tag + ")",
                      "gender direction (pc1)", "pc2", {male, female});
    io.output(cfg.artifact("fig_projection_" + tag + ".svg"));

    ScatterSeries curve{"occupations", "#3465c0", {}, {}};
    for (size_t i = 0; i < rep.words.size(); ++i) {
        curve.points.emplace_back(rep.projections[i], rep.neighbor_fractions[i]);
        curve.point_labels.push_back(rep.words[i]);
    }
    write_scatter_svg(cfg.artifact("fig_neighbors_" + tag + ".svg"),
                      "projection vs male-neighbor fraction (" + tag + ")",
                      "projection on gender direction", "male-neighbor fraction", {curve});
    io.output(cfg.artifact("fig_neighbors_" + tag + ".svg"));
}

void stage_geometry(const PipelineConfig& cfg) {
    require_config_path(cfg.occupations_path, "occupation vocabulary");
    StageIo io;
    io.input(cfg.occupations_path);
    auto occupations = load_word_list(cfg.occupations_path, "occupation vocabulary");
    int jobs = cfg.effective_jobs();

    json report;
    if (cfg.backend == "adapter") {
        auto model = open_backend_model(cfg, "", io);
        auto basis = gender_subspace(*model, cfg.definitional_pairs, 2);
        auto rep = projection_neighbor_curve(*model, occupations, basis[0], cfg.neighbor_k, jobs);
        write_geometry_csv(cfg, "geometry_model.csv", rep, io);
        write_geometry_plots(cfg, "model", *model, basis, rep, io);
        report["model"] = {{"correlation", rep.correlation}};
    } else {
        require_artifact(cfg, "model_biased.ckpt", "train");
        require_artifact(cfg, "model_debiased.ckpt", "debias");
        io.input(cfg.artifact("model_biased.ckpt"));
        io.input(cfg.artifact("model_debiased.ckpt"));
        auto biased = load_checkpoint(cfg.artifact("model_biased.ckpt"));
        auto debiased = load_checkpoint(cfg.artifact("model_debiased.ckpt"));
        if (occupations.size() < 2) {
            report["correlation_before"] = nullptr;
            report["correlation_after"] = nullptr;
            report["note"] = "fewer than two occupations; geometry skipped";
        } else {
            auto basis_b = gender_subspace(*biased, cfg.definitional_pairs, 2);
            auto rep_b =
                projection_neighbor_curve(*biased, occupations, basis_b[0], cfg.neighbor_k, jobs);
            auto basis_d = gender_subspace(*debiased, cfg.definitional_pairs, 2);
            auto rep_d = projection_neighbor_curve(*debiased, occupations, basis_d[0],
                                                   cfg.neighbor_k, jobs);
            write_geometry_csv(cfg, "geometry_before.csv", rep_b, io);
            write_geometry_csv(cfg, "geometry_after.csv", rep_d, io);
            write_geometry_plots(cfg, "before", *biased, basis_b, rep_b, io);
            write_geometry_plots(cfg, "after", *debiased, basis_d, rep_d, io);
            report["correlation_before"] = rep_b.correlation;
            report["correlation_after"] = rep_d.correlation;
        }
    }
    write_report(cfg, "geometry_report.json", report, io);
    write_manifest(cfg, "geometry", io);
}

void stage_report(const PipelineConfig& cfg) {
    StageIo io;
    json summary;
    json stages = json::object();
    for (const auto& stage : kStageOrder) {
        if (stage == "report") continue;
        std::string mpath = cfg.artifact(stage + ".manifest.json");
        if (!fs::exists(mpath))
            throw MissingUpstreamError("manifest for stage '" + stage +
                                       "' is missing; run stage '" + stage + "' first");
        io.input(mpath);
        stages[stage] = read_json_file(mpath, "stage manifest");
    }
    summary["stages"] = stages;

    json headline;
    json debias_report = read_json_file(cfg.artifact("debias_report.json"), "debias report");
    double tde_b = 0.0, tde_a = 0.0;
    size_t nw = debias_report["words"].size();
    for (const auto& w : debias_report["words"]) {
        tde_b += w["tde_before"].get<double>();
        tde_a += w["tde_after"].get<double>();
    }
    headline["debiased_words"] = nw;
    headline["mean_tde_before"] = nw ? json(tde_b / nw) : json(nullptr);
    headline["mean_tde_after"] = nw ? json(tde_a / nw) : json(nullptr);
    headline["fingerprint_equal"] = debias_report["fingerprint_unchanged"];

    json ppl = read_json_file(cfg.artifact("ppl_report.json"), "perplexity report");
    headline["perplexity_before"] = ppl.value("before", json());
    headline["perplexity_after"] = ppl.value("after", json());
    json seat = read_json_file(cfg.artifact("seat_report.json"), "SEAT report");
    headline["seat_before"] = seat.value("before", json());
    headline["seat_after"] = seat.value("after", json());
    json stereo = read_json_file(cfg.artifact("stereo_report.json"), "stereo report");
    if (stereo.contains("before")) {
        headline["icat_before"] = stereo["before"]["icat"];
        headline["icat_after"] = stereo["after"]["icat"];
    }
    json geom = read_json_file(cfg.artifact("geometry_report.json"), "geometry report");
    headline["geometry_correlation_before"] = geom.value("correlation_before", json());
    headline["geometry_correlation_after"] = geom.value("correlation_after", json());
    summary["headline"] = headline;
    summary["config_hash"] = cfg.config_hash();

    write_report(cfg, "summary.json", summary, io);
    write_manifest(cfg, "report", io);
}

}  // namespace

void run_stage(const std::string& name, const PipelineConfig& config) {
    config.validate();
    static const std::map<std::string, std::function<void(const PipelineConfig&)>> stages = {
        {"synth", stage_synth},         {"train", stage_train},
        {"templates", stage_templates}, {"debias", stage_debias},
        {"tde", stage_tde},             {"eval-seat", stage_eval_seat},
        {"eval-ppl", stage_eval_ppl},   {"eval-stereo", stage_eval_stereo},
        {"geometry", stage_geometry},   {"report", stage_report}};
    auto it = stages.find(name);
    if (it == stages.end()) throw ConfigError("unknown stage: " + name);
    it->second(config);
}

std::string full_pipeline(const PipelineConfig& config) {
    for (const auto& stage : kStageOrder) run_stage(stage, config);
    std::ifstream in(config.artifact("summary.json"));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace embfair

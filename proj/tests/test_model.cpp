#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "embfair/checkpoint.hpp"
#include "embfair/errors.hpp"
#include "embfair/rng.hpp"
#include "embfair/toy_model.hpp"
#include "forward_oracle.hpp"
#include "helpers.hpp"

using namespace embfair;

namespace {

ToyTransformer make_model(uint64_t seed = 42) {
    ToyConfig cfg;
    cfg.dim = 32;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.init_seed = seed;
    return ToyTransformer(build_vocabulary(test_helpers::small_profile()), cfg);
}

std::vector<int> ids_of(const Vocabulary& v, std::initializer_list<const char*> words) {
    std::vector<int> out;
    for (const char* w : words) out.push_back(v.id_of(w));
    return out;
}

}  // namespace

TEST_CASE("vocabulary invariants") {
    auto vocab = build_vocabulary(test_helpers::small_profile());
    CHECK(vocab.size() > 100);
    for (int i = 0; i < vocab.size(); ++i) CHECK(vocab.id_of(vocab.token(i)) == i);
    CHECK(vocab.he() != vocab.she());
    CHECK_THROWS_AS(vocab.id_of("astronaut"), InvalidInputError);
    CHECK_THROWS_AS(Vocabulary::from_tokens({"<s>", "he", "he", "she"}), InvalidInputError);
    CHECK_THROWS_AS(Vocabulary::from_tokens({"he", "she"}), InvalidInputError);
}

TEST_CASE("next_token_distribution sums to one and is deterministic") {
    auto model = make_model();
    auto ctx = ids_of(model.vocab(), {"the", "nurse", "said", "that"});
    Vec p = model.next_token_distribution(ctx);
    REQUIRE(static_cast<int>(p.size()) == model.vocab().size());
    double sum = 0.0;
    for (double x : p) {
        CHECK(x >= 0.0);
        sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);

    Vec p2 = model.next_token_distribution(ctx);
    CHECK(p == p2);
}

TEST_CASE("distribution input validation") {
    auto model = make_model();
    CHECK_THROWS_AS(model.next_token_distribution(std::vector<int>{}), InvalidInputError);
    CHECK_THROWS_AS(model.next_token_distribution(std::vector<int>{-1}), InvalidInputError);
    CHECK_THROWS_AS(model.next_token_distribution(std::vector<int>{model.vocab().size()}),
                    InvalidInputError);
}

TEST_CASE("zero output head gives the uniform distribution") {
    auto model = make_model();
    for (auto& [name, tensor] : model.tensors()) {
        if (name == "head.w" || name == "head.b") tensor->zero();
    }
    auto ctx = ids_of(model.vocab(), {"the", "doctor"});
    Vec p = model.next_token_distribution(ctx);
    double expect = 1.0 / model.vocab().size();
    for (double x : p) CHECK(x == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("set_embedding is an exact read-your-write and identity-write is a no-op") {
    auto model = make_model();
    int t = model.vocab().id_of("doctor");
    auto ctx = ids_of(model.vocab(), {"the", "doctor", "said", "that"});
    Vec before = model.next_token_distribution(ctx);

    Vec row = model.get_embedding(t);
    model.set_embedding(t, row);
    CHECK(model.get_embedding(t) == row);
    CHECK(model.next_token_distribution(ctx) == before);

    Vec changed = row;
    changed[0] += 0.5;
    model.set_embedding(t, changed);
    CHECK(model.get_embedding(t) == changed);

    Vec bad(model.dim() + 1, 0.0);
    CHECK_THROWS_AS(model.set_embedding(t, bad), InvalidInputError);
    Vec nan_row(model.dim(), std::nan(""));
    CHECK_THROWS_AS(model.set_embedding(t, nan_row), InvalidInputError);
}

TEST_CASE("editing one row leaves contexts that exclude it untouched") {
    auto model = make_model();
    auto oracle = model.clone();
    int nurse = model.vocab().id_of("nurse");
    Vec row = model.get_embedding(nurse);
    for (double& x : row) x += 0.25;
    model.set_embedding(nurse, row);

    for (auto ctx : {std::vector<int>{model.vocab().id_of("the")},
                     ids_of(model.vocab(), {"the", "doctor", "said"}),
                     ids_of(model.vocab(), {"the", "teacher", "said", "that"})}) {
        CHECK(model.next_token_distribution(ctx) == oracle->next_token_distribution(ctx));
    }
    auto with_nurse = ids_of(model.vocab(), {"the", "nurse", "said"});
    CHECK(model.next_token_distribution(with_nurse) !=
          oracle->next_token_distribution(with_nurse));
}

TEST_CASE("fingerprint ignores embeddings and tracks knowledge parameters") {
    auto model = make_model();
    auto fp0 = model.fingerprint();
    CHECK(fp0 == model.fingerprint());
    CHECK(fp0.hex().size() == 64);

    // any embedding row write leaves the fingerprint alone
    int t = model.vocab().id_of("pilot");
    Vec row = model.get_embedding(t);
    for (double& x : row) x = -x + 0.125;
    model.set_embedding(t, row);
    CHECK(model.fingerprint() == fp0);

    // a 1e-6 nudge on one attention weight changes it
    for (auto& [name, tensor] : model.tensors()) {
        if (name == "blk0.attn.w_qkv") tensor->a[7] += 1e-6;
    }
    CHECK(!(model.fingerprint() == fp0));

    // same seed, fresh instance: identical digest across construction
    auto model2 = make_model();
    for (auto& [name, tensor] : model2.tensors()) {
        if (name == "blk0.attn.w_qkv") tensor->a[7] += 1e-6;
    }
    CHECK(model.fingerprint() == model2.fingerprint());
}

TEST_CASE("embedding gradient matches central finite differences") {
    auto model = make_model(77);
    const auto& vocab = model.vocab();
    const int he = vocab.he(), she = vocab.she();

    for (uint64_t spec_seed : {1ULL, 2ULL, 3ULL}) {
        Rng rng(spec_seed);
        int target = vocab.id_of("doctor");
        std::vector<ProbGradTerm> terms;
        for (int i = 0; i < 3; ++i) {
            ProbGradTerm term;
            term.context = ids_of(vocab, {"the", "doctor", "said"});
            term.context.push_back(rng.uniform_int(vocab.size() - 1) + 1);
            term.dloss_dp = {{he, rng.uniform01() * 2.0 - 1.0},
                             {she, rng.uniform01() * 2.0 - 1.0},
                             {rng.uniform_int(vocab.size() - 1) + 1, rng.uniform01()}};
            terms.push_back(std::move(term));
        }
        Vec grad = embedding_gradient(model, terms, target);

        auto loss_of = [&](ToyTransformer& m) {
            double total = 0.0;
            for (const auto& term : terms) {
                Vec p = m.next_token_distribution(term.context);
                for (auto [tok, coeff] : term.dloss_dp) total += coeff * p[tok];
            }
            return total;
        };

        for (int probe = 0; probe < 5; ++probe) {
            int coord = rng.uniform_int(model.dim());
            const double h = 1e-4;
            Vec row = model.get_embedding(target);
            Vec rp = row, rm = row;
            rp[coord] += h;
            rm[coord] -= h;
            model.set_embedding(target, rp);
            double lp = loss_of(model);
            model.set_embedding(target, rm);
            double lm = loss_of(model);
            model.set_embedding(target, row);
            double fd = (lp - lm) / (2 * h);
            CHECK(grad[coord] == doctest::Approx(fd).epsilon(1e-4));
        }
    }
}

TEST_CASE("constant loss has zero gradient") {
    auto model = make_model();
    std::vector<ProbGradTerm> no_terms;
    Vec g = embedding_gradient(model, no_terms, model.vocab().id_of("nurse"));
    for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("gradient of loss over distant context is zero for an absent token") {
    auto model = make_model();
    ProbGradTerm term;
    term.context = ids_of(model.vocab(), {"the", "teacher", "said"});
    term.dloss_dp = {{model.vocab().he(), 1.0}};
    std::vector<ProbGradTerm> terms = {term};
    Vec g = embedding_gradient(model, terms, model.vocab().id_of("doctor"));
    for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("forward pass matches the independent checkpoint oracle") {
    auto model = make_model(4242);
    std::string path = (std::filesystem::temp_directory_path() / "embfair_oracle.ckpt").string();
    save_checkpoint(model, path);
    auto loaded = load_checkpoint(path);
    auto ck = forward_oracle::parse_checkpoint(path);

    const auto& vocab = loaded->vocab();
    for (auto words : {std::vector<const char*>{"the", "nurse", "said", "that"},
                       std::vector<const char*>{"the", "doctor", "told", "the", "visitor"},
                       std::vector<const char*>{"the", "lamp"}}) {
        std::vector<int> ctx;
        for (const char* w : words) ctx.push_back(vocab.id_of(w));
        Vec p = loaded->next_token_distribution(ctx);
        auto q = forward_oracle::next_token_probs(ck, ctx);
        REQUIRE(p.size() == q.size());
        for (size_t i = 0; i < p.size(); ++i)
            CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-9));
    }
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint round trip preserves distributions and fingerprint") {
    auto model = make_model(9);
    std::string path = (std::filesystem::temp_directory_path() / "embfair_rt.ckpt").string();
    save_checkpoint(model, path);
    auto loaded = load_checkpoint(path);
    // values are float32 on disk; reload and compare the reloaded copy's save
    std::string path2 = path + "2";
    save_checkpoint(*loaded, path2);
    auto loaded2 = load_checkpoint(path2);
    CHECK(loaded->fingerprint() == loaded2->fingerprint());
    auto ctx = ids_of(loaded->vocab(), {"the", "clerk", "said"});
    CHECK(loaded->next_token_distribution(ctx) == loaded2->next_token_distribution(ctx));
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("hidden states have the model dimension per position") {
    auto model = make_model();
    auto ctx = ids_of(model.vocab(), {"the", "doctor", "said", "that"});
    auto states = model.hidden_states(ctx);
    CHECK(states.size() == ctx.size());
    for (const auto& h : states) CHECK(static_cast<int>(h.size()) == model.dim());
}

#include "embfair/adapter.hpp"

#include <cstring>

#include "embfair/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace embfair {

namespace {

class HttpModel final : public LanguageModel {
public:
    explicit HttpModel(std::string base_url) : url_(std::move(base_url)) {
        auto meta = get("/meta");
        name_ = "adapter:" + meta.at("backend").get<std::string>();
        dim_ = meta.at("dim").get<int>();
        vocab_ = Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
    }

    const Vocabulary& vocab() const override { return vocab_; }
    int dim() const override { return dim_; }
    const std::string& backend_name() const override { return name_; }

    Vec next_token_distribution(std::span<const int> context) const override {
        check(context);
        nlohmann::json req;
        req["context"] = std::vector<int>(context.begin(), context.end());
        auto resp = post("/distribution", req);
        return resp.at("probs").get<Vec>();
    }

    std::vector<Vec> hidden_states(std::span<const int> context) const override {
        check(context);
        nlohmann::json req;
        req["context"] = std::vector<int>(context.begin(), context.end());
        auto resp = post("/hidden", req);
        return resp.at("states").get<std::vector<Vec>>();
    }

    Vec get_embedding(int token_id) const override {
        if (!vocab_.valid_id(token_id))
            throw InvalidInputError("token id out of range: " + std::to_string(token_id));
        auto resp = get("/embedding/" + std::to_string(token_id));
        return resp.at("row").get<Vec>();
    }

    void set_embedding(int token_id, std::span<const double> row) override {
        if (!vocab_.valid_id(token_id))
            throw InvalidInputError("token id out of range: " + std::to_string(token_id));
        if (static_cast<int>(row.size()) != dim_)
            throw InvalidInputError("embedding row has wrong dimension");
        nlohmann::json req;
        req["row"] = Vec(row.begin(), row.end());
        put("/embedding/" + std::to_string(token_id), req);
    }

    ModelFingerprint fingerprint() const override {
        auto resp = get("/fingerprint");
        std::string hex = resp.at("digest").get<std::string>();
        if (hex.size() != 64) throw IoError("adapter fingerprint must be a 32-byte hex digest");
        ModelFingerprint fp;
        for (int i = 0; i < 32; ++i) {
            fp.digest[i] =
                static_cast<unsigned char>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
        }
        return fp;
    }

    std::unique_ptr<LanguageModel> clone() const override {
        return std::make_unique<HttpModel>(url_);
    }

private:
    void check(std::span<const int> context) const {
        if (context.empty()) throw InvalidInputError("context must be non-empty");
        for (int id : context)
            if (!vocab_.valid_id(id))
                throw InvalidInputError("context contains invalid token id: " +
                                        std::to_string(id));
    }

    nlohmann::json parse(const httplib::Result& res, const std::string& what) const {
        if (!res) throw IoError("adapter request failed: " + what + " against " + url_);
        if (res->status != 200)
            throw IoError("adapter request " + what + " returned status " +
                          std::to_string(res->status));
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("adapter returned bad json for " + what + ": " + e.what());
        }
    }

    nlohmann::json get(const std::string& path) const {
        httplib::Client cli(url_);
        cli.set_read_timeout(30, 0);
        return parse(cli.Get(path), "GET " + path);
    }

    nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
        httplib::Client cli(url_);
        cli.set_read_timeout(30, 0);
        return parse(cli.Post(path, body.dump(), "application/json"), "POST " + path);
    }

    nlohmann::json put(const std::string& path, const nlohmann::json& body) const {
        httplib::Client cli(url_);
        cli.set_read_timeout(30, 0);
        return parse(cli.Put(path, body.dump(), "application/json"), "PUT " + path);
    }

    std::string url_;
    std::string name_;
    int dim_ = 0;
    Vocabulary vocab_;
};

}  // namespace

std::unique_ptr<LanguageModel> open_http_model(const std::string& base_url) {
    return std::make_unique<HttpModel>(base_url);
}

}  // namespace embfair

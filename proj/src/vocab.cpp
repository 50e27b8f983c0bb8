#include "embfair/vocab.hpp"

#include <fstream>

#include "embfair/common.hpp"
#include "embfair/errors.hpp"

namespace embfair {

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    v.ids_.reserve(v.tokens_.size());
    for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) {
        const auto& t = v.tokens_[i];
        if (t.empty()) throw InvalidInputError("vocabulary contains an empty token");
        auto [it, inserted] = v.ids_.emplace(t, i);
        (void)it;
        if (!inserted) throw InvalidInputError("duplicate token in vocabulary: " + t);
    }
    auto req = [&](const std::string& t) {
        auto it = v.ids_.find(t);
        if (it == v.ids_.end())
            throw InvalidInputError("vocabulary is missing required token: " + t);
        return it->second;
    };
    v.bos_ = req(kBosToken);
    v.he_ = req("he");
    v.she_ = req("she");
    if (v.he_ == v.she_) throw InvalidInputError("'he' and 'she' must have distinct ids");
    return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        tokens.push_back(line);
    }
    return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
    std::string out;
    for (const auto& t : tokens_) {
        out += t;
        out += '\n';
    }
    atomic_write_file(path, out);
}

const std::string& Vocabulary::token(int id) const {
    if (!valid_id(id)) throw InvalidInputError("token id out of range: " + std::to_string(id));
    return tokens_[id];
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end()) throw InvalidInputError("unknown token: " + token);
    return it->second;
}

std::optional<int> Vocabulary::find(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

}  // namespace embfair

#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace embfair {

// Word-level vocabulary. Ids are dense 0..|V|-1 in list order; the
// sequence-start marker "<s>" and the pronouns "he"/"she" must be present.
class Vocabulary {
public:
    Vocabulary() = default;
    static Vocabulary from_tokens(std::vector<std::string> tokens);
    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int id) const;
    int id_of(const std::string& token) const;  // throws InvalidInputError on unknown token
    std::optional<int> find(const std::string& token) const;
    bool valid_id(int id) const { return id >= 0 && id < size(); }

    int bos() const { return bos_; }
    int he() const { return he_; }
    int she() const { return she_; }

    const std::vector<std::string>& tokens() const { return tokens_; }

    bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
    int bos_ = -1;
    int he_ = -1;
    int she_ = -1;
};

inline const std::string kBosToken = "<s>";

}  // namespace embfair

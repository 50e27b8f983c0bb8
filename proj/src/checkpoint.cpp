#include "embfair/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "embfair/errors.hpp"
#include "json.hpp"

namespace embfair {

namespace {

constexpr const char* kCkptMagic = "EMBFAIR-CKPT 1";
constexpr const char* kPatchMagic = "EMBFAIR-PATCH 1";

void append_f32(std::string& out, const std::vector<double>& values) {
    for (double d : values) {
        float f = static_cast<float>(d);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        char buf[4];
        buf[0] = static_cast<char>(bits & 0xff);
        buf[1] = static_cast<char>((bits >> 8) & 0xff);
        buf[2] = static_cast<char>((bits >> 16) & 0xff);
        buf[3] = static_cast<char>((bits >> 24) & 0xff);
        out.append(buf, 4);
    }
}

std::vector<double> read_f32(const std::string& data, size_t& off, size_t count,
                             const std::string& path) {
    if (off + count * 4 > data.size())
        throw IoError("checkpoint truncated: " + path);
    std::vector<double> out(count);
    for (size_t i = 0; i < count; ++i) {
        uint32_t bits = static_cast<unsigned char>(data[off]) |
                        (static_cast<unsigned char>(data[off + 1]) << 8) |
                        (static_cast<unsigned char>(data[off + 2]) << 16) |
                        (static_cast<unsigned char>(data[off + 3]) << 24);
        float f;
        std::memcpy(&f, &bits, 4);
        out[i] = static_cast<double>(f);
        off += 4;
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// splits "magic\njsonline\nbinary..." and parses the header
nlohmann::json parse_container(const std::string& data, const char* magic, size_t& bin_off,
                               const std::string& path) {
    size_t nl1 = data.find('\n');
    if (nl1 == std::string::npos || data.substr(0, nl1) != magic)
        throw IoError("bad container magic in " + path);
    size_t nl2 = data.find('\n', nl1 + 1);
    if (nl2 == std::string::npos) throw IoError("missing header in " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(data.substr(nl1 + 1, nl2 - nl1 - 1));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad container header in " + path + ": " + e.what());
    }
    bin_off = nl2 + 1;
    return header;
}

}  // namespace

void save_checkpoint(const ToyTransformer& model, const std::string& path) {
    const auto& cfg = model.config();
    nlohmann::json header;
    header["backend"] = model.backend_name();
    header["dim"] = cfg.dim;
    header["heads"] = cfg.heads;
    header["layers"] = cfg.layers;
    header["context"] = cfg.context;
    header["embed_scale"] = cfg.embed_scale;
    header["vocab_size"] = model.vocab().size();
    header["vocab"] = model.vocab().tokens();
    nlohmann::json manifest = nlohmann::json::array();
    for (auto& [name, t] : model.tensors()) {
        manifest.push_back({{"name", name}, {"rows", t->rows}, {"cols", t->cols}});
    }
    header["manifest"] = manifest;

    std::string out = kCkptMagic;
    out += '\n';
    out += header.dump();
    out += '\n';
    for (auto& [name, t] : model.tensors()) {
        (void)name;
        append_f32(out, t->a);
    }
    atomic_write_file(path, out);
}

std::unique_ptr<ToyTransformer> load_checkpoint(const std::string& path) {
    std::string data = read_file(path);
    size_t off = 0;
    auto header = parse_container(data, kCkptMagic, off, path);
    if (header.at("backend").get<std::string>() != "toy")
        throw IoError("unsupported checkpoint backend in " + path);
    ToyConfig cfg;
    cfg.dim = header.at("dim").get<int>();
    cfg.heads = header.at("heads").get<int>();
    cfg.layers = header.at("layers").get<int>();
    cfg.context = header.at("context").get<int>();
    cfg.embed_scale = header.at("embed_scale").get<double>();
    auto vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    auto model = std::make_unique<ToyTransformer>(std::move(vocab), cfg);

    auto named = model->tensors();
    const auto& manifest = header.at("manifest");
    if (manifest.size() != named.size())
        throw IoError("manifest size mismatch in " + path);
    for (size_t i = 0; i < named.size(); ++i) {
        const auto& m = manifest[i];
        if (m.at("name").get<std::string>() != named[i].name ||
            m.at("rows").get<int>() != named[i].tensor->rows ||
            m.at("cols").get<int>() != named[i].tensor->cols) {
            throw IoError("manifest entry mismatch for tensor '" + named[i].name + "' in " + path);
        }
        named[i].tensor->a = read_f32(data, off, named[i].tensor->size(), path);
    }
    if (off != data.size()) throw IoError("trailing bytes in checkpoint " + path);
    return model;
}

void save_embedding_patch(const std::map<int, Vec>& rows, const Vocabulary& vocab, int dim,
                          const std::string& path) {
    nlohmann::json header;
    header["dim"] = dim;
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& [id, row] : rows) {
        if (static_cast<int>(row.size()) != dim)
            throw InvalidInputError("patch row has wrong dimension");
        manifest.push_back({{"token_id", id}, {"token", vocab.token(id)}});
    }
    header["manifest"] = manifest;
    std::string out = kPatchMagic;
    out += '\n';
    out += header.dump();
    out += '\n';
    for (const auto& [id, row] : rows) {
        (void)id;
        append_f32(out, row);
    }
    atomic_write_file(path, out);
}

std::map<int, Vec> load_embedding_patch(const std::string& path, const Vocabulary& vocab,
                                        int dim) {
    std::string data = read_file(path);
    size_t off = 0;
    auto header = parse_container(data, kPatchMagic, off, path);
    if (header.at("dim").get<int>() != dim)
        throw InvalidInputError("patch dimension mismatch for " + path);
    std::map<int, Vec> rows;
    for (const auto& m : header.at("manifest")) {
        int id = m.at("token_id").get<int>();
        if (!vocab.valid_id(id)) throw InvalidInputError("patch token id out of range");
        rows.emplace(id, read_f32(data, off, static_cast<size_t>(dim), path));
    }
    if (off != data.size()) throw IoError("trailing bytes in patch " + path);
    return rows;
}

}  // namespace embfair

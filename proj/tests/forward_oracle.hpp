#pragma once

// Independent forward pass recomputed from a serialized checkpoint. Parses
// the container and reimplements the network with plain loops; shares no code
// with the library's forward path.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace forward_oracle {

struct Ckpt {
    int dim = 0, heads = 0, layers = 0, context = 0;
    double embed_scale = 0.0;
    std::vector<std::string> vocab;
    std::map<std::string, std::vector<double>> tensors;
    std::map<std::string, std::pair<int, int>> shapes;
};

inline Ckpt parse_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("oracle: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string data = ss.str();

    size_t nl1 = data.find('\n');
    size_t nl2 = data.find('\n', nl1 + 1);
    auto header = nlohmann::json::parse(data.substr(nl1 + 1, nl2 - nl1 - 1));

    Ckpt ck;
    ck.dim = header.at("dim").get<int>();
    ck.heads = header.at("heads").get<int>();
    ck.layers = header.at("layers").get<int>();
    ck.context = header.at("context").get<int>();
    ck.embed_scale = header.at("embed_scale").get<double>();
    ck.vocab = header.at("vocab").get<std::vector<std::string>>();

    size_t off = nl2 + 1;
    for (const auto& entry : header.at("manifest")) {
        std::string name = entry.at("name").get<std::string>();
        int rows = entry.at("rows").get<int>();
        int cols = entry.at("cols").get<int>();
        size_t count = static_cast<size_t>(rows) * cols;
        std::vector<double> vals(count);
        for (size_t i = 0; i < count; ++i) {
            uint32_t bits = static_cast<unsigned char>(data[off]) |
                            (static_cast<unsigned char>(data[off + 1]) << 8) |
                            (static_cast<unsigned char>(data[off + 2]) << 16) |
                            (static_cast<unsigned char>(data[off + 3]) << 24);
            float f;
            std::memcpy(&f, &bits, 4);
            vals[i] = f;
            off += 4;
        }
        ck.tensors[name] = std::move(vals);
        ck.shapes[name] = {rows, cols};
    }
    return ck;
}

inline std::vector<double> layer_norm(const std::vector<double>& x,
                                      const std::vector<double>& g,
                                      const std::vector<double>& b) {
    size_t n = x.size();
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= n;
    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = g[i] * (x[i] - mu) / std::sqrt(var + 1e-5) + b[i];
    return y;
}

// probability vector over the vocabulary for the next token
inline std::vector<double> next_token_probs(const Ckpt& ck, std::vector<int> ids) {
    const int d = ck.dim;
    if (static_cast<int>(ids.size()) > ck.context)
        ids.erase(ids.begin(), ids.end() - ck.context);
    const int T = static_cast<int>(ids.size());
    const int hd = d / ck.heads;

    std::vector<std::vector<double>> x(T, std::vector<double>(d));
    const auto& emb = ck.tensors.at("emb");
    const auto& pos = ck.tensors.at("pos");
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < d; ++j)
            x[t][j] = emb[static_cast<size_t>(ids[t]) * d + j] * ck.embed_scale + pos[t * d + j];

    for (int l = 0; l < ck.layers; ++l) {
        std::string p = "blk" + std::to_string(l) + ".";
        const auto& ln1g = ck.tensors.at(p + "ln1.g");
        const auto& ln1b = ck.tensors.at(p + "ln1.b");
        const auto& wqkv = ck.tensors.at(p + "attn.w_qkv");
        const auto& bqkv = ck.tensors.at(p + "attn.b_qkv");
        const auto& wo = ck.tensors.at(p + "attn.w_o");
        const auto& bo = ck.tensors.at(p + "attn.b_o");
        const auto& ln2g = ck.tensors.at(p + "ln2.g");
        const auto& ln2b = ck.tensors.at(p + "ln2.b");
        const auto& wfc = ck.tensors.at(p + "mlp.w_fc");
        const auto& bfc = ck.tensors.at(p + "mlp.b_fc");
        const auto& wproj = ck.tensors.at(p + "mlp.w_proj");
        const auto& bproj = ck.tensors.at(p + "mlp.b_proj");

        std::vector<std::vector<double>> q(T, std::vector<double>(d));
        std::vector<std::vector<double>> k(T, std::vector<double>(d));
        std::vector<std::vector<double>> v(T, std::vector<double>(d));
        for (int t = 0; t < T; ++t) {
            auto a = layer_norm(x[t], ln1g, ln1b);
            for (int i = 0; i < 3 * d; ++i) {
                double acc = bqkv[i];
                for (int j = 0; j < d; ++j) acc += wqkv[static_cast<size_t>(i) * d + j] * a[j];
                if (i < d)
                    q[t][i] = acc;
                else if (i < 2 * d)
                    k[t][i - d] = acc;
                else
                    v[t][i - 2 * d] = acc;
            }
        }
        for (int t = 0; t < T; ++t) {
            std::vector<double> merged(d, 0.0);
            for (int h = 0; h < ck.heads; ++h) {
                std::vector<double> scores(t + 1);
                double mx = -1e300;
                for (int t2 = 0; t2 <= t; ++t2) {
                    double s = 0.0;
                    for (int j = 0; j < hd; ++j) s += q[t][h * hd + j] * k[t2][h * hd + j];
                    scores[t2] = s / std::sqrt(static_cast<double>(hd));
                    mx = std::max(mx, scores[t2]);
                }
                double z = 0.0;
                for (double& s : scores) {
                    s = std::exp(s - mx);
                    z += s;
                }
                for (int t2 = 0; t2 <= t; ++t2)
                    for (int j = 0; j < hd; ++j)
                        merged[h * hd + j] += scores[t2] / z * v[t2][h * hd + j];
            }
            std::vector<double> attn(d);
            for (int i = 0; i < d; ++i) {
                double acc = bo[i];
                for (int j = 0; j < d; ++j) acc += wo[static_cast<size_t>(i) * d + j] * merged[j];
                attn[i] = acc;
            }
            for (int i = 0; i < d; ++i) x[t][i] += attn[i];
        }
        for (int t = 0; t < T; ++t) {
            auto a = layer_norm(x[t], ln2g, ln2b);
            std::vector<double> hval(4 * d);
            for (int i = 0; i < 4 * d; ++i) {
                double acc = bfc[i];
                for (int j = 0; j < d; ++j) acc += wfc[static_cast<size_t>(i) * d + j] * a[j];
                double u = 0.7978845608028654 * (acc + 0.044715 * acc * acc * acc);
                hval[i] = 0.5 * acc * (1.0 + std::tanh(u));
            }
            for (int i = 0; i < d; ++i) {
                double acc = bproj[i];
                for (int j = 0; j < 4 * d; ++j)
                    acc += wproj[static_cast<size_t>(i) * 4 * d + j] * hval[j];
                x[t][i] += acc;
            }
        }
    }

    auto fl = layer_norm(x[T - 1], ck.tensors.at("lnf.g"), ck.tensors.at("lnf.b"));
    const auto& wh = ck.tensors.at("head.w");
    const auto& bh = ck.tensors.at("head.b");
    const int V = static_cast<int>(ck.vocab.size());
    std::vector<double> logits(V);
    double mx = -1e300;
    for (int i = 0; i < V; ++i) {
        double acc = bh[i];
        for (int j = 0; j < d; ++j) acc += wh[static_cast<size_t>(i) * d + j] * fl[j];
        logits[i] = acc;
        mx = std::max(mx, acc);
    }
    double z = 0.0;
    for (int i = 0; i < V; ++i) {
        logits[i] = std::exp(logits[i] - mx);
        z += logits[i];
    }
    for (int i = 0; i < V; ++i) logits[i] /= z;
    return logits;
}

}  // namespace forward_oracle

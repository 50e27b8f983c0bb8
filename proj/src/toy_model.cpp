#include "embfair/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "embfair/errors.hpp"
#include "embfair/rng.hpp"

namespace embfair {

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

inline double gelu(double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

inline double gelu_grad(double x) {
    double u = kGeluC * (x + kGeluA * x * x * x);
    double t = std::tanh(u);
    double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

// y = W x for row-major W (m x n)
inline void matvec(const Tensor& w, const double* x, double* y) {
    for (int i = 0; i < w.rows; ++i) {
        const double* r = w.row(i);
        double acc = 0.0;
        for (int j = 0; j < w.cols; ++j) acc += r[j] * x[j];
        y[i] = acc;
    }
}

// dx += W^T dy
inline void matvec_t_acc(const Tensor& w, const double* dy, double* dx) {
    for (int i = 0; i < w.rows; ++i) {
        const double* r = w.row(i);
        double d = dy[i];
        if (d == 0.0) continue;
        for (int j = 0; j < w.cols; ++j) dx[j] += r[j] * d;
    }
}

// dW += dy (m) outer x (n)
inline void outer_acc(Tensor& dw, const double* dy, const double* x) {
    for (int i = 0; i < dw.rows; ++i) {
        double* r = dw.row(i);
        double d = dy[i];
        if (d == 0.0) continue;
        for (int j = 0; j < dw.cols; ++j) r[j] += x[j] * d;
    }
}

inline void add_acc(double* dst, const double* src, int n) {
    for (int i = 0; i < n; ++i) dst[i] += src[i];
}

inline void softmax_inplace(double* x, int n) {
    double m = x[0];
    for (int i = 1; i < n; ++i) m = std::max(m, x[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        x[i] = std::exp(x[i] - m);
        sum += x[i];
    }
    double inv = 1.0 / sum;
    for (int i = 0; i < n; ++i) x[i] *= inv;
}

struct LnStats {
    double mean, rstd;
};

inline LnStats layernorm(const double* x, const Tensor& g, const Tensor& b, double* out, int n) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += x[i];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
        double d = x[i] - mean;
        var += d * d;
    }
    var /= n;
    double rstd = 1.0 / std::sqrt(var + 1e-5);
    const double* ga = g.a.data();
    const double* ba = b.a.data();
    for (int i = 0; i < n; ++i) out[i] = ga[i] * (x[i] - mean) * rstd + ba[i];
    return {mean, rstd};
}

// dx += backward of layernorm; accumulates dgamma/dbeta when given.
inline void layernorm_backward(const double* x, const double* dy, const Tensor& g, LnStats st,
                               double* dx, Tensor* dg, Tensor* db, int n) {
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    // two reduction passes keep the formula branch-free
    for (int i = 0; i < n; ++i) {
        double xhat = (x[i] - st.mean) * st.rstd;
        double dxhat = dy[i] * g.a[i];
        mean_dxhat += dxhat;
        mean_dxhat_xhat += dxhat * xhat;
        if (dg) dg->a[i] += dy[i] * xhat;
        if (db) db->a[i] += dy[i];
    }
    mean_dxhat /= n;
    mean_dxhat_xhat /= n;
    for (int i = 0; i < n; ++i) {
        double xhat = (x[i] - st.mean) * st.rstd;
        double dxhat = dy[i] * g.a[i];
        dx[i] += st.rstd * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
    }
}

}  // namespace

struct ToyTransformer::Activations {
    int T = 0;
    Tensor x0;  // input residual stream per block entry; index [layer][t]
    struct BlockActs {
        Tensor ln1_out;
        std::vector<LnStats> ln1_st;
        Tensor qkv;      // T x 3d
        Tensor att;      // heads * T x T (row = h*T + t)
        Tensor att_out;  // T x d
        Tensor res1;     // T x d
        Tensor ln2_out;
        std::vector<LnStats> ln2_st;
        Tensor fc_pre;   // T x 4d
        Tensor fc_act;   // T x 4d
        Tensor res2;     // T x d
    };
    std::vector<BlockActs> blocks;
    Tensor lnf_out;  // T x d
    std::vector<LnStats> lnf_st;
    Tensor logits;  // T x V
    Tensor probs;   // T x V
};

ToyTransformer::ToyTransformer(Vocabulary vocab, ToyConfig cfg)
    : vocab_(std::move(vocab)), cfg_(cfg) {
    if (cfg_.dim % cfg_.heads != 0)
        throw InvalidInputError("model dim must be divisible by head count");
    const int d = cfg_.dim;
    const int v = vocab_.size();
    Rng rng(cfg_.init_seed);
    auto init = [&](Tensor& t, int r, int c, double std) {
        t = Tensor(r, c);
        for (auto& x : t.a) x = rng.gaussian() * std;
    };
    init(emb_, v, d, cfg_.emb_init_std);
    init(pos_, cfg_.context, d, cfg_.init_std);
    blocks_.resize(cfg_.layers);
    for (auto& b : blocks_) {
        b.ln1_g = Tensor(1, d);
        std::fill(b.ln1_g.a.begin(), b.ln1_g.a.end(), 1.0);
        b.ln1_b = Tensor(1, d);
        init(b.w_qkv, 3 * d, d, cfg_.init_std);
        b.b_qkv = Tensor(1, 3 * d);
        init(b.w_o, d, d, cfg_.init_std);
        b.b_o = Tensor(1, d);
        b.ln2_g = Tensor(1, d);
        std::fill(b.ln2_g.a.begin(), b.ln2_g.a.end(), 1.0);
        b.ln2_b = Tensor(1, d);
        init(b.w_fc, 4 * d, d, cfg_.init_std);
        b.b_fc = Tensor(1, 4 * d);
        init(b.w_proj, d, 4 * d, cfg_.init_std);
        b.b_proj = Tensor(1, d);
    }
    lnf_g = Tensor(1, d);
    std::fill(lnf_g.a.begin(), lnf_g.a.end(), 1.0);
    lnf_b = Tensor(1, d);
    init(w_head, v, d, cfg_.init_std);
    b_head = Tensor(1, v);
}

std::vector<ToyTransformer::NamedTensor> ToyTransformer::tensors() {
    std::vector<NamedTensor> out;
    out.push_back({"emb", &emb_});
    out.push_back({"pos", &pos_});
    for (size_t i = 0; i < blocks_.size(); ++i) {
        auto& b = blocks_[i];
        std::string p = "blk" + std::to_string(i) + ".";
        out.push_back({p + "ln1.g", &b.ln1_g});
        out.push_back({p + "ln1.b", &b.ln1_b});
        out.push_back({p + "attn.w_qkv", &b.w_qkv});
        out.push_back({p + "attn.b_qkv", &b.b_qkv});
        out.push_back({p + "attn.w_o", &b.w_o});
        out.push_back({p + "attn.b_o", &b.b_o});
        out.push_back({p + "ln2.g", &b.ln2_g});
        out.push_back({p + "ln2.b", &b.ln2_b});
        out.push_back({p + "mlp.w_fc", &b.w_fc});
        out.push_back({p + "mlp.b_fc", &b.b_fc});
        out.push_back({p + "mlp.w_proj", &b.w_proj});
        out.push_back({p + "mlp.b_proj", &b.b_proj});
    }
    out.push_back({"lnf.g", &lnf_g});
    out.push_back({"lnf.b", &lnf_b});
    out.push_back({"head.w", &w_head});
    out.push_back({"head.b", &b_head});
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> ToyTransformer::tensors() const {
    auto named = const_cast<ToyTransformer*>(this)->tensors();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(named.size());
    for (auto& n : named) out.emplace_back(n.name, n.tensor);
    return out;
}

ToyTransformer::Gradients ToyTransformer::make_gradients() const {
    Gradients g;
    for (auto& [name, t] : tensors()) {
        (void)name;
        g.t.emplace_back(t->rows, t->cols);
    }
    return g;
}

void ToyTransformer::Gradients::zero() {
    for (auto& t : this->t) t.zero();
}

void ToyTransformer::check_context(std::span<const int> context) const {
    if (context.empty()) throw InvalidInputError("context must be non-empty");
    for (int id : context) {
        if (!vocab_.valid_id(id))
            throw InvalidInputError("context contains invalid token id: " + std::to_string(id));
    }
}

std::vector<int> ToyTransformer::window(std::span<const int> context) const {
    size_t n = context.size();
    size_t w = static_cast<size_t>(cfg_.context);
    size_t start = n > w ? n - w : 0;
    return std::vector<int>(context.begin() + start, context.end());
}

void ToyTransformer::forward(std::span<const int> ids, Activations& acts) const {
    const int d = cfg_.dim;
    const int T = static_cast<int>(ids.size());
    const int H = cfg_.heads;
    const int hd = d / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    const int v = vocab_.size();

    acts.T = T;
    acts.x0 = Tensor(T * (cfg_.layers + 1), d);  // stream entering each block + final
    acts.blocks.resize(cfg_.layers);

    for (int t = 0; t < T; ++t) {
        double* x = acts.x0.row(t);
        const double* e = emb_.row(ids[t]);
        const double* p = pos_.row(t);
        for (int j = 0; j < d; ++j) x[j] = e[j] * cfg_.embed_scale + p[j];
    }

    for (int l = 0; l < cfg_.layers; ++l) {
        auto& blk = blocks_[l];
        auto& ba = acts.blocks[l];
        const Tensor& xin = acts.x0;  // rows l*T + t
        int base = l * T;
        ba.ln1_out = Tensor(T, d);
        ba.ln1_st.resize(T);
        for (int t = 0; t < T; ++t)
            ba.ln1_st[t] = layernorm(xin.row(base + t), blk.ln1_g, blk.ln1_b, ba.ln1_out.row(t), d);

        ba.qkv = Tensor(T, 3 * d);
        for (int t = 0; t < T; ++t) {
            matvec(blk.w_qkv, ba.ln1_out.row(t), ba.qkv.row(t));
            add_acc(ba.qkv.row(t), blk.b_qkv.a.data(), 3 * d);
        }

        ba.att = Tensor(H * T, T);
        ba.att_out = Tensor(T, d);
        for (int h = 0; h < H; ++h) {
            for (int t = 0; t < T; ++t) {
                const double* q = ba.qkv.row(t) + h * hd;
                double* arow = ba.att.row(h * T + t);
                for (int t2 = 0; t2 <= t; ++t2) {
                    const double* k = ba.qkv.row(t2) + d + h * hd;
                    double s = 0.0;
                    for (int j = 0; j < hd; ++j) s += q[j] * k[j];
                    arow[t2] = s * scale;
                }
                softmax_inplace(arow, t + 1);
                double* o = ba.att_out.row(t) + h * hd;
                for (int t2 = 0; t2 <= t; ++t2) {
                    const double* val = ba.qkv.row(t2) + 2 * d + h * hd;
                    double w = arow[t2];
                    for (int j = 0; j < hd; ++j) o[j] += w * val[j];
                }
            }
        }

        ba.res1 = Tensor(T, d);
        Vec proj(d);
        for (int t = 0; t < T; ++t) {
            matvec(blk.w_o, ba.att_out.row(t), proj.data());
            double* r = ba.res1.row(t);
            const double* x = xin.row(base + t);
            for (int j = 0; j < d; ++j) r[j] = x[j] + proj[j] + blk.b_o.a[j];
        }

        ba.ln2_out = Tensor(T, d);
        ba.ln2_st.resize(T);
        for (int t = 0; t < T; ++t)
            ba.ln2_st[t] = layernorm(ba.res1.row(t), blk.ln2_g, blk.ln2_b, ba.ln2_out.row(t), d);

        ba.fc_pre = Tensor(T, 4 * d);
        ba.fc_act = Tensor(T, 4 * d);
        for (int t = 0; t < T; ++t) {
            matvec(blk.w_fc, ba.ln2_out.row(t), ba.fc_pre.row(t));
            add_acc(ba.fc_pre.row(t), blk.b_fc.a.data(), 4 * d);
            double* act = ba.fc_act.row(t);
            const double* pre = ba.fc_pre.row(t);
            for (int j = 0; j < 4 * d; ++j) act[j] = gelu(pre[j]);
        }

        ba.res2 = Tensor(T, d);
        Vec mlp(d);
        for (int t = 0; t < T; ++t) {
            matvec(blk.w_proj, ba.fc_act.row(t), mlp.data());
            double* r = ba.res2.row(t);
            const double* x = ba.res1.row(t);
            for (int j = 0; j < d; ++j) r[j] = x[j] + mlp[j] + blk.b_proj.a[j];
        }

        for (int t = 0; t < T; ++t)
            std::memcpy(acts.x0.row((l + 1) * T + t), ba.res2.row(t), sizeof(double) * d);
    }

    acts.lnf_out = Tensor(T, d);
    acts.lnf_st.resize(T);
    int fbase = cfg_.layers * T;
    for (int t = 0; t < T; ++t)
        acts.lnf_st[t] = layernorm(acts.x0.row(fbase + t), lnf_g, lnf_b, acts.lnf_out.row(t), d);

    acts.logits = Tensor(T, v);
    acts.probs = Tensor(T, v);
    for (int t = 0; t < T; ++t) {
        matvec(w_head, acts.lnf_out.row(t), acts.logits.row(t));
        add_acc(acts.logits.row(t), b_head.a.data(), v);
        std::memcpy(acts.probs.row(t), acts.logits.row(t), sizeof(double) * v);
        softmax_inplace(acts.probs.row(t), v);
    }
}

// dlogits must be stored in acts.logits (reused as the gradient buffer).
void ToyTransformer::backward(std::span<const int> ids, const Activations& acts,
                              Gradients& grads) const {
    const int d = cfg_.dim;
    const int T = acts.T;
    const int H = cfg_.heads;
    const int hd = d / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    const int L = cfg_.layers;

    auto g = [&](int idx) -> Tensor& { return grads.t[idx]; };
    // layout: 0 emb, 1 pos, 2 + l*12 + k block tensors, tail: lnf.g, lnf.b, head.w, head.b
    const int tail = 2 + L * 12;

    Tensor dx(T, d);  // gradient on the residual stream
    // head + final LN
    for (int t = 0; t < T; ++t) {
        const double* dl = acts.logits.row(t);
        outer_acc(g(tail + 2), dl, acts.lnf_out.row(t));
        add_acc(g(tail + 3).a.data(), dl, vocab_.size());
        Vec dfl(d, 0.0);
        matvec_t_acc(w_head, dl, dfl.data());
        layernorm_backward(acts.x0.row(L * T + t), dfl.data(), lnf_g, acts.lnf_st[t], dx.row(t),
                           &g(tail), &g(tail + 1), d);
    }

    for (int l = L - 1; l >= 0; --l) {
        const auto& blk = blocks_[l];
        const auto& ba = acts.blocks[l];
        int base = 2 + l * 12;
        int xbase = l * T;

        // MLP: res2 = res1 + w_proj gelu(w_fc ln2(res1) + b_fc) + b_proj
        Tensor dres1(T, d);
        for (int t = 0; t < T; ++t) {
            const double* dy = dx.row(t);  // d res2
            add_acc(g(base + 11).a.data(), dy, d);
            outer_acc(g(base + 10), dy, ba.fc_act.row(t));
            Vec dact(4 * d, 0.0);
            matvec_t_acc(blk.w_proj, dy, dact.data());
            Vec dpre(4 * d);
            const double* pre = ba.fc_pre.row(t);
            for (int j = 0; j < 4 * d; ++j) dpre[j] = dact[j] * gelu_grad(pre[j]);
            add_acc(g(base + 9).a.data(), dpre.data(), 4 * d);
            outer_acc(g(base + 8), dpre.data(), ba.ln2_out.row(t));
            Vec da2(d, 0.0);
            matvec_t_acc(blk.w_fc, dpre.data(), da2.data());
            std::memcpy(dres1.row(t), dy, sizeof(double) * d);  // residual branch
            layernorm_backward(ba.res1.row(t), da2.data(), blk.ln2_g, ba.ln2_st[t], dres1.row(t),
                               &g(base + 6), &g(base + 7), d);
        }

        // attention: res1 = x + w_o att_out + b_o
        Tensor dqkv(T, 3 * d);
        Tensor dxin(T, d);
        for (int t = 0; t < T; ++t) {
            const double* dy = dres1.row(t);
            add_acc(g(base + 5).a.data(), dy, d);
            outer_acc(g(base + 4), dy, ba.att_out.row(t));
            std::memcpy(dxin.row(t), dy, sizeof(double) * d);  // residual branch
        }
        Tensor dao(T, d);
        for (int t = 0; t < T; ++t) matvec_t_acc(blk.w_o, dres1.row(t), dao.row(t));
        for (int h = 0; h < H; ++h) {
            for (int t = 0; t < T; ++t) {
                const double* arow = ba.att.row(h * T + t);
                const double* daoh = dao.row(t) + h * hd;
                // datt and softmax backward
                Vec datt(t + 1);
                double dot = 0.0;
                for (int t2 = 0; t2 <= t; ++t2) {
                    const double* val = ba.qkv.row(t2) + 2 * d + h * hd;
                    double s = 0.0;
                    for (int j = 0; j < hd; ++j) s += daoh[j] * val[j];
                    datt[t2] = s;
                    dot += s * arow[t2];
                    // dv
                    double* dval = dqkv.row(t2) + 2 * d + h * hd;
                    for (int j = 0; j < hd; ++j) dval[j] += arow[t2] * daoh[j];
                }
                const double* q = ba.qkv.row(t) + h * hd;
                double* dq = dqkv.row(t) + h * hd;
                for (int t2 = 0; t2 <= t; ++t2) {
                    double dscore = arow[t2] * (datt[t2] - dot) * scale;
                    if (dscore == 0.0) continue;
                    const double* k = ba.qkv.row(t2) + d + h * hd;
                    double* dk = dqkv.row(t2) + d + h * hd;
                    for (int j = 0; j < hd; ++j) {
                        dq[j] += dscore * k[j];
                        dk[j] += dscore * q[j];
                    }
                }
            }
        }
        for (int t = 0; t < T; ++t) {
            add_acc(g(base + 3).a.data(), dqkv.row(t), 3 * d);
            outer_acc(g(base + 2), dqkv.row(t), ba.ln1_out.row(t));
            Vec da1(d, 0.0);
            matvec_t_acc(blk.w_qkv, dqkv.row(t), da1.data());
            layernorm_backward(acts.x0.row(xbase + t), da1.data(), blk.ln1_g, ba.ln1_st[t],
                               dxin.row(t), &g(base), &g(base + 1), d);
        }
        dx = std::move(dxin);
    }

    // embedding + positions
    for (int t = 0; t < T; ++t) {
        const double* dxt = dx.row(t);
        double* de = g(0).row(ids[t]);
        for (int j = 0; j < d; ++j) de[j] += dxt[j] * cfg_.embed_scale;
        add_acc(g(1).row(t), dxt, d);
    }
}

Vec ToyTransformer::next_token_distribution(std::span<const int> context) const {
    check_context(context);
    auto ids = window(context);
    Activations acts;
    forward(ids, acts);
    const double* p = acts.probs.row(acts.T - 1);
    return Vec(p, p + vocab_.size());
}

std::vector<Vec> ToyTransformer::hidden_states(std::span<const int> context) const {
    check_context(context);
    auto ids = window(context);
    Activations acts;
    forward(ids, acts);
    std::vector<Vec> out(acts.T);
    for (int t = 0; t < acts.T; ++t) {
        const double* h = acts.lnf_out.row(t);
        out[t] = Vec(h, h + cfg_.dim);
    }
    return out;
}

Vec ToyTransformer::get_embedding(int token_id) const {
    if (!vocab_.valid_id(token_id))
        throw InvalidInputError("token id out of range: " + std::to_string(token_id));
    const double* r = emb_.row(token_id);
    return Vec(r, r + cfg_.dim);
}

void ToyTransformer::set_embedding(int token_id, std::span<const double> row) {
    if (!vocab_.valid_id(token_id))
        throw InvalidInputError("token id out of range: " + std::to_string(token_id));
    if (static_cast<int>(row.size()) != cfg_.dim)
        throw InvalidInputError("embedding row has wrong dimension");
    for (double x : row) {
        if (!std::isfinite(x)) throw InvalidInputError("embedding row contains non-finite value");
    }
    std::memcpy(emb_.row(token_id), row.data(), sizeof(double) * cfg_.dim);
}

ModelFingerprint ToyTransformer::fingerprint() const {
    Sha256 h;
    for (auto& [name, t] : tensors()) {
        if (name == "emb") continue;
        h.update_str(name);
        h.update_u64(static_cast<uint64_t>(t->rows));
        h.update_u64(static_cast<uint64_t>(t->cols));
        for (double x : t->a) h.update_f64(x);
    }
    ModelFingerprint fp;
    auto d = h.finish();
    std::copy(d.begin(), d.end(), fp.digest.begin());
    return fp;
}

std::map<int, Vec> ToyTransformer::embedding_gradient(std::span<const ProbGradTerm> terms,
                                                      std::span<const int> token_ids) const {
    const int v = vocab_.size();
    Gradients grads = make_gradients();
    Activations acts;
    for (const auto& term : terms) {
        check_context(term.context);
        for (const auto& [tok, coeff] : term.dloss_dp) {
            (void)coeff;
            if (!vocab_.valid_id(tok))
                throw InvalidInputError("loss term references invalid token id");
        }
        auto ids = window(term.context);
        forward(ids, acts);
        const int last = acts.T - 1;
        const double* p = acts.probs.row(last);
        double dot = 0.0;
        for (const auto& [tok, coeff] : term.dloss_dp) dot += coeff * p[tok];
        // softmax backward from sparse d(loss)/dp into dense d(loss)/dlogits
        acts.logits.zero();
        double* dl = acts.logits.row(last);
        for (int i = 0; i < v; ++i) dl[i] = -p[i] * dot;
        for (const auto& [tok, coeff] : term.dloss_dp) dl[tok] += p[tok] * coeff;
        backward(ids, acts, grads);
    }
    std::map<int, Vec> out;
    for (int id : token_ids) {
        if (!vocab_.valid_id(id))
            throw InvalidInputError("token id out of range: " + std::to_string(id));
        const double* r = grads.t[0].row(id);
        out.emplace(id, Vec(r, r + cfg_.dim));
    }
    return out;
}

double ToyTransformer::sequence_loss(std::span<const int> tokens) const {
    check_context(tokens);
    std::vector<int> ids;
    ids.reserve(tokens.size() + 1);
    ids.push_back(vocab_.bos());
    for (int t : tokens) ids.push_back(t);
    if (static_cast<int>(ids.size()) > cfg_.context) ids.resize(cfg_.context);
    Activations acts;
    forward(ids, acts);
    const int npred = acts.T - 1;
    double loss = 0.0;
    for (int t = 0; t < npred; ++t) {
        double p = acts.probs.at(t, ids[t + 1]);
        loss -= std::log(std::max(p, 1e-300));
    }
    return loss / npred;
}

double ToyTransformer::sequence_loss_grad(std::span<const int> tokens, Gradients& grads) const {
    check_context(tokens);
    std::vector<int> ids;
    ids.reserve(tokens.size() + 1);
    ids.push_back(vocab_.bos());
    for (int t : tokens) ids.push_back(t);
    if (static_cast<int>(ids.size()) > cfg_.context) ids.resize(cfg_.context);
    Activations acts;
    forward(ids, acts);
    const int npred = acts.T - 1;
    const int v = vocab_.size();
    double loss = 0.0;
    for (int t = 0; t < npred; ++t) {
        double p = acts.probs.at(t, ids[t + 1]);
        loss -= std::log(std::max(p, 1e-300));
    }
    loss /= npred;
    // dlogits = (probs - onehot)/npred at each predicting position
    double invn = 1.0 / npred;
    for (int t = 0; t < acts.T; ++t) {
        double* dl = acts.logits.row(t);
        if (t >= npred) {
            std::fill(dl, dl + v, 0.0);
            continue;
        }
        const double* p = acts.probs.row(t);
        for (int i = 0; i < v; ++i) dl[i] = p[i] * invn;
        dl[ids[t + 1]] -= invn;
    }
    backward(ids, acts, grads);
    return loss;
}

}  // namespace embfair

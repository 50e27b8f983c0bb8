#include "embfair/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "embfair/errors.hpp"
#include "json.hpp"

namespace embfair {

namespace {

std::vector<int> tokenize(const Vocabulary& vocab, const std::string& sentence) {
    std::istringstream ss(sentence);
    std::vector<int> ids;
    std::string w;
    while (ss >> w) ids.push_back(vocab.id_of(w));
    if (ids.empty()) throw InvalidInputError("cannot encode an empty sentence");
    return ids;
}

double cosine(const Vec& a, const Vec& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0)
        throw DegenerateStatisticsError("cosine of a zero-norm vector is undefined");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<Vec> encode_all(const LanguageModel& model, const std::vector<std::string>& sentences,
                            int jobs) {
    std::vector<Vec> out(sentences.size());
    parallel_for(static_cast<int>(sentences.size()), jobs,
                 [&](int i) { out[i] = encode_sentence(model, sentences[i]); });
    return out;
}

}  // namespace

SeatSpec SeatSpec::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open SEAT spec: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad SEAT spec json in " + path + ": " + e.what());
    }
    SeatSpec spec;
    spec.targets_x = j.at("targets_x").get<std::vector<std::string>>();
    spec.targets_y = j.at("targets_y").get<std::vector<std::string>>();
    spec.attributes_a = j.at("attributes_a").get<std::vector<std::string>>();
    spec.attributes_b = j.at("attributes_b").get<std::vector<std::string>>();
    spec.validate();
    return spec;
}

void SeatSpec::validate() const {
    if (targets_x.empty() || targets_y.empty() || attributes_a.empty() || attributes_b.empty())
        throw InvalidInputError("SEAT spec requires four non-empty sets");
}

Vec encode_sentence(const LanguageModel& model, const std::string& sentence) {
    auto ids = tokenize(model.vocab(), sentence);
    auto states = model.hidden_states(ids);
    Vec mean(model.dim(), 0.0);
    for (const auto& h : states)
        for (int j = 0; j < model.dim(); ++j) mean[j] += h[j];
    double inv = 1.0 / static_cast<double>(states.size());
    for (double& x : mean) x *= inv;
    return mean;
}

double seat_effect_size(const LanguageModel& model, const SeatSpec& spec, int jobs) {
    spec.validate();
    auto ex = encode_all(model, spec.targets_x, jobs);
    auto ey = encode_all(model, spec.targets_y, jobs);
    auto ea = encode_all(model, spec.attributes_a, jobs);
    auto eb = encode_all(model, spec.attributes_b, jobs);

    auto assoc = [&](const Vec& w) {
        double sa = 0.0, sb = 0.0;
        for (const auto& a : ea) sa += cosine(w, a);
        for (const auto& b : eb) sb += cosine(w, b);
        return sa / ea.size() - sb / eb.size();
    };

    std::vector<double> sx, sy;
    for (const auto& w : ex) sx.push_back(assoc(w));
    for (const auto& w : ey) sy.push_back(assoc(w));

    double mx = std::accumulate(sx.begin(), sx.end(), 0.0) / sx.size();
    double my = std::accumulate(sy.begin(), sy.end(), 0.0) / sy.size();

    std::vector<double> all = sx;
    all.insert(all.end(), sy.begin(), sy.end());
    if (all.size() < 2)
        throw DegenerateStatisticsError("SEAT needs at least two target items in total");
    double mean = std::accumulate(all.begin(), all.end(), 0.0) / all.size();
    double var = 0.0;
    for (double s : all) var += (s - mean) * (s - mean);
    var /= static_cast<double>(all.size() - 1);
    double std_dev = std::sqrt(var);
    if (!(std_dev > 0.0))
        throw DegenerateStatisticsError("all SEAT associations are equal; effect size undefined");
    return (mx - my) / std_dev;
}

double perplexity(const LanguageModel& model, const std::vector<std::vector<int>>& sentences,
                  int jobs) {
    if (sentences.empty()) throw InvalidInputError("perplexity requires a non-empty corpus");
    const int bos = model.vocab().bos();
    std::vector<double> nll(sentences.size(), 0.0);
    std::vector<long> cnt(sentences.size(), 0);
    parallel_for(static_cast<int>(sentences.size()), jobs, [&](int i) {
        const auto& sent = sentences[i];
        std::vector<int> ctx = {bos};
        double acc = 0.0;
        for (int tok : sent) {
            Vec probs = model.next_token_distribution(ctx);
            acc -= std::log(std::max(probs[tok], 1e-300));
            ctx.push_back(tok);
        }
        nll[i] = acc;
        cnt[i] = static_cast<long>(sent.size());
    });
    double total = 0.0;
    long count = 0;
    for (size_t i = 0; i < nll.size(); ++i) {
        total += nll[i];
        count += cnt[i];
    }
    if (count == 0) throw InvalidInputError("perplexity corpus has no tokens");
    return std::exp(total / static_cast<double>(count));
}

StereoFixture StereoFixture::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open stereo fixture: " + path);
    StereoFixture fx;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("bad stereo item in " + path + ": " + e.what());
        }
        StereoItem item;
        item.context = j.at("context").get<std::string>();
        item.stereotype = j.at("stereotype").get<std::string>();
        item.anti_stereotype = j.at("anti_stereotype").get<std::string>();
        item.unrelated = j.at("unrelated").get<std::string>();
        fx.items.push_back(std::move(item));
    }
    fx.validate();
    return fx;
}

void StereoFixture::validate() const {
    if (items.empty()) throw InvalidInputError("stereo fixture is empty");
    for (const auto& it : items) {
        if (it.stereotype == it.anti_stereotype || it.stereotype == it.unrelated ||
            it.anti_stereotype == it.unrelated)
            throw InvalidInputError("stereo item continuations must be distinct");
    }
}

double icat_score(double lms, double ss) { return lms * std::min(ss, 100.0 - ss) / 50.0; }

StereoScores stereo_metrics(const LanguageModel& model, const StereoFixture& fixture, int jobs) {
    fixture.validate();
    const auto& vocab = model.vocab();
    const int n = static_cast<int>(fixture.items.size());

    std::vector<double> lms_hits(n, 0.0), ss_hits(n, 0.0);
    parallel_for(n, jobs, [&](int i) {
        const auto& item = fixture.items[i];
        auto ctx_ids = tokenize(vocab, item.context);
        auto score = [&](const std::string& continuation) {
            auto cont = tokenize(vocab, continuation);
            std::vector<int> ctx = ctx_ids;
            double ll = 0.0;
            for (int tok : cont) {
                Vec probs = model.next_token_distribution(ctx);
                ll += std::log(std::max(probs[tok], 1e-300));
                ctx.push_back(tok);
            }
            return ll;
        };
        double s_st = score(item.stereotype);
        double s_anti = score(item.anti_stereotype);
        double s_unrel = score(item.unrelated);
        double meaningful = std::max(s_st, s_anti);
        lms_hits[i] = meaningful > s_unrel ? 1.0 : (meaningful == s_unrel ? 0.5 : 0.0);
        ss_hits[i] = s_st > s_anti ? 1.0 : (s_st == s_anti ? 0.5 : 0.0);
    });

    StereoScores out;
    out.lms = 100.0 * std::accumulate(lms_hits.begin(), lms_hits.end(), 0.0) / n;
    out.ss = 100.0 * std::accumulate(ss_hits.begin(), ss_hits.end(), 0.0) / n;
    out.icat = icat_score(out.lms, out.ss);
    return out;
}

std::vector<Vec> gender_subspace(const LanguageModel& model,
                                 const std::vector<std::pair<std::string, std::string>>& pairs,
                                 int components) {
    if (pairs.empty()) throw InvalidInputError("gender subspace requires definitional pairs");
    if (components < 1) throw InvalidInputError("component count must be >= 1");
    const int d = model.dim();
    const auto& vocab = model.vocab();

    std::vector<Vec> diffs;
    for (const auto& [a, b] : pairs) {
        Vec ea = model.get_embedding(vocab.id_of(a));
        Vec eb = model.get_embedding(vocab.id_of(b));
        Vec diff(d);
        for (int j = 0; j < d; ++j) diff[j] = ea[j] - eb[j];
        diffs.push_back(std::move(diff));
    }

    auto norm = [](const Vec& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };

    std::vector<Vec> basis;
    std::vector<Vec> work = diffs;
    for (int c = 0; c < components; ++c) {
        // power iteration on sum_i w_i w_i^T, started from the largest residual
        int seed_idx = 0;
        double best = -1.0;
        for (size_t i = 0; i < work.size(); ++i) {
            double nn = norm(work[i]);
            if (nn > best) {
                best = nn;
                seed_idx = static_cast<int>(i);
            }
        }
        if (!(best > 1e-12))
            throw DegenerateStatisticsError(
                "difference vectors carry no variance for component " + std::to_string(c));
        Vec v = work[seed_idx];
        double nv = norm(v);
        for (double& x : v) x /= nv;
        for (int iter = 0; iter < 1000; ++iter) {
            Vec next(d, 0.0);
            for (const auto& w : work) {
                double dot = 0.0;
                for (int j = 0; j < d; ++j) dot += w[j] * v[j];
                for (int j = 0; j < d; ++j) next[j] += dot * w[j];
            }
            double nn = norm(next);
            if (!(nn > 1e-300))
                throw DegenerateStatisticsError("power iteration collapsed to zero");
            for (double& x : next) x /= nn;
            double delta = 0.0;
            for (int j = 0; j < d; ++j) delta += (next[j] - v[j]) * (next[j] - v[j]);
            v = std::move(next);
            if (delta < 1e-24) break;
        }
        // anchor the sign on the first pair's difference
        double anchor = 0.0;
        for (int j = 0; j < d; ++j) anchor += diffs[0][j] * v[j];
        if (anchor < 0.0)
            for (double& x : v) x = -x;
        // deflate
        for (auto& w : work) {
            double dot = 0.0;
            for (int j = 0; j < d; ++j) dot += w[j] * v[j];
            for (int j = 0; j < d; ++j) w[j] -= dot * v[j];
        }
        basis.push_back(std::move(v));
    }
    return basis;
}

double spearman_correlation(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InvalidInputError("rank correlation needs equal-length series");
    const size_t n = x.size();
    if (n < 2) return 0.0;
    auto ranks = [](const std::vector<double>& v) {
        std::vector<size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        size_t i = 0;
        while (i < idx.size()) {
            size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
            for (size_t t = i; t <= j; ++t) r[idx[t]] = avg;
            i = j + 1;
        }
        return r;
    };
    auto rx = ranks(x);
    auto ry = ranks(y);
    double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = rx[i] - mx, dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

GeometryReport projection_neighbor_curve(const LanguageModel& model,
                                         const std::vector<std::string>& words, const Vec& basis,
                                         int k, int jobs) {
    if (k < 1) throw InvalidInputError("neighbor count k must be >= 1");
    if (k >= model.vocab().size())
        throw InvalidInputError("neighbor count k must be below the vocabulary size");
    if (words.size() < 2) throw InvalidInputError("geometry needs at least two words");
    const int n = static_cast<int>(words.size());
    const int kk = std::min(k, n - 1);

    std::vector<Vec> rows(n);
    for (int i = 0; i < n; ++i)
        rows[i] = model.get_embedding(model.vocab().id_of(words[i]));

    GeometryReport rep;
    rep.basis = basis;
    rep.words = words;
    rep.projections.resize(n);
    for (int i = 0; i < n; ++i) {
        double p = 0.0;
        for (size_t j = 0; j < basis.size(); ++j) p += rows[i][j] * basis[j];
        rep.projections[i] = p;
    }

    rep.neighbor_fractions.resize(n);
    parallel_for(n, jobs, [&](int i) {
        std::vector<std::pair<double, int>> sims;
        sims.reserve(n - 1);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            sims.emplace_back(cosine(rows[i], rows[j]), j);
        }
        std::partial_sort(sims.begin(), sims.begin() + kk, sims.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first; });
        int male = 0;
        for (int t = 0; t < kk; ++t)
            if (rep.projections[sims[t].second] > 0.0) ++male;
        rep.neighbor_fractions[i] = static_cast<double>(male) / kk;
    });

    rep.correlation = spearman_correlation(rep.projections, rep.neighbor_fractions);
    return rep;
}

void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::string& xlabel, const std::string& ylabel,
                       const std::vector<ScatterSeries>& series) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        for (auto [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    double xpad = (xmax - xmin) * 0.1 + 1e-9;
    double ypad = (ymax - ymin) * 0.1 + 1e-9;
    xmin -= xpad;
    xmax += xpad;
    ymin -= ypad;
    ymax += ypad;

    const double W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;
    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto sy = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
        << H - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n";
    out << "<text x=\"18\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
        << "transform=\"rotate(-90 18 " << H / 2 << ")\">" << ylabel << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        double x = xmin + (xmax - xmin) * i / 4.0;
        double y = ymin + (ymax - ymin) * i / 4.0;
        out << "<text x=\"" << sx(x) << "\" y=\"" << H - mb + 16
            << "\" text-anchor=\"middle\" font-size=\"10\">" << x << "</text>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << sy(y) + 4
            << "\" text-anchor=\"end\" font-size=\"10\">" << y << "</text>\n";
    }
    double legend_y = mt;
    for (const auto& s : series) {
        for (size_t i = 0; i < s.points.size(); ++i) {
            auto [x, y] = s.points[i];
            out << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"4\" fill=\""
                << s.color << "\" fill-opacity=\"0.75\"/>\n";
            if (i < s.point_labels.size() && !s.point_labels[i].empty()) {
                out << "<text x=\"" << sx(x) + 6 << "\" y=\"" << sy(y) - 6
                    << "\" font-size=\"9\">" << s.point_labels[i] << "</text>\n";
            }
        }
        out << "<circle cx=\"" << W - mr - 110 << "\" cy=\"" << legend_y << "\" r=\"4\" fill=\""
            << s.color << "\"/>\n";
        out << "<text x=\"" << W - mr - 100 << "\" y=\"" << legend_y + 4
            << "\" font-size=\"11\">" << s.label << "</text>\n";
        legend_y += 16;
    }
    out << "</svg>\n";
    atomic_write_file(path, out.str());
}

}  // namespace embfair

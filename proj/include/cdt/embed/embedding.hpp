// SPDX-License-Identifier: Apache-2.0
#pragma once

// Static token embeddings: skip-gram with negative sampling, trained by a
// single deterministic worker.
//
// On disk a model is two files:
//   <stem>.vec    "CDTEMB01", u32 dim, u64 rows, then rows*dim little-endian f32
//   <stem>.vocab  one line per row: token TAB training-count

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "cdt/common/csv.hpp"
#include "cdt/common/error.hpp"
#include "cdt/common/files.hpp"
#include "cdt/common/rng.hpp"
#include "cdt/common/strings.hpp"

namespace cdt::embed {

using Sentence = std::vector<std::string>;

struct EmbeddingConfig {
    std::size_t dim = 100;
    std::size_t window = 5;
    std::size_t min_count = 3;
    std::size_t negatives = 5;
    std::size_t epochs = 5;
    double learning_rate = 0.025;
    std::uint64_t seed = 1;
};

class EmbeddingModel {
public:
    EmbeddingModel() = default;
    EmbeddingModel(std::size_t dim, std::vector<std::string> tokens, std::vector<std::size_t> counts,
                   std::vector<float> vectors, std::string corpus_id = {})
        : dim_(dim), tokens_(std::move(tokens)), counts_(std::move(counts)), vectors_(std::move(vectors)),
          corpus_id_(std::move(corpus_id)) {
        if (vectors_.size() != dim_ * tokens_.size() || counts_.size() != tokens_.size())
            throw Error("embedding table shape mismatch");
        for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = i;
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    std::size_t count(std::size_t row) const { return counts_[row]; }
    const std::string& corpus_id() const { return corpus_id_; }
    bool contains(const std::string& tok) const { return index_.count(tok) != 0; }

    std::optional<std::size_t> row_of(const std::string& tok) const {
        const auto it = index_.find(tok);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::span<const float> row(std::size_t r) const { return {vectors_.data() + r * dim_, dim_}; }
    const std::vector<float>& table() const { return vectors_; }

private:
    std::size_t dim_ = 0;
    std::vector<std::string> tokens_;
    std::vector<std::size_t> counts_;
    std::vector<float> vectors_;
    std::string corpus_id_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Exact-match lookup; nullopt marks an out-of-vocabulary token.
inline std::optional<std::span<const float>> embed_or_oov(const EmbeddingModel& m, const std::string& tok) {
    if (auto r = m.row_of(tok)) return m.row(*r);
    return std::nullopt;
}

/// Tokens with at least `min_count` occurrences, ordered by count then text.
inline std::vector<std::pair<std::string, std::size_t>> build_vocab(const std::vector<Sentence>& corpus,
                                                                    std::size_t min_count) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& s : corpus)
        for (const auto& t : s) ++counts[t];
    std::vector<std::pair<std::string, std::size_t>> out;
    for (auto& [t, c] : counts)
        if (c >= min_count) out.emplace_back(t, c);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    return out;
}

inline EmbeddingModel train_embedding(const std::vector<Sentence>& corpus, const EmbeddingConfig& cfg,
                                      std::string corpus_id = {}) {
    std::size_t total = 0;
    for (const auto& s : corpus) total += s.size();
    if (total == 0) throw Error("cannot train an embedding on an empty corpus");
    if (cfg.dim == 0) throw ConfigError("embedding dim must be positive");

    const auto vocab = build_vocab(corpus, cfg.min_count);
    const std::size_t V = vocab.size(), D = cfg.dim;
    std::vector<std::string> tokens;
    std::vector<std::size_t> counts;
    std::unordered_map<std::string, std::uint32_t> id;
    for (const auto& [t, c] : vocab) {
        id[t] = static_cast<std::uint32_t>(tokens.size());
        tokens.push_back(t);
        counts.push_back(c);
    }

    Rng rng(derive_seed(cfg.seed, 0xE3B));
    std::vector<float> in(V * D), out(V * D, 0.0f);
    for (auto& x : in) x = static_cast<float>((uniform01(rng) - 0.5) / static_cast<double>(D));
    if (V == 0) return EmbeddingModel(D, {}, {}, {}, std::move(corpus_id));

    // Negative-sampling distribution: counts^0.75, as a cumulative table.
    std::vector<double> cdf(V);
    double acc = 0;
    for (std::size_t i = 0; i < V; ++i) cdf[i] = acc += std::pow(static_cast<double>(counts[i]), 0.75);
    auto draw_negative = [&] {
        const double u = uniform01(rng) * acc;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(V - 1)));
    };

    std::vector<std::vector<std::uint32_t>> ids;
    std::size_t kept = 0;
    for (const auto& s : corpus) {
        std::vector<std::uint32_t> row;
        for (const auto& t : s)
            if (auto it = id.find(t); it != id.end()) row.push_back(it->second);
        kept += row.size();
        ids.push_back(std::move(row));
    }

    const double steps = static_cast<double>(std::max<std::size_t>(1, kept * cfg.epochs));
    double done = 0;
    std::vector<float> grad(D);
    auto update = [&](std::size_t ctx, std::size_t target, float label, float alpha) {
        float* v = &in[ctx * D];
        float* w = &out[target * D];
        float f = 0;
        for (std::size_t k = 0; k < D; ++k) f += v[k] * w[k];
        const float sig = f > 20 ? 1.0f : f < -20 ? 0.0f : 1.0f / (1.0f + std::exp(-f));
        const float g = (label - sig) * alpha;
        for (std::size_t k = 0; k < D; ++k) {
            grad[k] += g * w[k];
            w[k] += g * v[k];
        }
    };
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& s : ids) {
            for (std::size_t i = 0; i < s.size(); ++i, ++done) {
                const float alpha = static_cast<float>(cfg.learning_rate * std::max(1e-4, 1.0 - done / steps));
                const std::size_t b = cfg.window ? static_cast<std::size_t>(uniform_index(rng, cfg.window)) : 0;
                const std::size_t reach = cfg.window - b;
                const std::size_t lo = i >= reach ? i - reach : 0;
                const std::size_t hi = std::min(s.size(), i + reach + 1);
                for (std::size_t j = lo; j < hi; ++j) {
                    if (j == i) continue;
                    std::fill(grad.begin(), grad.end(), 0.0f);
                    update(s[j], s[i], 1.0f, alpha);
                    for (std::size_t n = 0; n < cfg.negatives; ++n) {
                        const std::size_t neg = draw_negative();
                        if (neg == s[i]) continue;
                        update(s[j], neg, 0.0f, alpha);
                    }
                    float* v = &in[s[j] * D];
                    for (std::size_t k = 0; k < D; ++k) v[k] += grad[k];
                }
            }
        }
    }
    return EmbeddingModel(D, std::move(tokens), std::move(counts), std::move(in), std::move(corpus_id));
}

inline double cosine(std::span<const float> a, std::span<const float> b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += double(a[i]) * b[i];
        aa += double(a[i]) * a[i];
        bb += double(b[i]) * b[i];
    }
    return aa > 0 && bb > 0 ? ab / std::sqrt(aa * bb) : 0.0;
}

struct OovReport {
    std::string corpus_id;
    std::size_t total_tokens = 0;
    std::size_t oov_tokens = 0;
    double oov_rate = 0.0;
};

enum class OovCounting { Occurrences, Distinct };

inline OovReport oov_report(const EmbeddingModel& m, const std::vector<Sentence>& corpus, std::string corpus_id = {},
                            OovCounting mode = OovCounting::Occurrences) {
    OovReport r;
    r.corpus_id = std::move(corpus_id);
    if (mode == OovCounting::Occurrences) {
        for (const auto& s : corpus)
            for (const auto& t : s) {
                ++r.total_tokens;
                r.oov_tokens += !m.contains(t);
            }
    } else {
        std::unordered_map<std::string, bool> seen;
        for (const auto& s : corpus)
            for (const auto& t : s) seen.emplace(t, m.contains(t));
        r.total_tokens = seen.size();
        for (const auto& [_, known] : seen) r.oov_tokens += !known;
    }
    r.oov_rate = r.total_tokens ? static_cast<double>(r.oov_tokens) / static_cast<double>(r.total_tokens) : 0.0;
    return r;
}

inline std::string oov_csv(const std::vector<OovReport>& reports, const std::string& embedding_label = {}) {
    std::ostringstream os;
    csv::write_row(os, {"embedding", "corpus", "total_tokens", "oov_tokens", "oov_rate"});
    for (const auto& r : reports) {
        std::ostringstream rate;
        rate.precision(6);
        rate << std::fixed << r.oov_rate;
        csv::write_row(os, {embedding_label, r.corpus_id, std::to_string(r.total_tokens), std::to_string(r.oov_tokens),
                            rate.str()});
    }
    return os.str();
}

namespace detail {

inline constexpr char kMagic[8] = {'C', 'D', 'T', 'E', 'M', 'B', '0', '1'};

template <typename T>
void put_le(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little, "little-endian host assumed");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get_le(std::string_view& in) {
    if (in.size() < sizeof(T)) throw ParseError("truncated embedding table");
    T v;
    std::memcpy(&v, in.data(), sizeof(T));
    in.remove_prefix(sizeof(T));
    return v;
}

}  // namespace detail

inline void save(const EmbeddingModel& m, const std::filesystem::path& stem) {
    std::string bin(detail::kMagic, 8);
    detail::put_le<std::uint32_t>(bin, static_cast<std::uint32_t>(m.dim()));
    detail::put_le<std::uint64_t>(bin, m.size());
    for (float x : m.table()) detail::put_le<float>(bin, x);
    std::string vocab;
    for (std::size_t i = 0; i < m.size(); ++i) vocab += m.tokens()[i] + "\t" + std::to_string(m.count(i)) + "\n";
    auto vec = stem;
    vec += ".vec";
    auto voc = stem;
    voc += ".vocab";
    write_file(vec, bin);
    write_file(voc, vocab);
}

inline EmbeddingModel load(const std::filesystem::path& stem, std::string corpus_id = {}) {
    auto vec = stem;
    vec += ".vec";
    auto voc = stem;
    voc += ".vocab";
    const std::string bin = read_file(vec);
    std::string_view in(bin);
    if (in.substr(0, 8) != std::string_view(detail::kMagic, 8)) throw ParseError("not an embedding table");
    in.remove_prefix(8);
    const auto dim = detail::get_le<std::uint32_t>(in);
    const auto rows = detail::get_le<std::uint64_t>(in);
    std::vector<float> table(static_cast<std::size_t>(dim) * rows);
    for (auto& x : table) x = detail::get_le<float>(in);
    if (!in.empty()) throw ParseError("trailing bytes in embedding table");

    std::vector<std::string> tokens;
    std::vector<std::size_t> counts;
    std::istringstream vs(read_file(voc));
    std::string line;
    std::size_t n = 0;
    while (std::getline(vs, line)) {
        ++n;
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos) throw ParseError("vocab line without count", n);
        tokens.push_back(line.substr(0, tab));
        counts.push_back(std::stoull(line.substr(tab + 1)));
    }
    if (tokens.size() != rows) throw ParseError("vocab and table disagree on row count");
    return EmbeddingModel(dim, std::move(tokens), std::move(counts), std::move(table), std::move(corpus_id));
}

}  // namespace cdt::embed

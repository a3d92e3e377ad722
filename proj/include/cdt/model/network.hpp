// SPDX-License-Identifier: Apache-2.0
#pragma once

// Sample encoder: identifier tokens and context tokens each pass through
// their own LSTM; the two final hidden states are concatenated with the
// visible-hint bits and projected by a dense layer. Batches are column-major
// (one sample per column). Embedding vectors are frozen; out-of-vocabulary
// tokens share one learned vector and padding is the zero vector.

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cdt/common/error.hpp"
#include "cdt/common/rng.hpp"
#include "cdt/embed/embedding.hpp"
#include "cdt/model/hints.hpp"
#include "cdt/types/samples.hpp"

namespace cdt::model {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct ModelConfig {
    std::size_t hidden_id = 128;
    std::size_t hidden_ctx = 128;
    std::size_t out_dim = 256;
    std::size_t id_len = 16;
    std::size_t ctx_len = 64;
    double margin = 2.0;
    std::size_t epochs = 30;
    double lr = 0.002;
    std::size_t batch = 2536;
    std::size_t k = 10;
    std::size_t visible_types = kVisibleTypes;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(margin > 0)) throw ConfigError("margin must be positive");
        if (hidden_id == 0 || hidden_ctx == 0 || out_dim == 0) throw ConfigError("layer sizes must be positive");
        if (id_len == 0 || ctx_len == 0) throw ConfigError("sequence lengths must be positive");
        if (batch == 0 || k == 0) throw ConfigError("batch and k must be positive");
        if (!(lr > 0)) throw ConfigError("learning rate must be positive");
    }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"hidden_id", c.hidden_id}, {"hidden_ctx", c.hidden_ctx}, {"out_dim", c.out_dim},
         {"id_len", c.id_len},       {"ctx_len", c.ctx_len},       {"margin", c.margin},
         {"epochs", c.epochs},       {"lr", c.lr},                 {"batch", c.batch},
         {"k", c.k},                 {"visible_types", c.visible_types}, {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    c = ModelConfig{};
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    opt("hidden_id", c.hidden_id);
    opt("hidden_ctx", c.hidden_ctx);
    opt("out_dim", c.out_dim);
    opt("id_len", c.id_len);
    opt("ctx_len", c.ctx_len);
    opt("margin", c.margin);
    opt("epochs", c.epochs);
    opt("lr", c.lr);
    opt("batch", c.batch);
    opt("k", c.k);
    opt("visible_types", c.visible_types);
    opt("seed", c.seed);
    c.validate();
}

inline constexpr std::int32_t kPad = -1;
inline constexpr std::int32_t kUnk = -2;

/// A sample mapped onto embedding rows, left-padded to fixed lengths.
struct EncodedInput {
    std::vector<std::int32_t> id;
    std::vector<std::int32_t> ctx;
    std::vector<std::uint32_t> hints;
    /// Both token sequences were empty.
    bool empty = false;
};

/// Frozen embedding table as a dim x rows matrix plus the token lookup.
struct EmbeddingTable {
    Mat vectors;
    std::vector<std::string> tokens;
    std::unordered_map<std::string, std::int32_t> rows;

    EmbeddingTable() = default;
    explicit EmbeddingTable(const embed::EmbeddingModel& m) : vectors(m.dim(), m.size()), tokens(m.tokens()) {
        for (std::size_t r = 0; r < m.size(); ++r) {
            const auto v = m.row(r);
            for (std::size_t d = 0; d < m.dim(); ++d) vectors(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(r)) = v[d];
            rows[tokens[r]] = static_cast<std::int32_t>(r);
        }
    }

    std::size_t dim() const { return static_cast<std::size_t>(vectors.rows()); }

    std::int32_t lookup(const std::string& tok) const {
        const auto it = rows.find(tok);
        return it == rows.end() ? kUnk : it->second;
    }
};

namespace detail {

inline std::vector<std::int32_t> left_pad(const std::vector<std::string>& toks, std::size_t len,
                                          const EmbeddingTable& table) {
    std::vector<std::int32_t> out(len, kPad);
    const std::size_t n = std::min(len, toks.size());
    for (std::size_t i = 0; i < n; ++i) out[len - n + i] = table.lookup(toks[i]);
    return out;
}

}  // namespace detail

inline EncodedInput encode_input(const types::TypeSample& s, const EmbeddingTable& table,
                                 const VisibleTypeIndex& index, const ModelConfig& cfg) {
    EncodedInput e;
    e.id = detail::left_pad(s.identifier_tokens, cfg.id_len, table);
    e.ctx = detail::left_pad(s.context_tokens, cfg.ctx_len, table);
    e.hints = hint_positions(s.source_types, index);
    e.empty = s.identifier_tokens.empty() && s.context_tokens.empty();
    return e;
}

inline std::vector<EncodedInput> encode_inputs(const std::vector<types::TypeSample>& samples,
                                               const EmbeddingTable& table, const VisibleTypeIndex& index,
                                               const ModelConfig& cfg) {
    std::vector<EncodedInput> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(encode_input(s, table, index, cfg));
    return out;
}

struct LstmParams {
    Mat W;  // 4H x E
    Mat U;  // 4H x H
    Mat b;  // 4H x 1

    std::size_t hidden() const { return static_cast<std::size_t>(U.cols()); }
};

/// All trainable tensors of the encoder.
struct NetParams {
    LstmParams id, ctx;
    Mat Wd;   // out x (H_id + H_ctx + hints)
    Mat bd;   // out x 1
    Mat unk;  // E x 1

    static constexpr std::size_t kTensors = 9;

    std::array<Mat*, kTensors> tensors() { return {&id.W, &id.U, &id.b, &ctx.W, &ctx.U, &ctx.b, &Wd, &bd, &unk}; }
    std::array<const Mat*, kTensors> tensors() const {
        return {&id.W, &id.U, &id.b, &ctx.W, &ctx.U, &ctx.b, &Wd, &bd, &unk};
    }

    NetParams zeros_like() const {
        NetParams z;
        auto dst = z.tensors();
        const auto src = tensors();
        for (std::size_t i = 0; i < kTensors; ++i) *dst[i] = Mat::Zero(src[i]->rows(), src[i]->cols());
        return z;
    }

    void add(const NetParams& o) {
        auto dst = tensors();
        const auto src = o.tensors();
        for (std::size_t i = 0; i < kTensors; ++i) *dst[i] += *src[i];
    }

    bool operator==(const NetParams& o) const {
        const auto a = tensors();
        const auto b = o.tensors();
        for (std::size_t i = 0; i < kTensors; ++i)
            if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols() || *a[i] != *b[i]) return false;
        return true;
    }
};

namespace detail {

inline void init_uniform(Mat& m, double scale, Rng& rng) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = uniform_real(rng, -scale, scale);
}

inline LstmParams init_lstm(std::size_t in, std::size_t hidden, Rng& rng) {
    const auto H = static_cast<Eigen::Index>(hidden);
    LstmParams p{Mat(4 * H, static_cast<Eigen::Index>(in)), Mat(4 * H, H), Mat::Zero(4 * H, 1)};
    const double s = 1.0 / std::sqrt(static_cast<double>(hidden));
    init_uniform(p.W, s, rng);
    init_uniform(p.U, s, rng);
    p.b.block(H, 0, H, 1).setOnes();  // forget gate
    return p;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

inline NetParams init_params(std::size_t emb_dim, std::size_t hints, const ModelConfig& cfg, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x1417));
    NetParams p;
    p.id = detail::init_lstm(emb_dim, cfg.hidden_id, rng);
    p.ctx = detail::init_lstm(emb_dim, cfg.hidden_ctx, rng);
    const std::size_t in = cfg.hidden_id + cfg.hidden_ctx + hints;
    p.Wd = Mat(static_cast<Eigen::Index>(cfg.out_dim), static_cast<Eigen::Index>(in));
    detail::init_uniform(p.Wd, std::sqrt(6.0 / static_cast<double>(in + cfg.out_dim)), rng);
    p.bd = Mat::Zero(static_cast<Eigen::Index>(cfg.out_dim), 1);
    p.unk = Mat(static_cast<Eigen::Index>(emb_dim), 1);
    detail::init_uniform(p.unk, 0.1, rng);
    return p;
}

/// Activations kept for the backward pass of one LSTM over a batch.
struct LstmCache {
    std::vector<Mat> x, i, f, g, o, c, h;  // per step; h[0] and c[0] are the zero state
    std::vector<std::vector<Eigen::Index>> unk_cols;  // per step, batch columns holding the unk vector
};

inline Mat lstm_forward(const LstmParams& p, const EmbeddingTable& table, const Mat& unk,
                        const std::vector<const std::vector<std::int32_t>*>& seqs, std::size_t len,
                        LstmCache* cache) {
    const auto B = static_cast<Eigen::Index>(seqs.size());
    const auto H = static_cast<Eigen::Index>(p.hidden());
    const auto E = static_cast<Eigen::Index>(table.dim());
    Mat h = Mat::Zero(H, B), c = Mat::Zero(H, B);
    if (cache) {
        *cache = {};
        cache->h.push_back(h);
        cache->c.push_back(c);
    }
    Mat x(E, B), z(4 * H, B);
    for (std::size_t t = 0; t < len; ++t) {
        std::vector<Eigen::Index> unk_cols;
        bool any = false;
        for (Eigen::Index col = 0; col < B; ++col) {
            const std::int32_t tok = (*seqs[static_cast<std::size_t>(col)])[t];
            if (tok >= 0) {
                x.col(col) = table.vectors.col(tok);
                any = true;
            } else if (tok == kUnk) {
                x.col(col) = unk.col(0);
                unk_cols.push_back(col);
                any = true;
            } else {
                x.col(col).setZero();
            }
        }
        z.noalias() = p.U * h;
        if (any) z.noalias() += p.W * x;
        z.colwise() += p.b.col(0);
        Mat i = z.topRows(H).unaryExpr(&detail::sigmoid);
        Mat f = z.middleRows(H, H).unaryExpr(&detail::sigmoid);
        Mat g = z.middleRows(2 * H, H).array().tanh().matrix();
        Mat o = z.bottomRows(H).unaryExpr(&detail::sigmoid);
        c = (f.array() * c.array() + i.array() * g.array()).matrix();
        h = (o.array() * c.array().tanh()).matrix();
        if (cache) {
            cache->x.push_back(any ? x : Mat());
            cache->i.push_back(std::move(i));
            cache->f.push_back(std::move(f));
            cache->g.push_back(std::move(g));
            cache->o.push_back(std::move(o));
            cache->c.push_back(c);
            cache->h.push_back(h);
            cache->unk_cols.push_back(std::move(unk_cols));
        }
    }
    return h;
}

/// Accumulates parameter gradients given d(loss)/d(final hidden state).
inline void lstm_backward(const LstmParams& p, const LstmCache& cache, const Mat& dh_final, LstmParams& grad,
                          Mat& dunk) {
    const auto H = static_cast<Eigen::Index>(p.hidden());
    const std::size_t T = cache.i.size();
    Mat dh = dh_final;
    Mat dc = Mat::Zero(dh.rows(), dh.cols());
    Mat dz(4 * H, dh.cols());
    for (std::size_t s = T; s-- > 0;) {
        const Mat& i = cache.i[s];
        const Mat& f = cache.f[s];
        const Mat& g = cache.g[s];
        const Mat& o = cache.o[s];
        const Mat& c = cache.c[s + 1];
        const Mat& c_prev = cache.c[s];
        const Mat& h_prev = cache.h[s];
        const Eigen::ArrayXXd tc = c.array().tanh();
        dc.array() += dh.array() * o.array() * (1.0 - tc * tc);
        dz.topRows(H) = (dc.array() * g.array() * i.array() * (1.0 - i.array())).matrix();
        dz.middleRows(H, H) = (dc.array() * c_prev.array() * f.array() * (1.0 - f.array())).matrix();
        dz.middleRows(2 * H, H) = (dc.array() * i.array() * (1.0 - g.array() * g.array())).matrix();
        dz.bottomRows(H) = (dh.array() * tc * o.array() * (1.0 - o.array())).matrix();
        if (cache.x[s].size()) grad.W.noalias() += dz * cache.x[s].transpose();
        grad.U.noalias() += dz * h_prev.transpose();
        grad.b += dz.rowwise().sum();
        if (!cache.unk_cols[s].empty()) {
            for (const auto col : cache.unk_cols[s]) dunk.col(0).noalias() += p.W.transpose() * dz.col(col);
        }
        dh.noalias() = p.U.transpose() * dz;
        dc.array() *= f.array();
    }
}

/// Forward activations of a whole batch.
struct EncoderCache {
    LstmCache id, ctx;
    Mat input;  // dense-layer input, (H_id + H_ctx + hints) x B
};

inline Mat encode_batch(const NetParams& p, const EmbeddingTable& table, const std::vector<const EncodedInput*>& batch,
                        std::size_t hints, EncoderCache* cache) {
    const auto B = static_cast<Eigen::Index>(batch.size());
    std::vector<const std::vector<std::int32_t>*> ids, ctxs;
    ids.reserve(batch.size());
    ctxs.reserve(batch.size());
    for (const auto* e : batch) {
        ids.push_back(&e->id);
        ctxs.push_back(&e->ctx);
    }
    const std::size_t id_len = batch.empty() ? 0 : batch.front()->id.size();
    const std::size_t ctx_len = batch.empty() ? 0 : batch.front()->ctx.size();
    const Mat h1 = lstm_forward(p.id, table, p.unk, ids, id_len, cache ? &cache->id : nullptr);
    const Mat h2 = lstm_forward(p.ctx, table, p.unk, ctxs, ctx_len, cache ? &cache->ctx : nullptr);
    const auto H1 = h1.rows(), H2 = h2.rows();
    Mat in = Mat::Zero(H1 + H2 + static_cast<Eigen::Index>(hints), B);
    in.topRows(H1) = h1;
    in.middleRows(H1, H2) = h2;
    for (Eigen::Index col = 0; col < B; ++col)
        for (const auto bit : batch[static_cast<std::size_t>(col)]->hints) in(H1 + H2 + bit, col) = 1.0;
    Mat out = p.Wd * in;
    out.colwise() += p.bd.col(0);
    if (cache) cache->input = std::move(in);
    return out;
}

/// Accumulates into `grad` the parameter gradient for d(loss)/d(features).
inline void encode_backward(const NetParams& p, const EncoderCache& cache, const Mat& dfeat, NetParams& grad) {
    grad.Wd.noalias() += dfeat * cache.input.transpose();
    grad.bd += dfeat.rowwise().sum();
    const Mat din = p.Wd.transpose() * dfeat;
    const auto H1 = static_cast<Eigen::Index>(p.id.hidden()), H2 = static_cast<Eigen::Index>(p.ctx.hidden());
    lstm_backward(p.id, cache.id, din.topRows(H1), grad.id, grad.unk);
    lstm_backward(p.ctx, cache.ctx, din.middleRows(H1, H2), grad.ctx, grad.unk);
}

/// Encodes many inputs in fixed-size chunks; columns follow input order.
inline Mat encode_all(const NetParams& p, const EmbeddingTable& table, const std::vector<EncodedInput>& inputs,
                      std::size_t hints, std::size_t chunk = 512) {
    Mat out(p.Wd.rows(), static_cast<Eigen::Index>(inputs.size()));
    for (std::size_t b = 0; b < inputs.size(); b += chunk) {
        const std::size_t e = std::min(inputs.size(), b + chunk);
        std::vector<const EncodedInput*> batch;
        for (std::size_t i = b; i < e; ++i) batch.push_back(&inputs[i]);
        out.middleCols(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)) =
            encode_batch(p, table, batch, hints, nullptr);
    }
    return out;
}

}  // namespace cdt::model

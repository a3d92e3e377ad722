// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "cdt/common/error.hpp"
#include "cdt/common/rng.hpp"
#include "cdt/model/optim.hpp"
#include "cdt/model/triplet.hpp"

namespace cdt::model {

/// Encoder weights together with everything needed to map samples to inputs.
struct TypeModel {
    ModelConfig cfg;
    VisibleTypeIndex index;
    std::shared_ptr<const EmbeddingTable> table;
    NetParams params;

    std::vector<EncodedInput> prepare(const std::vector<types::TypeSample>& samples) const {
        return encode_inputs(samples, *table, index, cfg);
    }

    Mat encode(const std::vector<EncodedInput>& inputs) const {
        return encode_all(params, *table, inputs, index.size());
    }

    Mat encode(const std::vector<types::TypeSample>& samples) const { return encode(prepare(samples)); }
};

/// A fresh model whose hint index comes from the training split of `samples`.
inline TypeModel make_model(const embed::EmbeddingModel& emb, const std::vector<types::TypeSample>& samples,
                            const ModelConfig& cfg) {
    cfg.validate();
    TypeModel m;
    m.cfg = cfg;
    m.index = VisibleTypeIndex::from_training(samples, cfg.visible_types);
    m.table = std::make_shared<const EmbeddingTable>(emb);
    m.params = init_params(emb.dim(), m.index.size(), cfg, cfg.seed);
    return m;
}

/// Labelled, encoded training data with per-label pools for triplet mining.
struct TrainSet {
    std::vector<EncodedInput> inputs;
    std::vector<std::string> labels;
    std::vector<std::size_t> label_id;
    std::vector<std::vector<std::size_t>> pools;

    TrainSet() = default;
    TrainSet(std::vector<EncodedInput> in, std::vector<std::string> lab) : inputs(std::move(in)), labels(std::move(lab)) {
        if (inputs.size() != labels.size()) throw Error("inputs and labels differ in length");
        std::map<std::string, std::size_t> ids;
        for (const auto& l : labels) ids.emplace(l, 0);
        std::size_t next = 0;
        for (auto& [_, v] : ids) v = next++;
        pools.resize(ids.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            label_id.push_back(ids.at(labels[i]));
            pools[label_id.back()].push_back(i);
        }
    }

    std::size_t size() const { return inputs.size(); }
    std::size_t distinct_labels() const { return pools.size(); }
};

inline TrainSet make_trainset(const TypeModel& m, const std::vector<types::TypeSample>& samples) {
    std::vector<std::string> labels;
    for (const auto& s : samples) labels.push_back(s.label);
    return TrainSet(m.prepare(samples), std::move(labels));
}

/// Extra objective mixed into each optimisation step (domain adaptation).
class Adapter {
public:
    virtual ~Adapter() = default;
    /// Called once per step with the anchors' features. May add to d_anchor
    /// and to the encoder gradient. `progress` runs from 0 to 1 over training.
    virtual void step(const TypeModel& m, const Mat& anchor_feats, Mat& d_anchor, NetParams& grad, double progress) = 0;
    virtual void end_epoch() {}
};

struct TrainHistory {
    std::vector<double> epoch_loss;
};

struct TrainOptions {
    std::size_t epochs;
    double lr;
    std::size_t batch;
    std::uint64_t seed;
};

inline TrainOptions default_options(const ModelConfig& c) { return {c.epochs, c.lr, c.batch, c.seed}; }

namespace detail {

inline std::size_t draw_positive(const TrainSet& ts, std::size_t a, Rng& rng) {
    const auto& pool = ts.pools[ts.label_id[a]];
    if (pool.size() == 1) return a;
    auto j = pool[uniform_index(rng, pool.size() - 1)];
    return j == a ? pool.back() : j;
}

inline std::size_t draw_negative(const TrainSet& ts, std::size_t a, Rng& rng) {
    for (;;) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, ts.size()));
        if (ts.label_id[j] != ts.label_id[a]) return j;
    }
}

}  // namespace detail

/// Triplet-loss training with Adam. Per anchor, the positive is drawn from
/// the same-label pool and the negative from the other labels.
inline TrainHistory train(TypeModel& m, const TrainSet& ts, const TrainOptions& opt, Adapter* adapter = nullptr) {
    if (ts.size() == 0) throw Error("empty training set");
    if (ts.distinct_labels() < 2) throw Error("training needs at least two distinct labels to form triplets");
    TrainHistory hist;
    if (opt.epochs == 0) return hist;
    Rng rng(derive_seed(opt.seed, 0x7121));
    Adam adam(opt.lr);
    std::vector<std::size_t> order(ts.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batches = (ts.size() + opt.batch - 1) / opt.batch;
    const double total_steps = static_cast<double>(batches * opt.epochs);
    std::size_t step = 0;
    auto params = m.params.tensors();
    const std::vector<Mat*> pvec(params.begin(), params.end());
    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        shuffle(std::span<std::size_t>(order), rng);
        double loss_sum = 0;
        for (std::size_t b = 0; b < ts.size(); b += opt.batch, ++step) {
            const std::size_t e = std::min(ts.size(), b + opt.batch);
            const auto B = static_cast<Eigen::Index>(e - b);
            std::vector<const EncodedInput*> batch;
            batch.reserve(3 * (e - b));
            std::vector<std::size_t> pos, neg;
            for (std::size_t i = b; i < e; ++i) {
                pos.push_back(detail::draw_positive(ts, order[i], rng));
                neg.push_back(detail::draw_negative(ts, order[i], rng));
            }
            for (std::size_t i = b; i < e; ++i) batch.push_back(&ts.inputs[order[i]]);
            for (auto p : pos) batch.push_back(&ts.inputs[p]);
            for (auto n : neg) batch.push_back(&ts.inputs[n]);

            EncoderCache cache;
            const Mat feats = encode_batch(m.params, *m.table, batch, m.index.size(), &cache);
            Mat dA, dP, dN;
            const double loss =
                triplet_batch(feats.leftCols(B), feats.middleCols(B, B), feats.rightCols(B), m.cfg.margin, dA, dP, dN);
            loss_sum += loss * static_cast<double>(B);

            NetParams grad = m.params.zeros_like();
            if (adapter) adapter->step(m, feats.leftCols(B), dA, grad, static_cast<double>(step) / total_steps);
            Mat dfeat(feats.rows(), 3 * B);
            dfeat << dA, dP, dN;
            encode_backward(m.params, cache, dfeat, grad);
            const auto g = grad.tensors();
            adam.step(pvec, std::vector<const Mat*>(g.begin(), g.end()));
        }
        hist.epoch_loss.push_back(loss_sum / static_cast<double>(ts.size()));
        if (adapter) adapter->end_epoch();
    }
    return hist;
}

/// Mean triplet loss and its parameter gradient for fixed triplets; used to
/// check the analytic backward pass.
inline double triplet_objective(const NetParams& p, const EmbeddingTable& table, std::size_t hints,
                                const std::vector<const EncodedInput*>& a, const std::vector<const EncodedInput*>& pos,
                                const std::vector<const EncodedInput*>& neg, double margin, NetParams* grad) {
    std::vector<const EncodedInput*> batch = a;
    batch.insert(batch.end(), pos.begin(), pos.end());
    batch.insert(batch.end(), neg.begin(), neg.end());
    const auto B = static_cast<Eigen::Index>(a.size());
    EncoderCache cache;
    const Mat feats = encode_batch(p, table, batch, hints, grad ? &cache : nullptr);
    Mat dA, dP, dN;
    const double loss =
        triplet_batch(feats.leftCols(B), feats.middleCols(B, B), feats.rightCols(B), margin, dA, dP, dN);
    if (grad) {
        *grad = p.zeros_like();
        Mat dfeat(feats.rows(), 3 * B);
        dfeat << dA, dP, dN;
        encode_backward(p, cache, dfeat, *grad);
    }
    return loss;
}

}  // namespace cdt::model
